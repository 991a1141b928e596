// flakyci: flaky CI failure categorization, costing and RFM prioritization.

#include "flakyci/corpus_synth.hpp"
#include "flakyci/errors.hpp"
#include "flakyci/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace flakyci;

struct options {
  std::string jobs;
  std::string logs;
  std::string catalog;
  std::string out = "out";
  std::string config;
  std::size_t top_n = 0;
  bool plot_data = false;
  unsigned threads = 1;
  std::string truth;
  std::string spec;
  long long population = 0;
  double confidence = 0.95;
  double margin = 0.05;
};

pipeline_config make_config(const options& o) {
  pipeline_config c;
  c.jobs = o.jobs;
  c.logs = o.logs;
  c.catalog = o.catalog;
  c.out = o.out;
  c.plot_data = o.plot_data;
  c.threads = o.threads;
  if (!o.config.empty()) c = apply_config(kv_file::load(o.config), c);
  if (o.top_n > 0) c.top_n = o.top_n;
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw input_error(std::string("missing required flag ") + flag);
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

int dispatch(const std::string& cmd, const options& o) {
  if (cmd == "gen") {
    require(o.spec, "--spec");
    const auto spec = corpus_spec::from_kv(kv_file::load(o.spec));
    const auto corpus = generate_corpus(spec);
    write_corpus(corpus, spec, o.out);
    const auto& counts = corpus.manifest.counts;
    std::cout << "wrote " << counts.at("jobs") << " jobs, "
              << counts.at("flaky_failures") << " flaky failures, "
              << corpus.logs.size() << " logs to " << o.out << "\n";
    return 0;
  }

  require(o.jobs, "--jobs");
  const auto config = make_config(o);

  if (cmd == "run") {
    const auto s = run_pipeline(config);
    std::cout << summary_json(s);
    return 0;
  }
  if (cmd == "ingest") {
    const auto s = run_stages(config, stage::ingest);
    write_artifacts({{"jobs.jsonl", [&] {
                        std::ostringstream out;
                        write_job_records(out, s.jobs);
                        return out.str();
                      }()}},
                    config.out);
    std::cout << s.jobs.size() << " jobs read, " << s.completed.size()
              << " completed\n";
    return 0;
  }
  if (cmd == "detect") {
    const auto s = run_stages(config, stage::detect);
    write_artifacts(detect_artifacts(s), config.out);
    std::cout << s.sequences.size() << " rerun sequences, " << s.flaky.size()
              << " flaky failures\n";
    return 0;
  }

  require(o.logs, "--logs");
  require(o.catalog, "--catalog");

  if (cmd == "label") {
    const auto s = run_stages(config, stage::label);
    write_artifacts(label_artifacts(s), config.out);
    std::cout << s.labeling.labeled_count() << " of " << s.labeling.processed.size()
              << " logs labeled, " << s.labeling.missing_logs << " missing\n";
    return 0;
  }
  if (cmd == "eval") {
    require(o.truth, "--truth");
    const auto s = run_stages(config, stage::label);
    const auto report = evaluate_labeling(s.labeling.processed, load_truth(o.truth));
    nlohmann::ordered_json j;
    j["total"] = report.total;
    j["labeled"] = report.labeled;
    j["correct"] = report.correct;
    j["recall"] = report.recall;
    j["precision"] = report.precision ? nlohmann::ordered_json(*report.precision)
                                      : nlohmann::ordered_json(nullptr);
    if (o.population > 0)
      j["required_sample_size"] =
          required_sample_size(o.population, o.confidence, o.margin);
    write_artifacts({{"eval.json", j.dump(2) + "\n"}}, config.out);
    std::cout << "recall " << pct(report.recall) << ", precision "
              << (report.precision ? pct(*report.precision) : "undefined") << "\n";
    return 0;
  }
  if (cmd == "cost") {
    const auto s = run_stages(config, stage::analyze);
    write_artifacts(cost_artifacts(s, config), config.out);
    for (const auto& c : cost_ranking(s.costs, config.top_n))
      std::cout << c.label << "\t" << c.total_cost.to_cents_string() << "\n";
    return 0;
  }
  if (cmd == "timeline") {
    const auto s = run_stages(config, stage::analyze);
    write_artifacts(timeline_artifacts(s), config.out);
    std::cout << s.timeline.size() << " series\n";
    return 0;
  }
  const auto s = run_stages(config, stage::rfm);
  if (cmd == "rfm") {
    write_artifacts(rfm_artifacts(s), config.out);
  } else {
    auto files = priority_artifacts(s);
    if (config.plot_data) files.merge(plot_artifacts(s, config));
    write_artifacts(files, config.out);
    for (const auto& row : s.rfm->priorities.rows)
      std::cout << row.label << "\t" << row.description << "\n";
  }
  for (const auto& note : s.rfm->notes) std::cerr << "note: " << note << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Categorize, cost and prioritize flaky CI job failures"};
  app.require_subcommand(1);
  options o;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--jobs", o.jobs, "Job metadata (.jsonl or .csv)");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--config", o.config, "key = value settings file");
    sub->add_option("--top-n", o.top_n, "Rows in cost rankings (default 20)");
    sub->add_flag("--plot-data", o.plot_data, "Also write figure data CSVs");
  };
  const auto add_labeling = [&](CLI::App* sub) {
    sub->add_option("--logs", o.logs, "Directory of <job_id>.log files");
    sub->add_option("--catalog", o.catalog, "Rule catalog TSV");
    sub->add_option("--threads", o.threads, "Labeling worker threads");
  };

  for (const char* name : {"ingest", "detect"}) add_common(app.add_subcommand(name, ""));
  for (const char* name : {"label", "cost", "timeline", "rfm", "prioritize", "run"}) {
    auto* sub = app.add_subcommand(name, "");
    add_common(sub);
    add_labeling(sub);
  }
  auto* eval = app.add_subcommand("eval", "Score labels against ground truth");
  add_common(eval);
  add_labeling(eval);
  eval->add_option("--truth", o.truth, "truth.jsonl (job_id, label)");
  eval->add_option("--population", o.population, "Also report the sample size for N");
  eval->add_option("--confidence", o.confidence, "Sample confidence level");
  eval->add_option("--margin", o.margin, "Sample margin of error");
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen->add_option("--spec", o.spec, "Corpus spec (key = value)");
  gen->add_option("--out", o.out, "Output directory");

  app.get_subcommand("ingest")->description("Validate and normalize job records");
  app.get_subcommand("detect")->description("Find rerun sequences and flaky failures");
  app.get_subcommand("label")->description("Label flaky failures from their logs");
  app.get_subcommand("cost")->description("Per-category machine and diagnosis cost");
  app.get_subcommand("timeline")->description("Per-category occurrence dates");
  app.get_subcommand("rfm")->description("RFM table, outliers and clusters");
  app.get_subcommand("prioritize")->description("Priority per category");
  app.get_subcommand("run")->description("Whole pipeline");

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  try {
    return dispatch(sub->get_name(), o);
  } catch (const flakyci::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(flakyci::error_kind::invariant);
  }
}
