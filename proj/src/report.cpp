#include "flakyci/report.hpp"

#include "flakyci/csv.hpp"
#include "flakyci/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace flakyci {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

template <class F>
auto in_stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const error& e) {
    throw error(e.kind(), std::string(name) + ": " + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw input_error(std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    throw invariant_error(std::string(name) + ": " + e.what());
  }
}

template <class F>
std::string render(F&& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

std::size_t positive(const kv_file& file, const std::string& key,
                     std::size_t fallback) {
  const auto v = file.get_int(key, static_cast<long long>(fallback));
  if (v < 1) throw input_error("config: '" + key + "' must be >= 1");
  return static_cast<std::size_t>(v);
}

money rate(const kv_file& file, const std::string& key, money fallback) {
  const auto v = file.get_double(key, fallback.units());
  if (!(v >= 0)) throw input_error("config: '" + key + "' must be >= 0");
  return money::from_units(v);
}

}  // namespace

std::vector<category_cost> cost_ranking(std::span<const category_cost> costs,
                                        std::size_t top_n) {
  std::vector<category_cost> out(costs.begin(), costs.end());
  std::sort(out.begin(), out.end(), [](const category_cost& a, const category_cost& b) {
    if (a.total_cost != b.total_cost) return a.total_cost > b.total_cost;
    return a.label < b.label;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

void write_cost_ranking_csv(std::ostream& out,
                            std::span<const category_cost> ranking) {
  csv::write_row(out, {"rank", "label", "machine_cost", "diagnosis_cost",
                       "total_cost", "diagnosis_share"});
  std::size_t rank = 0;
  for (const auto& c : ranking)
    csv::write_row(out, {std::to_string(++rank), c.label,
                         c.machine_cost.to_cents_string(),
                         c.diagnosis_cost.to_cents_string(),
                         c.total_cost.to_cents_string(),
                         fixed(c.diagnosis_share(), 6)});
}

pipeline_config apply_config(const kv_file& file, pipeline_config base) {
  static const std::set<std::string> known{
      "machine_rate_per_min", "salary_rate_per_min", "analysis_date", "seed",
      "k", "kmeans_restarts", "kmeans_max_iters", "forest_trees",
      "forest_sample_size", "contamination", "forest_repeats",
      "day_granularity", "top_n"};
  for (const auto& [key, value] : file.entries())
    if (!known.contains(key)) throw input_error("config: unknown key '" + key + "'");

  auto& c = base;
  c.costs.machine_rate = rate(file, "machine_rate_per_min", c.costs.machine_rate);
  c.costs.salary_rate = rate(file, "salary_rate_per_min", c.costs.salary_rate);
  if (auto v = file.get("analysis_date")) {
    // A bare date means midnight UTC.
    c.analysis_date = parse_rfc3339(v->size() == 10 ? *v + "T00:00:00Z" : *v);
  }
  c.rfm.seed = static_cast<std::uint64_t>(
      file.get_int("seed", static_cast<long long>(c.rfm.seed)));
  c.rfm.k = positive(file, "k", c.rfm.k);
  c.rfm.kmeans_restarts = positive(file, "kmeans_restarts", c.rfm.kmeans_restarts);
  c.rfm.kmeans_max_iters = positive(file, "kmeans_max_iters", c.rfm.kmeans_max_iters);
  c.rfm.forest_trees = positive(file, "forest_trees", c.rfm.forest_trees);
  c.rfm.forest_sample_size =
      positive(file, "forest_sample_size", c.rfm.forest_sample_size);
  c.rfm.forest_repeats = positive(file, "forest_repeats", c.rfm.forest_repeats);
  c.rfm.contamination = file.get_double("contamination", c.rfm.contamination);
  c.rfm.day_granularity = file.get_bool("day_granularity", c.rfm.day_granularity);
  c.top_n = positive(file, "top_n", c.top_n);
  c.rfm.validate();
  return c;
}

pipeline_state run_stages(const pipeline_config& config, stage last) {
  pipeline_state s;
  in_stage("ingest", [&] {
    s.jobs = load_job_records(config.jobs);
    s.completed = filter_completed(s.jobs);
  });
  if (last == stage::ingest) return s;

  in_stage("detect", [&] {
    s.sequences = group_rerun_sequences(s.completed);
    s.flaky = extract_flaky_failures(s.sequences);
  });
  if (last == stage::detect) return s;

  in_stage("label", [&] {
    s.catalog = load_rule_catalog(config.catalog);
    const auto store = log_store::from_directory(config.logs);
    std::vector<job_record> jobs;
    for (const auto& f : s.flaky) jobs.push_back(f.job);
    const auto attached = attach_logs(jobs, store);
    for (std::size_t i = 0; i < s.flaky.size(); ++i) {
      s.flaky[i].job = attached[i];
      if (!attached[i].log_ref) s.missing_log_failures.push_back(s.flaky[i]);
    }
    label_options options;
    options.threads = config.threads;
    s.labeling = label_corpus(s.flaky, store, *s.catalog, options);
    if (s.labeling.missing_logs != s.missing_log_failures.size())
      throw invariant_error("missing-log count disagrees with the log store");
  });
  if (last == stage::label) return s;

  in_stage("analyze", [&] {
    std::vector<labeled_failure> labeled;
    for (const auto& l : s.labeling.processed)
      if (l.label) labeled.push_back(l);
    s.stats = compute_category_stats(labeled, *s.catalog);
    s.costs = compute_costs(labeled, s.sequences, config.costs);
    s.timeline = timeline_series(labeled, s.missing_log_failures,
                                 config.timeline_missing_logs);
  });
  if (last == stage::analyze) return s;

  in_stage("rfm", [&] {
    if (config.analysis_date) {
      s.analysis_date = *config.analysis_date;
    } else {
      for (const auto& j : s.jobs)
        s.analysis_date = std::max(s.analysis_date, j.finished_at.value_or(j.created_at));
    }
    auto rc = config.rfm;
    rc.analysis_date = s.analysis_date;
    s.rfm = analyze_rfm(build_rfm_table(s.stats, s.costs, rc), rc);
  });
  return s;
}

artifact_set detect_artifacts(const pipeline_state& s) {
  return {{"sequences.jsonl", render([&](auto& o) { write_sequences_jsonl(o, s.sequences); })},
          {"flaky_failures.jsonl",
           render([&](auto& o) { write_flaky_failures_jsonl(o, s.flaky); })}};
}

artifact_set label_artifacts(const pipeline_state& s) {
  return {{"labeled.jsonl",
           render([&](auto& o) { write_labeled_jsonl(o, s.labeling.processed); })}};
}

artifact_set cost_artifacts(const pipeline_state& s, const pipeline_config& config) {
  const auto ranking = cost_ranking(s.costs, config.top_n);
  return {{"category_stats.csv",
           render([&](auto& o) { write_category_stats_csv(o, s.stats); })},
          {"costs.csv", render([&](auto& o) { write_costs_csv(o, s.costs); })},
          {"cost_ranking.csv",
           render([&](auto& o) { write_cost_ranking_csv(o, ranking); })}};
}

artifact_set timeline_artifacts(const pipeline_state& s) {
  return {{"timeline.csv", render([&](auto& o) { write_timeline_csv(o, s.timeline); })}};
}

artifact_set rfm_artifacts(const pipeline_state& s) {
  return {{"rfm.csv", render([&](auto& o) { write_rfm_csv(o, s.rfm->records); })},
          {"clusters.json", render([&](auto& o) { write_clusters_json(o, *s.rfm); })}};
}

artifact_set priority_artifacts(const pipeline_state& s) {
  return {{"priorities.csv",
           render([&](auto& o) { write_priorities_csv(o, s.rfm->priorities); })}};
}

artifact_set plot_artifacts(const pipeline_state& s, const pipeline_config& config) {
  artifact_set out;
  out["plot_cost_ranking.csv"] = render([&](auto& o) {
    write_cost_ranking_csv(o, cost_ranking(s.costs, config.top_n));
  });
  out["plot_rfm_scatter.csv"] = render([&](auto& o) {
    csv::write_row(o, {"label", "recency_days", "frequency", "monetary",
                       "cluster", "priority"});
    if (!s.rfm) return;
    for (const auto& row : s.rfm->priorities.rows)
      csv::write_row(o, {row.label, fixed(row.record.recency_days, 6),
                         std::to_string(row.record.frequency),
                         row.record.monetary.to_cents_string(),
                         row.cluster_id ? "C" + std::to_string(*row.cluster_id)
                                        : std::string("outlier"),
                         row.description});
  });
  return out;
}

std::string summary_json(const pipeline_state& s) {
  nlohmann::ordered_json j;
  std::size_t success = 0;
  std::size_t failed = 0;
  for (const auto& job : s.jobs) {
    success += job.status == job_status::success;
    failed += job.status == job_status::failed;
  }
  const auto labeled = s.labeling.labeled_count();
  std::size_t flaky_sequences = 0;
  for (const auto& seq : s.sequences) flaky_sequences += seq.is_flaky;
  std::set<std::string> projects;
  for (const auto& job : s.jobs) projects.insert(job.project);

  j["jobs_read"] = s.jobs.size();
  j["projects"] = projects.size();
  j["success"] = success;
  j["failed"] = failed;
  j["completed"] = s.completed.size();
  j["sequences"] = s.sequences.size();
  j["flaky_sequences"] = flaky_sequences;
  j["flaky_failures"] = s.flaky.size();
  j["missing_logs"] = s.labeling.missing_logs;
  j["labeled"] = labeled;
  j["unlabeled"] = s.labeling.processed.size() - labeled;
  j["categories"] = s.stats.size();
  j["outliers"] = s.rfm && s.rfm->outliers ? s.rfm->outliers->outliers.size() : 0;
  j["clusters"] = s.rfm ? s.rfm->clusters.clusters.size() : 0;
  j["analysis_date"] = format_rfc3339(s.analysis_date);
  return j.dump(2) + "\n";
}

void write_artifacts(const artifact_set& files, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  try {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) {
      const auto path = dir / name;
      std::ofstream out(path, std::ios::binary);
      if (!out) throw input_error("cannot write " + path.string());
      written.push_back(path);
      out << content;
      out.close();
      if (!out) throw input_error("write failed: " + path.string());
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

pipeline_state run_pipeline(const pipeline_config& config) {
  auto state = run_stages(config, stage::rfm);
  artifact_set files;
  for (auto part : {detect_artifacts(state), label_artifacts(state),
                    cost_artifacts(state, config), timeline_artifacts(state),
                    rfm_artifacts(state), priority_artifacts(state)})
    files.merge(part);
  if (config.plot_data) files.merge(plot_artifacts(state, config));
  files["summary.json"] = summary_json(state);
  in_stage("write", [&] { write_artifacts(files, config.out); });
  return state;
}

}  // namespace flakyci
