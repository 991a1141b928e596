#include "flakyci/corpus_synth.hpp"
#include "flakyci/errors.hpp"
#include "flakyci/flaky_detection.hpp"
#include "flakyci/label_engine.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace flakyci;

namespace {

corpus_spec small_spec(std::uint64_t seed) {
  auto s = corpus_spec::defaults();
  s.seed = seed;
  s.n_jobs = 4000;
  s.n_projects = 20;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("defaults validate and weights sum to one") {
  const auto s = corpus_spec::defaults();
  s.validate();
  double sum = 0;
  for (const auto& [l, w] : s.category_weights) sum += w;
  CHECK(std::abs(sum - 1.0) < 1e-9);
  CHECK(s.category_weights.size() == 46);
}

TEST_CASE("invalid specs are rejected") {
  auto bad = small_spec(1);
  bad.category_weights["flaky_test"] += 0.1;
  CHECK_THROWS_AS(bad.validate(), input_error);

  bad = small_spec(1);
  bad.flaky_failure_ratio = 1.5;
  CHECK_THROWS_AS(bad.validate(), input_error);

  bad = small_spec(1);
  bad.category_weights = {{"no_such_label", 1.0}};
  CHECK_THROWS_AS(bad.validate(), input_error);

  // every failure flaky but at most zero failures per sequence
  bad = small_spec(1);
  bad.flaky_failure_ratio = 1.0;
  bad.max_failures_per_sequence = 0;
  CHECK_THROWS_AS(generate_corpus(bad), input_error);

  // every failure flaky with one failure per sequence needs more passes
  // than the status mix has
  bad = small_spec(1);
  bad.flaky_failure_ratio = 1.0;
  bad.max_failures_per_sequence = 1;
  bad.status_weights = {{job_status::success, 1}, {job_status::failed, 3}};
  CHECK_THROWS_AS(generate_corpus(bad), input_error);
}

TEST_CASE("zero flaky ratio plants nothing") {
  auto s = small_spec(2);
  s.flaky_failure_ratio = 0.0;
  const auto c = generate_corpus(s);
  const auto seqs = group_rerun_sequences(filter_completed(c.jobs));
  CHECK(extract_flaky_failures(seqs).empty());
  CHECK(c.manifest.counts.at("flaky_failures") == 0);
}

TEST_CASE("manifest agrees with the generated jobs") {
  const auto c = generate_corpus(small_spec(3));
  const auto& m = c.manifest;
  CHECK(m.counts.at("jobs") == c.jobs.size());
  CHECK(c.jobs.size() == 4000);
  std::map<job_status, std::size_t> by_status;
  for (const auto& j : c.jobs) ++by_status[j.status];
  CHECK(m.counts.at("success") == by_status[job_status::success]);
  CHECK(m.counts.at("failed") == by_status[job_status::failed]);

  // planted flaky set equals detector output
  std::set<job_id> planted;
  std::size_t labeled = 0, noise = 0, missing = 0;
  std::map<std::string, std::size_t> per_cat;
  for (const auto& j : m.jobs) {
    if (!j.flaky) continue;
    planted.insert(j.id);
    if (!j.has_log) ++missing;
    else if (j.noise) ++noise;
    else ++labeled;
    if (j.category) ++per_cat[*j.category];
  }
  std::set<job_id> detected;
  const auto seqs = group_rerun_sequences(filter_completed(c.jobs));
  for (const auto& f : extract_flaky_failures(seqs)) detected.insert(f.job.id);
  CHECK(detected == planted);
  CHECK(m.counts.at("flaky_failures") == planted.size());
  CHECK(m.counts.at("labeled") == labeled);
  CHECK(m.counts.at("noise") == noise);
  CHECK(m.counts.at("missing_logs") == missing);
  for (const auto& [label, mc] : m.categories) CHECK(mc.planted == per_cat[label]);

  // ratio of flaky failures to failures is the planted target
  const double ratio = static_cast<double>(planted.size()) /
                       static_cast<double>(m.counts.at("failed"));
  CHECK(std::abs(ratio - 0.25) < 1.0 / static_cast<double>(m.counts.at("failed")));

  // every planted flaky sequence has a pass and a failure
  std::size_t flaky_seqs = 0;
  for (const auto& s : seqs) flaky_seqs += s.is_flaky;
  CHECK(flaky_seqs == m.flaky_sequences.size());

  // template logs carry exactly their category's marker
  const auto cat = demo_catalog();
  for (const auto& j : m.jobs) {
    if (!j.flaky || !j.has_log) continue;
    const auto match = label_failure(c.logs.at(j.id), cat);
    if (j.noise) {
      CHECK_FALSE(match);
    } else {
      REQUIRE(match);
      CHECK(match->label == *j.category);
    }
  }
  for (const auto& j : c.jobs) {
    CHECK(j.created_at >= small_spec(3).start);
    CHECK(j.finished_at.value_or(j.created_at) <= small_spec(3).end);
  }
}

TEST_CASE("missing-log windows suppress logs at their rate") {
  auto s = small_spec(4);
  s.n_jobs = 30'000;
  s.category_activity = false;
  s.missing_log_windows.push_back({s.start, s.end, 0.33});
  const auto c = generate_corpus(s);
  std::size_t failed = 0, missing = 0;
  for (const auto& j : c.manifest.jobs)
    if (j.status == job_status::failed) {
      ++failed;
      missing += !j.has_log;
    }
  CHECK(std::abs(static_cast<double>(missing) / static_cast<double>(failed) - 0.33) < 0.01);

  // a full-rate window leaves no log inside it
  auto gap = small_spec(5);
  const auto b = parse_rfc3339("2021-04-01T00:00:00Z");
  const auto e = parse_rfc3339("2021-07-01T00:00:00Z");
  gap.missing_log_windows.push_back({b, e, 1.0});
  const auto g = generate_corpus(gap);
  for (const auto& j : g.jobs)
    if (j.created_at >= b && j.created_at < e) CHECK_FALSE(g.logs.contains(j.id));
}

TEST_CASE("planted delays are what the cost model will measure") {
  const auto c = generate_corpus(small_spec(6));
  std::map<sequence_key, double> planted;
  for (const auto& s : c.manifest.flaky_sequences) planted[s.key] = s.planted_delay_min;
  const auto seqs = group_rerun_sequences(filter_completed(c.jobs));
  std::size_t checked = 0;
  for (const auto& s : seqs) {
    if (!s.is_flaky) continue;
    const auto initial = initial_failure_index(s);
    const double d = static_cast<double>(
                         (*s.jobs.back().finished_at - *s.jobs[initial].finished_at).count()) /
                     60'000.0;
    CHECK(d == planted.at(s.key));
    ++checked;
  }
  CHECK(checked == planted.size());
}

TEST_CASE("sampling mode follows the weights") {
  auto s = small_spec(7);
  s.n_jobs = 102'000;  // ≈ 20k failed → ≈ 5k flaky failures
  s.noise_log_ratio = 0.0;
  const auto c = generate_corpus(s);
  const double total = static_cast<double>(c.manifest.counts.at("flaky_failures"));
  CHECK(total > 4800);
  for (const auto& [label, mc] : c.manifest.categories) {
    const double p = s.category_weights.at(label);
    // failures are planted per sequence (≤ 3 each), so allow a wider band
    // than plain multinomial: 5 sigma of a 3-failure cluster draw
    const double sigma = std::sqrt(total * p * (1 - p) * 3.0);
    CHECK_MESSAGE(std::abs(static_cast<double>(mc.planted) - total * p) <= 5 * sigma + 3, label);
  }
}

TEST_CASE("exact mode reproduces counts and reach") {
  kv_file kv = [] {
    std::istringstream in(
        "seed = 11\nexact_counts = true\nn_projects = 12\n"
        "weight.flaky_test = 40\nweight.connection_refused = 7\nweight.image_push_write_error = 1\n"
        "projects.flaky_test = 5\nprojects.connection_refused = 7\nprojects.image_push_write_error = 1\n"
        "missing_logs.gap = 2021-01-01T00:00:00Z 2022-01-01T00:00:00Z 0.5\n");
    return kv_file::parse(in);
  }();
  const auto s = corpus_spec::from_kv(kv);
  const auto c = generate_corpus(s);
  CHECK(c.manifest.categories.at("flaky_test").expected_labeled == 40);
  CHECK(c.manifest.categories.at("flaky_test").expected_projects == 5);
  CHECK(c.manifest.categories.at("connection_refused").expected_labeled == 7);
  CHECK(c.manifest.categories.at("connection_refused").expected_projects == 7);
  CHECK(c.manifest.categories.at("image_push_write_error").expected_labeled == 1);

  std::istringstream bad("exact_counts = true\nweight.flaky_test = 2\nprojects.flaky_test = 3\n");
  CHECK_THROWS_AS(corpus_spec::from_kv(kv_file::parse(bad)), input_error);
  std::istringstream unknown("colour = blue\n");
  CHECK_THROWS_AS(corpus_spec::from_kv(kv_file::parse(unknown)), input_error);
}

TEST_CASE("same seed, same bytes") {
  const auto dir = std::filesystem::temp_directory_path() / "flakyci_gen_test";
  std::filesystem::remove_all(dir);
  const auto s = small_spec(8);
  write_corpus(generate_corpus(s), s, dir / "a");
  write_corpus(generate_corpus(s), s, dir / "b");
  for (const char* f : {"jobs.jsonl", "manifest.json", "truth.jsonl", "catalog.tsv"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  auto other = s;
  other.seed = 9;
  write_corpus(generate_corpus(other), other, dir / "c");
  CHECK(slurp(dir / "a" / "jobs.jsonl") != slurp(dir / "c" / "jobs.jsonl"));

  // the written corpus reads back to the same records and truth
  const auto jobs = load_job_records(dir / "a" / "jobs.jsonl");
  const auto again = generate_corpus(s);
  REQUIRE(jobs.size() == again.jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto expect = again.jobs[i];
    expect.log_ref.reset();
    CHECK(jobs[i] == expect);
  }
  const auto truth = load_truth(dir / "a" / "truth.jsonl");
  CHECK(truth.size() == again.manifest.counts.at("flaky_failures"));
  const auto cat = load_rule_catalog(dir / "a" / "catalog.tsv");
  CHECK(cat.rules().size() == 51);
  std::filesystem::remove_all(dir);
}
