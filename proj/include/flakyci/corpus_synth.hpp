#pragma once

#include "flakyci/flaky_detection.hpp"
#include "flakyci/ingest.hpp"
#include "flakyci/kv_file.hpp"
#include "flakyci/label_engine.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flakyci {

/// One row of the reference category taxonomy with its observed frequency
/// and project reach, used as default generator weights.
struct category_profile {
  std::string_view label;
  std::string_view group;
  std::size_t frequency;
  std::size_t projects;
};

/// The 46 reference categories in 14 groups.
std::span<const category_profile> reference_categories();

/// 51 rules over the 46 reference labels; five labels carry two rules.
rule_catalog demo_catalog();

/// Log line that exactly one demo rule matches, keyed by rule id.
const std::map<std::string, std::string>& demo_markers();

/// Log lines that no demo rule matches.
std::span<const std::string_view> demo_filler_lines();

struct time_window {
  timestamp begin{};
  timestamp end{};
  double rate = 1.0;
};

struct corpus_spec {
  std::uint64_t seed = 1;
  std::size_t n_projects = 80;
  std::size_t n_jobs = 20'000;
  timestamp start{};
  timestamp end{};

  /// Status proportions; normalized on use.
  std::map<job_status, double> status_weights;

  /// Flaky failures as a fraction of failed jobs.
  double flaky_failure_ratio = 0.25;
  /// Flaky failures whose log carries no category marker.
  double noise_log_ratio = 0.14;
  std::size_t max_failures_per_sequence = 3;
  /// Share of non-flaky failed/successful jobs that sit in same-status
  /// rerun sequences.
  double plain_rerun_ratio = 0.10;

  /// Failed jobs created inside a window lose their log with `rate`.
  std::vector<time_window> missing_log_windows;

  /// Log-normal in minutes: median and log-space sigma.
  double delay_median_min = 240.0;
  double delay_sigma = 1.2;
  double duration_median_min = 8.0;
  double duration_sigma = 0.7;

  /// Category → probability (sampling mode) or exact recoverable count
  /// (exact mode). Defaults to the reference frequencies.
  std::map<std::string, double> category_weights;
  /// Category → number of distinct projects it appears in.
  std::map<std::string, std::size_t> category_projects;
  /// Exact mode: every category gets exactly its weight in labeled (log
  /// present, marker bearing) flaky failures and exactly its project count;
  /// job totals are derived from the flaky ratio and status weights.
  bool exact_counts = false;
  /// Give categories staggered active periods (some stop early, some start
  /// late) so recency varies.
  bool category_activity = true;

  /// Spec with reference defaults (reference status mix and weights).
  static corpus_spec defaults();
  /// Reads `key = value` settings over the defaults. Throws input_error.
  static corpus_spec from_kv(const kv_file& file);

  /// Throws input_error on inconsistent or infeasible settings.
  void validate() const;
};

struct manifest_job {
  job_id id = 0;
  sequence_key key;
  job_status status = job_status::created;
  bool flaky = false;
  std::optional<std::string> category;
  bool has_log = false;
  bool noise = false;
};

struct manifest_category {
  std::string group;
  /// Flaky failures planted with this category (logs present or not).
  std::size_t planted = 0;
  /// Planted failures whose logs survived: what labeling must recover.
  std::size_t expected_labeled = 0;
  std::size_t expected_projects = 0;
};

struct manifest_sequence {
  sequence_key key;
  double planted_delay_min = 0.0;
  std::optional<std::string> category;
};

struct corpus_manifest {
  std::map<std::string, std::size_t> counts;
  std::map<std::string, manifest_category> categories;
  std::vector<manifest_job> jobs;
  std::vector<manifest_sequence> flaky_sequences;
  timestamp latest{};
};

struct synthetic_corpus {
  std::vector<job_record> jobs;
  std::map<job_id, std::string> logs;
  corpus_manifest manifest;
};

/// Deterministic given spec.seed.
synthetic_corpus generate_corpus(const corpus_spec& spec);

/// Writes `jobs.jsonl`, `logs/<id>.log`, `manifest.json`, `truth.jsonl` and
/// `catalog.tsv` under `dir`.
void write_corpus(const synthetic_corpus& corpus, const corpus_spec& spec,
                  const std::filesystem::path& dir);

/// Reads `truth.jsonl` (`job_id`, `label` or null).
std::map<job_id, std::optional<std::string>> load_truth(
    const std::filesystem::path& path);

}  // namespace flakyci
