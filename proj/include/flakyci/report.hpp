#pragma once

#include "flakyci/category_stats.hpp"
#include "flakyci/cost_model.hpp"
#include "flakyci/flaky_detection.hpp"
#include "flakyci/ingest.hpp"
#include "flakyci/kv_file.hpp"
#include "flakyci/label_engine.hpp"
#include "flakyci/rfm.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace flakyci {

/// Descending total cost, label order on ties; at most top_n rows.
std::vector<category_cost> cost_ranking(std::span<const category_cost> costs,
                                        std::size_t top_n);

void write_cost_ranking_csv(std::ostream& out,
                            std::span<const category_cost> ranking);

struct pipeline_config {
  std::filesystem::path jobs;
  std::filesystem::path logs;
  std::filesystem::path catalog;
  std::filesystem::path out;

  cost_config costs;
  rfm_config rfm;
  /// Unset: the latest created/finished timestamp in the job data, so a
  /// rerun over the same inputs never depends on the wall clock.
  std::optional<timestamp> analysis_date;

  std::size_t top_n = 20;
  bool plot_data = false;
  /// Timeline gets a `__missing_logs__` series.
  bool timeline_missing_logs = true;
  unsigned threads = 1;
};

/// Applies `machine_rate_per_min`, `salary_rate_per_min`, `analysis_date`,
/// `seed`, `k`, `kmeans_restarts`, `forest_trees`, `contamination`,
/// `forest_repeats` (and `kmeans_max_iters`, `forest_sample_size`,
/// `day_granularity`, `top_n`) over `base`. Unknown keys are rejected.
pipeline_config apply_config(const kv_file& file, pipeline_config base);

enum class stage { ingest, detect, label, analyze, rfm };

/// Everything computed up to some stage. Later members stay empty when the
/// run stopped earlier.
struct pipeline_state {
  std::vector<job_record> jobs;
  std::vector<job_record> completed;
  std::vector<rerun_sequence> sequences;
  std::vector<flaky_failure> flaky;
  std::optional<rule_catalog> catalog;
  corpus_labeling labeling;
  std::vector<flaky_failure> missing_log_failures;
  std::vector<category_stats> stats;
  std::vector<category_cost> costs;
  std::map<std::string, std::vector<std::string>> timeline;
  timestamp analysis_date{};
  std::optional<rfm_analysis> rfm;
};

/// Runs stages in order through `last`. Errors keep their kind and are
/// prefixed with the stage name.
pipeline_state run_stages(const pipeline_config& config, stage last);

/// File name → contents for the artifacts of the given stages.
using artifact_set = std::map<std::string, std::string>;

artifact_set detect_artifacts(const pipeline_state& state);
artifact_set label_artifacts(const pipeline_state& state);
artifact_set cost_artifacts(const pipeline_state& state, const pipeline_config& config);
artifact_set timeline_artifacts(const pipeline_state& state);
artifact_set rfm_artifacts(const pipeline_state& state);
artifact_set priority_artifacts(const pipeline_state& state);
artifact_set plot_artifacts(const pipeline_state& state, const pipeline_config& config);
std::string summary_json(const pipeline_state& state);

/// Writes every artifact under `dir`. If any write fails, files written by
/// this call are removed before the error propagates.
void write_artifacts(const artifact_set& files, const std::filesystem::path& dir);

/// Full pipeline: all artifacts plus `summary.json` (and plot data when
/// requested) under config.out.
pipeline_state run_pipeline(const pipeline_config& config);

}  // namespace flakyci
