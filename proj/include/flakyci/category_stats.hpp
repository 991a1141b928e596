#pragma once

#include "flakyci/label_engine.hpp"

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace flakyci {

/// Frequency, share and reach of one failure category.
struct category_stats {
  std::string label;
  std::string group;
  std::size_t frequency = 0;
  /// Percent of all labeled failures.
  double proportion = 0.0;
  std::size_t projects_affected = 0;
  /// created_at of each labeled failure, ascending.
  std::vector<timestamp> occurrences;
};

/// One entry per label present, by descending frequency then label.
std::vector<category_stats> compute_category_stats(
    std::span<const labeled_failure> labeled, const rule_catalog& catalog);

/// Reserved series name for failures whose logs are missing.
inline constexpr std::string_view missing_logs_series = "__missing_logs__";

/// Per label, the distinct UTC days on which it occurred, ascending. With
/// `missing_log_failures` given, adds the `__missing_logs__` series.
std::map<std::string, std::vector<std::string>> timeline_series(
    std::span<const labeled_failure> labeled,
    std::span<const flaky_failure> missing_log_failures = {},
    bool include_missing_logs = false);

void write_category_stats_csv(std::ostream& out,
                              std::span<const category_stats> stats);

/// Long format: `label,date`, one row per (label, day).
void write_timeline_csv(
    std::ostream& out,
    const std::map<std::string, std::vector<std::string>>& series);

}  // namespace flakyci
