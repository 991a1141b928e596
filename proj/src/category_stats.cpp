#include "flakyci/category_stats.hpp"

#include "flakyci/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace flakyci {

std::vector<category_stats> compute_category_stats(
    std::span<const labeled_failure> labeled, const rule_catalog& catalog) {
  struct acc {
    std::size_t count = 0;
    std::set<std::string> projects;
    std::vector<timestamp> when;
  };
  std::map<std::string, acc> by_label;
  std::size_t total = 0;
  for (const auto& f : labeled) {
    if (!f.label) continue;
    auto& a = by_label[*f.label];
    ++a.count;
    a.projects.insert(f.failure.job.project);
    a.when.push_back(f.failure.job.created_at);
    ++total;
  }

  std::vector<category_stats> out;
  out.reserve(by_label.size());
  for (auto& [label, a] : by_label) {
    category_stats s;
    s.label = label;
    s.group = catalog.group_of(label).value_or("");
    s.frequency = a.count;
    s.proportion = 100.0 * static_cast<double>(a.count) / static_cast<double>(total);
    s.projects_affected = a.projects.size();
    std::sort(a.when.begin(), a.when.end());
    s.occurrences = std::move(a.when);
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const category_stats& a, const category_stats& b) {
                     if (a.frequency != b.frequency) return a.frequency > b.frequency;
                     return a.label < b.label;
                   });
  return out;
}

std::map<std::string, std::vector<std::string>> timeline_series(
    std::span<const labeled_failure> labeled,
    std::span<const flaky_failure> missing_log_failures,
    bool include_missing_logs) {
  std::map<std::string, std::set<std::string>> days;
  for (const auto& f : labeled)
    if (f.label) days[*f.label].insert(format_date(f.failure.job.created_at));
  if (include_missing_logs)
    for (const auto& f : missing_log_failures)
      days[std::string(missing_logs_series)].insert(format_date(f.job.created_at));

  std::map<std::string, std::vector<std::string>> out;
  for (auto& [label, set] : days) out[label].assign(set.begin(), set.end());
  return out;
}

void write_category_stats_csv(std::ostream& out,
                              std::span<const category_stats> stats) {
  csv::write_row(out, {"label", "group", "frequency", "proportion",
                       "projects_affected", "first_seen", "last_seen"});
  for (const auto& s : stats) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f", s.proportion);
    csv::write_row(out, {s.label, s.group, std::to_string(s.frequency), pct,
                         std::to_string(s.projects_affected),
                         s.occurrences.empty() ? "" : format_rfc3339(s.occurrences.front()),
                         s.occurrences.empty() ? "" : format_rfc3339(s.occurrences.back())});
  }
}

void write_timeline_csv(
    std::ostream& out,
    const std::map<std::string, std::vector<std::string>>& series) {
  csv::write_row(out, {"label", "date"});
  for (const auto& [label, dates] : series)
    for (const auto& d : dates) csv::write_row(out, {label, d});
}

}  // namespace flakyci
