#pragma once

#include "flakyci/flaky_detection.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flakyci {

/// A compiled search pattern. Perl-style syntax without backreferences;
/// matching is an unanchored, case-sensitive search in which `^`/`$` match
/// at line boundaries and `.` does not cross a newline.
class compiled_pattern {
 public:
  /// Throws std::invalid_argument describing the problem.
  static compiled_pattern compile(std::string_view pattern);

  /// Throws std::runtime_error when the engine gives up on a pathological
  /// input.
  bool search(std::string_view text) const;

 private:
  struct impl;
  std::shared_ptr<const impl> impl_;
};

/// Returns the first backreference-like construct in `pattern`, if any.
std::optional<std::string> find_backreference(std::string_view pattern);

struct label_rule {
  int order = 0;
  std::string rule_id;
  std::string label;
  std::string group;
  std::string pattern;
  compiled_pattern regex;
};

/// Ordered search rules. Several rules may share a label; every label
/// belongs to exactly one group.
class rule_catalog {
 public:
  /// Validates and compiles. Throws catalog_error on duplicate orders or
  /// rule ids, uncompilable or backreferencing patterns, and labels mapped
  /// to more than one group or to none.
  static rule_catalog from_rules(std::vector<label_rule> rules);

  const std::vector<label_rule>& rules() const { return rules_; }
  const std::map<std::string, std::string>& groups() const { return groups_; }
  std::set<std::string> labels() const;
  std::set<std::string> group_names() const;
  std::optional<std::string> group_of(const std::string& label) const;
  const label_rule* find_rule(const std::string& rule_id) const;

 private:
  std::vector<label_rule> rules_;
  std::map<std::string, std::string> groups_;
};

/// Reads `order <TAB> rule_id <TAB> label <TAB> group <TAB> pattern` lines;
/// `#` lines and blank lines are skipped. Throws catalog_error naming the
/// line and rule.
rule_catalog load_rule_catalog(std::istream& source,
                               const std::string& origin = "catalog");
rule_catalog load_rule_catalog(const std::filesystem::path& path);
void write_rule_catalog(std::ostream& out, const rule_catalog& catalog);

struct label_match {
  std::string label;
  std::string rule_id;
  int order = 0;
};

struct label_options {
  /// Longer logs keep only their last max_log_bytes bytes.
  std::size_t max_log_bytes = 16u << 20;
  /// Worker threads for label_corpus; 0 or 1 runs inline.
  unsigned threads = 1;
};

/// Replaces invalid UTF-8 sequences with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

/// Truncates from the head to `max_bytes`, then sanitizes.
std::string prepare_log_text(std::string_view raw, std::size_t max_bytes);

/// Label of the lowest-order rule matching anywhere in the log, if any.
std::optional<label_match> label_failure(std::string_view log_text,
                                         const rule_catalog& catalog,
                                         const label_options& options = {});

/// Winner plus every other rule that also matched, for auditing.
struct label_diagnostics {
  std::optional<label_match> winner;
  std::vector<std::string> shadowed_rules;
  std::vector<std::string> engine_errors;
};

label_diagnostics label_failure_with_diagnostics(
    std::string_view log_text, const rule_catalog& catalog,
    const label_options& options = {});

struct labeled_failure {
  flaky_failure failure;
  std::optional<std::string> label;
  std::optional<std::string> matched_rule;
  std::vector<std::string> shadowed_rules;
};

struct corpus_labeling {
  /// Failures that had a log, in input order.
  std::vector<labeled_failure> processed;
  std::size_t missing_logs = 0;

  std::size_t labeled_count() const;
};

/// Labels every failure whose job has a log reference resolvable in
/// `store`; the rest are only counted. Output order is input order for any
/// thread count.
corpus_labeling label_corpus(std::span<const flaky_failure> failures,
                             const log_store& store,
                             const rule_catalog& catalog,
                             const label_options& options = {});

void write_labeled_jsonl(std::ostream& out,
                         std::span<const labeled_failure> labeled);

/// Labeling quality against manually established truth.
struct eval_report {
  std::size_t total = 0;
  std::size_t labeled = 0;
  std::size_t correct = 0;
  /// Fractions in [0, 1]: labeled / total and correct / labeled.
  double recall = 0.0;
  /// Undefined (empty) when nothing was labeled.
  std::optional<double> precision;
};

/// Truth maps job id to its true label; an empty label means the failure
/// has no known category. A label counts as correct only when it equals the
/// truth. Throws input_error when a predicted job is absent from truth.
eval_report evaluate_labeling(
    std::span<const labeled_failure> predicted,
    const std::map<job_id, std::optional<std::string>>& truth);

/// Counts-only form of the same metrics.
eval_report make_eval_report(std::size_t total, std::size_t labeled,
                             std::size_t correct);

/// Sample size for estimating a proportion (p = 0.5) with the given
/// two-sided confidence and margin of error, corrected for a finite
/// population of `population` items, rounded up. Throws input_error on
/// out-of-range parameters.
std::int64_t required_sample_size(std::int64_t population, double confidence,
                                  double margin);

}  // namespace flakyci
