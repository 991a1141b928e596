#pragma once

#include "flakyci/flaky_detection.hpp"
#include "flakyci/label_engine.hpp"
#include "flakyci/money.hpp"

#include <chrono>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace flakyci {

/// Per-minute rates for machines and for an engineer's diagnosis time.
struct cost_config {
  money machine_rate = money::from_units(0.14);
  money salary_rate = money::from_units(0.6);
};

struct category_cost {
  std::string label;
  money machine_cost;
  money diagnosis_cost;
  money total_cost;
  /// Flaky failures in the category.
  std::size_t n_failures = 0;
  /// Sequences whose initial failure is in the category.
  std::size_t n_initial = 0;

  double diagnosis_share() const;
};

/// Sum over jobs of duration × rate, each job rounded to a micro-unit so the
/// cost of a union is the sum of the parts. Throws input_error on a negative
/// duration.
money machine_cost(std::span<const double> durations_minutes, money rate);

/// Time from the initial failure's finish to the finish of the last job of
/// the sequence. Negative spans (overlapping reruns) clamp to zero. Throws
/// input_error when either job lacks finished_at or there is no failure.
std::chrono::milliseconds diagnosis_delay(const rerun_sequence& sequence);

inline double diagnosis_delay_minutes(const rerun_sequence& sequence) {
  return static_cast<double>(diagnosis_delay(sequence).count()) / 60'000.0;
}

/// One delay term per sequence; each term rounded to a micro-unit.
money diagnosis_cost(std::span<const rerun_sequence> sequences, money rate);

/// Machine cost over every failure; diagnosis cost over the sequences whose
/// initial failure carries the label.
category_cost compute_category_cost(const std::string& label,
                                    std::span<const flaky_failure> failures,
                                    std::span<const rerun_sequence> sequences,
                                    const cost_config& config);

/// Costs for every label present among the labeled failures, in label
/// order. A sequence's delay is charged to the label of its initial
/// failure only.
std::vector<category_cost> compute_costs(
    std::span<const labeled_failure> labeled,
    std::span<const rerun_sequence> sequences, const cost_config& config);

/// `label,n,m,machine_cost,diagnosis_cost,total_cost,diagnosis_share`.
void write_costs_csv(std::ostream& out, std::span<const category_cost> costs);

}  // namespace flakyci
