#include "flakyci/cost_model.hpp"

#include "flakyci/csv.hpp"
#include "flakyci/errors.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace flakyci {
namespace {

std::string share_string(double share) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", share);
  return buf;
}

}  // namespace

double category_cost::diagnosis_share() const {
  if (total_cost.micros == 0) return 0.0;
  return static_cast<double>(diagnosis_cost.micros) /
         static_cast<double>(total_cost.micros);
}

money machine_cost(std::span<const double> durations_minutes, money rate) {
  money total;
  for (const double d : durations_minutes) {
    if (!(d >= 0.0)) throw input_error("negative job duration");
    total.micros += std::llround(d * static_cast<double>(rate.micros));
  }
  return total;
}

std::chrono::milliseconds diagnosis_delay(const rerun_sequence& sequence) {
  const auto initial = initial_failure_index(sequence);
  if (initial == std::string::npos || sequence.jobs.empty())
    throw input_error("sequence has no failed job");
  const auto& first = sequence.jobs[initial];
  const auto& last = sequence.jobs.back();
  if (!first.finished_at || !last.finished_at)
    throw input_error("job without finished_at in sequence of job " +
                      std::to_string(first.id));
  const auto delay = *last.finished_at - *first.finished_at;
  return delay.count() < 0 ? std::chrono::milliseconds{0} : delay;
}

money diagnosis_cost(std::span<const rerun_sequence> sequences, money rate) {
  money total;
  for (const auto& seq : sequences) {
    const __int128 scaled =
        static_cast<__int128>(diagnosis_delay(seq).count()) * rate.micros;
    // ms × micros/min → micros, rounded half up
    total.micros += static_cast<std::int64_t>((scaled + 30'000) / 60'000);
  }
  return total;
}

category_cost compute_category_cost(const std::string& label,
                                    std::span<const flaky_failure> failures,
                                    std::span<const rerun_sequence> sequences,
                                    const cost_config& config) {
  category_cost cost;
  cost.label = label;
  std::vector<double> durations;
  durations.reserve(failures.size());
  for (const auto& f : failures)
    durations.push_back(f.job.duration_minutes.value_or(0.0));
  cost.machine_cost = machine_cost(durations, config.machine_rate);
  cost.diagnosis_cost = diagnosis_cost(sequences, config.salary_rate);
  cost.total_cost = cost.machine_cost + cost.diagnosis_cost;
  cost.n_failures = failures.size();
  cost.n_initial = sequences.size();
  if (cost.n_initial > cost.n_failures)
    throw invariant_error("category '" + label +
                          "' has more initial failures than failures");
  return cost;
}

std::vector<category_cost> compute_costs(
    std::span<const labeled_failure> labeled,
    std::span<const rerun_sequence> sequences, const cost_config& config) {
  std::map<sequence_key, const rerun_sequence*> by_key;
  for (const auto& seq : sequences) by_key.emplace(seq.key, &seq);

  struct bucket {
    std::vector<flaky_failure> failures;
    std::vector<rerun_sequence> sequences;
  };
  std::map<std::string, bucket> buckets;
  for (const auto& lf : labeled) {
    if (!lf.label) continue;
    auto& b = buckets[*lf.label];
    b.failures.push_back(lf.failure);
    if (lf.failure.is_initial) {
      const auto it = by_key.find(lf.failure.key);
      if (it == by_key.end())
        throw invariant_error("no sequence for initial failure " +
                              std::to_string(lf.failure.job.id));
      b.sequences.push_back(*it->second);
    }
  }

  std::vector<category_cost> out;
  out.reserve(buckets.size());
  for (const auto& [label, b] : buckets)
    out.push_back(compute_category_cost(label, b.failures, b.sequences, config));
  return out;
}

void write_costs_csv(std::ostream& out, std::span<const category_cost> costs) {
  csv::write_row(out, {"label", "n", "m", "machine_cost", "diagnosis_cost",
                       "total_cost", "diagnosis_share"});
  for (const auto& c : costs)
    csv::write_row(out, {c.label, std::to_string(c.n_failures),
                         std::to_string(c.n_initial),
                         c.machine_cost.to_cents_string(),
                         c.diagnosis_cost.to_cents_string(),
                         c.total_cost.to_cents_string(),
                         share_string(c.diagnosis_share())});
}

}  // namespace flakyci
