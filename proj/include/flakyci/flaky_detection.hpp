#pragma once

#include "flakyci/ingest.hpp"

#include <compare>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace flakyci {

/// Identity of a rerun sequence: the same job on the same commit.
struct sequence_key {
  std::string project;
  std::string name;
  std::string commit;

  friend auto operator<=>(const sequence_key&, const sequence_key&) = default;
};

/// All executions sharing a key, ordered by (created_at, id). Length >= 2.
struct rerun_sequence {
  sequence_key key;
  std::vector<job_record> jobs;
  bool is_flaky = false;
};

/// A failed job of a flaky sequence. `is_initial` marks the earliest failed
/// job of its sequence by (created_at, id).
struct flaky_failure {
  job_record job;
  sequence_key key;
  bool is_initial = false;
};

/// Groups completed jobs by key and keeps keys with at least two jobs.
/// Sequences come back in key order with is_flaky already classified.
std::vector<rerun_sequence> group_rerun_sequences(
    std::span<const job_record> jobs);

/// True iff the sequence holds at least one success and one failure.
bool classify_flaky(const rerun_sequence& sequence);

/// Failed members of flaky sequences, in sequence order then job order.
std::vector<flaky_failure> extract_flaky_failures(
    std::span<const rerun_sequence> sequences);

/// Index of the initial failure within sequence.jobs; npos when the
/// sequence has no failed job.
std::size_t initial_failure_index(const rerun_sequence& sequence);

void write_sequences_jsonl(std::ostream& out,
                           std::span<const rerun_sequence> sequences);
void write_flaky_failures_jsonl(std::ostream& out,
                                std::span<const flaky_failure> failures);

}  // namespace flakyci
