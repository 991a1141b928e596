#pragma once

#include "flakyci/ingest.hpp"
#include "flakyci/time.hpp"

#include <chrono>
#include <string>

namespace testing {

using namespace std::chrono_literals;

inline flakyci::timestamp t0() {
  return flakyci::parse_rfc3339("2024-01-10T10:00:00Z");
}

/// Completed job on `key`, created `start_min` minutes after t0 and running
/// `dur_min` minutes.
inline flakyci::job_record job(flakyci::job_id id, flakyci::job_status status,
                               double start_min, double dur_min,
                               const std::string& commit = "c1",
                               const std::string& project = "p",
                               const std::string& name = "build") {
  flakyci::job_record j;
  j.id = id;
  j.project = project;
  j.name = name;
  j.commit = commit;
  j.status = status;
  j.created_at = t0() + std::chrono::milliseconds(
                            static_cast<long long>(start_min * 60'000));
  j.finished_at = j.created_at + std::chrono::milliseconds(
                                     static_cast<long long>(dur_min * 60'000));
  j.duration_minutes = dur_min;
  return j;
}

constexpr auto S = flakyci::job_status::success;
constexpr auto F = flakyci::job_status::failed;

}  // namespace testing
