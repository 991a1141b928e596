#pragma once

#include "flakyci/time.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flakyci {

using job_id = std::int64_t;

enum class job_status { success, failed, canceled, skipped, manual, created };

std::string_view to_string(job_status status);

/// Parses a status literal; throws input_error listing the accepted values.
job_status parse_status(std::string_view text);

inline bool is_completed(job_status s) {
  return s == job_status::success || s == job_status::failed;
}

/// One CI job execution. Durations are minutes; timestamps are UTC.
struct job_record {
  job_id id = 0;
  std::string project;
  std::string name;
  std::string commit;
  job_status status = job_status::created;
  timestamp created_at{};
  std::optional<timestamp> finished_at;
  std::optional<double> duration_minutes;
  /// Key into the log store; empty when the job's log is missing.
  std::optional<job_id> log_ref;

  friend bool operator==(const job_record&, const job_record&) = default;
};

enum class job_format { json_lines, csv };

/// Reads job metadata in input order. Each JSON line (or CSV row under a
/// header) carries `id`, `project`, `name`, `commit`, `status`,
/// `created_at`, `finished_at` and one of `duration_s` / `duration_min`.
/// Completed jobs must have `finished_at` and a duration. Errors name the
/// line or record index and the offending field.
std::vector<job_record> parse_job_records(std::istream& source,
                                          job_format format);

/// Picks the format from the extension (`.csv` → csv, otherwise JSON Lines).
std::vector<job_record> load_job_records(const std::filesystem::path& path);

/// Canonical JSON Lines form; parse_job_records reads it back unchanged.
void write_job_records(std::ostream& out, std::span<const job_record> jobs);
std::string to_json_line(const job_record& job);

/// Keeps success and failed jobs, in order.
std::vector<job_record> filter_completed(std::span<const job_record> jobs);

/// Maps job ids to UTF-8 log text. Directory-backed stores index
/// `<job_id>.log` names up front and read file contents on demand.
class log_store {
 public:
  log_store() = default;

  static log_store from_directory(const std::filesystem::path& dir);
  static log_store from_map(std::map<job_id, std::string> logs);

  bool contains(job_id id) const;
  std::optional<std::string> read(job_id id) const;
  std::size_t size() const;

 private:
  std::filesystem::path dir_;
  std::set<job_id> indexed_;
  std::map<job_id, std::string> memory_;
  bool on_disk_ = false;
};

/// Sets each job's log_ref to its id when the store has a log for it and
/// clears it otherwise. No job is dropped.
std::vector<job_record> attach_logs(std::span<const job_record> jobs,
                                    const log_store& store);

}  // namespace flakyci
