#include "flakyci/ingest.hpp"

#include "flakyci/csv.hpp"
#include "flakyci/errors.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace flakyci {
namespace {

constexpr std::array<std::pair<std::string_view, job_status>, 6> kStatuses{{
    {"success", job_status::success},
    {"failed", job_status::failed},
    {"canceled", job_status::canceled},
    {"skipped", job_status::skipped},
    {"manual", job_status::manual},
    {"created", job_status::created},
}};

using raw_record = std::map<std::string, std::string, std::less<>>;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw input_error(where + ": " + what);
}

const std::string& require(const raw_record& rec, const std::string& where,
                           std::string_view field) {
  const auto it = rec.find(field);
  if (it == rec.end() || it->second.empty())
    fail(where, "missing field '" + std::string(field) + "'");
  return it->second;
}

const std::string* optional_field(const raw_record& rec,
                                  std::string_view field) {
  const auto it = rec.find(field);
  if (it == rec.end() || it->second.empty()) return nullptr;
  return &it->second;
}

double to_double(const std::string& where, std::string_view field,
                 const std::string& text) {
  double value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(where, "field '" + std::string(field) + "' is not a number: " + text);
  return value;
}

job_id to_job_id(const std::string& where, const std::string& text) {
  job_id value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(where, "field 'id' is not an integer: " + text);
  return value;
}

job_record build_record(const raw_record& rec, const std::string& where) {
  job_record job;
  job.id = to_job_id(where, require(rec, where, "id"));
  job.project = require(rec, where, "project");
  job.name = require(rec, where, "name");
  job.commit = require(rec, where, "commit");
  try {
    job.status = parse_status(require(rec, where, "status"));
    job.created_at = parse_rfc3339(require(rec, where, "created_at"));
    if (const auto* f = optional_field(rec, "finished_at"))
      job.finished_at = parse_rfc3339(*f);
  } catch (const input_error& e) {
    if (std::string_view(e.what()).starts_with(where)) throw;
    fail(where, e.what());
  }

  const auto* secs = optional_field(rec, "duration_s");
  const auto* mins = optional_field(rec, "duration_min");
  if (secs && mins)
    fail(where, "both 'duration_s' and 'duration_min' given");
  if (secs) job.duration_minutes = to_double(where, "duration_s", *secs) / 60.0;
  if (mins) job.duration_minutes = to_double(where, "duration_min", *mins);
  if (const auto* ref = optional_field(rec, "log_ref"))
    job.log_ref = to_job_id(where, *ref);

  if (job.duration_minutes && !(*job.duration_minutes >= 0.0))
    fail(where, "negative duration");
  if (job.finished_at && *job.finished_at < job.created_at)
    fail(where, "finished_at precedes created_at");
  if (is_completed(job.status)) {
    if (!job.finished_at) fail(where, "missing field 'finished_at'");
    if (!job.duration_minutes)
      fail(where, "missing field 'duration_s' or 'duration_min'");
  }
  return job;
}

raw_record from_json(const nlohmann::json& obj, const std::string& where) {
  if (!obj.is_object()) fail(where, "record is not a JSON object");
  raw_record rec;
  for (const auto& [key, value] : obj.items()) {
    if (value.is_null()) continue;
    rec.emplace(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  return rec;
}

void check_unique(std::unordered_set<job_id>& seen, const job_record& job,
                  const std::string& where) {
  if (!seen.insert(job.id).second)
    fail(where, "duplicate job id " + std::to_string(job.id));
}

}  // namespace

std::string_view to_string(job_status status) {
  for (const auto& [text, value] : kStatuses)
    if (value == status) return text;
  return "unknown";
}

job_status parse_status(std::string_view text) {
  for (const auto& [literal, value] : kStatuses)
    if (literal == text) return value;
  std::string accepted;
  for (const auto& [literal, value] : kStatuses) {
    if (!accepted.empty()) accepted += ", ";
    accepted += literal;
  }
  throw input_error("unknown status '" + std::string(text) +
                    "' (accepted: " + accepted + ")");
}

std::vector<job_record> parse_job_records(std::istream& source,
                                          job_format format) {
  std::vector<job_record> jobs;
  std::unordered_set<job_id> seen;

  if (format == job_format::json_lines) {
    std::string line;
    for (std::size_t lineno = 1; std::getline(source, line); ++lineno) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const std::string where = "line " + std::to_string(lineno);
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail(where, std::string("malformed JSON: ") + e.what());
      }
      jobs.push_back(build_record(from_json(obj, where), where));
      check_unique(seen, jobs.back(), where);
    }
    return jobs;
  }

  csv::row header;
  if (!csv::read_row(source, header)) return jobs;
  csv::row fields;
  for (std::size_t index = 1; csv::read_row(source, fields); ++index) {
    const std::string where = "record " + std::to_string(index);
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != header.size())
      fail(where, "expected " + std::to_string(header.size()) +
                      " columns, got " + std::to_string(fields.size()));
    raw_record rec;
    for (std::size_t c = 0; c < header.size(); ++c)
      rec.emplace(header[c], fields[c]);
    jobs.push_back(build_record(rec, where));
    check_unique(seen, jobs.back(), where);
  }
  return jobs;
}

std::vector<job_record> load_job_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open jobs file " + path.string());
  const auto format =
      path.extension() == ".csv" ? job_format::csv : job_format::json_lines;
  return parse_job_records(in, format);
}

std::string to_json_line(const job_record& job) {
  nlohmann::ordered_json obj;
  obj["id"] = job.id;
  obj["project"] = job.project;
  obj["name"] = job.name;
  obj["commit"] = job.commit;
  obj["status"] = to_string(job.status);
  obj["created_at"] = format_rfc3339(job.created_at);
  obj["finished_at"] = job.finished_at
                           ? nlohmann::ordered_json(format_rfc3339(*job.finished_at))
                           : nlohmann::ordered_json(nullptr);
  obj["duration_min"] = job.duration_minutes
                            ? nlohmann::ordered_json(*job.duration_minutes)
                            : nlohmann::ordered_json(nullptr);
  if (job.log_ref) obj["log_ref"] = *job.log_ref;
  return obj.dump();
}

void write_job_records(std::ostream& out, std::span<const job_record> jobs) {
  for (const auto& job : jobs) out << to_json_line(job) << '\n';
}

std::vector<job_record> filter_completed(std::span<const job_record> jobs) {
  std::vector<job_record> out;
  for (const auto& job : jobs)
    if (is_completed(job.status)) out.push_back(job);
  return out;
}

log_store log_store::from_directory(const std::filesystem::path& dir) {
  log_store store;
  store.dir_ = dir;
  store.on_disk_ = true;
  if (!std::filesystem::is_directory(dir))
    throw input_error("log directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".log")
      continue;
    const auto stem = entry.path().stem().string();
    job_id id = 0;
    const auto [ptr, ec] =
        std::from_chars(stem.data(), stem.data() + stem.size(), id);
    if (ec == std::errc{} && ptr == stem.data() + stem.size())
      store.indexed_.insert(id);
  }
  return store;
}

log_store log_store::from_map(std::map<job_id, std::string> logs) {
  log_store store;
  store.memory_ = std::move(logs);
  return store;
}

bool log_store::contains(job_id id) const {
  return on_disk_ ? indexed_.contains(id) : memory_.contains(id);
}

std::optional<std::string> log_store::read(job_id id) const {
  if (!on_disk_) {
    const auto it = memory_.find(id);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  if (!indexed_.contains(id)) return std::nullopt;
  std::ifstream in(dir_ / (std::to_string(id) + ".log"), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

std::size_t log_store::size() const {
  return on_disk_ ? indexed_.size() : memory_.size();
}

std::vector<job_record> attach_logs(std::span<const job_record> jobs,
                                    const log_store& store) {
  std::vector<job_record> out(jobs.begin(), jobs.end());
  for (auto& job : out) {
    if (store.contains(job.id))
      job.log_ref = job.id;
    else
      job.log_ref.reset();
  }
  return out;
}

}  // namespace flakyci
