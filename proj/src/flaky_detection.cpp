#include "flakyci/flaky_detection.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>

namespace flakyci {
namespace {

bool earlier(const job_record& a, const job_record& b) {
  if (a.created_at != b.created_at) return a.created_at < b.created_at;
  return a.id < b.id;
}

}  // namespace

std::vector<rerun_sequence> group_rerun_sequences(
    std::span<const job_record> jobs) {
  std::map<sequence_key, std::vector<job_record>> groups;
  for (const auto& job : jobs)
    groups[sequence_key{job.project, job.name, job.commit}].push_back(job);

  std::vector<rerun_sequence> sequences;
  for (auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end(), earlier);
    rerun_sequence seq{key, std::move(members), false};
    seq.is_flaky = classify_flaky(seq);
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

bool classify_flaky(const rerun_sequence& sequence) {
  bool passed = false;
  bool failed = false;
  for (const auto& job : sequence.jobs) {
    passed |= job.status == job_status::success;
    failed |= job.status == job_status::failed;
  }
  return passed && failed;
}

std::size_t initial_failure_index(const rerun_sequence& sequence) {
  std::size_t best = std::string::npos;
  for (std::size_t i = 0; i < sequence.jobs.size(); ++i) {
    if (sequence.jobs[i].status != job_status::failed) continue;
    if (best == std::string::npos || earlier(sequence.jobs[i], sequence.jobs[best]))
      best = i;
  }
  return best;
}

std::vector<flaky_failure> extract_flaky_failures(
    std::span<const rerun_sequence> sequences) {
  std::vector<flaky_failure> out;
  for (const auto& seq : sequences) {
    if (!classify_flaky(seq)) continue;
    const auto initial = initial_failure_index(seq);
    for (std::size_t i = 0; i < seq.jobs.size(); ++i) {
      if (seq.jobs[i].status != job_status::failed) continue;
      out.push_back(flaky_failure{seq.jobs[i], seq.key, i == initial});
    }
  }
  return out;
}

void write_sequences_jsonl(std::ostream& out,
                           std::span<const rerun_sequence> sequences) {
  for (const auto& seq : sequences) {
    nlohmann::ordered_json obj;
    obj["project"] = seq.key.project;
    obj["name"] = seq.key.name;
    obj["commit"] = seq.key.commit;
    obj["is_flaky"] = seq.is_flaky;
    auto ids = nlohmann::ordered_json::array();
    auto statuses = nlohmann::ordered_json::array();
    for (const auto& job : seq.jobs) {
      ids.push_back(job.id);
      statuses.push_back(to_string(job.status));
    }
    obj["job_ids"] = std::move(ids);
    obj["statuses"] = std::move(statuses);
    out << obj.dump() << '\n';
  }
}

void write_flaky_failures_jsonl(std::ostream& out,
                                std::span<const flaky_failure> failures) {
  for (const auto& f : failures) {
    nlohmann::ordered_json obj;
    obj["job_id"] = f.job.id;
    obj["project"] = f.key.project;
    obj["name"] = f.key.name;
    obj["commit"] = f.key.commit;
    obj["is_initial"] = f.is_initial;
    obj["created_at"] = format_rfc3339(f.job.created_at);
    obj["has_log"] = f.job.log_ref.has_value();
    out << obj.dump() << '\n';
  }
}

}  // namespace flakyci
