#include "flakyci/corpus_synth.hpp"

#include "flakyci/errors.hpp"
#include "flakyci/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace flakyci {
namespace {

using namespace std::chrono;
using nlohmann::ordered_json;

constexpr std::array<job_status, 6> kStatuses{
    job_status::success, job_status::failed,  job_status::canceled,
    job_status::skipped, job_status::manual,  job_status::created};

constexpr std::array<std::string_view, 8> kJobNames{
    "build",        "test:unit",      "test:integration", "lint",
    "docker:build", "deploy:staging", "deploy:prod",      "sonar"};

constexpr std::int64_t kMaxDurationS = 6 * 3600;
constexpr std::int64_t kMaxDelayS = 14 * 86400;

std::string fmt(const char* f, auto... args) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool is_integer(double x) { return x >= 0 && std::floor(x) == x; }

// Largest-remainder apportionment of `total` over `weights`.
std::vector<std::size_t> apportion(std::size_t total,
                                   const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (sum <= 0 || total == 0) return out;
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++out[rem[i].second];
  return out;
}

struct planned_job {
  sequence_key key;
  job_status status = job_status::created;
  timestamp created{};
  std::optional<timestamp> finished;
  std::optional<std::int64_t> duration_s;
  bool flaky = false;
  std::optional<std::string> category;
  bool noise = false;
  bool has_log = false;
  std::string log;
};

struct window {
  timestamp begin;
  timestamp end;
};

class generator {
 public:
  explicit generator(const corpus_spec& spec)
      : spec_(spec), rng_(spec.seed), catalog_(demo_catalog()) {
    for (std::size_t p = 0; p < spec.n_projects; ++p)
      projects_.push_back(fmt("group-%02zu/project-%03zu", p % 14 + 1, p + 1));
    for (const auto& rule : catalog_.rules())
      rules_by_label_[rule.label].push_back(rule.rule_id);
    for (const auto& [label, w] : spec.category_weights) labels_.push_back(label);
    make_windows();
    make_project_subsets();
  }

  synthetic_corpus run();

 private:
  std::string new_commit() {
    const auto a = splitmix64(spec_.seed ^ (0xC0FFEEull + commit_counter_));
    const auto b = splitmix64(a + commit_counter_++);
    return fmt("%016llx%016llx%08llx", static_cast<unsigned long long>(a),
               static_cast<unsigned long long>(b),
               static_cast<unsigned long long>(b >> 32));
  }

  sequence_key new_key(const std::string& project) {
    return {project, std::string(kJobNames[rng_.below(kJobNames.size())]),
            new_commit()};
  }

  std::int64_t draw_duration_s() {
    const double s = rng_.lognormal(spec_.duration_median_min * 60.0,
                                    spec_.duration_sigma);
    return std::clamp<std::int64_t>(std::llround(s), 1, kMaxDurationS);
  }

  bool log_survives(timestamp created) {
    bool keep = true;
    for (const auto& w : spec_.missing_log_windows)
      if (created >= w.begin && created < w.end && rng_.bernoulli(w.rate))
        keep = false;
    return keep;
  }

  std::string render_log(const std::optional<std::string>& label) {
    const auto filler = demo_filler_lines();
    std::string out;
    out += filler[0];
    out += '\n';
    out += filler[1];
    out += '\n';
    const auto middle = 3 + rng_.below(5);
    for (std::uint64_t i = 0; i < middle; ++i) {
      out += filler[2 + rng_.below(filler.size() - 3)];
      out += '\n';
    }
    if (label) {
      const auto& ids = rules_by_label_.at(*label);
      out += demo_markers().at(ids[rng_.below(ids.size())]);
      out += '\n';
    }
    out += filler.back();
    out += '\n';
    return out;
  }

  timestamp place(const window& w, std::int64_t span_s) {
    const auto lo = w.begin;
    const auto hi = std::max(lo, w.end - seconds(span_s));
    const auto range_s = duration_cast<seconds>(hi - lo).count();
    auto t0 = lo + seconds(rng_.between(0, range_s));
    if (t0 + seconds(span_s) > spec_.end) t0 = spec_.end - seconds(span_s);
    if (t0 < spec_.start)
      throw input_error("corpus spec: date range too short for a sequence of " +
                        std::to_string(span_s) + " s");
    return t0;
  }

  void make_windows();
  void make_project_subsets();
  std::size_t projects_for(const std::string& label) const;

  // Plants one flaky sequence with `f` failures; returns how many of its
  // failures kept their log.
  std::size_t plant_flaky(const std::string& project,
                          const std::optional<std::string>& category,
                          std::size_t f);
  void plant_plain(job_status status, std::size_t count);
  void plant_incomplete(job_status status, std::size_t count);

  const corpus_spec& spec_;
  rng rng_;
  rule_catalog catalog_;
  std::vector<std::string> projects_;
  std::vector<std::string> labels_;
  std::map<std::string, std::vector<std::string>> rules_by_label_;
  std::map<std::string, window> windows_;
  std::map<std::string, std::vector<std::string>> subsets_;
  std::vector<planned_job> jobs_;
  std::vector<manifest_sequence> flaky_sequences_;
  std::size_t successes_left_ = 0;
  std::uint64_t commit_counter_ = 0;
};

std::size_t generator::projects_for(const std::string& label) const {
  if (auto it = spec_.category_projects.find(label);
      it != spec_.category_projects.end())
    return it->second;
  for (const auto& c : reference_categories())
    if (c.label == label) return std::min(c.projects, spec_.n_projects);
  return spec_.n_projects;
}

void generator::make_windows() {
  const auto range = spec_.end - spec_.start;
  const auto at = [&](double frac) {
    return spec_.start + duration_cast<seconds>(range * frac);
  };
  for (const auto& label : labels_) {
    window w{spec_.start, spec_.end};
    if (spec_.category_activity) {
      const double u = rng_.uniform();
      if (u >= 0.8)
        w.begin = at(rng_.uniform(0.6, 0.85));
      else if (u >= 0.5)
        w.end = at(rng_.uniform(0.3, 0.7));
    }
    windows_[label] = w;
  }
}

void generator::make_project_subsets() {
  // Projects not yet given to any category go first so every project shows
  // up somewhere when the reach totals allow it.
  std::vector<std::size_t> unused(projects_.size());
  std::iota(unused.begin(), unused.end(), 0);
  for (const auto& label : labels_) {
    const auto want = projects_for(label);
    std::vector<std::size_t> pick;
    std::set<std::size_t> taken;
    while (pick.size() < want && !unused.empty()) {
      const auto i = rng_.below(unused.size());
      pick.push_back(unused[i]);
      taken.insert(unused[i]);
      unused.erase(unused.begin() + static_cast<std::ptrdiff_t>(i));
    }
    while (pick.size() < want) {
      const auto p = rng_.below(projects_.size());
      if (taken.insert(p).second) pick.push_back(p);
    }
    auto& subset = subsets_[label];
    for (auto p : pick) subset.push_back(projects_[p]);
  }
}

std::size_t generator::plant_flaky(const std::string& project,
                                   const std::optional<std::string>& category,
                                   std::size_t f) {
  // Shapes: [F*f, P], [P, F*f, P], [F*a, P, F*b, P].
  std::vector<job_status> shape;
  const double u = rng_.uniform();
  if (u < 0.75 || successes_left_ < 2) {
    shape.assign(f, job_status::failed);
    shape.push_back(job_status::success);
  } else if (u < 0.85 || f < 2) {
    shape.push_back(job_status::success);
    shape.insert(shape.end(), f, job_status::failed);
    shape.push_back(job_status::success);
  } else {
    const auto a = 1 + rng_.below(f - 1);
    shape.assign(a, job_status::failed);
    shape.push_back(job_status::success);
    shape.insert(shape.end(), f - a, job_status::failed);
    shape.push_back(job_status::success);
  }
  const auto n_success = static_cast<std::size_t>(
      std::count(shape.begin(), shape.end(), job_status::success));
  if (n_success > successes_left_)
    throw input_error(
        "corpus spec infeasible: flaky sequences need more successful jobs "
        "than the status mix provides");
  successes_left_ -= n_success;

  const auto initial = static_cast<std::size_t>(
      std::find(shape.begin(), shape.end(), job_status::failed) - shape.begin());
  std::vector<std::int64_t> dur(shape.size());
  for (auto& d : dur) d = draw_duration_s();

  std::int64_t after = 0;
  for (std::size_t i = initial + 1; i < shape.size(); ++i) after += dur[i];
  const double drawn = rng_.lognormal(spec_.delay_median_min * 60.0,
                                      spec_.delay_sigma);
  const std::int64_t delay_s =
      std::max(after, std::min<std::int64_t>(std::llround(drawn), kMaxDelayS));

  // Idle time between consecutive jobs after the initial failure, summing
  // to delay - (their durations).
  const std::size_t m = shape.size() - initial - 1;
  std::vector<std::int64_t> cuts{0, delay_s - after};
  for (std::size_t i = 1; i < m; ++i) cuts.push_back(rng_.between(0, delay_s - after));
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::int64_t> gaps(shape.size(), 0);
  for (std::size_t i = 0; i < m; ++i) gaps[initial + 1 + i] = cuts[i + 1] - cuts[i];
  for (std::size_t i = 1; i <= initial; ++i) gaps[i] = rng_.between(60, 3600);

  std::int64_t span = 0;
  for (std::size_t i = 0; i < shape.size(); ++i) span += gaps[i] + dur[i];
  const window w = category ? windows_.at(*category)
                            : window{spec_.start, spec_.end};
  const auto key = new_key(project);
  auto t = place(w, span);

  std::size_t kept = 0;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    planned_job job;
    job.key = key;
    job.status = shape[i];
    job.created = t + seconds(gaps[i]);
    job.duration_s = dur[i];
    job.finished = job.created + seconds(dur[i]);
    t = *job.finished;
    if (job.status == job_status::failed) {
      job.flaky = true;
      job.category = category;
      job.noise = !category;
      job.has_log = log_survives(job.created);
      if (job.has_log) {
        job.log = render_log(category);
        ++kept;
      }
    }
    jobs_.push_back(std::move(job));
  }
  flaky_sequences_.push_back(
      {key, static_cast<double>(delay_s) / 60.0, category});
  return kept;
}

void generator::plant_plain(job_status status, std::size_t count) {
  while (count > 0) {
    const std::size_t n = count >= 2 && rng_.bernoulli(spec_.plain_rerun_ratio) ? 2 : 1;
    count -= n;
    const auto key = new_key(projects_[rng_.below(projects_.size())]);
    std::vector<std::int64_t> dur(n), gaps(n, 0);
    std::int64_t span = 0;
    for (std::size_t i = 0; i < n; ++i) {
      dur[i] = draw_duration_s();
      if (i > 0) gaps[i] = rng_.between(60, 7200);
      span += dur[i] + gaps[i];
    }
    auto t = place({spec_.start, spec_.end}, span);
    for (std::size_t i = 0; i < n; ++i) {
      planned_job job;
      job.key = key;
      job.status = status;
      job.created = t + seconds(gaps[i]);
      job.duration_s = dur[i];
      job.finished = job.created + seconds(dur[i]);
      t = *job.finished;
      if (status == job_status::failed) {
        job.has_log = log_survives(job.created);
        if (job.has_log) {
          std::optional<std::string> marker;
          if (!labels_.empty() && rng_.bernoulli(0.5))
            marker = labels_[rng_.below(labels_.size())];
          job.log = render_log(marker);
        }
      }
      jobs_.push_back(std::move(job));
    }
  }
}

void generator::plant_incomplete(job_status status, std::size_t count) {
  const std::size_t completed = jobs_.size();
  for (std::size_t i = 0; i < count; ++i) {
    planned_job job;
    job.status = status;
    // Some land on keys that already have runs; they never count as runs.
    if (completed > 0 && rng_.bernoulli(0.3))
      job.key = jobs_[rng_.below(completed)].key;
    else
      job.key = new_key(projects_[rng_.below(projects_.size())]);
    if (status == job_status::canceled) {
      const auto d = std::max<std::int64_t>(1, draw_duration_s() / 3);
      job.created = place({spec_.start, spec_.end}, d);
      job.duration_s = d;
      job.finished = job.created + seconds(d);
    } else {
      job.created = place({spec_.start, spec_.end}, 0);
    }
    jobs_.push_back(std::move(job));
  }
}

synthetic_corpus generator::run() {
  std::vector<double> status_w;
  for (auto s : kStatuses) {
    auto it = spec_.status_weights.find(s);
    status_w.push_back(it == spec_.status_weights.end() ? 0.0 : it->second);
  }
  const double status_sum = std::accumulate(status_w.begin(), status_w.end(), 0.0);
  const double p_failed = status_w[1] / status_sum;

  std::size_t n_failed = 0;
  std::vector<std::size_t> counts;
  std::size_t flaky_planted = 0;

  const auto max_f = spec_.max_failures_per_sequence;
  if (spec_.exact_counts) {
    // Plan the flaky part first; job totals follow from it.
    struct plan {
      std::string project;
      std::optional<std::string> category;
      std::size_t f;
    };
    successes_left_ = std::numeric_limits<std::size_t>::max();
    std::size_t recovered_total = 0;
    for (const auto& label : labels_) {
      const auto target = static_cast<std::size_t>(spec_.category_weights.at(label));
      const auto& subset = subsets_.at(label);
      std::set<std::string> covered;
      std::size_t recovered = 0;
      std::size_t attempts = 0;
      while (recovered < target) {
        if (++attempts > 100 * target + 1000)
          throw input_error("corpus spec infeasible: cannot keep " +
                            std::to_string(target) + " logs for '" + label +
                            "' under the missing-log windows");
        std::vector<std::string> uncovered;
        for (const auto& p : subset)
          if (!covered.contains(p)) uncovered.push_back(p);
        const auto remaining = target - recovered;
        std::size_t f = 1 + rng_.below(max_f);
        std::string project;
        if (!uncovered.empty()) {
          project = uncovered.front();
          f = std::min(f, remaining - (uncovered.size() - 1));
        } else {
          project = subset[rng_.below(subset.size())];
          f = std::min(f, remaining);
        }
        const auto kept = plant_flaky(project, label, f);
        flaky_planted += f;
        recovered += kept;
        if (kept > 0) covered.insert(project);
      }
      recovered_total += recovered;
    }
    const auto noise = static_cast<std::size_t>(std::llround(
        static_cast<double>(flaky_planted) * spec_.noise_log_ratio /
        (1.0 - spec_.noise_log_ratio)));
    for (std::size_t left = noise; left > 0;) {
      const auto f = std::min<std::size_t>(1 + rng_.below(max_f), left);
      plant_flaky(projects_[rng_.below(projects_.size())], std::nullopt, f);
      left -= f;
    }
    flaky_planted += noise;
    (void)recovered_total;

    n_failed = flaky_planted == 0
                   ? 0
                   : static_cast<std::size_t>(std::ceil(
                         static_cast<double>(flaky_planted) / spec_.flaky_failure_ratio - 1e-9));
    const auto n_total = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n_failed) / p_failed - 1e-9));
    auto others = status_w;
    others[1] = 0.0;
    counts = apportion(n_total - n_failed, others);
    counts[1] = n_failed;

    std::size_t used_success = 0;
    for (const auto& j : jobs_) used_success += j.status == job_status::success;
    if (used_success > counts[0])
      throw input_error(
          "corpus spec infeasible: flaky sequences need more successful jobs "
          "than the status mix provides");
    successes_left_ = counts[0] - used_success;
  } else {
    counts = apportion(spec_.n_jobs, status_w);
    n_failed = counts[1];
    successes_left_ = counts[0];
    const auto target = static_cast<std::size_t>(
        std::llround(spec_.flaky_failure_ratio * static_cast<double>(n_failed)));
    std::vector<double> cum;
    double acc = 0;
    for (const auto& label : labels_) cum.push_back(acc += spec_.category_weights.at(label));
    while (flaky_planted < target) {
      const auto f = std::min<std::size_t>(1 + rng_.below(max_f), target - flaky_planted);
      std::optional<std::string> category;
      std::string project;
      if (labels_.empty() || rng_.bernoulli(spec_.noise_log_ratio)) {
        project = projects_[rng_.below(projects_.size())];
      } else {
        const double u = rng_.uniform() * acc;
        auto idx = static_cast<std::size_t>(
            std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        idx = std::min(idx, labels_.size() - 1);
        category = labels_[idx];
        const auto& subset = subsets_.at(*category);
        project = subset[rng_.below(subset.size())];
      }
      plant_flaky(project, category, f);
      flaky_planted += f;
    }
  }

  plant_plain(job_status::failed, n_failed - flaky_planted);
  plant_plain(job_status::success, successes_left_);
  for (std::size_t s = 2; s < kStatuses.size(); ++s)
    plant_incomplete(kStatuses[s], counts[s]);

  // Ids follow creation time; generation order breaks ties.
  std::vector<std::size_t> order(jobs_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return jobs_[a].created < jobs_[b].created;
  });

  synthetic_corpus out;
  auto& man = out.manifest;
  for (const auto& label : labels_) {
    manifest_category mc;
    mc.group = catalog_.group_of(label).value_or("");
    man.categories[label] = mc;
  }
  std::map<std::string, std::set<std::string>> reach;
  std::map<sequence_key, std::size_t> runs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& p = jobs_[order[i]];
    job_record rec;
    rec.id = 1'000'000 + static_cast<job_id>(i);
    rec.project = p.key.project;
    rec.name = p.key.name;
    rec.commit = p.key.commit;
    rec.status = p.status;
    rec.created_at = p.created;
    rec.finished_at = p.finished;
    if (p.duration_s) rec.duration_minutes = static_cast<double>(*p.duration_s) / 60.0;
    if (p.has_log) {
      rec.log_ref = rec.id;
      out.logs.emplace(rec.id, std::move(p.log));
    }
    man.latest = std::max(man.latest, p.finished.value_or(p.created));
    ++man.counts[std::string(to_string(p.status))];
    if (is_completed(p.status)) ++runs[p.key];
    if (p.flaky) {
      ++man.counts["flaky_failures"];
      if (!p.has_log) ++man.counts["missing_logs"];
      else if (p.noise) ++man.counts["noise"];
      if (p.category) {
        auto& mc = man.categories.at(*p.category);
        ++mc.planted;
        if (p.has_log) {
          ++mc.expected_labeled;
          ++man.counts["labeled"];
          reach[*p.category].insert(p.key.project);
        }
      }
    }
    man.jobs.push_back({rec.id, p.key, p.status, p.flaky, p.category,
                        p.has_log, p.noise});
    out.jobs.push_back(std::move(rec));
  }
  for (auto& [label, mc] : man.categories) mc.expected_projects = reach[label].size();
  man.counts["jobs"] = out.jobs.size();
  man.counts["completed"] = man.counts["success"] + man.counts["failed"];
  for (const auto& [key, n] : runs) man.counts["sequences"] += n >= 2;
  man.counts["flaky_sequences"] = flaky_sequences_.size();
  for (const char* k : {"success", "failed", "canceled", "skipped", "manual",
                        "created", "flaky_failures", "missing_logs", "noise",
                        "labeled", "sequences"})
    man.counts.try_emplace(k, 0);
  man.flaky_sequences = std::move(flaky_sequences_);
  return out;
}

timestamp parse_ts(const std::string& key, const std::string& text) {
  try {
    return parse_rfc3339(text);
  } catch (const input_error& e) {
    throw input_error("corpus spec: " + key + ": " + e.what());
  }
}

std::optional<job_status> status_by_name(std::string_view name) {
  for (auto s : kStatuses)
    if (to_string(s) == name) return s;
  return std::nullopt;
}

}  // namespace

corpus_spec corpus_spec::defaults() {
  corpus_spec spec;
  spec.start = parse_rfc3339("2018-02-01T00:00:00Z");
  spec.end = parse_rfc3339("2024-07-11T00:00:00Z");
  spec.status_weights = {{job_status::success, 109'509}, {job_status::failed, 31'058},
                         {job_status::skipped, 8'443},   {job_status::canceled, 5'804},
                         {job_status::manual, 2'588},    {job_status::created, 94}};
  double total = 0;
  for (const auto& c : reference_categories()) total += static_cast<double>(c.frequency);
  for (const auto& c : reference_categories())
    spec.category_weights[std::string(c.label)] = static_cast<double>(c.frequency) / total;
  return spec;
}

corpus_spec corpus_spec::from_kv(const kv_file& file) {
  static const std::set<std::string> known{
      "seed", "n_projects", "n_jobs", "start", "end", "flaky_failure_ratio",
      "noise_log_ratio", "max_failures_per_sequence", "plain_rerun_ratio",
      "delay_median_min", "delay_sigma", "duration_median_min",
      "duration_sigma", "exact_counts", "category_activity"};
  for (const auto& [key, value] : file.entries()) {
    if (known.contains(key) || key.starts_with("status.") ||
        key.starts_with("weight.") || key.starts_with("projects.") ||
        key.starts_with("missing_logs."))
      continue;
    throw input_error("corpus spec: unknown key '" + key + "'");
  }

  corpus_spec spec = defaults();
  spec.seed = static_cast<std::uint64_t>(file.get_int("seed", 1));
  const auto n_projects = file.get_int("n_projects", 80);
  const auto n_jobs = file.get_int("n_jobs", 20'000);
  if (n_projects < 1) throw input_error("corpus spec: n_projects must be >= 1");
  if (n_jobs < 0) throw input_error("corpus spec: n_jobs must be >= 0");
  spec.n_projects = static_cast<std::size_t>(n_projects);
  spec.n_jobs = static_cast<std::size_t>(n_jobs);
  if (auto v = file.get("start")) spec.start = parse_ts("start", *v);
  if (auto v = file.get("end")) spec.end = parse_ts("end", *v);
  spec.flaky_failure_ratio = file.get_double("flaky_failure_ratio", spec.flaky_failure_ratio);
  spec.noise_log_ratio = file.get_double("noise_log_ratio", spec.noise_log_ratio);
  const auto max_f = file.get_int("max_failures_per_sequence",
                                  static_cast<long long>(spec.max_failures_per_sequence));
  if (max_f < 0) throw input_error("corpus spec: max_failures_per_sequence must be >= 0");
  spec.max_failures_per_sequence = static_cast<std::size_t>(max_f);
  spec.plain_rerun_ratio = file.get_double("plain_rerun_ratio", spec.plain_rerun_ratio);
  spec.delay_median_min = file.get_double("delay_median_min", spec.delay_median_min);
  spec.delay_sigma = file.get_double("delay_sigma", spec.delay_sigma);
  spec.duration_median_min = file.get_double("duration_median_min", spec.duration_median_min);
  spec.duration_sigma = file.get_double("duration_sigma", spec.duration_sigma);
  spec.exact_counts = file.get_bool("exact_counts", false);
  spec.category_activity = file.get_bool("category_activity", true);

  const auto statuses = file.with_prefix("status.");
  if (!statuses.empty()) {
    spec.status_weights.clear();
    for (const auto& [name, value] : statuses) {
      const auto s = status_by_name(name);
      if (!s) throw input_error("corpus spec: unknown status 'status." + name + "'");
      spec.status_weights[*s] = file.get_double("status." + name, 0.0);
    }
  }

  const auto weights = file.with_prefix("weight.");
  if (!weights.empty()) {
    spec.category_weights.clear();
    for (const auto& [label, value] : weights)
      spec.category_weights[label] = file.get_double("weight." + label, 0.0);
  } else if (spec.exact_counts) {
    spec.category_weights.clear();
    for (const auto& c : reference_categories())
      spec.category_weights[std::string(c.label)] = static_cast<double>(c.frequency);
  }
  for (const auto& [label, value] : file.with_prefix("projects.")) {
    const auto n = file.get_int("projects." + label, 0);
    if (n < 0) throw input_error("corpus spec: projects." + label + " must be >= 0");
    spec.category_projects[label] = static_cast<std::size_t>(n);
  }

  for (const auto& [name, value] : file.with_prefix("missing_logs.")) {
    std::istringstream in(value);
    std::string b, e;
    double rate = -1;
    if (!(in >> b >> e >> rate))
      throw input_error("corpus spec: missing_logs." + name +
                        " must be '<begin> <end> <rate>'");
    spec.missing_log_windows.push_back(
        {parse_ts("missing_logs." + name, b), parse_ts("missing_logs." + name, e), rate});
  }

  spec.validate();
  return spec;
}

void corpus_spec::validate() const {
  const auto fail = [](const std::string& msg) {
    throw input_error("corpus spec: " + msg);
  };
  const auto unit = [&](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) fail(std::string(name) + " must be in [0, 1]");
  };
  if (n_projects < 1) fail("n_projects must be >= 1");
  if (!(start < end)) fail("start must precede end");
  if (end - start < days(30)) fail("date range must span at least 30 days");
  unit(flaky_failure_ratio, "flaky_failure_ratio");
  unit(noise_log_ratio, "noise_log_ratio");
  unit(plain_rerun_ratio, "plain_rerun_ratio");
  if (max_failures_per_sequence > 50) fail("max_failures_per_sequence must be <= 50");
  if (!(delay_median_min > 0) || !(duration_median_min > 0))
    fail("delay and duration medians must be > 0");
  if (!(delay_sigma >= 0) || !(duration_sigma >= 0)) fail("sigmas must be >= 0");
  for (const auto& w : missing_log_windows) {
    if (!(w.begin < w.end)) fail("missing-log window begin must precede end");
    unit(w.rate, "missing-log rate");
  }

  double status_sum = 0;
  for (const auto& [s, w] : status_weights) {
    if (!(w >= 0)) fail("status weights must be >= 0");
    status_sum += w;
  }
  if (!(status_sum > 0)) fail("status weights must not all be zero");

  const auto catalog = demo_catalog();
  const auto known = catalog.labels();
  double weight_sum = 0;
  for (const auto& [label, w] : category_weights) {
    if (!known.contains(label)) fail("no log template for category '" + label + "'");
    if (!(w >= 0)) fail("weight." + label + " must be >= 0");
    if (exact_counts && !is_integer(w))
      fail("weight." + label + " must be a whole count in exact mode");
    weight_sum += w;
  }
  for (const auto& [label, n] : category_projects) {
    auto it = category_weights.find(label);
    if (it == category_weights.end()) fail("projects." + label + " has no weight");
    if (n > n_projects) fail("projects." + label + " exceeds n_projects");
    if (it->second > 0 && n == 0) fail("projects." + label + " must be >= 1");
    if (exact_counts && static_cast<double>(n) > it->second)
      fail("projects." + label + " exceeds its failure count");
  }

  const auto failed_w = [&] {
    auto it = status_weights.find(job_status::failed);
    return it == status_weights.end() ? 0.0 : it->second;
  }();
  const auto success_w = [&] {
    auto it = status_weights.find(job_status::success);
    return it == status_weights.end() ? 0.0 : it->second;
  }();
  const bool wants_flaky = exact_counts ? weight_sum > 0 : flaky_failure_ratio > 0;
  if (wants_flaky) {
    if (max_failures_per_sequence == 0)
      fail("flaky failures requested but max_failures_per_sequence is 0");
    if (failed_w <= 0 || success_w <= 0)
      fail("flaky sequences need both failed and success status weight");
  }
  if (exact_counts) {
    if (wants_flaky && flaky_failure_ratio <= 0)
      fail("exact mode with category counts needs flaky_failure_ratio > 0");
    if (noise_log_ratio >= 1.0) fail("noise_log_ratio must be < 1 in exact mode");
    for (const auto& [label, w] : category_weights)
      if (w > 0 && !category_projects.contains(label)) {
        std::size_t reach = n_projects;
        for (const auto& c : reference_categories())
          if (c.label == label) reach = std::min(c.projects, n_projects);
        if (static_cast<double>(reach) > w)
          fail("default project reach of '" + label + "' exceeds its count");
      }
  } else if (!category_weights.empty() && std::abs(weight_sum - 1.0) > 1e-9) {
    fail("category weights must sum to 1 (got " + fmt("%.12g", weight_sum) + ")");
  }
}

synthetic_corpus generate_corpus(const corpus_spec& spec) {
  spec.validate();
  generator gen(spec);
  return gen.run();
}

void write_corpus(const synthetic_corpus& corpus, const corpus_spec& spec,
                  const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto open = [](const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw input_error("cannot write " + p.string());
    return out;
  };
  fs::create_directories(dir / "logs");

  {
    auto out = open(dir / "jobs.jsonl");
    for (const auto& job : corpus.jobs) {
      ordered_json obj;
      obj["id"] = job.id;
      obj["project"] = job.project;
      obj["name"] = job.name;
      obj["commit"] = job.commit;
      obj["status"] = to_string(job.status);
      obj["created_at"] = format_rfc3339(job.created_at);
      obj["finished_at"] = job.finished_at ? ordered_json(format_rfc3339(*job.finished_at))
                                           : ordered_json(nullptr);
      obj["duration_s"] = job.duration_minutes
                              ? ordered_json(std::llround(*job.duration_minutes * 60.0))
                              : ordered_json(nullptr);
      out << obj.dump() << '\n';
    }
  }
  for (const auto& [id, text] : corpus.logs)
    open(dir / "logs" / (std::to_string(id) + ".log")) << text;

  {
    auto out = open(dir / "catalog.tsv");
    write_rule_catalog(out, demo_catalog());
  }

  const auto& man = corpus.manifest;
  {
    auto out = open(dir / "truth.jsonl");
    for (const auto& job : man.jobs) {
      if (!job.flaky) continue;
      ordered_json obj;
      obj["job_id"] = job.id;
      obj["label"] = job.category ? ordered_json(*job.category) : ordered_json(nullptr);
      out << obj.dump() << '\n';
    }
  }

  ordered_json m;
  m["seed"] = spec.seed;
  m["exact_counts"] = spec.exact_counts;
  m["latest"] = format_rfc3339(man.latest);
  m["counts"] = ordered_json::object();
  for (const auto& [k, v] : man.counts) m["counts"][k] = v;
  m["categories"] = ordered_json::object();
  for (const auto& [label, c] : man.categories)
    m["categories"][label] = {{"group", c.group},
                              {"planted", c.planted},
                              {"expected_labeled", c.expected_labeled},
                              {"expected_projects", c.expected_projects}};
  auto seqs = ordered_json::array();
  for (const auto& s : man.flaky_sequences)
    seqs.push_back({{"project", s.key.project},
                    {"name", s.key.name},
                    {"commit", s.key.commit},
                    {"planted_delay_min", s.planted_delay_min},
                    {"category", s.category ? ordered_json(*s.category) : ordered_json(nullptr)}});
  m["flaky_sequences"] = std::move(seqs);
  auto jobs = ordered_json::array();
  for (const auto& j : man.jobs) {
    ordered_json obj;
    obj["id"] = j.id;
    obj["project"] = j.key.project;
    obj["name"] = j.key.name;
    obj["commit"] = j.key.commit;
    obj["status"] = to_string(j.status);
    obj["flaky"] = j.flaky;
    obj["category"] = j.category ? ordered_json(*j.category) : ordered_json(nullptr);
    obj["has_log"] = j.has_log;
    obj["noise"] = j.noise;
    jobs.push_back(std::move(obj));
  }
  m["jobs"] = std::move(jobs);
  open(dir / "manifest.json") << m.dump(1) << '\n';
}

std::map<job_id, std::optional<std::string>> load_truth(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path.string());
  std::map<job_id, std::optional<std::string>> truth;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(n) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw input_error(where + "invalid JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("job_id") || !obj["job_id"].is_number_integer())
      throw input_error(where + "missing integer field 'job_id'");
    if (!obj.contains("label") || !(obj["label"].is_null() || obj["label"].is_string()))
      throw input_error(where + "field 'label' must be a string or null");
    const auto id = obj["job_id"].get<job_id>();
    std::optional<std::string> label;
    if (obj["label"].is_string()) label = obj["label"].get<std::string>();
    if (!truth.emplace(id, std::move(label)).second)
      throw input_error(where + "duplicate job_id " + std::to_string(id));
  }
  return truth;
}

}  // namespace flakyci
