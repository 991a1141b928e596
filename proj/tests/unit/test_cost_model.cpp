#include "flakyci/category_stats.hpp"
#include "flakyci/cost_model.hpp"
#include "flakyci/errors.hpp"
#include "flakyci/rng.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace flakyci;
using testing::F;
using testing::job;
using testing::S;

namespace {

const money rate_m = money::from_units(0.14);
const money rate_d = money::from_units(0.6);

rerun_sequence make_seq(std::vector<job_record> jobs) {
  return group_rerun_sequences(jobs).at(0);
}

labeled_failure labeled(const flaky_failure& f, const std::string& label) {
  labeled_failure l;
  l.failure = f;
  l.label = label;
  return l;
}

}  // namespace

TEST_CASE("machine cost") {
  CHECK(machine_cost(std::vector<double>{}, rate_m).micros == 0);
  CHECK(machine_cost(std::vector<double>{1.0}, rate_m).to_cents_string() == "0.14");
  const auto m = machine_cost(std::vector<double>{10, 20, 30}, rate_m);
  CHECK(m.micros == 8'400'000);
  CHECK(m.to_cents_string() == "8.40");
}

TEST_CASE("diagnosis delay") {
  // initial failure finishes at 10:00, last rerun at 10:30
  CHECK(diagnosis_delay_minutes(make_seq({job(1, F, -5, 5), job(2, S, 20, 10)})) == 30.0);
  CHECK(diagnosis_delay_minutes(make_seq({job(1, F, 0, 5), job(2, S, 0, 5)})) == 0.0);
  // [F,F,F,P] finishing at t, t+5, t+12, t+20
  CHECK(diagnosis_delay_minutes(make_seq({job(1, F, 0, 1), job(2, F, 2, 4), job(3, F, 10, 3),
                                          job(4, S, 15, 6)})) == 20.0);
  // overlapping rerun finishing before the initial failure clamps to zero
  CHECK(diagnosis_delay_minutes(make_seq({job(1, F, 0, 30), job(2, S, 1, 2)})) == 0.0);
}

TEST_CASE("diagnosis cost") {
  const auto s30 = make_seq({job(1, F, 0, 0), job(2, S, 0, 30)});
  const auto s100 = make_seq({job(3, F, 0, 0, "c2"), job(4, S, 0, 100, "c2")});
  CHECK(diagnosis_cost(std::vector{s30}, rate_d).to_cents_string() == "18.00");
  CHECK(diagnosis_cost(std::vector<rerun_sequence>{}, rate_d).micros == 0);
  CHECK(diagnosis_cost(std::vector{s30, s100}, rate_d).to_cents_string() == "78.00");
}

TEST_CASE("category cost fixture") {
  // [F(10), F(20), P] with a 30-minute delay
  const auto seq = make_seq({job(1, F, 0, 10), job(2, F, 10, 20), job(3, S, 30, 10)});
  const auto failures = extract_flaky_failures(std::vector{seq});
  const auto c = compute_category_cost("x", failures, std::vector{seq}, cost_config{});
  CHECK(c.machine_cost.to_cents_string() == "4.20");
  CHECK(c.diagnosis_cost.to_cents_string() == "18.00");
  CHECK(c.total_cost.to_cents_string() == "22.20");
  CHECK(c.n_failures == 2);
  CHECK(c.n_initial == 1);

  const auto empty = compute_category_cost("x", {}, {}, cost_config{});
  CHECK(empty.total_cost.micros == 0);
  CHECK(empty.diagnosis_share() == 0.0);
  CHECK_THROWS_AS(compute_category_cost("x", {}, std::vector{seq}, cost_config{}),
                  invariant_error);
}

TEST_CASE("costs are additive and match an independent recomputation") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    rng r(seed);
    std::vector<job_record> jobs;
    job_id id = 0;
    const auto n_seq = 1 + r.below(4);
    for (std::uint64_t s = 0; s < n_seq; ++s) {
      const auto c = "c" + std::to_string(s);
      double t = static_cast<double>(r.below(1000));
      const auto fails = 1 + r.below(3);
      for (std::uint64_t k = 0; k < fails; ++k) {
        const double d = static_cast<double>(r.below(6000)) / 60.0;
        jobs.push_back(job(id++, F, t, d, c));
        t += d + static_cast<double>(r.below(500));
      }
      jobs.push_back(job(id++, S, t, static_cast<double>(r.below(600)) / 7.0, c));
    }
    const auto seqs = group_rerun_sequences(jobs);
    const auto failures = extract_flaky_failures(seqs);
    const auto c = compute_category_cost("x", failures, seqs, cost_config{});
    CHECK(c.total_cost == c.machine_cost + c.diagnosis_cost);

    // Oracle in integer micros from raw records.
    std::int64_t machine = 0;
    for (const auto& j : jobs)
      if (j.status == F) machine += std::llround(*j.duration_minutes * 140'000.0);
    std::int64_t diag = 0;
    for (const auto& s : seqs) {
      const job_record* first = nullptr;
      for (const auto& j : s.jobs)
        if (j.status == F && !first) first = &j;
      const auto ms = std::max<std::int64_t>(
          0, (*s.jobs.back().finished_at - *first->finished_at).count());
      diag += static_cast<std::int64_t>((static_cast<__int128>(ms) * 600'000 + 30'000) / 60'000);
    }
    CHECK(c.machine_cost.micros == machine);
    CHECK(c.diagnosis_cost.micros == diag);
  }
}

TEST_CASE("delay is charged to the initial failure's label only") {
  // [F(a), F(b), P]: machine cost splits, delay goes to a
  const auto seq = make_seq({job(1, F, 0, 10), job(2, F, 10, 20), job(3, S, 30, 10)});
  const auto f = extract_flaky_failures(std::vector{seq});
  const std::vector<labeled_failure> ls{labeled(f[0], "a"), labeled(f[1], "b")};
  const auto costs = compute_costs(ls, std::vector{seq}, cost_config{});
  REQUIRE(costs.size() == 2);
  CHECK(costs[0].label == "a");
  CHECK(costs[0].machine_cost.to_cents_string() == "1.40");
  CHECK(costs[0].diagnosis_cost.to_cents_string() == "18.00");
  CHECK(costs[0].n_initial == 1);
  CHECK(costs[1].machine_cost.to_cents_string() == "2.80");
  CHECK(costs[1].diagnosis_cost.micros == 0);
  CHECK(costs[1].n_initial == 0);
}

TEST_CASE("category stats match a group-by oracle") {
  std::istringstream tsv(
      "10\tra\ta\tG1\tA\n20\trb\tb\tG1\tB\n30\trc\tc\tG2\tC\n");
  const auto cat = load_rule_catalog(tsv);
  rng r(9);
  std::vector<labeled_failure> ls;
  for (job_id i = 0; i < 300; ++i) {
    flaky_failure f;
    f.job = job(i, F, static_cast<double>(r.below(100'000)), 1, "c",
                "p" + std::to_string(r.below(7)));
    const char* labels[] = {"a", "b", "c"};
    ls.push_back(labeled(f, labels[r.below(3)]));
  }
  const auto stats = compute_category_stats(ls, cat);
  std::map<std::string, std::pair<std::size_t, std::set<std::string>>> oracle;
  for (const auto& l : ls) {
    ++oracle[*l.label].first;
    oracle[*l.label].second.insert(l.failure.job.project);
  }
  REQUIRE(stats.size() == oracle.size());
  double pct = 0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& s = stats[i];
    CHECK(s.frequency == oracle[s.label].first);
    CHECK(s.projects_affected == oracle[s.label].second.size());
    CHECK(s.occurrences.size() == s.frequency);
    CHECK(std::is_sorted(s.occurrences.begin(), s.occurrences.end()));
    if (i > 0) CHECK(stats[i - 1].frequency >= s.frequency);
    pct += s.proportion;
  }
  CHECK(std::abs(pct - 100.0) < 1e-9);
  CHECK(stats[0].group == cat.group_of(stats[0].label));
}

TEST_CASE("single category is 100 percent; largest reference category") {
  std::istringstream tsv("10\tr\tmisconfigured_env_variable\tEnvironment Variables\tx\n"
                         "20\ts\tother\tG\ty\n");
  const auto cat = load_rule_catalog(tsv);
  std::vector<labeled_failure> ls;
  for (job_id i = 0; i < 673; ++i) {
    flaky_failure f;
    f.job = job(i, F, static_cast<double>(i), 1, "c", "p" + std::to_string(i % 35));
    ls.push_back(labeled(f, "misconfigured_env_variable"));
  }
  auto stats = compute_category_stats(ls, cat);
  REQUIRE(stats.size() == 1);
  CHECK(stats[0].proportion == 100.0);
  for (job_id i = 0; i < 3838; ++i) {
    flaky_failure f;
    f.job = job(10'000 + i, F, 1, 1);
    ls.push_back(labeled(f, "other"));
  }
  stats = compute_category_stats(ls, cat);
  const auto& top = stats.at(1);
  CHECK(top.frequency == 673);
  CHECK(top.projects_affected == 35);
  CHECK(std::abs(top.proportion - 14.92) < 0.005);
}

TEST_CASE("timeline dedups days and can carry missing logs") {
  std::vector<labeled_failure> ls;
  for (double day : {0.0, 0.1, 2.0}) {
    flaky_failure f;
    f.job = job(static_cast<job_id>(day * 10), F, day * 1440, 1);
    ls.push_back(labeled(f, "a"));
  }
  flaky_failure missing;
  missing.job = job(99, F, 5 * 1440, 1);
  const auto series = timeline_series(ls);
  REQUIRE(series.size() == 1);
  CHECK(series.at("a") == std::vector<std::string>{"2024-01-10", "2024-01-12"});
  const auto with = timeline_series(ls, std::vector{missing}, true);
  CHECK(with.at(std::string(missing_logs_series)) == std::vector<std::string>{"2024-01-15"});
  CHECK(timeline_series({}).empty());
}
