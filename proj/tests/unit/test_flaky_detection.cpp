#include "flakyci/flaky_detection.hpp"
#include "flakyci/rng.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <map>
#include <set>
#include <tuple>

using namespace flakyci;
using testing::F;
using testing::job;
using testing::S;

namespace {

rerun_sequence seq_of(std::initializer_list<job_status> statuses) {
  std::vector<job_record> jobs;
  job_id id = 1;
  double t = 0;
  for (auto s : statuses) {
    jobs.push_back(job(id++, s, t, 1));
    t += 5;
  }
  return group_rerun_sequences(jobs).at(0);
}

}  // namespace

TEST_CASE("grouping") {
  CHECK(group_rerun_sequences(std::vector{job(1, S, 0, 1), job(2, F, 5, 1)}).size() == 1);
  CHECK(group_rerun_sequences(std::vector{job(1, S, 0, 1, "a"), job(2, F, 5, 1, "b")}).empty());
  // created_at then id orders the members
  const auto seqs = group_rerun_sequences(
      std::vector{job(5, S, 10, 1), job(3, F, 0, 1), job(4, F, 10, 1)});
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].jobs[0].id == 3);
  CHECK(seqs[0].jobs[1].id == 4);
  CHECK(seqs[0].jobs[2].id == 5);
}

TEST_CASE("classify_flaky") {
  CHECK(classify_flaky(seq_of({F, F, F, S})));
  CHECK_FALSE(classify_flaky(seq_of({F, F})));
  CHECK(classify_flaky(seq_of({S, F, S})));
  CHECK_FALSE(classify_flaky(seq_of({S, S})));
}

TEST_CASE("extract_flaky_failures marks the first failure initial") {
  const auto seqs = std::vector{seq_of({F, F, F, S})};
  const auto out = extract_flaky_failures(seqs);
  REQUIRE(out.size() == 3);
  CHECK(out[0].is_initial);
  CHECK_FALSE(out[1].is_initial);
  CHECK_FALSE(out[2].is_initial);
  CHECK(extract_flaky_failures(std::vector{seq_of({S, S})}).empty());

  const auto mid = std::vector{seq_of({S, F, S, F})};
  const auto m = extract_flaky_failures(mid);
  REQUIRE(m.size() == 2);
  CHECK(m[0].job.id == 2);
  CHECK(m[0].is_initial);
}

TEST_CASE("grouping and flaky set match a brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    rng r(seed);
    std::vector<job_record> jobs;
    for (job_id i = 0; i < 500; ++i)
      jobs.push_back(job(i, r.bernoulli(0.6) ? S : F, static_cast<double>(r.below(1000)), 1,
                         "c" + std::to_string(r.below(60)), "p" + std::to_string(r.below(3)),
                         r.bernoulli(0.5) ? "build" : "test"));

    // Oracle: nested scan per key.
    std::set<std::tuple<std::string, std::string, std::string>> keys;
    for (const auto& j : jobs) keys.emplace(j.project, j.name, j.commit);
    std::set<job_id> oracle_flaky;
    std::size_t oracle_sequences = 0;
    for (const auto& [p, n, c] : keys) {
      std::vector<const job_record*> members;
      for (const auto& j : jobs)
        if (j.project == p && j.name == n && j.commit == c) members.push_back(&j);
      if (members.size() < 2) continue;
      ++oracle_sequences;
      bool has_s = false, has_f = false;
      for (auto* m : members) (m->status == S ? has_s : has_f) = true;
      if (has_s && has_f)
        for (auto* m : members)
          if (m->status == F) oracle_flaky.insert(m->id);
    }

    const auto seqs = group_rerun_sequences(jobs);
    CHECK(seqs.size() == oracle_sequences);
    std::set<job_id> got;
    for (const auto& f : extract_flaky_failures(seqs)) got.insert(f.job.id);
    CHECK(got == oracle_flaky);
  }
}
