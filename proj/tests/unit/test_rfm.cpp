#include "flakyci/errors.hpp"
#include "flakyci/rfm.hpp"
#include "flakyci/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

using namespace flakyci;
using namespace std::chrono;

namespace {

timestamp now() { return parse_rfc3339("2024-07-11T00:00:00Z"); }

timestamp days_ago(double d) {
  return now() - milliseconds(static_cast<long long>(std::llround(d * 86'400'000.0)));
}

rfm_record rec(std::string label, double r, std::size_t f, double m) {
  rfm_record x;
  x.label = std::move(label);
  x.recency_days = r;
  x.frequency = f;
  x.monetary = money::from_units(m);
  return x;
}

rfm_record scored(std::string label, int r, int f, int m) {
  auto x = rec(std::move(label), 0, 0, 0);
  x.scores = rfm_scores{r, f, m};
  return x;
}

// Scores by slicing the sorted order into five contiguous blocks whose
// boundaries are ceil(b·N/5).
std::vector<int> slice_oracle(std::vector<std::pair<double, std::string>> keyed,
                              const std::vector<std::string>& labels, bool high_is_good) {
  std::sort(keyed.begin(), keyed.end());
  const std::size_t n = keyed.size();
  std::map<std::string, int> block;
  for (std::size_t b = 0; b < 5; ++b) {
    const std::size_t lo = (b * n + 4) / 5;
    const std::size_t hi = ((b + 1) * n + 4) / 5;
    for (std::size_t i = lo; i < hi; ++i) block[keyed[i].second] = static_cast<int>(b);
  }
  std::vector<int> out;
  for (const auto& l : labels) out.push_back(high_is_good ? block[l] + 1 : 5 - block[l]);
  return out;
}

}  // namespace

TEST_CASE("recency averages the three most recent occurrences") {
  std::vector<timestamp> t{days_ago(5), days_ago(5), days_ago(5)};
  CHECK(recency(t, now()) == doctest::Approx(5.0));
  CHECK(recency(std::vector{days_ago(40)}, now()) == doctest::Approx(40.0));
  std::vector<timestamp> flaky{days_ago(400), days_ago(36), days_ago(2), days_ago(10), days_ago(90)};
  CHECK(std::abs(recency(flaky, now()) - 16.0) < 1e-9);
  CHECK_THROWS_AS(recency(std::vector<timestamp>{}, now()), input_error);
  CHECK_THROWS_AS(recency(std::vector{now() + hours(1)}, now()), input_error);
  // day granularity: same-day repeats collapse
  std::vector<timestamp> same_day{days_ago(2) + hours(1), days_ago(2) + hours(2), days_ago(3)};
  CHECK(recency(same_day, now(), true) == doctest::Approx(2.5));
}

TEST_CASE("build_rfm_table carries measures through") {
  category_stats s;
  s.label = "misconfigured_env_variable";
  s.frequency = 673;
  s.occurrences = {days_ago(27), days_ago(27), days_ago(27)};
  category_cost c;
  c.label = s.label;
  c.total_cost = money::from_units(444'689);
  rfm_config cfg;
  cfg.analysis_date = now();
  const auto table = build_rfm_table(std::vector{s}, std::vector{c}, cfg);
  REQUIRE(table.size() == 1);
  CHECK(table[0].recency_days == doctest::Approx(27.0));
  CHECK(table[0].frequency == 673);
  CHECK(table[0].monetary.to_cents_string() == "444689.00");
  CHECK_THROWS_AS(build_rfm_table(std::vector{s}, std::vector<category_cost>{}, cfg), input_error);
}

TEST_CASE("quintile fixtures") {
  std::vector<rfm_record> items;
  for (std::size_t f = 1; f <= 10; ++f) items.push_back(rec("c" + std::to_string(f + 10), 1, f, 1));
  const auto s = quintile_scores(items);
  std::vector<int> fs;
  for (const auto& r : s) fs.push_back(r.scores->f);
  CHECK(fs == std::vector<int>{1, 1, 2, 2, 3, 3, 4, 4, 5, 5});

  const auto one = quintile_scores(std::vector{rec("a", 3, 3, 3)});
  CHECK(one[0].scores->f == 1);
  CHECK(one[0].scores->r == 5);
}

TEST_CASE("quintile scores match the rank-slice oracle") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    rng g(seed);
    std::vector<rfm_record> items;
    std::vector<std::string> labels;
    for (int i = 0; i < 41; ++i) {
      labels.push_back("cat" + std::to_string(100 + g.below(900)) + "_" + std::to_string(i));
      // small ranges force ties; labels break them
      items.push_back(rec(labels.back(), static_cast<double>(g.below(30)),
                          g.below(20), static_cast<double>(g.below(50))));
    }
    const auto s = quintile_scores(items);
    std::vector<std::pair<double, std::string>> kr, kf, km;
    for (const auto& r : items) {
      kr.emplace_back(r.recency_days, r.label);
      kf.emplace_back(static_cast<double>(r.frequency), r.label);
      km.emplace_back(static_cast<double>(r.monetary.micros), r.label);
    }
    const auto orr = slice_oracle(kr, labels, false);
    const auto off = slice_oracle(kf, labels, true);
    const auto om = slice_oracle(km, labels, true);
    std::array<std::array<int, 5>, 3> sizes{};
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].scores->r == orr[i]);
      CHECK(s[i].scores->f == off[i]);
      CHECK(s[i].scores->m == om[i]);
      for (int v : {s[i].scores->r, s[i].scores->f, s[i].scores->m}) CHECK((v >= 1 && v <= 5));
      ++sizes[0][s[i].scores->r - 1];
      ++sizes[1][s[i].scores->f - 1];
      ++sizes[2][s[i].scores->m - 1];
    }
    for (const auto& dim : sizes)
      CHECK(*std::max_element(dim.begin(), dim.end()) - *std::min_element(dim.begin(), dim.end()) <= 1);
  }
}

TEST_CASE("outliers are scored against inlier bins") {
  // 41 inliers spread like a typical category table
  std::vector<rfm_record> inliers;
  for (int i = 0; i < 41; ++i)
    inliers.push_back(rec("in" + std::to_string(100 + i), 15.0 + 20.0 * i, 2 + 5 * i,
                          700.0 + 5'000.0 * i));
  const auto s = quintile_scores(inliers);
  const auto bins = compute_quintile_bins(s);
  const auto out = score_outliers(
      std::vector{rec("misconfigured_env_variable", 27, 673, 444'689),
                  rec("image_build_permission_denied", 1415, 8, 702)},
      bins);
  const auto overall = mean_scores(s);
  point3 top{double(out[0].scores->r), double(out[0].scores->f), double(out[0].scores->m)};
  point3 old{double(out[1].scores->r), double(out[1].scores->f), double(out[1].scores->m)};
  CHECK(cluster_pattern(top, overall).to_string() == "R↑F↑M↑");
  CHECK(cluster_pattern(old, overall).to_string() == "R↓F↓M↓");

  // equal to an inlier's value → that inlier's score
  for (const auto& in : s) {
    const auto echo = score_outliers(std::vector{rec("echo", in.recency_days, in.frequency,
                                                     in.monetary.units())},
                                     bins);
    CHECK(*echo[0].scores == *in.scores);
  }
}

TEST_CASE("isolation forest scores") {
  CHECK(average_path_length(0) == 0.0);
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(2) == 1.0);
  const double euler = 0.5772156649015329;
  CHECK(average_path_length(256) ==
        doctest::Approx(2.0 * (std::log(255.0) + euler) - 2.0 * 255.0 / 256.0));

  std::vector<point3> pts;
  rng g(1);
  for (int i = 0; i < 60; ++i) pts.push_back({g.uniform(0, 1), g.uniform(0, 1), g.uniform(0, 1)});
  pts.push_back({50, 50, 50});
  const auto s = isolation_forest_scores(pts, 200, 256, 7);
  REQUIRE(s.size() == pts.size());
  for (double v : s) CHECK((v > 0.0 && v <= 1.0));
  CHECK(std::max_element(s.begin(), s.end()) - s.begin() == 60);
  CHECK(isolation_forest_scores(pts, 200, 256, 7) == s);
}

TEST_CASE("detect_outliers flags the planted extreme every run") {
  std::vector<rfm_record> recs;
  rng g(2);
  for (int i = 0; i < 45; ++i)
    recs.push_back(rec("c" + std::to_string(10 + i), 30 + g.uniform(-1, 1),
                       static_cast<std::size_t>(100 + g.between(-2, 2)), 1e4 + g.uniform(-50, 50)));
  recs.push_back(rec("extreme", 1500, 1, 1e6));
  rfm_config cfg;
  cfg.forest_trees = 100;
  cfg.forest_repeats = 20;
  cfg.seed = 3;
  const auto rep = detect_outliers(recs, cfg);
  CHECK(rep.flagged_per_run == 5);
  CHECK(rep.runs == 20);
  CHECK(rep.outliers.contains("extreme"));

  cfg.contamination = 0.02;  // round(0.92) = 1
  const auto one = detect_outliers(recs, cfg);
  CHECK(one.outliers == std::set<std::string>{"extreme"});
  CHECK(one.stable_runs == 20);
}

TEST_CASE("identical points report instability instead of inventing outliers") {
  std::vector<rfm_record> recs;
  for (int i = 0; i < 20; ++i) recs.push_back(rec("c" + std::to_string(10 + i), 5, 5, 5));
  rfm_config cfg;
  cfg.forest_trees = 50;
  cfg.forest_repeats = 5;
  const auto rep = detect_outliers(recs, cfg);
  CHECK(rep.outliers.empty());
  CHECK(rep.tied_runs == 5);
}

TEST_CASE("k-means basics") {
  std::vector<point3> eight;
  for (int i = 0; i < 8; ++i) eight.push_back({double(i % 5 + 1), double(i / 5 + 1), double(i % 3 + 1)});
  const auto r = kmeans_best(eight, 8, 50, 300, 1);
  CHECK(r.sse == 0.0);
  std::vector<std::size_t> a = r.assignment;
  std::sort(a.begin(), a.end());
  CHECK(std::unique(a.begin(), a.end()) == a.end());

  // k = 1: centroid is the mean
  std::vector<point3> pts{{1, 2, 3}, {3, 2, 1}, {5, 5, 5}, {1, 1, 1}};
  const auto one = kmeans_single(pts, 1, 100, 0);
  const point3 mean{2.5, 2.5, 2.5};
  double sse = 0;
  for (const auto& p : pts) sse += squared_distance(p, mean);
  CHECK(one.centroids[0][0] == doctest::Approx(2.5));
  CHECK(one.sse == doctest::Approx(sse));
  CHECK_THROWS_AS(kmeans_best(pts, 5, 10, 10, 0), input_error);
}

TEST_CASE("k-means recovers a planted partition and SSE never rises") {
  const std::array<point3, 4> centers{{{1, 1, 1}, {5, 5, 5}, {1, 5, 1}, {5, 1, 5}}};
  std::vector<point3> pts;
  std::vector<std::size_t> truth;
  rng g(4);
  for (std::size_t c = 0; c < 4; ++c)
    for (int i = 0; i < 10; ++i) {
      pts.push_back({centers[c][0] + g.uniform(-0.3, 0.3), centers[c][1] + g.uniform(-0.3, 0.3),
                     centers[c][2] + g.uniform(-0.3, 0.3)});
      truth.push_back(c);
    }
  double oracle = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    point3 m{0, 0, 0};
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (truth[i] == c)
        for (int d = 0; d < 3; ++d) m[d] += pts[i][d] / 10.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (truth[i] == c) oracle += squared_distance(pts[i], m);
  }
  for (std::uint64_t run = 0; run < 50; ++run) {
    const auto r = kmeans_single(pts, 4, 300, derive_seed(9, run));
    for (std::size_t i = 1; i < r.sse_history.size(); ++i)
      CHECK(r.sse_history[i] <= r.sse_history[i - 1] * (1 + 1e-12));
  }
  const auto best = kmeans_best(pts, 4, 100, 300, 9);
  CHECK(std::abs(best.sse - oracle) < 1e-9);
  std::map<std::size_t, std::size_t> mapping;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [it, fresh] = mapping.emplace(truth[i], best.assignment[i]);
    CHECK(it->second == best.assignment[i]);
  }
}

TEST_CASE("cluster patterns") {
  const point3 overall{3.03, 2.91, 2.95};
  CHECK(cluster_pattern({4.83, 4.67, 4.67}, overall).to_string() == "R↑F↑M↑");
  CHECK(cluster_pattern({1.00, 1.14, 1.43}, overall).to_string() == "R↓F↓M↓");
  CHECK(cluster_pattern({3.03, 3.0, 2.0}, overall).to_string() == "R↓F↑M↓");
}

TEST_CASE("reference cluster descriptions") {
  struct row {
    const char* id;
    point3 avg;
    const char* expected;
  };
  const std::vector<row> rows{
      {"C1", {4.83, 4.67, 4.67}, "High Priority"},   {"C2", {4.50, 3.83, 3.17}, "Medium Priority"},
      {"C3", {3.60, 2.60, 2.40}, "Low Priority"},    {"C4", {3.75, 1.50, 1.00}, "Emerging Issues"},
      {"C5", {2.80, 4.80, 4.20}, "Idle"},            {"C6", {2.00, 2.00, 4.75}, "Relic"},
      {"C7", {1.75, 2.75, 2.00}, "Negligible"},      {"C8", {1.00, 1.14, 1.43}, "Irrelevant"}};
  const point3 overall{3.03, 2.91, 2.95};
  std::vector<cluster> clusters;
  std::vector<rfm_record> members;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    cluster c;
    c.id = i + 1;
    c.avg_scores = rows[i].avg;
    c.pattern = cluster_pattern(rows[i].avg, overall);
    c.members = {std::string("member_") + rows[i].id};
    clusters.push_back(c);
    members.push_back(scored(c.members[0], 3, 3, 3));
  }
  const auto outlier = [&] {
    auto r = rec("misconfigured_env_variable", 27, 673, 444'689);
    r.scores = rfm_scores{5, 5, 5};
    return r;
  }();
  const auto p = assign_priority(clusters, members, std::vector{outlier}, overall);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK_MESSAGE(clusters[i].description == rows[i].expected, rows[i].id);
  REQUIRE(p.rows.size() == 9);
  CHECK(p.rows[0].label == "misconfigured_env_variable");
  CHECK(p.rows[0].description == "Top");
  CHECK_FALSE(p.rows[0].cluster_id);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(p.rows[i + 1].description == rows[i].expected);
}

TEST_CASE("single cold cluster is irrelevant") {
  cluster c;
  c.id = 1;
  c.pattern = {false, false, false};
  CHECK(describe_clusters(std::vector{c}) == std::vector<std::string>{"Irrelevant"});
  CHECK(describe_outlier({true, true, true}) == "Top");
  CHECK(describe_outlier({false, true, true}) == "Idle");
  CHECK(describe_outlier({true, false, true}) == "Watch");
}

TEST_CASE("analyze_rfm degrades on small tables") {
  rfm_config cfg;
  cfg.kmeans_restarts = 10;
  cfg.forest_trees = 20;
  cfg.forest_repeats = 3;
  const auto empty = analyze_rfm({}, cfg);
  CHECK(empty.priorities.rows.empty());
  const auto three = analyze_rfm({rec("a", 1, 10, 100), rec("b", 50, 2, 10), rec("c", 9, 5, 50)}, cfg);
  CHECK(three.k_used == 3);
  CHECK_FALSE(three.outliers);
  CHECK(three.priorities.rows.size() == 3);
  CHECK_FALSE(three.notes.empty());
}
