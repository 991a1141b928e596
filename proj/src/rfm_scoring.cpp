#include "flakyci/errors.hpp"
#include "flakyci/rfm.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace flakyci {

point3 rfm_record::measures() const {
  return {recency_days, static_cast<double>(frequency), monetary.units()};
}

void rfm_config::validate() const {
  if (k < 1) throw input_error("k must be >= 1");
  if (!(contamination > 0.0 && contamination < 0.5))
    throw input_error("contamination must lie in (0, 0.5)");
  if (kmeans_restarts < 1) throw input_error("kmeans_restarts must be >= 1");
  if (forest_trees < 1) throw input_error("forest_trees must be >= 1");
  if (forest_repeats < 1) throw input_error("forest_repeats must be >= 1");
}

double recency(std::span<const timestamp> occurrences, timestamp now,
               bool day_granularity) {
  if (occurrences.empty()) throw input_error("recency of an empty history");
  std::vector<timestamp> times(occurrences.begin(), occurrences.end());
  for (const auto t : times)
    if (t > now)
      throw input_error("occurrence " + format_rfc3339(t) +
                        " is after the analysis date " + format_rfc3339(now));
  if (day_granularity) {
    for (auto& t : times) t = floor_to_day(t);
    now = floor_to_day(now);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
  }
  std::sort(times.begin(), times.end(), std::greater<>{});
  const std::size_t n = std::min<std::size_t>(3, times.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += days_between(times[i], now);
  return total / static_cast<double>(n);
}

std::vector<rfm_record> build_rfm_table(std::span<const category_stats> stats,
                                        std::span<const category_cost> costs,
                                        const rfm_config& config) {
  std::map<std::string, money> by_label;
  for (const auto& c : costs) by_label[c.label] = c.total_cost;

  std::vector<rfm_record> table;
  table.reserve(stats.size());
  for (const auto& s : stats) {
    if (s.occurrences.empty() || s.frequency == 0)
      throw input_error("category '" + s.label + "' has no occurrences");
    const auto it = by_label.find(s.label);
    if (it == by_label.end())
      throw input_error("category '" + s.label + "' has no computed cost");
    rfm_record rec;
    rec.label = s.label;
    rec.recency_days =
        recency(s.occurrences, config.analysis_date, config.day_granularity);
    rec.frequency = s.frequency;
    rec.monetary = it->second;
    table.push_back(std::move(rec));
  }
  return table;
}

namespace {

/// Indices of `records` sorted by (value, label).
template <typename Key>
std::vector<std::size_t> rank_order(std::span<const rfm_record> records,
                                    Key key) {
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double ka = key(records[a]);
    const double kb = key(records[b]);
    if (ka != kb) return ka < kb;
    return records[a].label < records[b].label;
  });
  return idx;
}

int rank_bin(std::size_t rank, std::size_t n) {
  return static_cast<int>(rank * 5 / n);
}

double recency_key(const rfm_record& r) { return r.recency_days; }
double frequency_key(const rfm_record& r) {
  return static_cast<double>(r.frequency);
}
double monetary_key(const rfm_record& r) {
  return static_cast<double>(r.monetary.micros);
}

std::vector<quintile_bins::bin> bins_for(std::span<const rfm_record> records,
                                         double (*key)(const rfm_record&),
                                         int (*score)(const rfm_scores&)) {
  std::map<int, double> max_by_score;
  for (const auto& r : records) {
    const int s = score(*r.scores);
    const double v = key(r);
    const auto [it, inserted] = max_by_score.emplace(s, v);
    if (!inserted) it->second = std::max(it->second, v);
  }
  std::vector<quintile_bins::bin> bins;
  for (const auto& [s, v] : max_by_score) bins.push_back({s, v});
  std::sort(bins.begin(), bins.end(),
            [](const auto& a, const auto& b) { return a.max_value < b.max_value; });
  return bins;
}

int locate(const std::vector<quintile_bins::bin>& bins, double value,
           int beyond) {
  for (const auto& b : bins)
    if (value <= b.max_value) return b.score;
  return beyond;
}

}  // namespace

std::vector<rfm_record> quintile_scores(std::span<const rfm_record> inliers) {
  std::vector<rfm_record> out(inliers.begin(), inliers.end());
  const std::size_t n = out.size();
  if (n == 0) return out;
  for (auto& r : out) r.scores = rfm_scores{};

  const auto by_r = rank_order(inliers, recency_key);
  const auto by_f = rank_order(inliers, frequency_key);
  const auto by_m = rank_order(inliers, monetary_key);
  for (std::size_t rank = 0; rank < n; ++rank) {
    out[by_r[rank]].scores->r = 5 - rank_bin(rank, n);
    out[by_f[rank]].scores->f = rank_bin(rank, n) + 1;
    out[by_m[rank]].scores->m = rank_bin(rank, n) + 1;
  }
  return out;
}

quintile_bins compute_quintile_bins(std::span<const rfm_record> scored) {
  for (const auto& r : scored)
    if (!r.scores) throw invariant_error("quintile bins need scored records");
  quintile_bins bins;
  bins.recency = bins_for(scored, recency_key,
                          [](const rfm_scores& s) { return s.r; });
  bins.frequency = bins_for(scored, frequency_key,
                            [](const rfm_scores& s) { return s.f; });
  bins.monetary = bins_for(scored, monetary_key,
                           [](const rfm_scores& s) { return s.m; });
  return bins;
}

std::vector<rfm_record> score_outliers(std::span<const rfm_record> outliers,
                                       const quintile_bins& bins) {
  std::vector<rfm_record> out(outliers.begin(), outliers.end());
  for (auto& r : out) {
    rfm_scores s;
    s.r = std::clamp(locate(bins.recency, recency_key(r), 1), 1, 5);
    s.f = std::clamp(locate(bins.frequency, frequency_key(r), 5), 1, 5);
    s.m = std::clamp(locate(bins.monetary, monetary_key(r), 5), 1, 5);
    r.scores = s;
  }
  return out;
}

std::string rfm_pattern::to_string() const {
  std::string out;
  out += r_up ? "R↑" : "R↓";
  out += f_up ? "F↑" : "F↓";
  out += m_up ? "M↑" : "M↓";
  return out;
}

rfm_pattern cluster_pattern(const point3& cluster_avg,
                            const point3& overall_avg) {
  return {cluster_avg[0] > overall_avg[0], cluster_avg[1] > overall_avg[1],
          cluster_avg[2] > overall_avg[2]};
}

point3 mean_scores(std::span<const rfm_record> scored) {
  point3 sum{0, 0, 0};
  if (scored.empty()) return sum;
  for (const auto& r : scored) {
    if (!r.scores) throw invariant_error("mean of unscored record " + r.label);
    sum[0] += r.scores->r;
    sum[1] += r.scores->f;
    sum[2] += r.scores->m;
  }
  for (auto& v : sum) v /= static_cast<double>(scored.size());
  return sum;
}

}  // namespace flakyci
