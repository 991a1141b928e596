#include "flakyci/errors.hpp"
#include "flakyci/rfm.hpp"
#include "flakyci/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flakyci {
namespace {

constexpr double euler_gamma = 0.5772156649015329;

struct tree_node {
  // Leaves have dimension < 0 and record how many samples reached them.
  int dimension = -1;
  double split = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t size = 0;
};

class isolation_tree {
 public:
  isolation_tree(std::span<const point3> points, std::vector<std::size_t> sample,
                 rng& random) {
    const auto limit = static_cast<std::size_t>(
        std::ceil(std::log2(std::max<std::size_t>(sample.size(), 2))));
    build(points, sample, 0, limit, random);
  }

  double path_length(const point3& x) const {
    std::size_t node = 0;
    double depth = 0.0;
    while (nodes_[node].dimension >= 0) {
      const auto& n = nodes_[node];
      node = x[static_cast<std::size_t>(n.dimension)] < n.split ? n.left : n.right;
      depth += 1.0;
    }
    return depth + average_path_length(nodes_[node].size);
  }

 private:
  std::size_t build(std::span<const point3> points,
                    std::span<std::size_t> sample, std::size_t depth,
                    std::size_t limit, rng& random) {
    const std::size_t index = nodes_.size();
    nodes_.push_back(tree_node{-1, 0.0, 0, 0, sample.size()});
    if (sample.size() <= 1 || depth >= limit) return index;

    // Only dimensions that still vary can separate the sample.
    std::array<std::pair<double, double>, 3> range{};
    std::array<int, 3> varying{};
    int n_varying = 0;
    for (int d = 0; d < 3; ++d) {
      auto lo = points[sample[0]][d];
      auto hi = lo;
      for (const auto i : sample) {
        lo = std::min(lo, points[i][d]);
        hi = std::max(hi, points[i][d]);
      }
      range[d] = {lo, hi};
      if (hi > lo) varying[n_varying++] = d;
    }
    if (n_varying == 0) return index;

    const int dim = varying[random.below(static_cast<std::uint64_t>(n_varying))];
    const auto [lo, hi] = range[dim];
    double split = random.uniform(lo, hi);
    if (split <= lo) split = std::nextafter(lo, hi);

    const auto mid = std::partition(
        sample.begin(), sample.end(),
        [&](std::size_t i) { return points[i][dim] < split; });
    const auto n_left = static_cast<std::size_t>(mid - sample.begin());

    nodes_[index].dimension = dim;
    nodes_[index].split = split;
    const auto left = build(points, sample.subspan(0, n_left), depth + 1, limit, random);
    const auto right = build(points, sample.subspan(n_left), depth + 1, limit, random);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  std::vector<tree_node> nodes_;
};

}  // namespace

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n);
  return 2.0 * (std::log(m - 1.0) + euler_gamma) - 2.0 * (m - 1.0) / m;
}

std::vector<double> isolation_forest_scores(std::span<const point3> points,
                                            std::size_t trees,
                                            std::size_t sample_size,
                                            std::uint64_t seed) {
  const std::size_t n = points.size();
  std::vector<double> depth_sum(n, 0.0);
  if (n == 0) return depth_sum;
  const std::size_t psi = std::min(sample_size, n);
  rng random(seed);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t t = 0; t < trees; ++t) {
    // Partial Fisher-Yates: the first psi entries are a uniform sample
    // without replacement.
    for (std::size_t i = 0; i < psi; ++i)
      std::swap(all[i], all[i + random.below(n - i)]);
    std::vector<std::size_t> sample(all.begin(),
                                    all.begin() + static_cast<std::ptrdiff_t>(psi));
    const isolation_tree tree(points, std::move(sample), random);
    for (std::size_t i = 0; i < n; ++i) depth_sum[i] += tree.path_length(points[i]);
  }

  const double norm = average_path_length(psi);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean_depth = depth_sum[i] / static_cast<double>(trees);
    scores[i] = norm > 0.0 ? std::pow(2.0, -mean_depth / norm) : 1.0;
  }
  return scores;
}

outlier_report detect_outliers(std::span<const rfm_record> records,
                               const rfm_config& config) {
  config.validate();
  const std::size_t n = records.size();
  if (n < 2) throw input_error("outlier detection needs at least two records");
  const auto flagged = static_cast<std::size_t>(
      std::llround(config.contamination * static_cast<double>(n)));
  if (flagged == 0)
    throw input_error("contamination " + std::to_string(config.contamination) +
                      " flags no record out of " + std::to_string(n));

  std::vector<point3> points;
  points.reserve(n);
  for (const auto& r : records) points.push_back(r.measures());

  outlier_report report;
  report.flagged_per_run = flagged;
  report.runs = config.forest_repeats;

  std::vector<std::vector<bool>> run_flags;
  run_flags.reserve(config.forest_repeats);
  for (std::size_t run = 0; run < config.forest_repeats; ++run) {
    const auto scores =
        isolation_forest_scores(points, config.forest_trees,
                                config.forest_sample_size,
                                derive_seed(config.seed, run));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] > scores[b];
    });

    std::vector<bool> flags(n, false);
    const double cut = scores[order[flagged - 1]];
    const bool tied = flagged < n && scores[order[flagged]] == cut;
    if (tied) {
      // Refuse to pick arbitrarily among equal scores.
      ++report.tied_runs;
      for (std::size_t i = 0; i < n; ++i) flags[i] = scores[i] > cut;
    } else {
      for (std::size_t r = 0; r < flagged; ++r) flags[order[r]] = true;
    }
    run_flags.push_back(std::move(flags));
  }

  std::vector<bool> common(n, true);
  for (const auto& flags : run_flags)
    for (std::size_t i = 0; i < n; ++i) common[i] = common[i] && flags[i];
  for (const auto& flags : run_flags)
    if (flags == common) ++report.stable_runs;
  for (std::size_t i = 0; i < n; ++i)
    if (common[i]) report.outliers.insert(records[i].label);
  return report;
}

}  // namespace flakyci
