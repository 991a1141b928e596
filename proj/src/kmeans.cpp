#include "flakyci/errors.hpp"
#include "flakyci/rfm.hpp"
#include "flakyci/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace flakyci {
namespace {

std::size_t nearest(const point3& p, std::span<const point3> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<point3> seed_plus_plus(std::span<const point3> points,
                                   std::size_t k, rng& random) {
  const std::size_t n = points.size();
  std::vector<point3> centroids;
  centroids.reserve(k);
  centroids.push_back(points[random.below(n)]);

  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = squared_distance(points[i], centroids[0]);

  while (centroids.size() < k) {
    double total = 0.0;
    for (const double d : dist) total += d;
    std::size_t pick = n - 1;
    if (total <= 0.0) {
      pick = random.below(n);
    } else {
      const double target = random.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc > target && dist[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = std::min(dist[i], squared_distance(points[i], centroids.back()));
  }
  return centroids;
}

double total_sse(std::span<const point3> points,
                 std::span<const std::size_t> assignment,
                 std::span<const point3> centroids) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    sse += squared_distance(points[i], centroids[assignment[i]]);
  return sse;
}

/// Moves centroids to member means. A cluster left empty takes the point
/// farthest from its own centroid among clusters with two or more members.
void update_centroids(std::span<const point3> points,
                      std::vector<std::size_t>& assignment,
                      std::vector<point3>& centroids) {
  const std::size_t k = centroids.size();
  std::vector<point3> sums(k, point3{0, 0, 0});
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int d = 0; d < 3; ++d) sums[assignment[i]][d] += points[i][d];
    ++counts[assignment[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (int d = 0; d < 3; ++d)
      centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (counts[assignment[i]] < 2) continue;
      const double d = squared_distance(points[i], centroids[assignment[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == points.size())
      throw invariant_error("k-means: no point available to repair an empty cluster");
    --counts[assignment[far]];
    assignment[far] = c;
    counts[c] = 1;
    centroids[c] = points[far];
  }
}

}  // namespace

double squared_distance(const point3& a, const point3& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

kmeans_result kmeans_single(std::span<const point3> points, std::size_t k,
                            std::size_t max_iters, std::uint64_t seed) {
  if (k < 1) throw input_error("k must be >= 1");
  if (points.size() < k)
    throw input_error("k-means needs at least k=" + std::to_string(k) +
                      " points, got " + std::to_string(points.size()));
  rng random(seed);
  kmeans_result result;
  result.centroids = seed_plus_plus(points, k, random);
  result.assignment.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    result.assignment[i] = nearest(points[i], result.centroids);

  bool converged = false;
  while (result.iterations < max_iters) {
    ++result.iterations;
    update_centroids(points, result.assignment, result.centroids);
    result.sse_history.push_back(
        total_sse(points, result.assignment, result.centroids));

    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = nearest(points[i], result.centroids);
      // Keep the current cluster on exact ties so runs settle.
      if (c != result.assignment[i] &&
          squared_distance(points[i], result.centroids[c]) <
              squared_distance(points[i], result.centroids[result.assignment[i]])) {
        result.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    update_centroids(points, result.assignment, result.centroids);
    result.sse_history.push_back(
        total_sse(points, result.assignment, result.centroids));
  }
  result.sse = result.sse_history.back();
  return result;
}

kmeans_result kmeans_best(std::span<const point3> points, std::size_t k,
                          std::size_t restarts, std::size_t max_iters,
                          std::uint64_t seed) {
  if (restarts < 1) throw input_error("restarts must be >= 1");
  kmeans_result best;
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = kmeans_single(points, k, max_iters, derive_seed(seed, r));
    run.restart = r;
    if (r == 0 || run.sse < best.sse) best = std::move(run);
  }
  return best;
}

clustering kmeans_cluster(std::span<const rfm_record> scored_inliers,
                          const rfm_config& config) {
  std::vector<point3> points;
  points.reserve(scored_inliers.size());
  for (const auto& r : scored_inliers) {
    if (!r.scores) throw invariant_error("clustering unscored record " + r.label);
    points.push_back({static_cast<double>(r.scores->r),
                      static_cast<double>(r.scores->f),
                      static_cast<double>(r.scores->m)});
  }
  const auto best = kmeans_best(points, config.k, config.kmeans_restarts,
                                config.kmeans_max_iters, config.seed);

  // Renumber clusters by their smallest member index.
  std::map<std::size_t, std::size_t> first_member;
  for (std::size_t i = 0; i < points.size(); ++i)
    first_member.emplace(best.assignment[i], first_member.size());

  clustering out;
  out.sse = best.sse;
  out.overall_avg = mean_scores(scored_inliers);
  out.clusters.resize(first_member.size());
  std::vector<std::vector<std::size_t>> members(first_member.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    members[first_member.at(best.assignment[i])].push_back(i);

  for (const auto& [raw, id] : first_member) {
    auto& c = out.clusters[id];
    c.id = id + 1;
    c.centroid = best.centroids[raw];
    const auto& idx = members[id];
    const double size = static_cast<double>(idx.size());
    point3 score_sum{0, 0, 0};
    point3 measure_sum{0, 0, 0};
    for (const auto i : idx) {
      c.members.push_back(scored_inliers[i].label);
      const auto m = scored_inliers[i].measures();
      for (int d = 0; d < 3; ++d) {
        score_sum[d] += points[i][d];
        measure_sum[d] += m[d];
      }
    }
    for (int d = 0; d < 3; ++d) {
      c.avg_scores[d] = score_sum[d] / size;
      c.avg_measures[d] = measure_sum[d] / size;
    }
    double std_sum = 0.0;
    if (idx.size() > 1) {
      for (int d = 0; d < 3; ++d) {
        double ss = 0.0;
        for (const auto i : idx) {
          const double diff = points[i][d] - c.avg_scores[d];
          ss += diff * diff;
        }
        std_sum += std::sqrt(ss / (size - 1.0));
      }
    }
    c.avg_std = std_sum / 3.0;
    c.pattern = cluster_pattern(c.avg_scores, out.overall_avg);
  }
  return out;
}

}  // namespace flakyci
