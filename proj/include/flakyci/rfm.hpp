#pragma once

#include "flakyci/category_stats.hpp"
#include "flakyci/cost_model.hpp"
#include "flakyci/money.hpp"
#include "flakyci/time.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace flakyci {

using point3 = std::array<double, 3>;

struct rfm_scores {
  int r = 0;
  int f = 0;
  int m = 0;

  friend bool operator==(const rfm_scores&, const rfm_scores&) = default;
};

struct rfm_record {
  std::string label;
  double recency_days = 0.0;
  std::size_t frequency = 0;
  money monetary;
  std::optional<rfm_scores> scores;
  bool is_outlier = false;

  point3 measures() const;
};

struct rfm_config {
  /// "Now" for recency.
  timestamp analysis_date{};
  std::size_t k = 8;
  std::size_t kmeans_restarts = 500;
  std::size_t kmeans_max_iters = 300;
  std::size_t forest_trees = 500;
  std::size_t forest_sample_size = 256;
  double contamination = 0.10;
  std::size_t forest_repeats = 100;
  std::uint64_t seed = 0;
  /// Count occurrences as distinct UTC days instead of raw timestamps.
  bool day_granularity = false;

  /// Throws input_error when k < 1 or contamination is outside (0, 0.5).
  void validate() const;
};

/// Mean age in days of the (up to) three most recent occurrences. Throws
/// input_error on an empty list or an occurrence after `now`.
double recency(std::span<const timestamp> occurrences, timestamp now,
               bool day_granularity = false);

/// One unscored record per category. Throws input_error for a category
/// without occurrences or without a cost.
std::vector<rfm_record> build_rfm_table(std::span<const category_stats> stats,
                                        std::span<const category_cost> costs,
                                        const rfm_config& config);

// --- outliers ---------------------------------------------------------------

struct outlier_report {
  std::set<std::string> outliers;
  /// Runs whose flagged set equals the intersection.
  std::size_t stable_runs = 0;
  /// Runs where scores tied across the cut, so fewer items were flagged.
  std::size_t tied_runs = 0;
  std::size_t flagged_per_run = 0;
  std::size_t runs = 0;
};

/// Anomaly scores in (0, 1] from one isolation forest trained on `points`.
std::vector<double> isolation_forest_scores(std::span<const point3> points,
                                            std::size_t trees,
                                            std::size_t sample_size,
                                            std::uint64_t seed);

/// Average unsuccessful-search path length of a binary search tree with n
/// items; normalizes isolation depths.
double average_path_length(std::size_t n);

/// Repeated isolation forests over raw (R, F, M); the outliers are the
/// items flagged by every run. Throws input_error with fewer than two
/// records or when contamination flags nothing.
outlier_report detect_outliers(std::span<const rfm_record> records,
                               const rfm_config& config);

// --- scoring ----------------------------------------------------------------

/// Per-dimension maximum value of each score bin, ascending by value.
struct quintile_bins {
  struct bin {
    int score = 0;
    double max_value = 0.0;
  };
  std::vector<bin> recency;
  std::vector<bin> frequency;
  std::vector<bin> monetary;
};

/// Equal-frequency 1–5 scores by rank (ties broken by label). High
/// frequency and cost score high; low recency (more recent) scores high.
std::vector<rfm_record> quintile_scores(std::span<const rfm_record> inliers);

quintile_bins compute_quintile_bins(std::span<const rfm_record> scored_inliers);

/// Places each outlier measure into the first inlier bin whose maximum is
/// at least the value; beyond every bin scores 5 for F/M and 1 for R.
std::vector<rfm_record> score_outliers(std::span<const rfm_record> outliers,
                                       const quintile_bins& bins);

// --- clustering ---------------------------------------------------------------

struct kmeans_result {
  std::vector<std::size_t> assignment;
  std::vector<point3> centroids;
  double sse = 0.0;
  /// SSE after each centroid update of the winning run.
  std::vector<double> sse_history;
  std::size_t iterations = 0;
  std::size_t restart = 0;
};

double squared_distance(const point3& a, const point3& b);

/// One k-means++ seeded Lloyd run. Requires points.size() >= k >= 1.
kmeans_result kmeans_single(std::span<const point3> points, std::size_t k,
                            std::size_t max_iters, std::uint64_t seed);

/// Best of `restarts` runs by SSE (ties → lowest restart). Run i is seeded
/// with derive_seed(seed, i). Throws input_error when points < k.
kmeans_result kmeans_best(std::span<const point3> points, std::size_t k,
                          std::size_t restarts, std::size_t max_iters,
                          std::uint64_t seed);

struct rfm_pattern {
  bool r_up = false;
  bool f_up = false;
  bool m_up = false;

  /// "R↑F↓M↓" style.
  std::string to_string() const;
  friend bool operator==(const rfm_pattern&, const rfm_pattern&) = default;
};

/// ↑ iff the cluster average strictly exceeds the overall average.
rfm_pattern cluster_pattern(const point3& cluster_avg, const point3& overall_avg);

struct cluster {
  std::size_t id = 0;
  std::vector<std::string> members;
  point3 centroid{};
  /// Mean R, F, M scores of the members.
  point3 avg_scores{};
  /// Mean raw recency days, frequency and cost of the members.
  point3 avg_measures{};
  /// Mean over R, F, M of the sample standard deviation of member scores.
  double avg_std = 0.0;
  rfm_pattern pattern;
  std::string description;
};

struct clustering {
  std::vector<cluster> clusters;
  double sse = 0.0;
  point3 overall_avg{};
};

/// Clusters scored inliers on their (r, f, m) scores. Clusters are
/// numbered by their smallest member index. Throws input_error when there
/// are fewer inliers than k.
clustering kmeans_cluster(std::span<const rfm_record> scored_inliers,
                          const rfm_config& config);

point3 mean_scores(std::span<const rfm_record> scored);

// --- priorities ----------------------------------------------------------

namespace priority {
inline constexpr std::string_view top = "Top";
inline constexpr std::string_view high = "High Priority";
inline constexpr std::string_view medium = "Medium Priority";
inline constexpr std::string_view low = "Low Priority";
inline constexpr std::string_view emerging = "Emerging Issues";
inline constexpr std::string_view idle = "Idle";
inline constexpr std::string_view watch = "Watch";
inline constexpr std::string_view relic = "Relic";
inline constexpr std::string_view negligible = "Negligible";
inline constexpr std::string_view irrelevant = "Irrelevant";

/// Position of a description in triage order (Top first).
int rank(std::string_view description);
}  // namespace priority

/// Describes each cluster from its pattern and rank among siblings sharing
/// that pattern. Returned descriptions line up with `clusters`.
std::vector<std::string> describe_clusters(std::span<const cluster> clusters);

/// Description of an outlier from its pattern alone.
std::string describe_outlier(const rfm_pattern& pattern);

struct priority_row {
  std::string label;
  rfm_record record;
  rfm_pattern pattern;
  /// Cluster id, or empty for outliers.
  std::optional<std::size_t> cluster_id;
  std::string description;
};

struct prioritization {
  std::vector<priority_row> rows;
};

/// Fills in cluster descriptions and returns every category in triage
/// order: by description rank, then descending mean score, then label.
prioritization assign_priority(std::vector<cluster>& clusters,
                               std::span<const rfm_record> scored_inliers,
                               std::span<const rfm_record> scored_outliers,
                               const point3& overall_avg);

// --- whole stage -------------------------------------------------------------

struct rfm_analysis {
  std::vector<rfm_record> records;
  std::optional<outlier_report> outliers;
  clustering clusters;
  prioritization priorities;
  std::size_t k_used = 0;
  std::vector<std::string> notes;
};

/// Outliers, scoring, clustering and priorities over a built table. Small
/// tables degrade instead of failing: outlier detection is skipped when it
/// would flag nothing and k shrinks to the number of inliers; each such
/// step is recorded in `notes`.
rfm_analysis analyze_rfm(std::vector<rfm_record> table, const rfm_config& config);

void write_rfm_csv(std::ostream& out, std::span<const rfm_record> records);
void write_clusters_json(std::ostream& out, const rfm_analysis& analysis);
void write_priorities_csv(std::ostream& out, const prioritization& priorities);

}  // namespace flakyci
