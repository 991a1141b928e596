#include "flakyci/csv.hpp"
#include "flakyci/errors.hpp"
#include "flakyci/rfm.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace flakyci {

int priority::rank(std::string_view description) {
  static constexpr std::array order{top,  high,  medium, low,        emerging,
                                    idle, watch, relic,  negligible, irrelevant};
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == description) return static_cast<int>(i);
  return static_cast<int>(order.size());
}

namespace {

constexpr rfm_pattern up_up_up{true, true, true};
constexpr rfm_pattern up_down_down{true, false, false};
constexpr rfm_pattern down_up_up{false, true, true};
constexpr rfm_pattern down_down_up{false, false, true};
constexpr rfm_pattern down_down_down{false, false, false};

double mean3(const point3& p) { return (p[0] + p[1] + p[2]) / 3.0; }

/// Clusters sharing `pattern`, best first by `key` (ties → lower id).
template <typename Key>
std::vector<std::size_t> siblings(std::span<const cluster> clusters,
                                  const rfm_pattern& pattern, Key key) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < clusters.size(); ++i)
    if (clusters[i].pattern == pattern) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double ka = key(clusters[a]);
    const double kb = key(clusters[b]);
    if (ka != kb) return ka > kb;
    return clusters[a].id < clusters[b].id;
  });
  return idx;
}

std::string measure_string(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

}  // namespace

std::vector<std::string> describe_clusters(std::span<const cluster> clusters) {
  std::vector<std::string> out(clusters.size(), std::string(priority::watch));

  // Highest overall average leads; the rest of the pattern follows it.
  const auto hot = siblings(clusters, up_up_up,
                            [](const cluster& c) { return mean3(c.avg_scores); });
  for (std::size_t i = 0; i < hot.size(); ++i)
    out[hot[i]] = i == 0 ? priority::high : priority::medium;

  // Recent but rare and cheap: the weakest (F+M) is the emerging one.
  const auto fresh = siblings(clusters, up_down_down, [](const cluster& c) {
    return c.avg_scores[1] + c.avg_scores[2];
  });
  for (std::size_t i = 0; i < fresh.size(); ++i)
    out[fresh[i]] = i + 1 == fresh.size() ? priority::emerging : priority::low;

  for (const auto i : siblings(clusters, down_up_up, [](const cluster&) { return 0.0; }))
    out[i] = priority::idle;
  for (const auto i : siblings(clusters, down_down_up, [](const cluster&) { return 0.0; }))
    out[i] = priority::relic;

  // Old, rare and cheap: the oldest is irrelevant.
  const auto cold = siblings(clusters, down_down_down,
                             [](const cluster& c) { return c.avg_scores[0]; });
  for (std::size_t i = 0; i < cold.size(); ++i)
    out[cold[i]] = i + 1 == cold.size() ? priority::irrelevant : priority::negligible;
  return out;
}

std::string describe_outlier(const rfm_pattern& pattern) {
  if (pattern == up_up_up) return std::string(priority::top);
  if (pattern == up_down_down) return std::string(priority::low);
  if (pattern == down_up_up) return std::string(priority::idle);
  if (pattern == down_down_up) return std::string(priority::relic);
  if (pattern == down_down_down) return std::string(priority::negligible);
  return std::string(priority::watch);
}

prioritization assign_priority(std::vector<cluster>& clusters,
                               std::span<const rfm_record> scored_inliers,
                               std::span<const rfm_record> scored_outliers,
                               const point3& overall_avg) {
  const auto descriptions = describe_clusters(clusters);
  for (std::size_t i = 0; i < clusters.size(); ++i)
    clusters[i].description = descriptions[i];

  prioritization out;
  for (const auto& c : clusters) {
    for (const auto& label : c.members) {
      const auto it = std::find_if(
          scored_inliers.begin(), scored_inliers.end(),
          [&](const rfm_record& r) { return r.label == label; });
      if (it == scored_inliers.end())
        throw invariant_error("cluster member '" + label + "' has no record");
      out.rows.push_back({label, *it, c.pattern, c.id, c.description});
    }
  }
  for (const auto& r : scored_outliers) {
    if (!r.scores) throw invariant_error("outlier '" + r.label + "' is unscored");
    const point3 s{static_cast<double>(r.scores->r),
                   static_cast<double>(r.scores->f),
                   static_cast<double>(r.scores->m)};
    const auto pattern = cluster_pattern(s, overall_avg);
    out.rows.push_back({r.label, r, pattern, std::nullopt, describe_outlier(pattern)});
  }

  auto mean_score = [](const priority_row& row) {
    const auto& s = *row.record.scores;
    return static_cast<double>(s.r + s.f + s.m);
  };
  std::sort(out.rows.begin(), out.rows.end(),
            [&](const priority_row& a, const priority_row& b) {
              const int ra = priority::rank(a.description);
              const int rb = priority::rank(b.description);
              if (ra != rb) return ra < rb;
              const double ma = mean_score(a);
              const double mb = mean_score(b);
              if (ma != mb) return ma > mb;
              return a.label < b.label;
            });
  return out;
}

rfm_analysis analyze_rfm(std::vector<rfm_record> table, const rfm_config& config) {
  config.validate();
  rfm_analysis analysis;
  std::sort(table.begin(), table.end(),
            [](const rfm_record& a, const rfm_record& b) { return a.label < b.label; });
  if (table.empty()) {
    analysis.notes.push_back("no categories to prioritize");
    return analysis;
  }

  const auto flagged = std::llround(config.contamination *
                                    static_cast<double>(table.size()));
  if (table.size() >= 2 && flagged > 0) {
    analysis.outliers = detect_outliers(table, config);
    for (auto& r : table) r.is_outlier = analysis.outliers->outliers.contains(r.label);
    if (analysis.outliers->tied_runs > 0)
      analysis.notes.push_back(std::to_string(analysis.outliers->tied_runs) +
                               " forest runs had tied scores at the cut");
  } else {
    analysis.notes.push_back("outlier detection skipped: contamination flags no category");
  }

  std::vector<rfm_record> inliers;
  std::vector<rfm_record> outliers;
  for (const auto& r : table) (r.is_outlier ? outliers : inliers).push_back(r);

  inliers = quintile_scores(inliers);
  if (!inliers.empty())
    outliers = score_outliers(outliers, compute_quintile_bins(inliers));

  if (!inliers.empty()) {
    auto cfg = config;
    if (inliers.size() < cfg.k) {
      analysis.notes.push_back("k reduced from " + std::to_string(cfg.k) + " to " +
                               std::to_string(inliers.size()) +
                               " (fewer inliers than clusters)");
      cfg.k = inliers.size();
    }
    analysis.k_used = cfg.k;
    analysis.clusters = kmeans_cluster(inliers, cfg);
  } else {
    analysis.notes.push_back("no inliers to cluster");
  }
  analysis.priorities = assign_priority(analysis.clusters.clusters, inliers,
                                        outliers, analysis.clusters.overall_avg);

  analysis.records = inliers;
  analysis.records.insert(analysis.records.end(), outliers.begin(), outliers.end());
  std::sort(analysis.records.begin(), analysis.records.end(),
            [](const rfm_record& a, const rfm_record& b) { return a.label < b.label; });
  return analysis;
}

void write_rfm_csv(std::ostream& out, std::span<const rfm_record> records) {
  csv::write_row(out, {"label", "recency_days", "frequency", "monetary",
                       "r_score", "f_score", "m_score", "is_outlier"});
  for (const auto& r : records) {
    auto score = [&](int rfm_scores::*field) {
      return r.scores ? std::to_string((*r.scores).*field) : std::string();
    };
    csv::write_row(out, {r.label, measure_string(r.recency_days),
                         std::to_string(r.frequency), r.monetary.to_cents_string(),
                         score(&rfm_scores::r), score(&rfm_scores::f),
                         score(&rfm_scores::m), r.is_outlier ? "true" : "false"});
  }
}

void write_clusters_json(std::ostream& out, const rfm_analysis& analysis) {
  using json = nlohmann::ordered_json;
  json doc;
  doc["k"] = analysis.k_used;
  doc["sse"] = round_to(analysis.clusters.sse, 1e9);
  const auto& overall = analysis.clusters.overall_avg;
  doc["overall"] = {{"R", round_to(overall[0], 1e6)},
                    {"F", round_to(overall[1], 1e6)},
                    {"M", round_to(overall[2], 1e6)},
                    {"size", std::count_if(analysis.records.begin(),
                                           analysis.records.end(),
                                           [](const rfm_record& r) {
                                             return !r.is_outlier;
                                           })}};
  auto clusters = json::array();
  // Triage order, as in the priority report.
  std::vector<const cluster*> ordered;
  for (const auto& c : analysis.clusters.clusters) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(), [](const cluster* a, const cluster* b) {
    const int ra = priority::rank(a->description);
    const int rb = priority::rank(b->description);
    if (ra != rb) return ra < rb;
    return mean3(a->avg_scores) > mean3(b->avg_scores);
  });
  for (const auto* c : ordered) {
    json entry;
    entry["cluster"] = "C" + std::to_string(c->id);
    entry["size"] = c->members.size();
    entry["std"] = round_to(c->avg_std, 1e6);
    entry["recency_days"] = round_to(c->avg_measures[0], 1e4);
    entry["R"] = round_to(c->avg_scores[0], 1e6);
    entry["frequency"] = round_to(c->avg_measures[1], 1e4);
    entry["F"] = round_to(c->avg_scores[1], 1e6);
    entry["monetary"] = round_to(c->avg_measures[2], 1e2);
    entry["M"] = round_to(c->avg_scores[2], 1e6);
    entry["pattern"] = c->pattern.to_string();
    entry["description"] = c->description;
    entry["members"] = c->members;
    clusters.push_back(std::move(entry));
  }
  doc["clusters"] = std::move(clusters);

  auto outliers = json::array();
  for (const auto& row : analysis.priorities.rows) {
    if (row.cluster_id) continue;
    outliers.push_back({{"label", row.label},
                        {"recency_days", round_to(row.record.recency_days, 1e4)},
                        {"frequency", row.record.frequency},
                        {"monetary", row.record.monetary.to_cents_string()},
                        {"pattern", row.pattern.to_string()},
                        {"description", row.description}});
  }
  doc["outliers"] = std::move(outliers);
  if (analysis.outliers) {
    doc["outlier_stability"] = {{"runs", analysis.outliers->runs},
                                {"stable_runs", analysis.outliers->stable_runs},
                                {"tied_runs", analysis.outliers->tied_runs},
                                {"flagged_per_run", analysis.outliers->flagged_per_run}};
  }
  doc["notes"] = analysis.notes;
  out << doc.dump(2) << '\n';
}

void write_priorities_csv(std::ostream& out, const prioritization& priorities) {
  csv::write_row(out, {"label", "recency_days", "frequency", "monetary", "r_score",
                       "f_score", "m_score", "pattern", "cluster", "priority"});
  for (const auto& row : priorities.rows) {
    const auto& r = row.record;
    csv::write_row(out, {row.label, measure_string(r.recency_days),
                         std::to_string(r.frequency), r.monetary.to_cents_string(),
                         std::to_string(r.scores->r), std::to_string(r.scores->f),
                         std::to_string(r.scores->m), row.pattern.to_string(),
                         row.cluster_id ? "C" + std::to_string(*row.cluster_id)
                                        : std::string("outlier"),
                         row.description});
  }
}

}  // namespace flakyci
