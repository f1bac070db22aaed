#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plud/error.hpp"
#include "plud/rng.hpp"
#include "plud/types.hpp"

namespace plud {

enum class ClusterAlgorithm { kKMeans, kAgglomerative };
enum class Linkage { kAverage, kSingle, kComplete };

inline std::string_view to_string(ClusterAlgorithm a) {
  return a == ClusterAlgorithm::kKMeans ? "KMEANS" : "AGGLOMERATIVE";
}
inline std::string_view to_string(Linkage l) {
  switch (l) {
    case Linkage::kAverage: return "AVERAGE";
    case Linkage::kSingle: return "SINGLE";
    case Linkage::kComplete: return "COMPLETE";
  }
  return "?";
}
inline ClusterAlgorithm parse_cluster_algorithm(std::string_view s) {
  if (s == "KMEANS") return ClusterAlgorithm::kKMeans;
  if (s == "AGGLOMERATIVE") return ClusterAlgorithm::kAgglomerative;
  throw InvalidArgument("unknown clustering algorithm '" + std::string(s) + "'");
}
inline Linkage parse_linkage(std::string_view s) {
  if (s == "AVERAGE") return Linkage::kAverage;
  if (s == "SINGLE") return Linkage::kSingle;
  if (s == "COMPLETE") return Linkage::kComplete;
  throw InvalidArgument("unknown linkage '" + std::string(s) + "'");
}

struct ClusterConfig {
  ClusterAlgorithm algorithm = ClusterAlgorithm::kKMeans;
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t max_iters = 300;
  double tol = 1e-6;
  std::size_t restarts = 10;
  Linkage linkage = Linkage::kAverage;
};

/// k = max(2, round(sqrt(n / 2))), capped at n.
inline std::size_t default_k(std::size_t n) {
  const auto k = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(std::sqrt(n / 2.0))));
  return std::min(k, n);
}

struct ClusterSet {
  std::vector<std::vector<std::string>> clusters;
  std::vector<std::size_t> assignment;  // row -> cluster index
  EmbeddingMatrix centroids;
  double wcss = 0.0;
  ClusterConfig config;
  /// k-means only: WCSS after each assignment step of the winning restart.
  std::vector<double> wcss_history;
};

namespace detail {

inline double squared_distance(std::span<const float> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - b[j];
    s += diff * diff;
  }
  return s;
}

inline std::vector<std::string> row_ids(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  return ids;
}

inline void validate_input(const EmbeddingMatrix& m, const ClusterConfig& cfg, std::span<const std::string> ids) {
  if (cfg.k < 1 || cfg.k > m.rows()) {
    throw InvalidArgument("clustering: k=" + std::to_string(cfg.k) + " must lie in [1, n=" +
                          std::to_string(m.rows()) + "]");
  }
  if (cfg.max_iters < 1) throw InvalidArgument("clustering: max_iters must be >= 1");
  if (!(cfg.tol >= 0.0)) throw InvalidArgument("clustering: tol must be >= 0");
  if (cfg.restarts < 1) throw InvalidArgument("clustering: restarts must be >= 1");
  if (!ids.empty() && ids.size() != m.rows()) throw InvalidArgument("clustering: id count != row count");
  if (const auto bad = m.first_non_finite_row()) {
    throw DataError("clustering: non-finite value in row " + std::to_string(*bad));
  }
}

/// Nearest centroid, ties to the lowest index.
inline std::pair<std::size_t, double> nearest(std::span<const float> x, const std::vector<std::vector<double>>& c) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double dj = squared_distance(x, c[j]);
    if (dj < best_d) {
      best_d = dj;
      best = j;
    }
  }
  return {best, best_d};
}

struct LloydRun {
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> assignment;
  double wcss = 0.0;
  std::vector<double> history;
};

inline std::vector<std::vector<double>> kmeanspp_init(const EmbeddingMatrix& m, std::size_t k, Rng& rng) {
  const std::size_t n = m.rows();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  auto push_row = [&](std::size_t i) {
    const auto r = m.row(i);
    centroids.emplace_back(r.begin(), r.end());
  };
  push_row(uniform_index(rng, n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(m.row(i), centroids[0]);
  while (centroids.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = uniform_index(rng, n);  // every point coincides with a seed
    }
    push_row(pick);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(m.row(i), centroids.back()));
  }
  return centroids;
}

inline LloydRun lloyd(const EmbeddingMatrix& m, const ClusterConfig& cfg, Rng& rng) {
  const std::size_t n = m.rows();
  const std::size_t d = m.cols();
  const std::size_t k = cfg.k;
  LloydRun run;
  run.centroids = kmeanspp_init(m, k, rng);
  run.assignment.assign(n, 0);
  std::vector<double> dist(n);

  auto assign_all = [&] {
    double total = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [c, dd] = nearest(m.row(i), run.centroids);
      changed |= c != run.assignment[i];
      run.assignment[i] = c;
      dist[i] = dd;
      total += dd;
    }
    return std::pair{total, changed};
  };

  std::vector<std::size_t> counts(k, 0);
  auto recentre = [&] {
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    counts.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = m.row(i);
      auto& s = sums[run.assignment[i]];
      for (std::size_t j = 0; j < d; ++j) s[j] += r[j];
      ++counts[run.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) run.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  };
  // Empty clusters take the point farthest from its current centroid.
  auto reseed_empty = [&] {
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[run.assignment[i]] <= 1) continue;  // never empty another cluster
        const double di = squared_distance(m.row(i), run.centroids[run.assignment[i]]);
        if (di > far_d) {
          far_d = di;
          far = i;
        }
      }
      const auto r = m.row(far);
      run.centroids[c].assign(r.begin(), r.end());
      --counts[run.assignment[far]];
      run.assignment[far] = c;
      counts[c] = 1;
    }
  };

  auto [wcss, changed] = assign_all();
  run.history.push_back(wcss);
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    recentre();
    reseed_empty();

    const double previous = wcss;
    std::tie(wcss, changed) = assign_all();
    run.history.push_back(wcss);
    if (!changed) break;
    if (previous <= 0.0 || (previous - wcss) / previous < cfg.tol) break;
  }
  // Ties (coincident points) can leave a cluster empty after the last pass.
  counts.assign(k, 0);
  for (auto c : run.assignment) ++counts[c];
  if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
    reseed_empty();
    recentre();
    wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wcss += squared_distance(m.row(i), run.centroids[run.assignment[i]]);
    run.history.push_back(wcss);
  }
  run.wcss = wcss;
  return run;
}

inline ClusterSet make_cluster_set(std::span<const std::string> ids, std::vector<std::size_t> assignment,
                                   std::size_t k, const ClusterConfig& cfg) {
  ClusterSet cs;
  cs.config = cfg;
  cs.clusters.resize(k);
  for (std::size_t i = 0; i < assignment.size(); ++i) cs.clusters[assignment[i]].push_back(ids[i]);
  cs.assignment = std::move(assignment);
  return cs;
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding, best of `restarts` runs by WCSS.
/// Deterministic for fixed (matrix bits, config).
inline ClusterSet kmeans(const EmbeddingMatrix& m, const ClusterConfig& cfg, std::span<const std::string> ids = {}) {
  detail::validate_input(m, cfg, ids);
  std::vector<std::string> default_ids;
  if (ids.empty()) {
    default_ids = detail::row_ids(m.rows());
    ids = default_ids;
  }
  std::optional<detail::LloydRun> best;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    auto rng = make_rng(cfg.seed, "kmeans-restart", r);
    auto run = detail::lloyd(m, cfg, rng);
    if (!best || run.wcss < best->wcss) best = std::move(run);
  }
  auto cs = detail::make_cluster_set(ids, best->assignment, cfg.k, cfg);
  cs.centroids = EmbeddingMatrix(cfg.k, m.cols());
  for (std::size_t c = 0; c < cfg.k; ++c) {
    for (std::size_t j = 0; j < m.cols(); ++j) cs.centroids(c, j) = static_cast<float>(best->centroids[c][j]);
  }
  cs.wcss = best->wcss;
  cs.wcss_history = std::move(best->history);
  return cs;
}

/// Bottom-up merging on Euclidean distance until k clusters remain. Ties go
/// to the lexicographically smallest (row, row) pair; a merged cluster is
/// identified by its smallest row. Clusters are reported ordered by their
/// smallest row; centroids are member means.
inline ClusterSet agglomerative(const EmbeddingMatrix& m, const ClusterConfig& cfg,
                                std::span<const std::string> ids = {}) {
  detail::validate_input(m, cfg, ids);
  std::vector<std::string> default_ids;
  if (ids.empty()) {
    default_ids = detail::row_ids(m.rows());
    ids = default_ids;
  }
  const std::size_t n = m.rows();
  const std::size_t d = m.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = static_cast<double>(m(i, t)) - m(j, t);
        s += diff * diff;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(s);
    }
  }
  std::vector<bool> alive(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<std::size_t> nn(n, 0);
  std::vector<double> nn_d(n, kInf);

  auto refresh = [&](std::size_t i) {
    nn_d[i] = kInf;
    nn[i] = i;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !alive[j]) continue;
      if (dist[i * n + j] < nn_d[i]) {
        nn_d[i] = dist[i * n + j];
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  for (std::size_t remaining = n; remaining > cfg.k; --remaining) {
    std::size_t a = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (alive[i] && (a == n || nn_d[i] < nn_d[a])) a = i;
    }
    std::size_t b = nn[a];
    if (b < a) std::swap(a, b);
    // Lance-Williams update into a; b retires.
    for (std::size_t t = 0; t < n; ++t) {
      if (!alive[t] || t == a || t == b) continue;
      const double da = dist[t * n + a];
      const double db = dist[t * n + b];
      double merged = 0.0;
      switch (cfg.linkage) {
        case Linkage::kSingle: merged = std::min(da, db); break;
        case Linkage::kComplete: merged = std::max(da, db); break;
        case Linkage::kAverage:
          merged = (static_cast<double>(size[a]) * da + static_cast<double>(size[b]) * db) /
                   static_cast<double>(size[a] + size[b]);
          break;
      }
      dist[t * n + a] = dist[a * n + t] = merged;
    }
    alive[b] = false;
    size[a] += size[b];
    for (std::size_t i = 0; i < n; ++i) {
      if (parent[i] == b) parent[i] = a;
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (!alive[t]) continue;
      if (t == a || nn[t] == a || nn[t] == b) {
        refresh(t);
      } else {
        const double dt = dist[t * n + a];
        if (dt < nn_d[t] || (dt == nn_d[t] && a < nn[t])) {
          nn_d[t] = dt;
          nn[t] = a;
        }
      }
    }
  }

  // parent[i] is the smallest row of i's cluster; order clusters by it.
  std::map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < n; ++i) slot.emplace(parent[i], slot.size());
  std::vector<std::size_t> assignment(n);
  for (std::size_t i = 0; i < n; ++i) assignment[i] = slot.at(parent[i]);

  auto cs = detail::make_cluster_set(ids, assignment, cfg.k, cfg);
  std::vector<std::vector<double>> means(cfg.k, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(cfg.k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) means[assignment[i]][t] += m(i, t);
    ++counts[assignment[i]];
  }
  cs.centroids = EmbeddingMatrix(cfg.k, d);
  for (std::size_t c = 0; c < cfg.k; ++c) {
    for (std::size_t t = 0; t < d; ++t) {
      means[c][t] /= static_cast<double>(counts[c]);
      cs.centroids(c, t) = static_cast<float>(means[c][t]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) cs.wcss += detail::squared_distance(m.row(i), means[assignment[i]]);
  return cs;
}

inline ClusterSet cluster(const EmbeddingMatrix& m, const ClusterConfig& cfg, std::span<const std::string> ids = {}) {
  return cfg.algorithm == ClusterAlgorithm::kKMeans ? kmeans(m, cfg, ids) : agglomerative(m, cfg, ids);
}

struct MajorityLabel {
  std::string label;
  double agreement = 0.0;
};

/// Modal label and its fraction; ties go to the lexicographically smallest.
inline MajorityLabel majority_label(const std::vector<std::string>& member_labels) {
  if (member_labels.empty()) throw InvalidArgument("majority_label: empty input");
  std::map<std::string, std::size_t> counts;
  for (const auto& l : member_labels) ++counts[l];
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return {best->first, static_cast<double>(best->second) / static_cast<double>(member_labels.size())};
}

/// Fraction of items whose label equals their cluster's modal label.
inline double purity(const ClusterSet& cs, const std::unordered_map<std::string, std::string>& truth) {
  std::size_t total = 0;
  std::size_t modal = 0;
  for (const auto& members : cs.clusters) {
    if (members.empty()) continue;
    std::map<std::string, std::size_t> counts;
    for (const auto& id : members) {
      const auto it = truth.find(id);
      if (it == truth.end()) throw NotFound("purity: no truth label for '" + id + "'");
      ++counts[it->second];
    }
    std::size_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    modal += best;
    total += members.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(modal) / static_cast<double>(total);
}

inline nlohmann::json to_json(const ClusterSet& cs) {
  nlohmann::ordered_json j;
  j["clusters"] = cs.clusters;
  nlohmann::json centroids = nlohmann::json::array();
  for (std::size_t c = 0; c < cs.centroids.rows(); ++c) {
    const auto r = cs.centroids.row(c);
    centroids.push_back(std::vector<float>(r.begin(), r.end()));
  }
  j["centroids"] = centroids;
  j["wcss"] = cs.wcss;
  j["config"] = {{"algorithm", to_string(cs.config.algorithm)},
                 {"k", cs.config.k},
                 {"seed", cs.config.seed},
                 {"max_iters", cs.config.max_iters},
                 {"tol", cs.config.tol},
                 {"restarts", cs.config.restarts},
                 {"linkage", to_string(cs.config.linkage)}};
  return j;
}

}  // namespace plud
