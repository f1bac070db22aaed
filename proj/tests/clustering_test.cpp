#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <set>

#include "plud/clustering.hpp"
#include "support.hpp"

using namespace plud;

namespace {

double wcss_of(const EmbeddingMatrix& m, const std::vector<std::size_t>& assignment, std::size_t k) {
  const std::size_t d = m.cols();
  std::vector<std::vector<double>> mean(k, std::vector<double>(d, 0.0));
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[assignment[i]][j] += m(i, j);
    ++count[assignment[i]];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (auto& v : mean[c]) v /= std::max<std::size_t>(count[c], 1);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = m(i, j) - mean[assignment[i]][j];
      total += diff * diff;
    }
  }
  return total;
}

// Exhaustive optimum over every 2-way split.
double brute_force_wcss2(const EmbeddingMatrix& m) {
  const std::size_t n = m.rows();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask + 1 < (1u << n); ++mask) {
    std::vector<std::size_t> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = (mask >> i) & 1u;
    best = std::min(best, wcss_of(m, a, 2));
  }
  return best;
}

// Naive agglomerative reference: recompute every cluster-pair distance from
// raw points at every step.
std::vector<std::set<std::size_t>> naive_agglomerative(const EmbeddingMatrix& m, std::size_t k, Linkage linkage) {
  auto dist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t t = 0; t < m.cols(); ++t) {
      const double diff = static_cast<double>(m(i, t)) - m(j, t);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  std::vector<std::set<std::size_t>> clusters;
  for (std::size_t i = 0; i < m.rows(); ++i) clusters.push_back({i});
  while (clusters.size() > k) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 1;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double agg = linkage == Linkage::kSingle ? std::numeric_limits<double>::infinity() : 0.0;
        for (auto i : clusters[a]) {
          for (auto j : clusters[b]) {
            const double dij = dist(i, j);
            if (linkage == Linkage::kSingle) agg = std::min(agg, dij);
            else if (linkage == Linkage::kComplete) agg = std::max(agg, dij);
            else agg += dij;
          }
        }
        if (linkage == Linkage::kAverage) agg /= static_cast<double>(clusters[a].size() * clusters[b].size());
        if (agg < best) {
          best = agg;
          ba = a;
          bb = b;
        }
      }
    }
    clusters[ba].insert(clusters[bb].begin(), clusters[bb].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  std::sort(clusters.begin(), clusters.end());
  return clusters;
}

std::vector<std::set<std::size_t>> as_sets(const ClusterSet& cs) {
  std::vector<std::set<std::size_t>> out;
  for (const auto& members : cs.clusters) {
    std::set<std::size_t> s;
    for (const auto& id : members) s.insert(std::stoul(id));
    out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(KMeans, MatchesBruteForceOptimumOnSmallInstances) {
  std::size_t hits = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto m = plud::testing::random_matrix(8, 2, 1000 + trial);
    ClusterConfig cfg;
    cfg.k = 2;
    cfg.seed = trial;
    const auto cs = kmeans(m, cfg);
    if (cs.wcss <= 1.0001 * brute_force_wcss2(m)) ++hits;
  }
  EXPECT_GE(hits, 95u);
}

TEST(KMeans, WcssHistoryIsNonIncreasingAndEndsAtReportedValue) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = plud::testing::random_matrix(120, 5, seed);
    ClusterConfig cfg;
    cfg.k = 7;
    cfg.seed = seed;
    cfg.restarts = 2;
    cfg.tol = 0.0;
    const auto cs = kmeans(m, cfg);
    ASSERT_FALSE(cs.wcss_history.empty());
    for (std::size_t i = 1; i < cs.wcss_history.size(); ++i) {
      EXPECT_LE(cs.wcss_history[i], cs.wcss_history[i - 1] * (1 + 1e-12)) << "seed " << seed << " step " << i;
    }
    EXPECT_DOUBLE_EQ(cs.wcss_history.back(), cs.wcss);
  }
}

TEST(KMeans, ReportedWcssMatchesIndependentRecomputation) {
  const auto m = plud::testing::random_matrix(60, 3, 42);
  ClusterConfig cfg;
  cfg.k = 4;
  cfg.seed = 1;
  cfg.tol = 0.0;
  const auto cs = kmeans(m, cfg);
  // At convergence the centroids are member means.
  EXPECT_NEAR(cs.wcss, wcss_of(m, cs.assignment, 4), 1e-6 * cs.wcss);
}

TEST(KMeans, PartitionsEveryItemExactlyOnce) {
  const auto m = plud::testing::random_matrix(50, 4, 8);
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("item-" + std::to_string(i));
  ClusterConfig cfg;
  cfg.k = 6;
  const auto cs = kmeans(m, cfg, ids);
  ASSERT_EQ(cs.clusters.size(), 6u);
  std::multiset<std::string> seen;
  for (const auto& c : cs.clusters) {
    EXPECT_FALSE(c.empty());
    seen.insert(c.begin(), c.end());
  }
  EXPECT_EQ(seen, std::multiset<std::string>(ids.begin(), ids.end()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& members = cs.clusters[cs.assignment[i]];
    EXPECT_NE(std::find(members.begin(), members.end(), ids[i]), members.end());
  }
}

TEST(KMeans, IsDeterministicForFixedSeed) {
  const auto m = plud::testing::random_matrix(80, 3, 2);
  ClusterConfig cfg;
  cfg.k = 5;
  cfg.seed = 77;
  const auto a = kmeans(m, cfg);
  const auto b = kmeans(m, cfg);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(KMeans, HandlesDuplicatePointsAndKEqualsN) {
  EmbeddingMatrix same(5, 2, std::vector<float>(10, 1.5f));
  ClusterConfig cfg;
  cfg.k = 3;
  const auto cs = kmeans(same, cfg);
  EXPECT_EQ(cs.wcss, 0.0);
  for (const auto& c : cs.clusters) EXPECT_FALSE(c.empty());

  const auto m = plud::testing::random_matrix(4, 2, 5);
  cfg.k = 4;
  EXPECT_EQ(kmeans(m, cfg).wcss, 0.0);
}

TEST(KMeans, RejectsInvalidInput) {
  const auto m = plud::testing::random_matrix(4, 2, 5);
  ClusterConfig cfg;
  cfg.k = 5;
  EXPECT_THROW(kmeans(m, cfg), InvalidArgument);
  cfg.k = 0;
  EXPECT_THROW(kmeans(m, cfg), InvalidArgument);
  cfg.k = 2;
  auto bad = m;
  bad(2, 1) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(kmeans(bad, cfg), DataError);
}

TEST(Agglomerative, MatchesNaiveReferenceForEveryLinkage) {
  for (const auto linkage : {Linkage::kSingle, Linkage::kComplete, Linkage::kAverage}) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const auto m = plud::testing::random_matrix(24, 3, 500 + seed);
      ClusterConfig cfg;
      cfg.algorithm = ClusterAlgorithm::kAgglomerative;
      cfg.linkage = linkage;
      cfg.k = 2 + seed % 5;
      const auto cs = cluster(m, cfg);
      EXPECT_EQ(as_sets(cs), naive_agglomerative(m, cfg.k, linkage))
          << to_string(linkage) << " seed " << seed;
      EXPECT_NEAR(cs.wcss, wcss_of(m, cs.assignment, cfg.k), 1e-9 * (1 + cs.wcss));
    }
  }
}

TEST(Agglomerative, OrdersClustersBySmallestRow) {
  const auto m = plud::testing::random_matrix(30, 2, 9);
  ClusterConfig cfg;
  cfg.algorithm = ClusterAlgorithm::kAgglomerative;
  cfg.k = 5;
  const auto cs = agglomerative(m, cfg);
  std::size_t previous = 0;
  for (std::size_t c = 0; c < cs.clusters.size(); ++c) {
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (const auto& id : cs.clusters[c]) smallest = std::min<std::size_t>(smallest, std::stoul(id));
    if (c > 0) {
      EXPECT_GT(smallest, previous);
    }
    previous = smallest;
  }
  EXPECT_EQ(cs.assignment[0], 0u);
}

TEST(Majority, PicksModeWithLexicographicTieBreak) {
  EXPECT_EQ(majority_label({"b", "a", "b"}).label, "b");
  EXPECT_DOUBLE_EQ(majority_label({"b", "a", "b"}).agreement, 2.0 / 3.0);
  EXPECT_EQ(majority_label({"hand", "arm"}).label, "arm");
  EXPECT_THROW(majority_label({}), InvalidArgument);
}

TEST(Purity, CountsModalMembers) {
  ClusterSet cs;
  cs.clusters = {{"a", "b", "c"}, {"d", "e"}, {}};
  const std::unordered_map<std::string, std::string> truth{
      {"a", "x"}, {"b", "x"}, {"c", "y"}, {"d", "z"}, {"e", "z"}};
  EXPECT_DOUBLE_EQ(purity(cs, truth), 4.0 / 5.0);
  cs.clusters.push_back({"missing"});
  EXPECT_THROW(purity(cs, truth), NotFound);
}

TEST(DefaultK, FollowsSquareRootRule) {
  EXPECT_EQ(default_k(1), 1u);
  EXPECT_EQ(default_k(2), 2u);
  EXPECT_EQ(default_k(200), 10u);
  EXPECT_EQ(default_k(1000), 22u);
}
