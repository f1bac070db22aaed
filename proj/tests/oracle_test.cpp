#include <gtest/gtest.h>

#include "plud/oracle.hpp"

using namespace plud;

namespace {

OracleConfig config(double noise, std::uint64_t seed = 1) {
  OracleConfig c;
  c.noise = noise;
  c.seed = seed;
  for (int i = 0; i < 30; ++i) c.truth["a" + std::to_string(i)] = "arm";
  for (int i = 0; i < 30; ++i) c.truth["h" + std::to_string(i)] = "hand";
  for (int i = 0; i < 30; ++i) c.truth["f" + std::to_string(i)] = "foot";
  return c;
}

ReviewTask task(std::string id, std::vector<std::string> members) {
  ReviewTask t;
  t.task_id = std::move(id);
  t.members = std::move(members);
  return t;
}

}  // namespace

TEST(Oracle, NoiselessReviewEqualsGroundTruth) {
  const Oracle oracle(config(0.0));
  const auto s = oracle.review_cluster(task("t1", {"a1", "a2", "h3", "a4", "f5"}));
  EXPECT_EQ(s.label, "arm");
  EXPECT_EQ(s.misclustered, (std::vector<std::string>{"h3", "f5"}));
  EXPECT_EQ(s.item_labels, (std::map<std::string, std::string>{{"h3", "hand"}, {"f5", "foot"}}));
  EXPECT_EQ(s.reviewer, Reviewer::kOracle);
  EXPECT_EQ(oracle.label_item("f9"), "foot");
}

TEST(Oracle, PureClusterNeedsNoToggles) {
  const Oracle oracle(config(0.0));
  const auto s = oracle.review_cluster(task("t", {"h1", "h2", "h3"}));
  EXPECT_EQ(s.label, "hand");
  EXPECT_TRUE(s.misclustered.empty());
}

TEST(Oracle, AnswersAreReproducible) {
  const Oracle a(config(0.3, 7));
  const Oracle b(config(0.3, 7));
  const auto t = task("r001-t004", {"a1", "a2", "h1", "h2", "f1"});
  EXPECT_EQ(a.review_cluster(t), b.review_cluster(t));
  EXPECT_EQ(a.label_item("h7"), b.label_item("h7"));
}

TEST(Oracle, NoiseRateMatchesConfiguration) {
  const Oracle oracle(config(0.2, 3));
  int wrong = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const auto s = oracle.review_cluster(task("t" + std::to_string(i), {"a1"}));
    wrong += s.label != "arm";
  }
  const double rate = static_cast<double>(wrong) / n;
  EXPECT_NEAR(rate, 0.2, 4 * std::sqrt(0.2 * 0.8 / n));
}

TEST(Oracle, WrongLabelsAreOtherKnownClasses) {
  const Oracle oracle(config(1.0, 2));
  for (int i = 0; i < 50; ++i) {
    const auto l = oracle.label_item("a" + std::to_string(i % 30));
    EXPECT_NE(l, "arm");
    EXPECT_TRUE(l == "hand" || l == "foot");
  }
}

TEST(Oracle, RejectsUnknownItemsAndBadNoise) {
  const Oracle oracle(config(0.0));
  EXPECT_THROW(oracle.label_item("zzz"), NotFound);
  EXPECT_THROW(oracle.review_cluster(task("t", {"a1", "zzz"})), NotFound);
  EXPECT_THROW(Oracle(config(1.5)), InvalidArgument);
}
