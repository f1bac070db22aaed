#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "plud/evaluation.hpp"
#include "plud/rng.hpp"

using namespace plud;

namespace {

const std::vector<std::string> kClasses{"arm", "hand", "foot"};

Prediction make_prediction(const std::string& id, std::vector<double> probs) {
  Prediction p;
  p.item_id = id;
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  for (auto k : order) p.ranked.push_back({kClasses[k], k, probs[k]});
  p.confidence = p.ranked.front().probability;
  return p;
}

// Reference: top-k hit counts as the true class, a miss as the top-1 class.
std::vector<std::vector<int>> reference_confusion(const std::vector<Prediction>& preds, const TruthMap& truth,
                                                  std::size_t k) {
  std::vector<std::vector<int>> cm(3, std::vector<int>(3, 0));
  auto index = [](const std::string& name) {
    return static_cast<std::size_t>(std::find(kClasses.begin(), kClasses.end(), name) - kClasses.begin());
  };
  for (const auto& p : preds) {
    const auto t = index(truth.at(p.item_id));
    bool hit = false;
    for (std::size_t r = 0; r < k; ++r) hit |= p.ranked[r].label == truth.at(p.item_id);
    ++cm[t][hit ? t : index(p.ranked[0].label)];
  }
  return cm;
}

}  // namespace

TEST(Evaluation, HandWorkedExample) {
  // truth arm: predicted arm, hand; truth hand: hand; truth foot: arm (foot second).
  const std::vector<Prediction> preds{
      make_prediction("a1", {0.7, 0.2, 0.1}),
      make_prediction("a2", {0.3, 0.6, 0.1}),
      make_prediction("h1", {0.1, 0.8, 0.1}),
      make_prediction("f1", {0.5, 0.1, 0.4}),
  };
  const TruthMap truth{{"a1", "arm"}, {"a2", "arm"}, {"h1", "hand"}, {"f1", "foot"}};
  const auto rep = report(preds, truth, {1, 2});
  const auto& top1 = *rep.find(1);
  EXPECT_EQ(top1.confusion.counts, (std::vector<std::uint64_t>{1, 1, 0, 0, 1, 0, 1, 0, 0}));
  // arm: P = 1/2, R = 1/2. hand: P = 1/2, R = 1. foot: P = 0, R = 0.
  EXPECT_DOUBLE_EQ(top1.average_precision, (0.5 + 0.5 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(top1.average_recall, (0.5 + 1.0 + 0.0) / 3.0);
  EXPECT_DOUBLE_EQ(top1.f_score, 2.0 * (1.0 / 3.0) * 0.5 / (1.0 / 3.0 + 0.5));
  EXPECT_DOUBLE_EQ(top1.accuracy, 0.5);

  const auto& top2 = *rep.find(2);
  EXPECT_EQ(top2.confusion.trace(), 4u);
  EXPECT_DOUBLE_EQ(top2.average_precision, 1.0);
  EXPECT_DOUBLE_EQ(top2.accuracy, 1.0);
}

TEST(Evaluation, ConfusionMatchesReferenceOnRandomPredictions) {
  auto rng = make_rng(4, "eval");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Prediction> preds;
    TruthMap truth;
    for (int i = 0; i < 40; ++i) {
      std::vector<double> probs{uniform01(rng), uniform01(rng), uniform01(rng)};
      const double s = probs[0] + probs[1] + probs[2];
      for (auto& p : probs) p /= s;
      const auto id = "i" + std::to_string(i);
      preds.push_back(make_prediction(id, probs));
      truth[id] = kClasses[uniform_index(rng, 3)];
    }
    for (std::size_t k : {1, 2, 3}) {
      const auto cm = confusion(preds, truth, k);
      const auto ref = reference_confusion(preds, truth, k);
      for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t p = 0; p < 3; ++p) ASSERT_EQ(cm.at(t, p), static_cast<std::uint64_t>(ref[t][p]));
      }
      const auto pr = precision_recall(cm);
      for (std::size_t c = 0; c < 3; ++c) {
        int row = 0, col = 0;
        for (std::size_t j = 0; j < 3; ++j) {
          row += ref[c][j];
          col += ref[j][c];
        }
        EXPECT_DOUBLE_EQ(pr[c].precision, col ? ref[c][c] / static_cast<double>(col) : 0.0);
        EXPECT_DOUBLE_EQ(pr[c].recall, row ? ref[c][c] / static_cast<double>(row) : 0.0);
      }
    }
  }
}

TEST(Evaluation, TopKEqualToClassCountIsPerfect) {
  const std::vector<Prediction> preds{make_prediction("x", {0.1, 0.2, 0.7}), make_prediction("y", {0.6, 0.3, 0.1})};
  const TruthMap truth{{"x", "arm"}, {"y", "foot"}};
  const auto rep = report(preds, truth, {3});
  EXPECT_DOUBLE_EQ(rep.by_k[0].accuracy, 1.0);
}

TEST(Evaluation, KIsClampedAndDeduplicated) {
  const std::vector<Prediction> preds{make_prediction("x", {0.1, 0.2, 0.7})};
  const TruthMap truth{{"x", "foot"}};
  const auto rep = report(preds, truth, {1, 5, 3, 0});
  ASSERT_EQ(rep.by_k.size(), 2u);
  EXPECT_EQ(rep.by_k[0].k, 1u);
  EXPECT_EQ(rep.by_k[1].k, 3u);
  EXPECT_THROW(confusion(preds, truth, 4), InvalidArgument);
}

TEST(Evaluation, TruthOnlyClassesExtendTheAxis) {
  const std::vector<Prediction> preds{make_prediction("x", {0.1, 0.2, 0.7}), make_prediction("y", {0.5, 0.3, 0.2})};
  const TruthMap truth{{"x", "torso"}, {"y", "arm"}};
  const auto rep = report(preds, truth, {1});
  EXPECT_EQ(rep.classes, (std::vector<std::string>{"arm", "hand", "foot", "torso"}));
  EXPECT_EQ(rep.by_k[0].confusion.at(3, 2), 1u);
  EXPECT_DOUBLE_EQ(rep.by_k[0].per_class[3].recall, 0.0);
}

TEST(Evaluation, MissingTruthAndEmptyInputAreErrors) {
  const std::vector<Prediction> preds{make_prediction("x", {0.1, 0.2, 0.7})};
  EXPECT_THROW(report(preds, {}, {1}), NotFound);
  EXPECT_THROW(report({}, {}, {1}), MissingPrerequisite);
}

TEST(Evaluation, FScoreEdgeCases) {
  EXPECT_EQ(f_score(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f_score(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(f_score(0.5, 0.25), 2.0 * 0.125 / 0.75);
  EXPECT_THROW(f_score(-0.1, 0.5), InvalidArgument);
  EXPECT_THROW(macro_average({}), InvalidArgument);
}

TEST(Evaluation, SerializersReportPercentages) {
  const std::vector<Prediction> preds{make_prediction("a", {0.7, 0.2, 0.1}), make_prediction("b", {0.7, 0.2, 0.1}),
                                      make_prediction("c", {0.1, 0.2, 0.7})};
  const TruthMap truth{{"a", "arm"}, {"b", "hand"}, {"c", "foot"}};
  const auto rep = report(preds, truth, {1});
  const auto j = to_json(rep);
  EXPECT_EQ(j["metrics"][0]["precision"][0].get<double>(), 50.0);
  EXPECT_EQ(j["metrics"][0]["accuracy"].get<double>(), 66.67);
  const auto text = to_text(rep);
  EXPECT_NE(text.find("Precision of classes"), std::string::npos);
  EXPECT_NE(text.find("AP"), std::string::npos);
  std::ostringstream csv;
  write_confusion_csv(csv, rep.by_k[0].confusion);
  EXPECT_EQ(csv.str(), "true\\predicted,arm,hand,foot\narm,1,0,0\nhand,1,0,0\nfoot,0,0,1\n");
}
