#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "plud/classifier.hpp"
#include "support.hpp"

using namespace plud;

namespace {

ClassRegistry registry_of(std::initializer_list<const char*> names) {
  ClassRegistry r;
  for (const char* n : names) r.add(n);
  return r;
}

struct Blobs {
  EmbeddingMatrix x;
  std::vector<std::string> labels;
};

// Three tight clusters far apart along separate axes.
Blobs blobs(std::size_t per_class, std::uint64_t seed) {
  const auto noise = plud::testing::random_matrix(3 * per_class, 4, seed, 0.2);
  Blobs b{EmbeddingMatrix(3 * per_class, 4), {}};
  const char* names[] = {"arm", "hand", "foot"};
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const std::size_t c = i % 3;
    for (std::size_t j = 0; j < 4; ++j) b.x(i, j) = noise(i, j) + (j == c ? 3.0f : 0.0f);
    b.labels.push_back(names[c]);
  }
  return b;
}

ClassifierModel random_model(Architecture arch, std::size_t d, std::size_t classes, std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  auto model = make_model({arch, 6}, d, names, classes, seed);
  // Nonzero weights everywhere, including LINEAR, so every gradient entry is exercised.
  auto rng = make_rng(seed, "test-weights");
  for (auto block : model.parameter_blocks()) {
    for (auto& v : block) v = uniform01(rng) - 0.5;
  }
  return model;
}

}  // namespace

TEST(Classifier, AnalyticGradientMatchesCentralDifferences) {
  for (const auto arch : {Architecture::kLinear, Architecture::kMlp1}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto model = random_model(arch, 5, 4, seed);
      const auto x = plud::testing::random_matrix(7, 5, seed);
      const std::vector<std::size_t> y{0, 1, 2, 3, 1, 2, 0};
      EXPECT_LT(grad_check(model, x, y, 1e-3, 1e-3), 1e-4) << to_string(arch) << " seed " << seed;
      EXPECT_LT(grad_check(model, x, y, 0.0, 1e-3), 1e-4) << to_string(arch) << " seed " << seed;
    }
  }
}

TEST(Classifier, LossMatchesDirectCrossEntropy) {
  const auto model = random_model(Architecture::kLinear, 3, 2, 4);
  const auto x = plud::testing::random_matrix(2, 3, 4);
  const std::vector<std::size_t> y{1, 0};
  double expected = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    double z[2];
    for (std::size_t c = 0; c < 2; ++c) {
      z[c] = model.output_bias(c);
      for (std::size_t j = 0; j < 3; ++j) z[c] += model.output_weights(c, j) * x(i, j);
    }
    expected -= z[y[i]] - std::log(std::exp(z[0]) + std::exp(z[1]));
  }
  expected /= 2.0;
  const double l2 = 0.01;
  expected += l2 * model.output_weights.squaredNorm();
  EXPECT_NEAR(batch_loss(model, x, y, l2), expected, 1e-12);
}

TEST(Classifier, SoftmaxIsShiftInvariantAndStable) {
  MatrixRM a(1, 3);
  a << 1.0, 2.0, 3.0;
  MatrixRM b = a.array() + 1000.0;
  detail::softmax_rows(a);
  detail::softmax_rows(b);
  EXPECT_NEAR((a - b).cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR(a.sum(), 1.0, 1e-15);
  EXPECT_TRUE(b.allFinite());
}

TEST(Classifier, LearnsSeparableClasses) {
  const auto train_set = blobs(40, 1);
  const auto test_set = blobs(20, 2);
  const auto reg = registry_of({"arm", "hand", "foot"});
  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.epochs = 60;
  for (const auto arch : {Architecture::kLinear, Architecture::kMlp1}) {
    const auto model = train(train_set.x, train_set.labels, reg, cfg, {arch, 8});
    const auto preds = predict(model, test_set.x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label() == test_set.labels[i];
    EXPECT_EQ(correct, preds.size()) << to_string(arch);
  }
}

TEST(Classifier, PredictionsRankClassesByProbability) {
  const auto model = random_model(Architecture::kMlp1, 4, 5, 3);
  const auto x = plud::testing::random_matrix(10, 4, 3);
  const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  const auto preds = predict(model, x, ids, true);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    EXPECT_EQ(p.item_id, ids[i]);
    ASSERT_EQ(p.ranked.size(), 5u);
    double total = 0.0;
    for (std::size_t r = 0; r < 5; ++r) {
      total += p.ranked[r].probability;
      if (r > 0) {
        EXPECT_GE(p.ranked[r - 1].probability, p.ranked[r].probability);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(p.confidence, p.ranked[0].probability);
    EXPECT_EQ(p.feature.size(), 6u);
  }
  EXPECT_THROW(predict(model, plud::testing::random_matrix(2, 3, 1)), InvalidArgument);
}

TEST(Classifier, LinearFeatureEmbedIsIdentity) {
  const auto model = random_model(Architecture::kLinear, 4, 3, 1);
  const auto x = plud::testing::random_matrix(6, 4, 1);
  EXPECT_EQ(feature_embed(model, x), x);
  const auto mlp = random_model(Architecture::kMlp1, 4, 3, 1);
  const auto h = feature_embed(mlp, x);
  EXPECT_EQ(h.cols(), 6u);
  for (float v : h.values()) EXPECT_LE(std::abs(v), 1.0f);
}

TEST(Classifier, ZeroEpochWarmStartReturnsTheWarmParameters) {
  const auto data = blobs(10, 5);
  auto reg = registry_of({"arm", "hand", "foot"});
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto first = train(data.x, data.labels, reg, cfg, {Architecture::kMlp1, 8});
  cfg.epochs = 0;
  const auto again = train(data.x, data.labels, reg, cfg, {Architecture::kMlp1, 8}, &first);
  EXPECT_EQ(again, first);
}

TEST(Classifier, WarmStartExtendsOutputLayerForNewClasses) {
  const auto data = blobs(10, 5);
  auto reg = registry_of({"arm", "hand", "foot"});
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto first = train(data.x, data.labels, reg, cfg, {Architecture::kLinear, 0});
  reg.add("torso");
  cfg.epochs = 0;
  const auto grown = train(data.x, data.labels, reg, cfg, {Architecture::kLinear, 0}, &first);
  ASSERT_EQ(grown.num_classes(), 4u);
  EXPECT_EQ(grown.output_weights.topRows(3), first.output_weights);
  EXPECT_TRUE(grown.output_weights.row(3).isZero());
  EXPECT_EQ(grown.output_bias(3), 0.0);

  auto other = registry_of({"hand", "arm", "foot"});
  EXPECT_THROW(train(data.x, data.labels, other, cfg, {Architecture::kLinear, 0}, &first), InvalidArgument);
}

TEST(Classifier, ReturnsBestValidationEpochAndLogsRunningBest) {
  const auto data = blobs(30, 6);
  const auto reg = registry_of({"arm", "hand", "foot"});
  TrainConfig cfg;
  cfg.learning_rate = 2.0;  // deliberately unstable so validation loss wanders
  cfg.epochs = 25;
  cfg.patience = 25;
  TrainingLog log;
  const auto model = train(data.x, data.labels, reg, cfg, {Architecture::kMlp1, 8}, nullptr, &log);
  ASSERT_EQ(log.validation_loss.size(), 25u);
  EXPECT_EQ(log.validation_size, 9u);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < log.validation_loss.size(); ++e) {
    best = std::min(best, log.validation_loss[e]);
    EXPECT_LE(log.running_best[e], best);
    if (e > 0) {
      EXPECT_LE(log.running_best[e], log.running_best[e - 1]);
    }
  }
  if (log.best_epoch > 0) {
    EXPECT_DOUBLE_EQ(log.running_best.back(), log.validation_loss[log.best_epoch - 1]);
  }
  EXPECT_EQ(model.train_size, data.labels.size());
}

TEST(Classifier, EarlyStoppingHonorsPatience) {
  const auto data = blobs(30, 6);
  const auto reg = registry_of({"arm", "hand", "foot"});
  TrainConfig cfg;
  cfg.learning_rate = 2.0;
  cfg.epochs = 200;
  cfg.patience = 3;
  TrainingLog log;
  train(data.x, data.labels, reg, cfg, {Architecture::kMlp1, 8}, nullptr, &log);
  // Replay the stopping rule from the logged losses.
  std::size_t since_best = 0;
  std::size_t stop = 0;
  for (std::size_t e = 0; e < log.validation_loss.size(); ++e) {
    const double previous_best = e == 0 ? std::numeric_limits<double>::infinity() : log.running_best[e - 1];
    const bool improved = log.validation_loss[e] < previous_best && log.running_best[e] == log.validation_loss[e];
    since_best = improved ? 0 : since_best + 1;
    if (since_best >= cfg.patience) {
      stop = e + 1;
      break;
    }
  }
  if (stop == 0) stop = cfg.epochs;
  EXPECT_EQ(log.validation_loss.size(), stop);
}

TEST(Classifier, TrainingIsDeterministic) {
  const auto data = blobs(20, 8);
  const auto reg = registry_of({"arm", "hand", "foot"});
  TrainConfig cfg;
  cfg.seed = 99;
  cfg.epochs = 10;
  EXPECT_EQ(train(data.x, data.labels, reg, cfg, {Architecture::kMlp1, 8}),
            train(data.x, data.labels, reg, cfg, {Architecture::kMlp1, 8}));
}

TEST(Classifier, RejectsDegenerateTrainingSets) {
  const auto data = blobs(4, 1);
  const auto reg = registry_of({"arm", "hand", "foot"});
  TrainConfig cfg;
  std::vector<std::string> one_class(data.labels.size(), "arm");
  EXPECT_THROW(train(data.x, one_class, reg, cfg, {}), InvalidArgument);
  auto unknown = data.labels;
  unknown[0] = "tail";
  EXPECT_THROW(train(data.x, unknown, reg, cfg, {}), InvalidArgument);
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train(data.x, data.labels, reg, cfg, {}), InvalidArgument);
}

TEST(Checkpoint, SaveLoadIsBitExact) {
  for (const auto arch : {Architecture::kLinear, Architecture::kMlp1}) {
    auto model = random_model(arch, 5, 3, 12);
    model.trained_at_iteration = 4;
    model.train_size = 321;
    std::stringstream buf;
    save_model(buf, model);
    const auto loaded = load_model(buf);
    EXPECT_EQ(loaded, model);
    std::stringstream again;
    save_model(again, loaded);
    EXPECT_EQ(again.str(), [&] {
      std::stringstream s;
      save_model(s, model);
      return s.str();
    }());
  }
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto model = random_model(Architecture::kMlp1, 3, 2, 1);
  std::stringstream buf;
  save_model(buf, model);
  auto bytes = buf.str();

  std::istringstream bad_magic("PLUDMDL2" + bytes.substr(8));
  EXPECT_THROW(load_model(bad_magic), FormatError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_model(truncated), FormatError);
  std::istringstream trailing(bytes + "x");
  EXPECT_THROW(load_model(trailing), FormatError);
  auto nan_bytes = bytes;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan_bytes.data() + nan_bytes.size() - 8, &nan, 8);
  std::istringstream with_nan(nan_bytes);
  EXPECT_THROW(load_model(with_nan), DataError);
}
