#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "plud/embedder.hpp"
#include "support.hpp"

using namespace plud;

namespace {

std::vector<double> row_of(const EmbeddingMatrix& m, std::size_t i) {
  const auto r = m.row(i);
  return {r.begin(), r.end()};
}

}  // namespace

TEST(SynthEmbed, SampleMomentsMatchTheGenerator) {
  EmbedderSpec spec;
  spec.kind = EmbedderKind::kSynthetic;
  spec.dimension = 3;
  spec.class_means = {{1.0, -2.0, 0.5}};
  spec.sigma = 0.7;
  spec.seed = 4;
  std::vector<SynthItem> items;
  const std::size_t n = 20000;
  for (std::size_t i = 0; i < n; ++i) items.push_back({"i" + std::to_string(i), "s", 0, 0.0});
  const auto m = synth_embed(items, spec);
  for (std::size_t j = 0; j < 3; ++j) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += m(i, j);
      sq += static_cast<double>(m(i, j)) * m(i, j);
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    EXPECT_NEAR(mean, spec.class_means[0][j], 5 * spec.sigma / std::sqrt(n)) << j;
    EXPECT_NEAR(var, spec.sigma * spec.sigma, 5 * spec.sigma * spec.sigma * std::sqrt(2.0 / n)) << j;
  }
}

TEST(SynthEmbed, DriftMovesAlongTheSubjectDirection) {
  EmbedderSpec spec;
  spec.kind = EmbedderKind::kSynthetic;
  spec.dimension = 5;
  spec.class_means = {{0, 0, 0, 0, 0}};
  spec.drift_rate = 2.0;
  spec.seed = 9;
  const auto m = synth_embed({{"a", "s1", 0, 0.0}, {"b", "s1", 0, 1.5}, {"c", "s2", 0, 1.5}}, spec);
  const auto u = subject_direction(9, "s1", 5);
  double norm2 = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(m(0, j), 0.0f);
    EXPECT_NEAR(m(1, j), 3.0 * u[j], 1e-6);
    norm2 += u[j] * u[j];
  }
  EXPECT_NEAR(norm2, 1.0, 1e-12);
  EXPECT_NE(row_of(m, 1), row_of(m, 2));
}

TEST(SynthEmbed, NoiseIsKeyedByItemNotPosition) {
  EmbedderSpec spec;
  spec.kind = EmbedderKind::kSynthetic;
  spec.dimension = 4;
  spec.class_means = {{0, 0, 0, 0}, {1, 1, 1, 1}};
  spec.sigma = 1.0;
  const auto a = synth_embed({{"x", "s", 0, 0}, {"y", "s", 1, 0}}, spec);
  const auto b = synth_embed({{"y", "s", 1, 0}, {"x", "s", 0, 0}}, spec);
  EXPECT_EQ(row_of(a, 0), row_of(b, 1));
  EXPECT_EQ(row_of(a, 1), row_of(b, 0));
  EXPECT_THROW(synth_embed({{"z", "s", 2, 0}}, spec), InvalidArgument);
}

TEST(L2Normalize, UnitRowsAndZeroRowsStayZero) {
  EmbeddingMatrix m(3, 2, {3, 4, 0, 0, -1e-20f, 0});
  const auto n = l2_normalize(m);
  EXPECT_FLOAT_EQ(n(0, 0), 0.6f);
  EXPECT_FLOAT_EQ(n(0, 1), 0.8f);
  EXPECT_EQ(n(1, 0), 0.0f);
  EXPECT_FLOAT_EQ(n(2, 0), -1.0f);
}

TEST(ExternalEmbedder, ExchangeProtocol) {
  plud::testing::TempDir dir;
  std::vector<ItemRecord> items(2);
  items[0].item_id = "a";
  items[0].source_uri = "img/a.jpg";
  items[1].item_id = "b";
  external::write_request(dir.path(), items);
  EXPECT_EQ(plud::testing::read_text(dir / external::kRequestFile),
            "{\"item_id\":\"a\",\"source_uri\":\"img/a.jpg\"}\n{\"item_id\":\"b\"}\n");
  EXPECT_FALSE(external::poll_result(dir.path()));

  const auto rows = plud::testing::random_matrix(2, 3, 1);
  {
    std::ofstream out(dir / external::kEmbeddingsFile, std::ios::binary);
    write_pludemb(out, rows);
  }
  plud::testing::write_text(dir / external::kDoneMarker, "");
  EXPECT_EQ(*external::poll_result(dir.path()), rows);

  // A fresh request clears the previous answer; a wrong row count is rejected.
  std::thread runtime([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    std::ofstream out(dir / external::kEmbeddingsFile, std::ios::binary);
    write_pludemb(out, plud::testing::random_matrix(1, 3, 2));
    out.close();
    plud::testing::write_text(dir / external::kDoneMarker, "");
  });
  EXPECT_THROW(external::embed(dir.path(), items, std::chrono::seconds(5), std::chrono::milliseconds(10)),
               FormatError);
  runtime.join();
  EXPECT_THROW(external::embed(dir.path(), items, std::chrono::milliseconds(30), std::chrono::milliseconds(10)),
               EnvironmentError);
}
