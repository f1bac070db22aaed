#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "plud/campaign.hpp"
#include "plud/synthetic.hpp"

namespace plud::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("plud-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline EmbeddingMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  EmbeddingMatrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : m.row(i)) v = static_cast<float>(normal(rng));
  }
  return m;
}

/// A small, well-separated world: 4 classes, 12 pool subjects, 2 test
/// subjects, 8 items per (subject, class).
inline WorldSpec small_world(std::uint64_t seed = 3) {
  WorldSpec w;
  w.classes = 4;
  w.dimension = 8;
  w.separation = 5.0;
  w.sigma = 0.6;
  w.schedule = {8};
  w.pool_subjects = 12;
  w.test_subjects = 2;
  w.seed = seed;
  return w;
}

inline CampaignConfig small_config(std::uint64_t seed = 5) {
  CampaignConfig c;
  c.campaign_id = "test";
  c.seed = seed;
  c.cluster.seed = seed;
  c.cluster.restarts = 3;
  c.train.seed = seed;
  c.train.learning_rate = 0.5;
  c.train.epochs = 30;
  c.model.hidden = 16;
  c.routing.batch_size = 60;
  c.oracle.seed = seed;
  return c;
}

inline SamplingStrategy random_sample(std::size_t size, std::uint64_t seed = 9) {
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kRandom;
  s.size = size;
  s.seed = seed;
  return s;
}

/// Writes a world as campaign input files; returns (manifest, embeddings, labels) paths.
struct InputFiles {
  std::filesystem::path manifest, embeddings, labels;
};

inline InputFiles write_inputs(const World& w, const std::filesystem::path& dir) {
  InputFiles f{dir / "manifest.jsonl", dir / "emb.pludemb", dir / "labels.jsonl"};
  {
    std::ofstream m(f.manifest);
    w.write_manifest(m);
  }
  {
    std::ofstream e(f.embeddings, std::ios::binary);
    write_pludemb(e, w.embeddings);
  }
  {
    std::ofstream l(f.labels);
    w.write_truth(l);
  }
  return f;
}

}  // namespace plud::testing
