#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <unordered_map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "plud/error.hpp"
#include "plud/pludemb.hpp"
#include "plud/rng.hpp"
#include "plud/types.hpp"

namespace plud {

enum class EmbedderKind { kPrecomputed, kSynthetic, kExternal };

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::kPrecomputed;
  std::size_t dimension = 1;
  // SYNTHETIC
  std::vector<std::vector<double>> class_means;  // one per generator class
  double sigma = 0.0;                            // within-class standard deviation
  double drift_rate = 0.0;                       // per unit time, along a per-subject direction
  std::uint64_t seed = 0;
  // EXTERNAL
  std::filesystem::path exchange_dir;

  void validate() const {
    if (dimension < 1) throw InvalidArgument("embedder: dimension must be >= 1");
    if (!(sigma >= 0.0)) throw InvalidArgument("embedder: sigma must be >= 0");
    if (!(drift_rate >= 0.0)) throw InvalidArgument("embedder: drift rate must be >= 0");
    for (const auto& mean : class_means) {
      if (mean.size() != dimension) throw InvalidArgument("embedder: class mean length != dimension");
    }
  }
};

/// Input row for the synthetic generator.
struct SynthItem {
  std::string item_id;
  std::string subject_id;
  std::size_t generator_class = 0;
  double time = 0.0;
};

inline EmbeddingMatrix load_precomputed(std::istream& blob) { return read_pludemb(blob); }

/// Unit drift direction of a subject, a pure function of (seed, subject).
inline std::vector<double> subject_direction(std::uint64_t seed, const std::string& subject_id, std::size_t d) {
  auto rng = make_rng(seed, "subject-direction", stable_hash(subject_id));
  std::normal_distribution<double> normal;
  std::vector<double> u(d);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : u) {
      x = normal(rng);
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : u) x *= inv;
  return u;
}

/// row = mean[class] + drift_rate * time * u(subject) + N(0, sigma^2) noise,
/// with the noise keyed by (seed, item_id).
inline EmbeddingMatrix synth_embed(const std::vector<SynthItem>& items, const EmbedderSpec& spec) {
  if (spec.kind != EmbedderKind::kSynthetic) throw InvalidArgument("synth_embed: spec kind is not SYNTHETIC");
  spec.validate();
  const std::size_t d = spec.dimension;
  EmbeddingMatrix out(items.size(), d);
  std::unordered_map<std::string, std::vector<double>> directions;
  std::normal_distribution<double> normal;
  std::vector<double> row(d);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (item.generator_class >= spec.class_means.size()) {
      throw InvalidArgument("synth_embed: class " + std::to_string(item.generator_class) + " out of range for item '" +
                            item.item_id + "'");
    }
    const auto& mean = spec.class_means[item.generator_class];
    row.assign(mean.begin(), mean.end());
    if (spec.drift_rate > 0.0 && item.time != 0.0) {
      auto it = directions.find(item.subject_id);
      if (it == directions.end()) {
        it = directions.emplace(item.subject_id, subject_direction(spec.seed, item.subject_id, d)).first;
      }
      const double scale = spec.drift_rate * item.time;
      for (std::size_t j = 0; j < d; ++j) row[j] += scale * it->second[j];
    }
    if (spec.sigma > 0.0) {
      auto rng = make_rng(spec.seed, "item-noise", stable_hash(item.item_id));
      for (std::size_t j = 0; j < d; ++j) row[j] += spec.sigma * normal(rng);
      normal.reset();
    }
    auto dst = out.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = static_cast<float>(row[j]);
  }
  return out;
}

/// Scales every nonzero row to unit Euclidean norm. Zero rows stay zero.
inline EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double norm2 = 0.0;
    for (float v : r) norm2 += static_cast<double>(v) * v;
    if (norm2 == 0.0) continue;
    const double norm = std::sqrt(norm2);
    for (auto& v : r) v = static_cast<float>(v / norm);
  }
  return out;
}

// External exchange directory protocol. The caller drops `request.jsonl`;
// the external runtime writes `embeddings.pludemb` (rows in request order)
// and then `done.marker`.
namespace external {

inline constexpr const char* kRequestFile = "request.jsonl";
inline constexpr const char* kDoneMarker = "done.marker";
inline constexpr const char* kEmbeddingsFile = "embeddings.pludemb";

inline void write_request(const std::filesystem::path& dir, const std::vector<ItemRecord>& items) {
  std::filesystem::create_directories(dir);
  std::filesystem::remove(dir / kDoneMarker);
  std::filesystem::remove(dir / kEmbeddingsFile);
  const auto tmp = dir / (std::string(kRequestFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw EnvironmentError("cannot write " + tmp.string());
    for (const auto& item : items) {
      nlohmann::ordered_json j;
      j["item_id"] = item.item_id;
      if (item.source_uri) j["source_uri"] = *item.source_uri;
      out << j.dump() << '\n';
    }
  }
  std::filesystem::rename(tmp, dir / kRequestFile);
}

/// Result if the marker is present; nullopt while the runtime is working.
inline std::optional<EmbeddingMatrix> poll_result(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / kDoneMarker)) return std::nullopt;
  std::ifstream in(dir / kEmbeddingsFile, std::ios::binary);
  if (!in) throw FormatError("exchange: done.marker present but embeddings.pludemb missing");
  return read_pludemb(in);
}

inline EmbeddingMatrix embed(const std::filesystem::path& dir, const std::vector<ItemRecord>& items,
                             std::chrono::milliseconds timeout,
                             std::chrono::milliseconds poll_every = std::chrono::milliseconds(200)) {
  write_request(dir, items);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto m = poll_result(dir)) {
      if (m->rows() != items.size()) {
        throw FormatError("exchange: expected " + std::to_string(items.size()) + " rows, got " +
                          std::to_string(m->rows()));
      }
      return *std::move(m);
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      throw EnvironmentError("exchange: timed out waiting for " + (dir / kDoneMarker).string());
    }
    std::this_thread::sleep_for(poll_every);
  }
}

}  // namespace external

}  // namespace plud
