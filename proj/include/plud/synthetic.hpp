#pragma once

// Synthetic photo collections for experiments and tests.
//
// Every subject is photographed through a sequence of phases (fresh to
// decay). For each (subject, class, phase) the schedule gives how many items
// exist. An item's embedding is drawn around the mean of its (class, phase)
// generator class: a class centre, plus the accumulated change shared by all
// classes, plus a stage look of its own for every phase after the first,
// plus the subject's drift and noise. A stage look is a fixed random offset
// pulled `phase_pull` of the way toward a look-alike class (decay makes body
// parts resemble each other).
// Within a class, items are also spread over camera views. View 0 is the
// canonical one and sits on the class trajectory; every other view adds its
// own fixed offset and is pulled `view_pull` of the way toward a look-alike
// class (a close-up arm resembles a hand). A `canonical_share` of items use view 0, the rest spread
// over the other views with Zipf frequencies.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "plud/dataset.hpp"
#include "plud/embedder.hpp"
#include "plud/evaluation.hpp"
#include "plud/rng.hpp"

namespace plud {

inline const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {"arm",   "hand",  "foot",  "legs",  "fullbody",
                                                 "head",  "backside", "torso", "stake", "plastic"};
  return names;
}

struct WorldSpec {
  std::size_t classes = 10;
  std::size_t dimension = 64;
  double separation = 4.0;                   // norm of each class centre
  std::vector<std::size_t> schedule = {1};   // items per (subject, class, phase), one entry per phase
  double phase_drift = 0.0;                  // norm of the shared change per phase step
  double phase_shift = 0.0;                  // norm of the random part of each stage look
  double phase_pull = 0.0;                   // stage look's pull toward a look-alike class centre
  std::size_t views = 1;
  double view_spread = 0.0;                  // norm of each non-canonical (class, view) offset
  double view_skew = 0.0;                    // Zipf exponent over the non-canonical views
  double view_pull = 0.0;                    // fraction of the way toward the look-alike class centre
  double canonical_share = 0.0;              // probability of view 0 (when views > 1)
  double sigma = 1.0;
  double drift_rate = 0.0;                   // per-subject drift per unit time
  std::size_t pool_subjects = 10;
  std::size_t test_subjects = 2;
  std::uint64_t seed = 0;

  std::size_t phases() const noexcept { return schedule.size(); }
};

struct World {
  std::vector<ItemRecord> items;
  std::vector<bool> is_test;
  std::vector<std::size_t> phase;  // per item
  std::vector<std::size_t> view;   // per item
  EmbeddingMatrix embeddings;
  TruthMap truth;
  std::vector<std::string> class_names;

  /// Manifest + embeddings as a DatasetSnapshot with test subjects held out.
  DatasetSnapshot snapshot() const {
    DatasetSnapshot s(items, embeddings);
    for (std::size_t i = 0; i < items.size(); ++i) {
      s.place(items[i].item_id, is_test[i] ? Partition::kHeldOutTest : Partition::kUnlabeledPool);
    }
    return s;
  }

  /// Manifest in the JSON Lines form `plud ingest` reads.
  void write_manifest(std::ostream& out) const {
    for (std::size_t i = 0; i < items.size(); ++i) {
      nlohmann::ordered_json j;
      j["item_id"] = items[i].item_id;
      j["subject_id"] = items[i].subject_id;
      j["embedding_row"] = *items[i].embedding_row;
      if (items[i].captured_at) j["captured_at"] = *items[i].captured_at;
      if (is_test[i]) j["test"] = true;
      out << j.dump() << '\n';
    }
  }

  void write_truth(std::ostream& out) const {
    for (const auto& item : items) {
      out << nlohmann::ordered_json{{"item_id", item.item_id}, {"label", truth.at(item.item_id)}}.dump() << '\n';
    }
  }
};

namespace detail {

inline std::vector<double> random_vector(Rng& rng, std::size_t d, double norm) {
  std::normal_distribution<double> normal;
  std::vector<double> v(d);
  double n2 = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    n2 += x * x;
  }
  const double scale = n2 > 0.0 ? norm / std::sqrt(n2) : 0.0;
  for (auto& x : v) x *= scale;
  return v;
}

}  // namespace detail

inline World make_world(const WorldSpec& spec) {
  if (spec.classes < 2 || spec.schedule.empty() || spec.pool_subjects == 0 || spec.views == 0) {
    throw InvalidArgument("world: need >= 2 classes, a schedule, views and pool subjects");
  }
  const auto& names = default_class_names();
  World w;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class-%02zu", k);
    w.class_names.push_back(k < names.size() ? names[k] : buf);
  }

  const std::size_t d = spec.dimension;
  const std::size_t phases = spec.phases();
  auto rng = make_rng(spec.seed, "world-means");
  std::vector<std::vector<double>> centres;
  for (std::size_t k = 0; k < spec.classes; ++k) centres.push_back(detail::random_vector(rng, d, spec.separation));
  std::vector<std::vector<double>> shared;
  for (std::size_t p = 0; p < phases; ++p) shared.push_back(detail::random_vector(rng, d, spec.phase_drift));

  EmbedderSpec es;
  es.kind = EmbedderKind::kSynthetic;
  es.dimension = d;
  es.sigma = spec.sigma;
  es.drift_rate = spec.drift_rate;
  es.seed = derive_seed(spec.seed, "world-noise");
  const std::size_t views = spec.views;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    std::vector<std::vector<double>> view_offsets;
    for (std::size_t v = 0; v < views; ++v) {
      auto offset = detail::random_vector(rng, d, v == 0 ? 0.0 : spec.view_spread);
      if (v > 0 && spec.view_pull > 0.0) {
        const auto other = (k + 1 + uniform_index(rng, spec.classes - 1)) % spec.classes;
        for (std::size_t j = 0; j < d; ++j) offset[j] += spec.view_pull * (centres[other][j] - centres[k][j]);
      }
      view_offsets.push_back(std::move(offset));
    }
    std::vector<double> trajectory = centres[k];
    for (std::size_t p = 0; p < phases; ++p) {
      auto mean = trajectory;
      if (p > 0) {
        const auto own = detail::random_vector(rng, d, spec.phase_shift);
        const auto other = (k + 1 + uniform_index(rng, spec.classes - 1)) % spec.classes;
        for (std::size_t j = 0; j < d; ++j) {
          trajectory[j] += shared[p][j];
          mean[j] = trajectory[j] + own[j] + spec.phase_pull * (centres[other][j] - centres[k][j]);
        }
      }
      for (std::size_t v = 0; v < views; ++v) {
        auto m = mean;
        for (std::size_t j = 0; j < d; ++j) m[j] += view_offsets[v][j];
        es.class_means.push_back(std::move(m));
      }
    }
  }
  std::vector<double> view_cdf;
  double total = 0.0;
  for (std::size_t v = 1; v < views; ++v) view_cdf.push_back(total += std::pow(static_cast<double>(v), -spec.view_skew));
  auto view_rng = make_rng(spec.seed, "world-views");
  auto draw_view = [&]() -> std::size_t {
    if (views == 1 || uniform01(view_rng) < spec.canonical_share) return 0;
    const double u = uniform01(view_rng) * total;
    const auto i = static_cast<std::size_t>(std::upper_bound(view_cdf.begin(), view_cdf.end(), u) - view_cdf.begin());
    return std::min(i + 1, views - 1);
  };

  std::vector<SynthItem> synth;
  const std::size_t subjects = spec.pool_subjects + spec.test_subjects;
  for (std::size_t s = 0; s < subjects; ++s) {
    const bool test = s >= spec.pool_subjects;
    char subject[32];
    std::snprintf(subject, sizeof subject, "s%03zu", s);
    for (std::size_t p = 0; p < phases; ++p) {
      const std::size_t count = spec.schedule[p];
      for (std::size_t k = 0; k < spec.classes; ++k) {
        for (std::size_t r = 0; r < count; ++r) {
          char id[64];
          std::snprintf(id, sizeof id, "%s-p%zu-%s-%03zu", subject, p, w.class_names[k].c_str(), r);
          const double time = static_cast<double>(p) + (static_cast<double>(r) + 0.5) / static_cast<double>(count);
          const std::size_t v = draw_view();
          synth.push_back({id, subject, (k * phases + p) * views + v, time});
          ItemRecord item;
          item.item_id = id;
          item.subject_id = subject;
          item.embedding_row = w.items.size();
          w.items.push_back(std::move(item));
          w.is_test.push_back(test);
          w.phase.push_back(p);
          w.view.push_back(v);
          w.truth[id] = w.class_names[k];
        }
      }
    }
  }
  w.embeddings = synth_embed(synth, es);
  return w;
}

}  // namespace plud
