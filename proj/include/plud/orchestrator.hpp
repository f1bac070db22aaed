#pragma once

// Campaign building blocks: initial sampling, confidence routing, effort
// accounting and the per-iteration record.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "plud/classifier.hpp"
#include "plud/dataset.hpp"
#include "plud/error.hpp"
#include "plud/rng.hpp"

namespace plud {

struct SamplingStrategy {
  enum class Kind { kRandom, kSubjectComplete };
  Kind kind = Kind::kSubjectComplete;
  std::size_t size = 0;      // RANDOM
  std::size_t subjects = 0;  // SUBJECT_COMPLETE
  std::uint64_t seed = 0;
};

inline std::string_view to_string(SamplingStrategy::Kind k) {
  return k == SamplingStrategy::Kind::kRandom ? "RANDOM" : "SUBJECT_COMPLETE";
}
inline SamplingStrategy::Kind parse_sampling_kind(std::string_view s) {
  if (s == "RANDOM" || s == "random") return SamplingStrategy::Kind::kRandom;
  if (s == "SUBJECT_COMPLETE" || s == "subject-complete") return SamplingStrategy::Kind::kSubjectComplete;
  throw InvalidArgument("unknown sampling strategy '" + std::string(s) + "'");
}

/// Draws the bootstrap sample from the unlabeled pool.
///
/// RANDOM: `size` items uniformly without replacement.
/// SUBJECT_COMPLETE: `subjects` subjects uniformly, then every pool item of
/// those subjects and nothing else. Result is sorted by item_id.
inline std::vector<std::string> sample_initial(const DatasetSnapshot& snapshot, const SamplingStrategy& strategy) {
  const auto& pool = snapshot.unlabeled_pool();
  if (pool.empty()) throw MissingPrerequisite("sampling: unlabeled pool is empty");
  std::vector<std::string> out;
  if (strategy.kind == SamplingStrategy::Kind::kRandom) {
    if (strategy.size == 0 || strategy.size > pool.size()) {
      throw InvalidArgument("sampling: size " + std::to_string(strategy.size) + " outside [1, pool size " +
                            std::to_string(pool.size()) + "]");
    }
    std::vector<std::string> ids(pool.begin(), pool.end());
    auto rng = make_rng(strategy.seed, "sample-random");
    portable_shuffle(ids.begin(), ids.end(), rng);
    out.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(strategy.size));
  } else {
    std::map<std::string, std::vector<std::string>> by_subject;
    for (const auto& id : pool) by_subject[snapshot.item(id).subject_id].push_back(id);
    if (strategy.subjects == 0 || strategy.subjects > by_subject.size()) {
      throw InvalidArgument("sampling: " + std::to_string(strategy.subjects) + " subjects requested, " +
                            std::to_string(by_subject.size()) + " available");
    }
    std::vector<std::string> subjects;
    for (const auto& [s, items] : by_subject) subjects.push_back(s);
    auto rng = make_rng(strategy.seed, "sample-subjects");
    portable_shuffle(subjects.begin(), subjects.end(), rng);
    for (std::size_t i = 0; i < strategy.subjects; ++i) {
      const auto& items = by_subject[subjects[i]];
      out.insert(out.end(), items.begin(), items.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct RoutingConfig {
  enum class Mode { kFixed, kPercentile };
  Mode mode = Mode::kFixed;
  double threshold = 0.9;    // FIXED: tau in [0,1]
  double percentile = 50.0;  // PERCENTILE: p in (0,100)
  std::size_t batch_size = 1000;

  void validate() const {
    if (mode == Mode::kFixed && !(threshold >= 0.0 && threshold <= 1.0)) {
      throw InvalidArgument("routing: threshold must lie in [0,1]");
    }
    if (mode == Mode::kPercentile && !(percentile > 0.0 && percentile < 100.0)) {
      throw InvalidArgument("routing: percentile must lie in (0,100)");
    }
    if (batch_size == 0) throw InvalidArgument("routing: batch size must be >= 1");
  }
};

struct Routed {
  std::vector<Prediction> self_train;
  std::vector<Prediction> review;
};

/// FIXED: confidence >= tau goes to self-training. PERCENTILE(p): the top
/// floor((100-p)% of n) by confidence, ties broken by item_id.
inline Routed route(std::vector<Prediction> predictions, const RoutingConfig& cfg) {
  cfg.validate();
  Routed out;
  if (cfg.mode == RoutingConfig::Mode::kFixed) {
    for (auto& p : predictions) (p.confidence >= cfg.threshold ? out.self_train : out.review).push_back(std::move(p));
    return out;
  }
  if (predictions.empty()) throw InvalidArgument("routing: PERCENTILE mode needs a non-empty batch");
  std::stable_sort(predictions.begin(), predictions.end(), [](const Prediction& a, const Prediction& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.item_id < b.item_id;
  });
  const auto keep = static_cast<std::size_t>(
      std::floor((100.0 - cfg.percentile) / 100.0 * static_cast<double>(predictions.size()) + 1e-9));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    (i < keep ? out.self_train : out.review).push_back(std::move(predictions[i]));
  }
  return out;
}

/// Click-count effort of one review round.
struct EffortReport {
  std::uint64_t basic_clicks = 0;     // one selection per item + one confirm per class present
  std::uint64_t assisted_clicks = 0;  // one toggle per misclustered item + one label action per cluster
  double ratio = 0.0;                 // assisted / basic, 0 when basic is 0

  friend bool operator==(const EffortReport&, const EffortReport&) = default;
};

inline EffortReport account_effort(std::uint64_t items, std::uint64_t clusters, std::uint64_t misclustered,
                                   std::uint64_t classes_present) {
  if (misclustered > items) throw InvalidArgument("effort: misclustered exceeds items");
  if (items > 0 && clusters == 0) throw InvalidArgument("effort: items without clusters");
  EffortReport e;
  if (items == 0) return e;
  e.basic_clicks = items + classes_present;
  e.assisted_clicks = misclustered + clusters;
  e.ratio = e.basic_clicks == 0 ? 0.0 : static_cast<double>(e.assisted_clicks) / static_cast<double>(e.basic_clicks);
  return e;
}

struct MetricsSummary {
  double accuracy = 0.0;  // percent, top-1
  double top3_accuracy = 0.0;
  double average_precision = 0.0;
  double average_recall = 0.0;
  double f_score = 0.0;
  double top3_f_score = 0.0;
  std::size_t items = 0;

  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

/// One round of the loop; index 0 is the bootstrap round.
struct IterationRecord {
  std::uint32_t index = 0;
  std::size_t train_size_before = 0;
  std::size_t train_size_after = 0;
  std::size_t batch_items = 0;
  std::size_t high_confidence = 0;
  std::size_t low_confidence = 0;
  std::size_t clusters_created = 0;
  std::size_t review_decisions = 0;
  std::size_t misclustered_corrections = 0;
  std::size_t returned_to_pool = 0;
  std::optional<double> cluster_purity;
  EffortReport effort;
  std::optional<MetricsSummary> metrics;
  std::string model;

  double review_fraction() const {
    return batch_items == 0 ? 0.0 : static_cast<double>(low_confidence) / static_cast<double>(batch_items);
  }
  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

inline nlohmann::ordered_json to_json(const MetricsSummary& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["top3_accuracy"] = m.top3_accuracy;
  j["average_precision"] = m.average_precision;
  j["average_recall"] = m.average_recall;
  j["f_score"] = m.f_score;
  j["top3_f_score"] = m.top3_f_score;
  j["items"] = m.items;
  return j;
}

inline MetricsSummary metrics_from_json(const nlohmann::json& j) {
  MetricsSummary m;
  m.accuracy = j.at("accuracy").get<double>();
  m.top3_accuracy = j.at("top3_accuracy").get<double>();
  m.average_precision = j.at("average_precision").get<double>();
  m.average_recall = j.at("average_recall").get<double>();
  m.f_score = j.at("f_score").get<double>();
  m.top3_f_score = j.at("top3_f_score").get<double>();
  m.items = j.at("items").get<std::size_t>();
  return m;
}

inline nlohmann::ordered_json to_json(const IterationRecord& r) {
  nlohmann::ordered_json j;
  j["index"] = r.index;
  j["train_size_before"] = r.train_size_before;
  j["train_size_after"] = r.train_size_after;
  j["batch_items"] = r.batch_items;
  j["high_confidence"] = r.high_confidence;
  j["low_confidence"] = r.low_confidence;
  j["clusters_created"] = r.clusters_created;
  j["review_decisions"] = r.review_decisions;
  j["misclustered_corrections"] = r.misclustered_corrections;
  j["returned_to_pool"] = r.returned_to_pool;
  j["cluster_purity"] = r.cluster_purity ? nlohmann::ordered_json(*r.cluster_purity) : nlohmann::ordered_json();
  j["effort"] = {{"basic_clicks", r.effort.basic_clicks},
                 {"assisted_clicks", r.effort.assisted_clicks},
                 {"ratio", r.effort.ratio}};
  j["metrics"] = r.metrics ? to_json(*r.metrics) : nlohmann::ordered_json();
  j["model"] = r.model;
  return j;
}

inline IterationRecord record_from_json(const nlohmann::json& j) {
  IterationRecord r;
  r.index = j.at("index").get<std::uint32_t>();
  r.train_size_before = j.at("train_size_before").get<std::size_t>();
  r.train_size_after = j.at("train_size_after").get<std::size_t>();
  r.batch_items = j.at("batch_items").get<std::size_t>();
  r.high_confidence = j.at("high_confidence").get<std::size_t>();
  r.low_confidence = j.at("low_confidence").get<std::size_t>();
  r.clusters_created = j.at("clusters_created").get<std::size_t>();
  r.review_decisions = j.at("review_decisions").get<std::size_t>();
  r.misclustered_corrections = j.at("misclustered_corrections").get<std::size_t>();
  r.returned_to_pool = j.at("returned_to_pool").get<std::size_t>();
  if (!j.at("cluster_purity").is_null()) r.cluster_purity = j["cluster_purity"].get<double>();
  const auto& e = j.at("effort");
  r.effort = {e.at("basic_clicks").get<std::uint64_t>(), e.at("assisted_clicks").get<std::uint64_t>(),
              e.at("ratio").get<double>()};
  if (!j.at("metrics").is_null()) r.metrics = metrics_from_json(j["metrics"]);
  r.model = j.at("model").get<std::string>();
  return r;
}

}  // namespace plud
