#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "plud/clustering.hpp"
#include "plud/error.hpp"
#include "plud/review.hpp"
#include "plud/rng.hpp"

namespace plud {

struct OracleConfig {
  double noise = 0.0;  // probability of getting any single decision wrong
  std::uint64_t seed = 0;
  std::unordered_map<std::string, std::string> truth;
};

/// Simulated expert answering from ground truth. Every decision (cluster
/// label, each toggle, each individual label) is independently wrong with
/// probability `noise`; a wrong label is drawn uniformly from the other
/// known classes. Answers depend only on (config, task_id / item_id).
class Oracle {
 public:
  explicit Oracle(OracleConfig cfg) : cfg_(std::move(cfg)) {
    if (!(cfg_.noise >= 0.0 && cfg_.noise <= 1.0)) throw InvalidArgument("oracle: noise must lie in [0,1]");
    std::set<std::string> classes;
    for (const auto& [id, label] : cfg_.truth) classes.insert(label);
    classes_.assign(classes.begin(), classes.end());
  }

  const OracleConfig& config() const noexcept { return cfg_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  bool covers(const std::string& item_id) const { return cfg_.truth.contains(item_id); }

  const std::string& truth_of(const std::string& item_id) const {
    const auto it = cfg_.truth.find(item_id);
    if (it == cfg_.truth.end()) throw NotFound("oracle: no ground truth for '" + item_id + "'");
    return it->second;
  }

  Submission review_cluster(const ReviewTask& task) const {
    std::vector<std::string> truths;
    truths.reserve(task.members.size());
    for (const auto& id : task.members) truths.push_back(truth_of(id));
    auto rng = make_rng(cfg_.seed, "oracle-review", stable_hash(task.task_id));
    Submission s;
    s.reviewer = Reviewer::kOracle;
    s.label = decide(majority_label(truths).label, rng);
    for (std::size_t i = 0; i < task.members.size(); ++i) {
      bool toggle = truths[i] != s.label;
      if (slip(rng)) toggle = !toggle;
      if (toggle) {
        s.misclustered.push_back(task.members[i]);
        s.item_labels[task.members[i]] = decide(truths[i], rng);
      }
    }
    return s;
  }

  std::string label_item(const std::string& item_id) const {
    auto rng = make_rng(cfg_.seed, "oracle-item", stable_hash(item_id));
    return decide(truth_of(item_id), rng);
  }

 private:
  bool slip(Rng& rng) const { return uniform01(rng) < cfg_.noise; }

  /// The correct answer, or with probability `noise` a uniformly drawn
  /// different class.
  std::string decide(const std::string& correct, Rng& rng) const {
    if (!slip(rng) || classes_.size() < 2) return correct;
    std::vector<const std::string*> wrong;
    for (const auto& c : classes_) {
      if (c != correct) wrong.push_back(&c);
    }
    return *wrong[uniform_index(rng, wrong.size())];
  }

  OracleConfig cfg_;
  std::vector<std::string> classes_;
};

}  // namespace plud
