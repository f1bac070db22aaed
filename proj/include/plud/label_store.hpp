#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plud/error.hpp"
#include "plud/types.hpp"

namespace plud {

/// Ordered set of class names that only grows. `version` counts additions.
class ClassRegistry {
 public:
  /// Returns true when the name was new.
  bool add(const std::string& name) {
    if (name.empty()) throw InvalidArgument("class name must be non-empty");
    if (index_.contains(name)) return false;
    index_.emplace(name, names_.size());
    names_.push_back(name);
    ++version_;
    return true;
  }

  std::optional<std::size_t> index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  std::uint64_t version() const noexcept { return version_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t version_ = 0;
};

struct IterationRange {
  std::uint32_t first = 0;
  std::uint32_t last = UINT32_MAX;  // inclusive
  bool contains(std::uint32_t i) const noexcept { return i >= first && i <= last; }
};

/// Append-only label history with one ACTIVE assignment per item.
///
/// MANUAL and CLUSTER_MAJORITY always become active. SELF_TRAINED and
/// PREDICTED become active unless the item's active assignment is expert
/// provenance, in which case they are recorded as shadowed.
///
/// Not internally synchronized; the owning campaign serializes writers.
class LabelStore {
 public:
  LabelStore() = default;
  explicit LabelStore(std::unordered_set<std::string> items) : items_(std::move(items)) {}

  void add_item(const std::string& item_id) { items_.insert(item_id); }
  bool has_item(const std::string& item_id) const { return items_.contains(item_id); }

  const LabelAssignment& assign(const std::string& item_id, const std::string& label, Provenance provenance,
                                double confidence, std::uint32_t iteration, std::string assigned_at = {}) {
    if (!items_.contains(item_id)) throw NotFound("unknown item_id '" + item_id + "'");
    if (label.empty()) throw InvalidArgument("label must be non-empty");
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
      throw InvalidArgument("confidence " + std::to_string(confidence) + " outside [0,1]");
    }
    if (provenance == Provenance::kManual && confidence != 1.0) {
      throw InvalidArgument("MANUAL assignment requires confidence 1.0");
    }

    LabelAssignment record{item_id, label, provenance, confidence, iteration,
                           assigned_at.empty() ? utc_now_iso8601() : std::move(assigned_at), false};
    const auto current = active_.find(item_id);
    if (!is_expert(provenance) && current != active_.end() && is_expert(history_[current->second].provenance)) {
      record.shadowed = true;
    }
    registry_.add(label);
    history_.push_back(std::move(record));
    if (!history_.back().shadowed) active_[item_id] = history_.size() - 1;
    ++revision_;
    return history_.back();
  }

  std::optional<LabelAssignment> active(const std::string& item_id) const {
    const auto it = active_.find(item_id);
    if (it == active_.end()) return std::nullopt;
    return history_[it->second];
  }

  /// ACTIVE assignments matching every given filter, ordered by item_id.
  std::vector<LabelAssignment> active_labels(const std::optional<std::set<Provenance>>& provenance_filter = {},
                                             const std::optional<IterationRange>& iteration_filter = {}) const {
    std::vector<LabelAssignment> out;
    for (const auto& [id, pos] : active_) {
      const auto& a = history_[pos];
      if (provenance_filter && !provenance_filter->contains(a.provenance)) continue;
      if (iteration_filter && !iteration_filter->contains(a.iteration)) continue;
      out.push_back(a);
    }
    return out;
  }

  const std::vector<LabelAssignment>& history() const noexcept { return history_; }
  std::size_t active_count() const noexcept { return active_.size(); }
  const ClassRegistry& registry() const noexcept { return registry_; }
  ClassRegistry& registry() noexcept { return registry_; }
  std::uint64_t revision() const noexcept { return revision_; }

  /// One JSON line per ACTIVE assignment. Returns the line count.
  std::size_t export_labels(std::ostream& out) const {
    std::size_t count = 0;
    for (const auto& [id, pos] : active_) {
      const auto& a = history_[pos];
      nlohmann::ordered_json line;
      line["item_id"] = a.item_id;
      line["label"] = a.label;
      line["provenance"] = to_string(a.provenance);
      line["confidence"] = a.confidence;
      line["iteration"] = a.iteration;
      out << line.dump() << '\n';
      if (!out) throw EnvironmentError("label export: write failed");
      ++count;
    }
    return count;
  }

  /// Applies exported lines as assignments. Unknown items are registered.
  std::size_t import_labels(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t count = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto id = j.at("item_id").get<std::string>();
        add_item(id);
        assign(id, j.at("label").get<std::string>(), parse_provenance(j.at("provenance").get<std::string>()),
               j.at("confidence").get<double>(), j.at("iteration").get<std::uint32_t>());
        ++count;
      } catch (const nlohmann::json::exception& e) {
        throw FormatError("label import line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return count;
  }

 private:
  std::unordered_set<std::string> items_;
  std::vector<LabelAssignment> history_;
  std::map<std::string, std::size_t> active_;
  ClassRegistry registry_;
  std::uint64_t revision_ = 0;
};

}  // namespace plud
