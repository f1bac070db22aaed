#pragma once

#include <istream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "plud/error.hpp"
#include "plud/pludemb.hpp"
#include "plud/types.hpp"

namespace plud {

enum class Partition { kLabeledTrain, kUnlabeledPool, kHeldOutTest };

inline std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::kLabeledTrain: return "labeled_train";
    case Partition::kUnlabeledPool: return "unlabeled_pool";
    case Partition::kHeldOutTest: return "held_out_test";
  }
  return "?";
}

/// Items, their embeddings, and the three disjoint working partitions.
class DatasetSnapshot {
 public:
  DatasetSnapshot() = default;
  DatasetSnapshot(std::vector<ItemRecord> items, EmbeddingMatrix embeddings)
      : items_(std::move(items)), embeddings_(std::move(embeddings)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
      const auto& item = items_[i];
      if (!index_.emplace(item.item_id, i).second) throw FormatError("duplicate item_id '" + item.item_id + "'");
      if (item.embedding_row && *item.embedding_row >= embeddings_.rows()) {
        throw FormatError("item '" + item.item_id + "': embedding_row " + std::to_string(*item.embedding_row) +
                          " >= n=" + std::to_string(embeddings_.rows()));
      }
    }
  }

  const std::vector<ItemRecord>& items() const noexcept { return items_; }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }

  bool contains(const std::string& id) const { return index_.contains(id); }

  const ItemRecord& item(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw NotFound("unknown item_id '" + id + "'");
    return items_[it->second];
  }

  const std::set<std::string>& partition(Partition p) const { return sets_[static_cast<int>(p)]; }
  const std::set<std::string>& labeled_train() const { return partition(Partition::kLabeledTrain); }
  const std::set<std::string>& unlabeled_pool() const { return partition(Partition::kUnlabeledPool); }
  const std::set<std::string>& held_out_test() const { return partition(Partition::kHeldOutTest); }

  std::optional<Partition> partition_of(const std::string& id) const {
    for (int p = 0; p < 3; ++p) {
      if (sets_[p].contains(id)) return static_cast<Partition>(p);
    }
    return std::nullopt;
  }

  /// Places an item that is in no partition yet.
  void place(const std::string& id, Partition to) {
    item(id);
    if (const auto cur = partition_of(id)) {
      throw Conflict("item '" + id + "' already in " + std::string(to_string(*cur)));
    }
    sets_[static_cast<int>(to)].insert(id);
  }

  void move(const std::string& id, Partition from, Partition to) {
    auto& src = sets_[static_cast<int>(from)];
    if (src.erase(id) == 0) {
      throw Conflict("item '" + id + "' is not in " + std::string(to_string(from)));
    }
    sets_[static_cast<int>(to)].insert(id);
  }

  /// Embedding rows for the given items, in order.
  EmbeddingMatrix rows_for(const std::vector<std::string>& ids) const {
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) {
      const auto& rec = item(id);
      if (!rec.embedding_row) throw MissingPrerequisite("item '" + id + "' has no embedding row");
      rows.push_back(*rec.embedding_row);
    }
    return embeddings_.select(rows);
  }

 private:
  std::vector<ItemRecord> items_;
  std::unordered_map<std::string, std::size_t> index_;
  EmbeddingMatrix embeddings_;
  std::set<std::string> sets_[3];
};

/// Parses one manifest line. `line_no` is only used for diagnostics.
inline ItemRecord parse_manifest_line(const std::string& line, std::size_t line_no, bool* is_test = nullptr) {
  const auto where = "manifest line " + std::to_string(line_no) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(where + "invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw FormatError(where + "expected a JSON object");
  ItemRecord rec;
  try {
    rec.item_id = j.at("item_id").get<std::string>();
    if (rec.item_id.empty()) throw FormatError(where + "empty item_id");
    const auto row = j.at("embedding_row");
    if (!row.is_number_unsigned()) throw FormatError(where + "embedding_row must be a non-negative integer");
    rec.embedding_row = row.get<std::size_t>();
    rec.subject_id = j.contains("subject_id") ? j["subject_id"].get<std::string>() : rec.item_id;
    if (j.contains("source_uri") && !j["source_uri"].is_null()) rec.source_uri = j["source_uri"].get<std::string>();
    if (j.contains("captured_at") && !j["captured_at"].is_null()) {
      rec.captured_at = j["captured_at"].get<std::string>();
      if (!is_iso8601(*rec.captured_at)) throw FormatError(where + "captured_at is not ISO-8601");
    }
    if (is_test) *is_test = j.value("test", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + e.what());
  }
  return rec;
}

/// Builds a snapshot from a JSON Lines manifest and a PLUDEMB1 blob. Items
/// flagged `"test": true` go to held_out_test, everything else to the pool.
inline DatasetSnapshot ingest(std::istream& manifest, std::istream& embeddings_blob) {
  auto embeddings = read_pludemb(embeddings_blob);
  std::vector<ItemRecord> items;
  std::vector<bool> test_flags;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    bool is_test = false;
    auto rec = parse_manifest_line(line, line_no, &is_test);
    if (const auto [it, fresh] = seen.emplace(rec.item_id, line_no); !fresh) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": duplicate item_id '" + rec.item_id +
                        "' (first on line " + std::to_string(it->second) + ")");
    }
    if (*rec.embedding_row >= embeddings.rows()) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": embedding_row " +
                        std::to_string(*rec.embedding_row) + " >= n=" + std::to_string(embeddings.rows()));
    }
    items.push_back(std::move(rec));
    test_flags.push_back(is_test);
  }
  DatasetSnapshot snapshot(std::move(items), std::move(embeddings));
  for (std::size_t i = 0; i < snapshot.items().size(); ++i) {
    snapshot.place(snapshot.items()[i].item_id, test_flags[i] ? Partition::kHeldOutTest : Partition::kUnlabeledPool);
  }
  return snapshot;
}

}  // namespace plud
