#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plud/error.hpp"

namespace plud {

enum class Reviewer { kHuman, kOracle };
enum class TaskStatus { kPending, kSubmitted };

inline std::string_view to_string(Reviewer r) { return r == Reviewer::kHuman ? "HUMAN" : "ORACLE"; }
inline std::string_view to_string(TaskStatus s) { return s == TaskStatus::kPending ? "PENDING" : "SUBMITTED"; }
inline Reviewer parse_reviewer(std::string_view s) {
  if (s == "HUMAN") return Reviewer::kHuman;
  if (s == "ORACLE") return Reviewer::kOracle;
  throw FormatError("unknown reviewer '" + std::string(s) + "'");
}
inline TaskStatus parse_task_status(std::string_view s) {
  if (s == "PENDING") return TaskStatus::kPending;
  if (s == "SUBMITTED") return TaskStatus::kSubmitted;
  throw InvalidArgument("unknown task status '" + std::string(s) + "'");
}

/// A reviewer's verdict on one cluster: the cluster label, the members
/// toggled out as misclustered, and individual labels for those members.
struct Submission {
  std::string label;
  std::vector<std::string> misclustered;
  std::map<std::string, std::string> item_labels;
  Reviewer reviewer = Reviewer::kHuman;

  friend bool operator==(const Submission&, const Submission&) = default;
};

/// One cluster page awaiting (or holding) a review.
struct ReviewTask {
  std::string task_id;
  std::vector<std::string> members;
  std::optional<std::string> suggested_label;
  TaskStatus status = TaskStatus::kPending;
  std::optional<Submission> submission;
};

inline nlohmann::ordered_json to_json(const Submission& s) {
  nlohmann::ordered_json j;
  j["label"] = s.label;
  j["misclustered"] = s.misclustered;
  j["item_labels"] = s.item_labels;
  j["reviewer"] = to_string(s.reviewer);
  return j;
}

inline Submission submission_from_json(const nlohmann::json& j) {
  Submission s;
  s.label = j.at("label").get<std::string>();
  s.misclustered = j.value("misclustered", std::vector<std::string>{});
  s.item_labels = j.value("item_labels", std::map<std::string, std::string>{});
  s.reviewer = parse_reviewer(j.value("reviewer", std::string("HUMAN")));
  return s;
}

inline nlohmann::ordered_json to_json(const ReviewTask& t) {
  nlohmann::ordered_json j;
  j["task_id"] = t.task_id;
  j["members"] = t.members;
  j["suggested_label"] = t.suggested_label ? nlohmann::ordered_json(*t.suggested_label) : nlohmann::ordered_json();
  j["status"] = to_string(t.status);
  if (t.submission) j["submission"] = to_json(*t.submission);
  return j;
}

}  // namespace plud
