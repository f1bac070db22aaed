#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "plud/classifier.hpp"
#include "plud/error.hpp"

namespace plud {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::uint64_t> counts;  // C x C, row-major

  std::size_t size() const noexcept { return classes.size(); }
  std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts[truth * size() + predicted]; }
  std::uint64_t& at(std::size_t truth, std::size_t predicted) { return counts[truth * size() + predicted]; }
  std::uint64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }
  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < size(); ++c) t += at(c, c);
    return t;
  }
  double accuracy() const { return total() == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(total()); }
};

using TruthMap = std::unordered_map<std::string, std::string>;

/// Class axis: the predictions' classes in model order, then any truth-only
/// labels in lexicographic order.
inline std::vector<std::string> class_axis(const std::vector<Prediction>& predictions, const TruthMap& truth) {
  std::vector<std::string> axis;
  if (!predictions.empty()) {
    axis.resize(predictions.front().ranked.size());
    for (const auto& r : predictions.front().ranked) axis.at(r.class_index) = r.label;
  }
  std::set<std::string> extra;
  const std::set<std::string> known(axis.begin(), axis.end());
  for (const auto& p : predictions) {
    const auto it = truth.find(p.item_id);
    if (it != truth.end() && !known.contains(it->second)) extra.insert(it->second);
  }
  axis.insert(axis.end(), extra.begin(), extra.end());
  return axis;
}

/// Top-k convention: an item whose true class is among its k most probable
/// labels counts as (true, true); otherwise as (true, top-1).
inline ConfusionMatrix confusion(const std::vector<Prediction>& predictions, const TruthMap& truth, std::size_t k,
                                 std::vector<std::string> axis = {}) {
  if (axis.empty()) axis = class_axis(predictions, truth);
  const std::size_t num_ranked = predictions.empty() ? axis.size() : predictions.front().ranked.size();
  if (k < 1 || k > num_ranked) {
    throw InvalidArgument("confusion: k=" + std::to_string(k) + " outside [1, " + std::to_string(num_ranked) + "]");
  }
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < axis.size(); ++c) index.emplace(axis[c], c);
  ConfusionMatrix cm{axis, std::vector<std::uint64_t>(axis.size() * axis.size(), 0)};
  for (const auto& p : predictions) {
    const auto it = truth.find(p.item_id);
    if (it == truth.end()) throw NotFound("confusion: no truth label for '" + p.item_id + "'");
    const auto t_it = index.find(it->second);
    if (t_it == index.end()) throw InvalidArgument("confusion: truth label '" + it->second + "' not on class axis");
    const std::size_t t = t_it->second;
    const bool hit = std::any_of(p.ranked.begin(), p.ranked.begin() + static_cast<std::ptrdiff_t>(k),
                                 [&](const RankedLabel& r) { return r.label == it->second; });
    ++cm.at(t, hit ? t : index.at(p.label()));
  }
  return cm;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

/// Per class; an empty column (row) gives precision (recall) 0.
inline std::vector<PrecisionRecall> precision_recall(const ConfusionMatrix& cm) {
  const std::size_t c = cm.size();
  std::vector<PrecisionRecall> out(c);
  for (std::size_t i = 0; i < c; ++i) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    const auto diag = static_cast<double>(cm.at(i, i));
    out[i].precision = col == 0 ? 0.0 : diag / static_cast<double>(col);
    out[i].recall = row == 0 ? 0.0 : diag / static_cast<double>(row);
  }
  return out;
}

/// Unweighted mean.
inline double macro_average(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("macro_average: no classes");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

/// Harmonic mean 2PR/(P+R), 0 when P+R = 0.
inline double f_score(double precision, double recall) {
  if (precision < 0.0 || recall < 0.0) throw InvalidArgument("f_score: negative input");
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

struct TopKMetrics {
  std::size_t k = 1;
  std::vector<PrecisionRecall> per_class;
  double average_precision = 0.0;
  double average_recall = 0.0;
  double f_score = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

struct MetricsReport {
  std::vector<std::string> classes;
  std::size_t items = 0;
  std::vector<TopKMetrics> by_k;  // in requested order; k clamped to the class count

  const TopKMetrics* find(std::size_t k) const {
    for (const auto& m : by_k) {
      if (m.k == k) return &m;
    }
    return nullptr;
  }
  double accuracy() const { return by_k.empty() ? 0.0 : by_k.front().accuracy; }
};

/// Rates are computed in [0,1]; serializers report them x100.
inline MetricsReport report(const std::vector<Prediction>& predictions, const TruthMap& truth,
                            const std::vector<std::size_t>& ks = {1, 3}) {
  if (predictions.empty()) throw MissingPrerequisite("nothing to evaluate");
  MetricsReport r;
  r.classes = class_axis(predictions, truth);
  r.items = predictions.size();
  const std::size_t max_k = predictions.front().ranked.size();
  for (auto k : ks) {
    const std::size_t used = std::clamp<std::size_t>(k, 1, max_k);
    if (r.find(used)) continue;
    TopKMetrics m;
    m.k = used;
    m.confusion = confusion(predictions, truth, used, r.classes);
    m.per_class = precision_recall(m.confusion);
    std::vector<double> p;
    std::vector<double> rc;
    for (const auto& pr : m.per_class) {
      p.push_back(pr.precision);
      rc.push_back(pr.recall);
    }
    m.average_precision = macro_average(p);
    m.average_recall = macro_average(rc);
    m.f_score = f_score(m.average_precision, m.average_recall);
    m.accuracy = m.confusion.accuracy();
    r.by_k.push_back(std::move(m));
  }
  return r;
}

inline double percent(double rate) { return std::round(rate * 10000.0) / 100.0; }

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["classes"] = r.classes;
  j["items"] = r.items;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : r.by_k) {
    nlohmann::ordered_json e;
    e["k"] = m.k;
    std::vector<double> p;
    std::vector<double> rc;
    for (const auto& pr : m.per_class) {
      p.push_back(percent(pr.precision));
      rc.push_back(percent(pr.recall));
    }
    e["precision"] = p;
    e["recall"] = rc;
    e["average_precision"] = percent(m.average_precision);
    e["average_recall"] = percent(m.average_recall);
    e["f_score"] = percent(m.f_score);
    e["accuracy"] = percent(m.accuracy);
    e["confusion"] = m.confusion.counts;
    arr.push_back(std::move(e));
  }
  j["metrics"] = std::move(arr);
  return j;
}

/// Aligned table: precision rows per k with AP, recall rows per k with AR,
/// then F-score and accuracy lines.
inline std::string to_text(const MetricsReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  std::size_t width = 8;
  for (const auto& c : r.classes) width = std::max(width, c.size() + 2);
  auto section = [&](const char* title, const char* avg_name, bool precision) {
    out << title << '\n' << std::setw(8) << std::left << "" << std::right;
    for (const auto& c : r.classes) out << std::setw(static_cast<int>(width)) << c;
    out << std::setw(10) << avg_name << '\n';
    for (const auto& m : r.by_k) {
      out << std::setw(8) << std::left << ("Top " + std::to_string(m.k)) << std::right;
      for (const auto& pr : m.per_class) {
        out << std::setw(static_cast<int>(width)) << percent(precision ? pr.precision : pr.recall);
      }
      out << std::setw(10) << percent(precision ? m.average_precision : m.average_recall) << '\n';
    }
  };
  section("Precision of classes", "AP", true);
  out << '\n';
  section("Recall of classes", "AR", false);
  out << '\n';
  for (const auto& m : r.by_k) {
    out << "Top " << m.k << ": F-score " << percent(m.f_score) << "  accuracy " << percent(m.accuracy) << '\n';
  }
  out << "items evaluated: " << r.items << '\n';
  return out.str();
}

inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "true\\predicted";
  for (const auto& c : cm.classes) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < cm.size(); ++i) {
    out << cm.classes[i];
    for (std::size_t j = 0; j < cm.size(); ++j) out << ',' << cm.at(i, j);
    out << '\n';
  }
}

}  // namespace plud
