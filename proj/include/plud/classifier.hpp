#pragma once

// Softmax classifier head over fixed embeddings.
//
//   LINEAR: logits = W x + b
//   MLP1:   h = tanh(W1 x + b1), logits = W h + b
//
// Objective: mean cross-entropy + l2 * (|W|^2 + |W1|^2), biases unpenalized.
// All arithmetic is double precision regardless of the f32 storage format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "plud/error.hpp"
#include "plud/label_store.hpp"
#include "plud/pludemb.hpp"
#include "plud/rng.hpp"
#include "plud/types.hpp"

namespace plud {

enum class Architecture { kLinear, kMlp1 };

inline std::string_view to_string(Architecture a) { return a == Architecture::kLinear ? "LINEAR" : "MLP1"; }
inline Architecture parse_architecture(std::string_view s) {
  if (s == "LINEAR") return Architecture::kLinear;
  if (s == "MLP1") return Architecture::kMlp1;
  throw InvalidArgument("unknown architecture '" + std::string(s) + "'");
}

struct ModelSpec {
  Architecture architecture = Architecture::kMlp1;
  std::size_t hidden = 128;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  std::size_t patience = 5;
  double validation_fraction = 0.1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning_rate must be > 0");
    if (batch_size == 0) throw InvalidArgument("train: batch_size must be > 0");
    if (!(l2 >= 0.0)) throw InvalidArgument("train: l2 must be >= 0");
    if (patience == 0) throw InvalidArgument("train: patience must be > 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw InvalidArgument("train: validation_fraction must lie in (0,1)");
    }
  }
};

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ClassifierModel {
  Architecture architecture = Architecture::kLinear;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;  // 0 for LINEAR
  std::vector<std::string> classes;
  std::uint64_t registry_version = 0;
  std::uint32_t trained_at_iteration = 0;
  std::size_t train_size = 0;

  MatrixRM hidden_weights;        // hidden x input_dim (MLP1 only)
  Eigen::VectorXd hidden_bias;    // hidden
  MatrixRM output_weights;        // classes x feature_dim
  Eigen::VectorXd output_bias;    // classes

  std::size_t num_classes() const noexcept { return classes.size(); }
  std::size_t feature_dim() const noexcept { return architecture == Architecture::kMlp1 ? hidden : input_dim; }

  /// Parameter tensors in canonical order: [W1, b1,] W, b.
  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> blocks;
    if (architecture == Architecture::kMlp1) {
      blocks.emplace_back(hidden_weights.data(), static_cast<std::size_t>(hidden_weights.size()));
      blocks.emplace_back(hidden_bias.data(), static_cast<std::size_t>(hidden_bias.size()));
    }
    blocks.emplace_back(output_weights.data(), static_cast<std::size_t>(output_weights.size()));
    blocks.emplace_back(output_bias.data(), static_cast<std::size_t>(output_bias.size()));
    return blocks;
  }

  bool all_finite() const {
    return hidden_weights.allFinite() && hidden_bias.allFinite() && output_weights.allFinite() &&
           output_bias.allFinite();
  }

  friend bool operator==(const ClassifierModel& a, const ClassifierModel& b) {
    return a.architecture == b.architecture && a.input_dim == b.input_dim && a.hidden == b.hidden &&
           a.classes == b.classes && a.registry_version == b.registry_version &&
           a.trained_at_iteration == b.trained_at_iteration && a.train_size == b.train_size &&
           a.hidden_weights == b.hidden_weights && a.hidden_bias == b.hidden_bias &&
           a.output_weights == b.output_weights && a.output_bias == b.output_bias;
  }
};

/// Fresh model. LINEAR starts at zero; MLP1 draws Xavier-uniform weights
/// from the seed.
inline ClassifierModel make_model(const ModelSpec& spec, std::size_t input_dim, std::vector<std::string> classes,
                                  std::uint64_t registry_version, std::uint64_t seed) {
  if (input_dim == 0) throw InvalidArgument("model: input dimension must be >= 1");
  ClassifierModel model;
  model.architecture = spec.architecture;
  model.input_dim = input_dim;
  model.classes = std::move(classes);
  model.registry_version = registry_version;
  const auto c = static_cast<Eigen::Index>(model.classes.size());
  if (spec.architecture == Architecture::kMlp1) {
    if (spec.hidden == 0) throw InvalidArgument("model: MLP1 needs hidden units");
    model.hidden = spec.hidden;
    const auto h = static_cast<Eigen::Index>(spec.hidden);
    auto rng = make_rng(seed, "model-init");
    auto fill = [&rng](MatrixRM& w, double limit) {
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    };
    model.hidden_weights = MatrixRM(h, static_cast<Eigen::Index>(input_dim));
    fill(model.hidden_weights, std::sqrt(6.0 / static_cast<double>(input_dim + spec.hidden)));
    model.hidden_bias = Eigen::VectorXd::Zero(h);
    model.output_weights = MatrixRM(c, h);
    fill(model.output_weights, std::sqrt(6.0 / static_cast<double>(spec.hidden + model.classes.size())));
  } else {
    model.output_weights = MatrixRM::Zero(c, static_cast<Eigen::Index>(input_dim));
  }
  model.output_bias = Eigen::VectorXd::Zero(c);
  return model;
}

namespace detail {

inline MatrixRM to_eigen(const EmbeddingMatrix& m) {
  MatrixRM x(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) x(i, j) = m(i, j);
  }
  return x;
}

/// Row-wise softmax with max subtraction.
inline void softmax_rows(MatrixRM& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp();
    row /= row.sum();
  }
}

struct Forward {
  MatrixRM features;  // tanh activations (MLP1) or the input
  MatrixRM probs;
};

inline Forward forward(const ClassifierModel& model, const MatrixRM& x) {
  Forward f;
  if (model.architecture == Architecture::kMlp1) {
    f.features = (x * model.hidden_weights.transpose()).rowwise() + model.hidden_bias.transpose();
    f.features = f.features.array().tanh();
  } else {
    f.features = x;
  }
  f.probs = (f.features * model.output_weights.transpose()).rowwise() + model.output_bias.transpose();
  softmax_rows(f.probs);
  return f;
}

struct Gradients {
  MatrixRM hidden_weights;
  Eigen::VectorXd hidden_bias;
  MatrixRM output_weights;
  Eigen::VectorXd output_bias;
};

inline double penalty(const ClassifierModel& model, double l2) {
  double p = model.output_weights.squaredNorm();
  if (model.architecture == Architecture::kMlp1) p += model.hidden_weights.squaredNorm();
  return l2 * p;
}

inline double cross_entropy(const MatrixRM& probs, std::span<const std::size_t> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    loss -= std::log(std::max(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])),
                              std::numeric_limits<double>::min()));
  }
  return labels.empty() ? 0.0 : loss / static_cast<double>(labels.size());
}

/// Regularized loss and its analytic gradient on a batch.
inline double loss_and_gradient(const ClassifierModel& model, const MatrixRM& x, std::span<const std::size_t> labels,
                                double l2, Gradients* grad) {
  const auto f = forward(model, x);
  const double loss = cross_entropy(f.probs, labels) + penalty(model, l2);
  if (!grad) return loss;
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  MatrixRM delta = f.probs;
  for (std::size_t i = 0; i < labels.size(); ++i) delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) -= 1.0;
  delta *= inv_n;
  grad->output_weights = delta.transpose() * f.features + 2.0 * l2 * model.output_weights;
  grad->output_bias = delta.colwise().sum().transpose();
  if (model.architecture == Architecture::kMlp1) {
    MatrixRM dz = (delta * model.output_weights).array() * (1.0 - f.features.array().square());
    grad->hidden_weights = dz.transpose() * x + 2.0 * l2 * model.hidden_weights;
    grad->hidden_bias = dz.colwise().sum().transpose();
  }
  return loss;
}

}  // namespace detail

/// Per-epoch bookkeeping of a training run.
struct TrainingLog {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<double> running_best;
  std::size_t best_epoch = 0;  // 0 = initial parameters
  std::size_t validation_size = 0;
};

/// Minibatch SGD on the regularized cross-entropy. Returns the parameters
/// with the best validation loss (the initial parameters count as epoch 0).
/// `warm_start` continues from an earlier model; classes added to the
/// registry since then get zero-initialized output rows.
inline ClassifierModel train(const EmbeddingMatrix& rows, const std::vector<std::string>& labels,
                             const ClassRegistry& registry, const TrainConfig& cfg, const ModelSpec& spec,
                             const ClassifierModel* warm_start = nullptr, TrainingLog* log = nullptr) {
  cfg.validate();
  if (rows.rows() != labels.size()) throw InvalidArgument("train: row count != label count");
  if (const auto bad = rows.first_non_finite_row()) {
    throw DataError("train: non-finite value in row " + std::to_string(*bad));
  }
  std::vector<std::size_t> y(labels.size());
  std::vector<bool> present(registry.size(), false);
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto idx = registry.index_of(labels[i]);
    if (!idx) throw InvalidArgument("train: label '" + labels[i] + "' not in class registry");
    y[i] = *idx;
    if (!present[*idx]) {
      present[*idx] = true;
      ++distinct;
    }
  }
  if (distinct < 2) throw InvalidArgument("train: need at least 2 classes, got " + std::to_string(distinct));

  ClassifierModel model;
  if (warm_start) {
    model = *warm_start;
    if (model.input_dim != rows.cols()) {
      throw InvalidArgument("train: warm start expects d=" + std::to_string(model.input_dim) + ", rows have d=" +
                            std::to_string(rows.cols()));
    }
    if (model.registry_version > registry.version() || model.classes.size() > registry.size() ||
        !std::equal(model.classes.begin(), model.classes.end(), registry.names().begin())) {
      throw InvalidArgument("train: warm start classes are not a prefix of the current registry");
    }
    const auto old_c = static_cast<Eigen::Index>(model.classes.size());
    const auto new_c = static_cast<Eigen::Index>(registry.size());
    if (new_c > old_c) {
      MatrixRM w = MatrixRM::Zero(new_c, model.output_weights.cols());
      w.topRows(old_c) = model.output_weights;
      Eigen::VectorXd b = Eigen::VectorXd::Zero(new_c);
      b.head(old_c) = model.output_bias;
      model.output_weights = std::move(w);
      model.output_bias = std::move(b);
    }
    model.classes = registry.names();
    model.registry_version = registry.version();
  } else {
    model = make_model(spec, rows.cols(), registry.names(), registry.version(), cfg.seed);
  }
  model.train_size = labels.size();

  const MatrixRM x = detail::to_eigen(rows);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  {
    auto rng = make_rng(cfg.seed, "validation-split");
    portable_shuffle(order.begin(), order.end(), rng);
  }
  auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(labels.size())));
  if (n_val + 1 > labels.size()) n_val = 0;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  auto gather = [&](const std::vector<std::size_t>& idx, MatrixRM& bx, std::vector<std::size_t>& by) {
    bx.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    by.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      bx.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
      by[k] = y[idx[k]];
    }
  };
  MatrixRM val_x;
  std::vector<std::size_t> val_y;
  gather(val_idx, val_x, val_y);
  MatrixRM full_x;
  std::vector<std::size_t> full_y;
  gather(train_idx, full_x, full_y);

  // Selection criterion: validation cross-entropy, or training objective
  // when the set is too small to hold out anything.
  auto selection_loss = [&](const ClassifierModel& m) {
    if (n_val > 0) return detail::cross_entropy(detail::forward(m, val_x).probs, val_y);
    return detail::loss_and_gradient(m, full_x, full_y, cfg.l2, nullptr);
  };

  ClassifierModel best = model;
  double best_loss = selection_loss(model);
  if (log) {
    *log = TrainingLog{};
    log->validation_size = n_val;
  }
  std::size_t since_best = 0;
  detail::Gradients grad;
  MatrixRM bx;
  std::vector<std::size_t> by;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto rng = make_rng(cfg.seed, "epoch-shuffle", epoch);
    std::vector<std::size_t> perm = train_idx;
    portable_shuffle(perm.begin(), perm.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
      std::vector<std::size_t> batch(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                     perm.begin() + static_cast<std::ptrdiff_t>(end));
      gather(batch, bx, by);
      epoch_loss += detail::loss_and_gradient(model, bx, by, cfg.l2, &grad);
      ++batches;
      model.output_weights -= cfg.learning_rate * grad.output_weights;
      model.output_bias -= cfg.learning_rate * grad.output_bias;
      if (model.architecture == Architecture::kMlp1) {
        model.hidden_weights -= cfg.learning_rate * grad.hidden_weights;
        model.hidden_bias -= cfg.learning_rate * grad.hidden_bias;
      }
    }
    if (!model.all_finite()) throw DataError("train: parameters diverged at epoch " + std::to_string(epoch));
    const double current = selection_loss(model);
    if (current < best_loss) {
      best_loss = current;
      best = model;
      since_best = 0;
      if (log) log->best_epoch = epoch;
    } else {
      ++since_best;
    }
    if (log) {
      log->train_loss.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
      log->validation_loss.push_back(current);
      log->running_best.push_back(best_loss);
    }
    if (since_best >= cfg.patience) break;
  }
  return best;
}

struct RankedLabel {
  std::string label;
  std::size_t class_index = 0;
  double probability = 0.0;
};

struct Prediction {
  std::string item_id;
  std::vector<RankedLabel> ranked;  // descending probability, ties to lower class index
  double confidence = 0.0;
  std::vector<float> feature;

  const std::string& label() const { return ranked.front().label; }
};

inline void check_dimension(const ClassifierModel& model, const EmbeddingMatrix& m) {
  if (m.cols() != model.input_dim) {
    throw InvalidArgument("dimension mismatch: model expects d=" + std::to_string(model.input_dim) + ", input has d=" +
                          std::to_string(m.cols()));
  }
}

/// One prediction per input row, in input order. `item_ids`, when given,
/// must match the row count.
inline std::vector<Prediction> predict(const ClassifierModel& model, const EmbeddingMatrix& m,
                                       std::span<const std::string> item_ids = {}, bool with_features = false) {
  check_dimension(model, m);
  if (!item_ids.empty() && item_ids.size() != m.rows()) throw InvalidArgument("predict: id count != row count");
  std::vector<Prediction> out(m.rows());
  if (m.rows() == 0) return out;
  const auto f = detail::forward(model, detail::to_eigen(m));
  const std::size_t c = model.num_classes();
  std::vector<std::size_t> order(c);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto& p = out[i];
    if (!item_ids.empty()) p.item_id = item_ids[i];
    std::iota(order.begin(), order.end(), 0);
    const auto row = f.probs.row(static_cast<Eigen::Index>(i));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row(a) > row(b); });
    p.ranked.reserve(c);
    for (auto k : order) p.ranked.push_back({model.classes[k], k, row(static_cast<Eigen::Index>(k))});
    p.confidence = p.ranked.front().probability;
    if (with_features) {
      const auto fr = f.features.row(static_cast<Eigen::Index>(i));
      p.feature.resize(static_cast<std::size_t>(fr.size()));
      for (Eigen::Index j = 0; j < fr.size(); ++j) p.feature[static_cast<std::size_t>(j)] = static_cast<float>(fr(j));
    }
  }
  return out;
}

/// MLP1: hidden activations. LINEAR: the input, bit for bit.
inline EmbeddingMatrix feature_embed(const ClassifierModel& model, const EmbeddingMatrix& m) {
  check_dimension(model, m);
  if (model.architecture == Architecture::kLinear) return m;
  EmbeddingMatrix out(m.rows(), model.hidden);
  if (m.rows() == 0) return out;
  const auto f = detail::forward(model, detail::to_eigen(m));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < model.hidden; ++j) {
      out(i, j) = static_cast<float>(f.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  return out;
}

/// Regularized batch loss, exposed for tests and diagnostics.
inline double batch_loss(const ClassifierModel& model, const EmbeddingMatrix& batch,
                         std::span<const std::size_t> labels, double l2) {
  check_dimension(model, batch);
  return detail::loss_and_gradient(model, detail::to_eigen(batch), labels, l2, nullptr);
}

/// Max over parameters of |analytic - numeric| / max(|analytic| + |numeric|, 1e-8),
/// numeric being the central difference with step `epsilon`.
inline double grad_check(const ClassifierModel& model, const EmbeddingMatrix& batch,
                         std::span<const std::size_t> labels, double l2, double epsilon) {
  check_dimension(model, batch);
  if (!(epsilon > 0.0)) throw InvalidArgument("grad_check: epsilon must be > 0");
  for (auto y : labels) {
    if (y >= model.num_classes()) throw InvalidArgument("grad_check: label index out of range");
  }
  const MatrixRM x = detail::to_eigen(batch);
  detail::Gradients g;
  detail::loss_and_gradient(model, x, labels, l2, &g);
  ClassifierModel probe = model;
  std::vector<std::span<const double>> analytic;
  if (model.architecture == Architecture::kMlp1) {
    analytic.emplace_back(g.hidden_weights.data(), static_cast<std::size_t>(g.hidden_weights.size()));
    analytic.emplace_back(g.hidden_bias.data(), static_cast<std::size_t>(g.hidden_bias.size()));
  }
  analytic.emplace_back(g.output_weights.data(), static_cast<std::size_t>(g.output_weights.size()));
  analytic.emplace_back(g.output_bias.data(), static_cast<std::size_t>(g.output_bias.size()));
  auto blocks = probe.parameter_blocks();
  double worst = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double saved = blocks[b][i];
      blocks[b][i] = saved + epsilon;
      const double up = detail::loss_and_gradient(probe, x, labels, l2, nullptr);
      blocks[b][i] = saved - epsilon;
      const double down = detail::loss_and_gradient(probe, x, labels, l2, nullptr);
      blocks[b][i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[b][i];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Checkpoint: "PLUDMDL1", u32 LE header length, UTF-8 JSON header, then the
// parameter tensors in canonical order as little-endian f64, row-major.
inline constexpr std::array<char, 8> kModelMagic = {'P', 'L', 'U', 'D', 'M', 'D', 'L', '1'};

inline void save_model(std::ostream& out, const ClassifierModel& model) {
  nlohmann::ordered_json header;
  header["architecture"] = to_string(model.architecture);
  header["input_dim"] = model.input_dim;
  header["hidden"] = model.hidden;
  header["classes"] = model.classes;
  header["registry_version"] = model.registry_version;
  header["trained_at_iteration"] = model.trained_at_iteration;
  header["train_size"] = model.train_size;
  nlohmann::json tensors = nlohmann::json::array();
  if (model.architecture == Architecture::kMlp1) {
    tensors.push_back({{"name", "hidden_weights"}, {"shape", {model.hidden, model.input_dim}}});
    tensors.push_back({{"name", "hidden_bias"}, {"shape", {model.hidden}}});
  }
  tensors.push_back({{"name", "output_weights"}, {"shape", {model.num_classes(), model.feature_dim()}}});
  tensors.push_back({{"name", "output_bias"}, {"shape", {model.num_classes()}}});
  header["tensors"] = tensors;
  const auto text = header.dump();
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::write_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto block : const_cast<ClassifierModel&>(model).parameter_blocks()) {
    for (double v : block) detail::write_le(out, v);
  }
  if (!out) throw EnvironmentError("model checkpoint: write failed");
}

inline ClassifierModel load_model(std::istream& in) {
  const auto bytes = detail::slurp(in);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kModelMagic.data(), kModelMagic.size()) != 0) {
    throw FormatError("model checkpoint: bad magic");
  }
  const auto header_len = detail::read_le<std::uint32_t>(bytes.data() + 8);
  if (bytes.size() < 12 + std::size_t{header_len}) throw FormatError("model checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model checkpoint: bad header: ") + e.what());
  }
  ClassifierModel model;
  try {
    ModelSpec spec{parse_architecture(header.at("architecture").get<std::string>()), header.at("hidden").get<std::size_t>()};
    model = make_model(spec, header.at("input_dim").get<std::size_t>(),
                       header.at("classes").get<std::vector<std::string>>(),
                       header.at("registry_version").get<std::uint64_t>(), 0);
    model.trained_at_iteration = header.at("trained_at_iteration").get<std::uint32_t>();
    model.train_size = header.at("train_size").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model checkpoint: bad header: ") + e.what());
  }
  std::size_t offset = 12 + header_len;
  for (auto block : model.parameter_blocks()) {
    if (bytes.size() < offset + 8 * block.size()) throw FormatError("model checkpoint: truncated payload");
    for (auto& v : block) {
      v = detail::read_le<double>(bytes.data() + offset);
      offset += 8;
    }
  }
  if (offset != bytes.size()) throw FormatError("model checkpoint: trailing bytes");
  if (!model.all_finite()) throw DataError("model checkpoint: non-finite weights");
  return model;
}

}  // namespace plud
