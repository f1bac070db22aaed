#pragma once

// A labeling campaign: dataset, label store, review tasks, model and the
// iteration records, driven through the cluster -> review -> train loop.
//
// State changes are events. Every event is appended to the journal (when the
// campaign lives in a directory) and then applied by the same code that
// replays the journal on open, so a reopened campaign is identical to the one
// that wrote it. The revision number is the count of applied events.
//
// Heavy computation (prediction, clustering, training) runs in static
// functions over plain values so callers can run it without holding the
// campaign's lock: plan_* copies what is needed, compute/run_* works on the
// copy, commit_* applies the result.

#include <signal.h>
#include <sys/types.h>
#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "plud/classifier.hpp"
#include "plud/clustering.hpp"
#include "plud/config.hpp"
#include "plud/dataset.hpp"
#include "plud/embedder.hpp"
#include "plud/error.hpp"
#include "plud/evaluation.hpp"
#include "plud/journal.hpp"
#include "plud/label_store.hpp"
#include "plud/oracle.hpp"
#include "plud/orchestrator.hpp"
#include "plud/review.hpp"

namespace plud {

namespace fs = std::filesystem;

enum class Phase { kIngested, kReview, kTraining, kIdle };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::kIngested: return "INGESTED";
    case Phase::kReview: return "REVIEW";
    case Phase::kTraining: return "TRAINING";
    case Phase::kIdle: return "IDLE";
  }
  return "?";
}

/// Reads `{"item_id": ..., "label": ...}` lines.
inline TruthMap read_truth(std::istream& in) {
  TruthMap truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto label = j.at("label").get<std::string>();
      if (label.empty()) throw FormatError("empty label");
      truth[j.at("item_id").get<std::string>()] = std::move(label);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("labels line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return truth;
}

/// Process-level write lock on a campaign directory. A lock left behind by a
/// dead process is reclaimed.
class LockFile {
 public:
  explicit LockFile(fs::path path) : path_(std::move(path)) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
      if (fd >= 0) {
        const auto pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        return;
      }
      if (const auto owner = holder(path_)) {
        throw LockHeld("campaign is locked by process " + std::to_string(*owner) + " (" + path_.string() + ")");
      }
      fs::remove(path_);
    }
    throw LockHeld("cannot acquire " + path_.string());
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;
  ~LockFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

  /// PID of a live process holding the lock, if any.
  static std::optional<long> holder(const fs::path& path) {
    std::ifstream in(path);
    long pid = 0;
    if (!(in >> pid) || pid <= 0) return std::nullopt;
    if (::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM) return pid;
    return std::nullopt;
  }

 private:
  fs::path path_;
};

struct LabelTuple {
  std::string item_id;
  std::string label;
  double confidence = 0.0;
};

/// Inputs for computing one iteration's batch without touching the campaign.
struct BatchPlan {
  std::uint32_t index = 0;
  std::vector<std::string> batch;
  EmbeddingMatrix inputs;
  ClassifierModel model;
  RoutingConfig routing;
  ClusterConfig cluster;
  std::size_t review_k = 0;
  bool normalize = true;
};

struct BatchOutcome {
  std::uint32_t index = 0;
  std::vector<std::string> batch;
  std::vector<LabelTuple> self_train;
  std::vector<LabelTuple> review;
  std::vector<ReviewTask> tasks;
};

struct TrainPlan {
  std::uint32_t index = 0;
  EmbeddingMatrix rows;
  std::vector<std::string> labels;
  ClassRegistry registry;
  TrainConfig cfg;
  ModelSpec spec;
  std::optional<ClassifierModel> warm_start;
};

enum class IterationOutcome { kRecorded, kAwaitingReview, kPoolExhausted };

class Campaign {
 public:
  /// In-memory campaign (no journal).
  Campaign(DatasetSnapshot snapshot, TruthMap truth, CampaignConfig cfg)
      : cfg_(std::move(cfg)), snapshot_(std::move(snapshot)), truth_(std::move(truth)) {
    init();
    commit(ingest_event());
  }

  /// Initializes a campaign directory from the given inputs.
  static Campaign create(const fs::path& dir, std::istream& manifest, std::istream& embeddings,
                         std::istream* truth, const CampaignConfig& cfg) {
    if (fs::exists(dir / "journal.jsonl")) throw Conflict("campaign already initialized in " + dir.string());
    const std::string manifest_text((std::istreambuf_iterator<char>(manifest)), std::istreambuf_iterator<char>());
    const std::string blob((std::istreambuf_iterator<char>(embeddings)), std::istreambuf_iterator<char>());
    std::string truth_text;
    if (truth) truth_text.assign(std::istreambuf_iterator<char>(*truth), std::istreambuf_iterator<char>());

    std::istringstream m_in(manifest_text);
    std::istringstream b_in(blob);
    auto snapshot = ingest(m_in, b_in);
    std::istringstream t_in(truth_text);
    auto truth_map = read_truth(t_in);
    for (const auto& [id, label] : truth_map) {
      if (!snapshot.contains(id)) throw FormatError("labels reference unknown item_id '" + id + "'");
    }

    fs::create_directories(dir / "models");
    write_file(dir / "manifest.jsonl", manifest_text);
    write_file(dir / "embeddings.pludemb", blob);
    write_file(dir / "truth.jsonl", truth_text);
    if (!fs::exists(dir / "campaign.json")) write_file(dir / "campaign.json", to_json(cfg).dump(2) + "\n");

    Campaign c(std::move(snapshot), std::move(truth_map), cfg, dir);
    c.commit(c.ingest_event());
    return c;
  }

  static bool exists(const fs::path& dir) { return fs::exists(dir / "journal.jsonl"); }

  /// Reopens a campaign directory and replays its journal.
  static Campaign open(const fs::path& dir) {
    if (!exists(dir)) throw MissingPrerequisite("no campaign in " + dir.string() + " (run ingest first)");
    auto cfg = load_config(dir / "campaign.json");
    std::ifstream m_in(dir / "manifest.jsonl");
    std::ifstream b_in(dir / "embeddings.pludemb", std::ios::binary);
    auto snapshot = ingest(m_in, b_in);
    TruthMap truth;
    if (std::ifstream t_in(dir / "truth.jsonl"); t_in) truth = read_truth(t_in);
    Campaign c(std::move(snapshot), std::move(truth), std::move(cfg), dir);
    for (const auto& event : c.journal_->load()) c.apply(event);
    if (!c.records_.empty() && !c.records_.back().model.empty()) c.model_ = c.load_checkpoint(c.records_.back().model);
    return c;
  }

  // --- accessors -----------------------------------------------------------

  const CampaignConfig& config() const noexcept { return cfg_; }
  CampaignConfig& config() noexcept { return cfg_; }
  const DatasetSnapshot& snapshot() const noexcept { return snapshot_; }
  const LabelStore& store() const noexcept { return store_; }
  const TruthMap& truth() const noexcept { return truth_; }
  const std::vector<IterationRecord>& records() const noexcept { return records_; }
  const std::vector<ReviewTask>& tasks() const noexcept { return tasks_; }
  const std::optional<ClassifierModel>& model() const noexcept { return model_; }
  std::uint64_t revision() const noexcept { return revision_; }
  Phase phase() const noexcept { return phase_; }
  bool persistent() const noexcept { return journal_.has_value(); }
  const std::optional<fs::path>& directory() const noexcept { return dir_; }
  bool iteration_requested() const noexcept { return iteration_requested_; }

  std::size_t pending_tasks() const {
    return static_cast<std::size_t>(std::count_if(tasks_.begin(), tasks_.end(), [](const ReviewTask& t) {
      return t.status == TaskStatus::kPending;
    }));
  }

  const ReviewTask* find_task(const std::string& task_id) const {
    for (const auto& t : tasks_) {
      if (t.task_id == task_id) return &t;
    }
    return nullptr;
  }

  /// Classifier/clustering input rows (l2-normalized when configured).
  EmbeddingMatrix input_rows(const std::vector<std::string>& ids) const {
    std::vector<std::size_t> rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) rows.push_back(*snapshot_.item(id).embedding_row);
    return inputs_.select(rows);
  }

  /// The batch iteration `index` would draw from the current pool: a seeded
  /// shuffle of the pool, first `batch_size` items, sorted by item_id.
  std::vector<std::string> draw_batch(std::uint32_t index) const {
    std::vector<std::string> pool(snapshot_.unlabeled_pool().begin(), snapshot_.unlabeled_pool().end());
    auto rng = make_rng(cfg_.seed, "batch", index);
    portable_shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), cfg_.routing.batch_size));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  // --- bootstrap -----------------------------------------------------------

  /// Samples the pool, clusters the sample and opens one review task per
  /// cluster. `k` overrides the configured/automatic cluster count.
  void bootstrap(const SamplingStrategy& strategy, std::optional<std::size_t> k = std::nullopt) {
    if (phase_ != Phase::kIngested) throw Conflict("campaign already bootstrapped");
    const auto sample = sample_initial(snapshot_, strategy);
    std::size_t kk = k ? *k : (cfg_.auto_k ? default_k(sample.size()) : cfg_.cluster.k);
    kk = std::clamp<std::size_t>(kk, 1, sample.size());
    ClusterConfig cc = cfg_.cluster;
    cc.k = kk;
    const auto cs = cluster(input_rows(sample), cc, sample);
    BatchOutcome outcome;
    outcome.index = 0;
    outcome.batch = sample;
    for (const auto& id : sample) outcome.review.push_back({id, "", 0.0});
    outcome.tasks = make_tasks(0, cs, {});
    commit(round_event(outcome, true));
  }

  // --- iteration -----------------------------------------------------------

  /// Copies what one iteration needs. nullopt when the pool is exhausted.
  std::optional<BatchPlan> plan_batch() const {
    if (phase_ != Phase::kIdle || !model_) {
      throw Conflict(std::string("cannot start an iteration in phase ") + std::string(to_string(phase_)));
    }
    if (snapshot_.unlabeled_pool().empty()) return std::nullopt;
    BatchPlan plan;
    plan.index = static_cast<std::uint32_t>(records_.size());
    plan.batch = draw_batch(plan.index);
    plan.inputs = input_rows(plan.batch);
    plan.model = *model_;
    plan.routing = cfg_.routing;
    plan.cluster = cfg_.cluster;
    plan.review_k = cfg_.review_k;
    plan.normalize = cfg_.normalize;
    return plan;
  }

  /// Predict, route, re-embed the low-confidence items with the classifier's
  /// features and cluster them into review tasks.
  static BatchOutcome compute_batch(const BatchPlan& plan) {
    BatchOutcome out;
    out.index = plan.index;
    out.batch = plan.batch;
    auto routed = route(predict(plan.model, plan.inputs, plan.batch), plan.routing);
    for (const auto& p : routed.self_train) out.self_train.push_back({p.item_id, p.label(), p.confidence});
    std::sort(out.self_train.begin(), out.self_train.end(),
              [](const LabelTuple& a, const LabelTuple& b) { return a.item_id < b.item_id; });
    std::sort(routed.review.begin(), routed.review.end(),
              [](const Prediction& a, const Prediction& b) { return a.item_id < b.item_id; });
    if (routed.review.empty()) return out;

    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < plan.batch.size(); ++i) position.emplace(plan.batch[i], i);
    std::vector<std::size_t> rows;
    std::vector<std::string> ids;
    std::map<std::string, std::string> predicted;
    for (const auto& p : routed.review) {
      rows.push_back(position.at(p.item_id));
      ids.push_back(p.item_id);
      predicted[p.item_id] = p.label();
      out.review.push_back({p.item_id, p.label(), p.confidence});
    }
    auto features = feature_embed(plan.model, plan.inputs.select(rows));
    if (plan.normalize) features = l2_normalize(features);
    ClusterConfig cc = plan.cluster;
    cc.k = std::clamp<std::size_t>(plan.review_k ? plan.review_k : plan.model.num_classes(), 1, ids.size());
    const auto cs = cluster(features, cc, ids);
    out.tasks = make_tasks(plan.index, cs, predicted);
    return out;
  }

  void commit_batch(const BatchOutcome& outcome) {
    if (phase_ != Phase::kIdle || outcome.index != records_.size()) {
      throw Conflict("batch outcome does not match campaign state");
    }
    commit(round_event(outcome, false));
  }

  /// Marks that an iteration was requested (service: POST /api/iterate).
  void request_iteration() {
    if (phase_ != Phase::kIdle) throw Conflict("an iteration is already in progress");
    commit({{"type", "iterate"}, {"index", records_.size()}});
  }

  // --- review --------------------------------------------------------------

  /// Applies a reviewer's verdict. Untoggled members get CLUSTER_MAJORITY,
  /// toggled members get MANUAL labels from `item_labels` (or go back to the
  /// pool when so configured). `expected_revision` enables optimistic
  /// concurrency: a mismatch is a Conflict and nothing changes.
  const ReviewTask& submit(const std::string& task_id, const Submission& s,
                           std::optional<std::uint64_t> expected_revision = std::nullopt) {
    if (expected_revision && *expected_revision != revision_) {
      throw Conflict("stale revision " + std::to_string(*expected_revision) + " (current " +
                     std::to_string(revision_) + ")");
    }
    const auto* task = find_task(task_id);
    if (!task) throw NotFound("unknown task '" + task_id + "'");
    if (task->status != TaskStatus::kPending) throw Conflict("task '" + task_id + "' already submitted");
    validate_submission(*task, s);
    nlohmann::ordered_json event;
    event["type"] = "submit";
    event["task_id"] = task_id;
    event["submission"] = to_json(s);
    event["assigned_at"] = utc_now_iso8601();
    commit(event);
    return *find_task(task_id);
  }

  /// Answers every pending task with the oracle.
  void submit_all(const Oracle& oracle) {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (tasks_[i].status == TaskStatus::kPending) submit(tasks_[i].task_id, oracle.review_cluster(tasks_[i]));
    }
  }

  // --- training ------------------------------------------------------------

  bool training_due() const noexcept { return phase_ == Phase::kTraining; }

  TrainPlan plan_training() const {
    if (phase_ != Phase::kTraining) throw Conflict("no completed review round to train on");
    TrainPlan plan;
    plan.index = round_.index;
    std::vector<std::string> ids;
    for (const auto& id : snapshot_.labeled_train()) {
      const auto a = store_.active(id);
      if (!a || a->provenance == Provenance::kPredicted) continue;
      ids.push_back(id);
      plan.labels.push_back(a->label);
    }
    plan.rows = input_rows(ids);
    plan.registry = store_.registry();
    plan.cfg = cfg_.train;
    plan.cfg.seed = derive_seed(cfg_.train.seed, "round", round_.index);
    plan.spec = cfg_.model;
    if (model_) plan.warm_start = *model_;
    return plan;
  }

  static ClassifierModel run_training(const TrainPlan& plan, TrainingLog* log = nullptr) {
    return train(plan.rows, plan.labels, plan.registry, plan.cfg, plan.spec,
                 plan.warm_start ? &*plan.warm_start : nullptr, log);
  }

  /// Stores the model, evaluates it on the held-out test set and appends the
  /// round's IterationRecord.
  const IterationRecord& commit_training(ClassifierModel model) {
    if (phase_ != Phase::kTraining) throw Conflict("no training pending");
    model.trained_at_iteration = round_.index;
    char name[32];
    std::snprintf(name, sizeof name, "model-%04u", round_.index);
    std::string ref = name;
    if (dir_) {
      ref = "models/" + ref + ".pludmdl";
      const auto tmp = *dir_ / (ref + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        save_model(out, model);
      }
      fs::rename(tmp, *dir_ / ref);
    }
    IterationRecord r;
    r.index = round_.index;
    r.train_size_before = round_.train_size_before;
    r.train_size_after = snapshot_.labeled_train().size();
    r.batch_items = round_.batch_items;
    r.high_confidence = round_.high;
    r.low_confidence = round_.low;
    r.clusters_created = round_.clusters;
    r.review_decisions = round_.decisions;
    r.misclustered_corrections = round_.misclustered;
    r.returned_to_pool = round_.returned;
    r.cluster_purity = round_.purity;
    r.effort = account_effort(round_.low, round_.clusters, round_.misclustered, round_.classes_present.size());
    if (const auto rep = evaluate(model)) r.metrics = summarize(*rep);
    r.model = ref;
    nlohmann::ordered_json event;
    event["type"] = "record";
    event["record"] = to_json(r);
    commit(event);
    model_ = std::move(model);
    return records_.back();
  }

  /// Train and record in one step.
  const IterationRecord& finish_round(TrainingLog* log = nullptr) { return commit_training(run_training(plan_training(), log)); }

  // --- whole-loop conveniences ---------------------------------------------

  /// One iteration end to end. With an oracle every review is answered and
  /// the round is recorded; without one the call stops at the review gate.
  IterationOutcome run_iteration(const Oracle* oracle) {
    if (phase_ == Phase::kReview && pending_tasks() > 0 && !oracle) return IterationOutcome::kAwaitingReview;
    if (phase_ == Phase::kIdle) {
      const auto plan = plan_batch();
      if (!plan) return IterationOutcome::kPoolExhausted;
      commit_batch(compute_batch(*plan));
    }
    if (phase_ == Phase::kReview) {
      if (!oracle) return IterationOutcome::kAwaitingReview;
      submit_all(*oracle);
    }
    if (phase_ == Phase::kTraining) finish_round();
    return IterationOutcome::kRecorded;
  }

  /// Bootstrap with the oracle, then up to `iterations` iterations.
  const std::vector<IterationRecord>& run_campaign(const SamplingStrategy& strategy, std::size_t iterations,
                                                   const Oracle& oracle, std::optional<std::size_t> k = std::nullopt) {
    bootstrap(strategy, k);
    submit_all(oracle);
    finish_round();
    for (std::size_t i = 0; i < iterations; ++i) {
      if (run_iteration(&oracle) == IterationOutcome::kPoolExhausted) break;
    }
    return records_;
  }

  Oracle make_oracle() const { return Oracle(OracleConfig{cfg_.oracle.noise, cfg_.oracle.seed, truth_}); }

  // --- evaluation ----------------------------------------------------------

  /// Predictions of `model` on held-out test items that have ground truth.
  std::vector<Prediction> test_predictions(const ClassifierModel& model) const {
    std::vector<std::string> ids;
    for (const auto& id : snapshot_.held_out_test()) {
      if (truth_.contains(id)) ids.push_back(id);
    }
    return predict(model, input_rows(ids), ids);
  }

  std::optional<MetricsReport> evaluate(const ClassifierModel& model, const std::vector<std::size_t>& ks = {1, 3}) const {
    const auto predictions = test_predictions(model);
    if (predictions.empty()) return std::nullopt;
    return report(predictions, truth_, ks);
  }

  static MetricsSummary summarize(const MetricsReport& rep) {
    MetricsSummary m;
    m.items = rep.items;
    if (const auto* top1 = rep.find(1)) {
      m.accuracy = percent(top1->accuracy);
      m.average_precision = percent(top1->average_precision);
      m.average_recall = percent(top1->average_recall);
      m.f_score = percent(top1->f_score);
    }
    const auto* top3 = rep.find(std::min<std::size_t>(3, rep.classes.size()));
    if (top3) {
      m.top3_accuracy = percent(top3->accuracy);
      m.top3_f_score = percent(top3->f_score);
    }
    return m;
  }

  nlohmann::ordered_json status_json() const {
    nlohmann::ordered_json j;
    j["campaign_id"] = cfg_.campaign_id;
    j["iteration"] = records_.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(records_.back().index);
    j["phase"] = to_string(phase_);
    j["train_size"] = snapshot_.labeled_train().size();
    j["pool_size"] = snapshot_.unlabeled_pool().size();
    j["test_size"] = snapshot_.held_out_test().size();
    j["pending_tasks"] = pending_tasks();
    j["revision"] = revision_;
    j["classes"] = store_.registry().names();
    j["complete"] = phase_ == Phase::kIdle && snapshot_.unlabeled_pool().empty();
    j["iteration_requested"] = iteration_requested_;
    j["metrics_latest"] = (!records_.empty() && records_.back().metrics) ? nlohmann::ordered_json(to_json(*records_.back().metrics))
                                                                         : nlohmann::ordered_json();
    return j;
  }

  ClassifierModel load_checkpoint(const std::string& ref) const {
    if (!dir_) throw MissingPrerequisite("in-memory campaign has no checkpoints on disk");
    std::ifstream in(*dir_ / ref, std::ios::binary);
    if (!in) throw MissingPrerequisite("missing model checkpoint " + (*dir_ / ref).string());
    return load_model(in);
  }

 private:
  struct Round {
    std::uint32_t index = 0;
    bool bootstrap = false;
    std::size_t train_size_before = 0;
    std::size_t batch_items = 0;
    std::size_t high = 0;
    std::size_t low = 0;
    std::size_t clusters = 0;
    std::size_t decisions = 0;
    std::size_t misclustered = 0;
    std::size_t returned = 0;
    std::optional<double> purity;
    std::set<std::string> classes_present;
  };

  Campaign(DatasetSnapshot snapshot, TruthMap truth, CampaignConfig cfg, const fs::path& dir)
      : cfg_(std::move(cfg)), snapshot_(std::move(snapshot)), truth_(std::move(truth)), dir_(dir),
        journal_(Journal(dir / "journal.jsonl")) {
    init();
  }

  void init() {
    for (const auto& item : snapshot_.items()) store_.add_item(item.item_id);
    inputs_ = cfg_.normalize ? l2_normalize(snapshot_.embeddings()) : snapshot_.embeddings();
  }

  static void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw EnvironmentError("cannot write " + path.string());
  }

  nlohmann::ordered_json ingest_event() const {
    nlohmann::ordered_json e;
    e["type"] = "ingest";
    e["items"] = snapshot_.items().size();
    e["pool"] = snapshot_.unlabeled_pool().size();
    e["test"] = snapshot_.held_out_test().size();
    e["dimension"] = snapshot_.embeddings().cols();
    return e;
  }

  static std::vector<ReviewTask> make_tasks(std::uint32_t round, const ClusterSet& cs,
                                            const std::map<std::string, std::string>& predicted) {
    std::vector<ReviewTask> tasks;
    for (const auto& members : cs.clusters) {
      if (members.empty()) continue;
      ReviewTask t;
      char id[32];
      std::snprintf(id, sizeof id, "r%03u-t%03zu", round, tasks.size() + 1);
      t.task_id = id;
      t.members = members;
      std::sort(t.members.begin(), t.members.end());
      std::vector<std::string> known;
      for (const auto& m : t.members) {
        if (const auto it = predicted.find(m); it != predicted.end()) known.push_back(it->second);
      }
      if (!known.empty()) t.suggested_label = majority_label(known).label;
      tasks.push_back(std::move(t));
    }
    return tasks;
  }

  nlohmann::ordered_json round_event(const BatchOutcome& o, bool bootstrap) const {
    auto tuples = [](const std::vector<LabelTuple>& v) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& t : v) arr.push_back({t.item_id, t.label, t.confidence});
      return arr;
    };
    nlohmann::ordered_json e;
    e["type"] = "round";
    e["index"] = o.index;
    e["bootstrap"] = bootstrap;
    e["batch"] = o.batch;
    e["self_train"] = tuples(o.self_train);
    e["review"] = tuples(o.review);
    auto tasks = nlohmann::ordered_json::array();
    for (const auto& t : o.tasks) tasks.push_back(to_json(t));
    e["tasks"] = tasks;
    // Purity of the review clusters against ground truth, when fully known.
    std::optional<double> pur;
    if (!o.tasks.empty()) {
      ClusterSet cs;
      bool covered = true;
      for (const auto& t : o.tasks) {
        cs.clusters.push_back(t.members);
        for (const auto& m : t.members) covered &= truth_.contains(m);
      }
      if (covered) pur = purity(cs, truth_);
    }
    e["purity"] = pur ? nlohmann::ordered_json(*pur) : nlohmann::ordered_json();
    e["assigned_at"] = utc_now_iso8601();
    return e;
  }

  void validate_submission(const ReviewTask& task, const Submission& s) const {
    if (s.label.empty()) throw Unprocessable("cluster label must be non-empty");
    const std::set<std::string> members(task.members.begin(), task.members.end());
    std::set<std::string> toggled;
    for (const auto& id : s.misclustered) {
      if (!members.contains(id)) throw Unprocessable("misclustered item '" + id + "' is not a member of " + task.task_id);
      if (!toggled.insert(id).second) throw Unprocessable("misclustered item '" + id + "' listed twice");
    }
    for (const auto& [id, label] : s.item_labels) {
      if (!toggled.contains(id)) throw Unprocessable("item_labels entry '" + id + "' is not toggled");
      if (label.empty()) throw Unprocessable("empty label for '" + id + "'");
    }
    if (!cfg_.return_misclustered_to_pool) {
      for (const auto& id : toggled) {
        if (!s.item_labels.contains(id)) throw Unprocessable("toggled item '" + id + "' has no label in item_labels");
      }
    }
  }

  void commit(nlohmann::ordered_json event) {
    event["revision"] = revision_ + 1;
    if (journal_) journal_->append(event);
    apply(event);
  }

  void apply(const nlohmann::json& e) {
    const auto type = e.at("type").get<std::string>();
    const auto rev = e.at("revision").get<std::uint64_t>();
    if (rev != revision_ + 1) throw FormatError("journal: revision " + std::to_string(rev) + " out of sequence");
    if (type == "ingest") {
      // dataset is loaded from the campaign files
    } else if (type == "round") {
      apply_round(e);
    } else if (type == "submit") {
      apply_submit(e);
    } else if (type == "iterate") {
      iteration_requested_ = true;
    } else if (type == "record") {
      records_.push_back(record_from_json(e.at("record")));
      phase_ = Phase::kIdle;
    } else {
      throw FormatError("journal: unknown event type '" + type + "'");
    }
    revision_ = rev;
  }

  void apply_round(const nlohmann::json& e) {
    const bool bootstrap = e.at("bootstrap").get<bool>();
    if (bootstrap ? phase_ != Phase::kIngested : phase_ != Phase::kIdle) {
      throw Conflict("journal: round event in phase " + std::string(to_string(phase_)));
    }
    const auto at = e.at("assigned_at").get<std::string>();
    round_ = Round{};
    round_.index = e.at("index").get<std::uint32_t>();
    round_.bootstrap = bootstrap;
    round_.train_size_before = snapshot_.labeled_train().size();
    round_.batch_items = e.at("batch").size();
    for (const auto& t : e.at("self_train")) {
      const auto id = t.at(0).get<std::string>();
      store_.assign(id, t.at(1).get<std::string>(), Provenance::kSelfTrained, t.at(2).get<double>(), round_.index, at);
      snapshot_.move(id, Partition::kUnlabeledPool, Partition::kLabeledTrain);
      ++round_.high;
    }
    for (const auto& t : e.at("review")) {
      const auto label = t.at(1).get<std::string>();
      if (!label.empty()) {
        store_.assign(t.at(0).get<std::string>(), label, Provenance::kPredicted, t.at(2).get<double>(), round_.index, at);
      }
      ++round_.low;
    }
    tasks_.clear();
    for (const auto& t : e.at("tasks")) {
      ReviewTask task;
      task.task_id = t.at("task_id").get<std::string>();
      task.members = t.at("members").get<std::vector<std::string>>();
      if (!t.at("suggested_label").is_null()) task.suggested_label = t["suggested_label"].get<std::string>();
      tasks_.push_back(std::move(task));
    }
    round_.clusters = tasks_.size();
    if (!e.at("purity").is_null()) round_.purity = e["purity"].get<double>();
    iteration_requested_ = false;
    phase_ = tasks_.empty() ? Phase::kTraining : Phase::kReview;
  }

  void apply_submit(const nlohmann::json& e) {
    const auto task_id = e.at("task_id").get<std::string>();
    auto it = std::find_if(tasks_.begin(), tasks_.end(), [&](const ReviewTask& t) { return t.task_id == task_id; });
    if (it == tasks_.end()) throw NotFound("unknown task '" + task_id + "'");
    if (it->status != TaskStatus::kPending) throw Conflict("task '" + task_id + "' already submitted");
    const auto s = submission_from_json(e.at("submission"));
    validate_submission(*it, s);
    const auto at = e.at("assigned_at").get<std::string>();
    const std::set<std::string> toggled(s.misclustered.begin(), s.misclustered.end());
    for (const auto& id : it->members) {
      if (!toggled.contains(id)) {
        store_.assign(id, s.label, Provenance::kClusterMajority, 1.0, round_.index, at);
        round_.classes_present.insert(s.label);
      } else if (cfg_.return_misclustered_to_pool) {
        ++round_.returned;
        continue;
      } else {
        const auto& label = s.item_labels.at(id);
        store_.assign(id, label, Provenance::kManual, 1.0, round_.index, at);
        round_.classes_present.insert(label);
      }
      snapshot_.move(id, Partition::kUnlabeledPool, Partition::kLabeledTrain);
    }
    round_.misclustered += toggled.size();
    ++round_.decisions;
    it->status = TaskStatus::kSubmitted;
    it->submission = s;
    if (pending_tasks() == 0) phase_ = Phase::kTraining;
  }

  CampaignConfig cfg_;
  DatasetSnapshot snapshot_;
  TruthMap truth_;
  std::optional<fs::path> dir_;
  std::optional<Journal> journal_;
  EmbeddingMatrix inputs_;
  LabelStore store_;
  std::vector<ReviewTask> tasks_;
  std::vector<IterationRecord> records_;
  std::optional<ClassifierModel> model_;
  Round round_;
  Phase phase_ = Phase::kIngested;
  std::uint64_t revision_ = 0;
  bool iteration_requested_ = false;
};

}  // namespace plud
