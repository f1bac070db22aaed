#pragma once

// HTTP facade over a campaign for the review UI.
//
// Readers take a shared lock. Mutations take the exclusive lock only to plan
// and to commit; prediction, clustering and training run on the background
// worker without holding it, so requests never wait on compute.

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "plud/campaign.hpp"

// After Eigen: <resolv.h> defines a `_res` macro.
#include <httplib.h>

namespace plud {

struct ServiceOptions {
  std::string static_dir;
  std::filesystem::path base_dir;  // relative source_uri paths resolve here
  std::size_t max_page_size = 1000;
};

class Service {
 public:
  explicit Service(std::optional<Campaign> campaign, ServiceOptions options = {})
      : campaign_(std::move(campaign)), options_(std::move(options)) {
    routes();
    // No SO_REUSEPORT: a second server on a busy port must fail to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    worker_ = std::thread([this] { work(); });
    if (campaign_) {
      // Resume whatever an interrupted run left behind.
      if (campaign_->training_due()) schedule(Job::kTrain);
      else if (campaign_->iteration_requested() && campaign_->phase() == Phase::kIdle) schedule(Job::kIterate);
    }
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ~Service() {
    stop();
    {
      std::lock_guard lk(job_mu_);
      shutdown_ = true;
    }
    job_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  httplib::Server& server() noexcept { return server_; }

  /// Binds and serves until stop(). Returns false when the port is unavailable.
  bool listen(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) return false;
    return server_.listen_after_bind();
  }

  /// Binds to an ephemeral port; returns it, or -1.
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }

  void stop() { server_.stop(); }

  /// Blocks until the worker has nothing scheduled or running.
  void wait_idle() {
    std::unique_lock lk(job_mu_);
    idle_cv_.wait(lk, [this] { return !job_ && !busy_; });
  }

  /// Runs `f` on the campaign under the shared lock.
  template <typename F>
  auto read(F&& f) const {
    std::shared_lock lk(mu_);
    return f(*campaign_);
  }

 private:
  enum class Job { kIterate, kTrain };

  static void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
  }

  static int status_for(const Error& e) {
    switch (e.kind()) {
      case Error::Kind::kNotFound: return 404;
      case Error::Kind::kConflict: return 409;
      case Error::Kind::kUnprocessable: return 422;
      case Error::Kind::kInvalidArgument:
      case Error::Kind::kFormat: return 400;
      default: return 500;
    }
  }

  static std::optional<long long> parse_int(const std::string& s) {
    if (s.empty() || s.size() > 18) return std::nullopt;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return std::nullopt;
    for (std::size_t j = i; j < s.size(); ++j) {
      if (s[j] < '0' || s[j] > '9') return std::nullopt;
    }
    return std::stoll(s);
  }

  /// 503 before ingest; 404 when `?campaign=` names another campaign.
  bool check_campaign(const httplib::Request& req, httplib::Response& res) const {
    if (!campaign_) {
      send_error(res, 503, "no campaign ingested");
      return false;
    }
    if (req.has_param("campaign") && req.get_param_value("campaign") != campaign_->config().campaign_id) {
      send_error(res, 404, "unknown campaign '" + req.get_param_value("campaign") + "'");
      return false;
    }
    return true;
  }

  nlohmann::ordered_json task_json(const ReviewTask& t) const {
    auto j = to_json(t);
    auto thumbs = nlohmann::ordered_json::object();
    for (const auto& id : t.members) {
      if (campaign_->snapshot().item(id).source_uri) thumbs[id] = "/api/items/" + id + "/thumbnail";
    }
    j["thumbnails"] = thumbs;
    return j;
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                 {"Access-Control-Allow-Headers", "Content-Type"}});
    server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    if (!options_.static_dir.empty()) server_.set_mount_point("/", options_.static_dir);

    server_.Get("/api/status", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_lock lk(mu_);
      if (!check_campaign(req, res)) return;
      auto j = campaign_->status_json();
      {
        std::lock_guard jl(job_mu_);
        j["iteration_running"] = busy_ || job_.has_value();
        j["worker_error"] = worker_error_.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(worker_error_);
      }
      send_json(res, 200, j);
    });

    server_.Get("/api/tasks", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_lock lk(mu_);
      if (!check_campaign(req, res)) return;
      std::optional<TaskStatus> status;
      long long page = 0;
      long long page_size = 50;
      try {
        if (req.has_param("status")) status = parse_task_status(req.get_param_value("status"));
      } catch (const Error& e) {
        return send_error(res, 400, e.what());
      }
      if (req.has_param("page")) {
        const auto v = parse_int(req.get_param_value("page"));
        if (!v || *v < 0) return send_error(res, 400, "page must be a non-negative integer");
        page = *v;
      }
      if (req.has_param("page_size")) {
        const auto v = parse_int(req.get_param_value("page_size"));
        if (!v || *v < 1 || static_cast<std::size_t>(*v) > options_.max_page_size) {
          return send_error(res, 400, "page_size must lie in [1, " + std::to_string(options_.max_page_size) + "]");
        }
        page_size = *v;
      }
      std::vector<const ReviewTask*> matching;
      for (const auto& t : campaign_->tasks()) {
        if (!status || t.status == *status) matching.push_back(&t);
      }
      std::sort(matching.begin(), matching.end(),
                [](const ReviewTask* a, const ReviewTask* b) { return a->task_id < b->task_id; });
      auto tasks = nlohmann::ordered_json::array();
      const auto first = static_cast<std::size_t>(page) * static_cast<std::size_t>(page_size);
      for (std::size_t i = first; i < matching.size() && i < first + static_cast<std::size_t>(page_size); ++i) {
        tasks.push_back(task_json(*matching[i]));
      }
      send_json(res, 200,
                {{"tasks", tasks},
                 {"page", page},
                 {"page_size", page_size},
                 {"total", matching.size()},
                 {"revision", campaign_->revision()}});
    });

    server_.Post(R"(/api/tasks/([^/]+)/submit)", [this](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error& e) {
        return send_error(res, 400, std::string("malformed JSON: ") + e.what());
      }
      Submission s;
      std::uint64_t revision = 0;
      try {
        if (!body.is_object() || !body.contains("revision")) return send_error(res, 400, "body needs label and revision");
        revision = body.at("revision").get<std::uint64_t>();
        s = submission_from_json(body);
        s.reviewer = Reviewer::kHuman;
      } catch (const nlohmann::json::exception& e) {
        return send_error(res, 400, std::string("bad submission: ") + e.what());
      }
      bool train = false;
      nlohmann::ordered_json out;
      {
        std::unique_lock lk(mu_);
        if (!check_campaign(req, res)) return;
        try {
          out = task_json(campaign_->submit(req.matches[1], s, revision));
        } catch (const Error& e) {
          return send_error(res, status_for(e), e.what());
        }
        out["revision"] = campaign_->revision();
        train = campaign_->training_due();
      }
      if (train) schedule(Job::kTrain);
      send_json(res, 200, out);
    });

    server_.Post("/api/iterate", [this](const httplib::Request& req, httplib::Response& res) {
      std::unique_lock lk(mu_);
      if (!check_campaign(req, res)) return;
      {
        std::lock_guard jl(job_mu_);
        if (busy_ || job_) return send_error(res, 409, "an iteration is already running");
      }
      const auto& c = *campaign_;
      if (c.phase() == Phase::kIngested) return send_error(res, 409, "campaign is not bootstrapped");
      if (c.pending_tasks() > 0) {
        return send_error(res, 409, std::to_string(c.pending_tasks()) + " review tasks are pending");
      }
      if (c.phase() != Phase::kIdle) return send_error(res, 409, "an iteration is already running");
      if (c.snapshot().unlabeled_pool().empty()) {
        return send_json(res, 200, {{"complete", true}, {"revision", c.revision()}});
      }
      try {
        campaign_->request_iteration();
      } catch (const Error& e) {
        return send_error(res, status_for(e), e.what());
      }
      const auto index = campaign_->records().size();
      const auto revision = campaign_->revision();
      schedule(Job::kIterate);
      send_json(res, 202, {{"iteration", index}, {"revision", revision}, {"complete", false}});
    });

    server_.Get(R"(/api/items/([^/]+)/thumbnail)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (id.find("..") != std::string::npos || id.find('\\') != std::string::npos || id.find('/') != std::string::npos) {
        return send_error(res, 400, "invalid item id");
      }
      std::filesystem::path path;
      {
        std::shared_lock lk(mu_);
        if (!check_campaign(req, res)) return;
        if (!campaign_->snapshot().contains(id)) return send_error(res, 404, "unknown item '" + id + "'");
        const auto& uri = campaign_->snapshot().item(id).source_uri;
        if (!uri) return send_error(res, 404, "item '" + id + "' has no source_uri");
        std::string p = *uri;
        if (p.rfind("file://", 0) == 0) p = p.substr(7);
        path = p;
        if (path.is_relative()) path = options_.base_dir / path;
      }
      std::ifstream in(path, std::ios::binary);
      if (!in) return send_error(res, 404, "cannot read " + path.filename().string());
      const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      res.set_content(bytes, content_type(path));
    });
  }

  static std::string content_type(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".png") return "image/png";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".bmp") return "image/bmp";
    return "application/octet-stream";
  }

  void schedule(Job job) {
    {
      std::lock_guard lk(job_mu_);
      job_ = job;
    }
    job_cv_.notify_all();
  }

  void work() {
    for (;;) {
      Job job;
      {
        std::unique_lock lk(job_mu_);
        job_cv_.wait(lk, [this] { return shutdown_ || job_.has_value(); });
        if (shutdown_) return;
        job = *job_;
        job_.reset();
        busy_ = true;
      }
      try {
        if (job == Job::kIterate) iterate();
        train_if_due();
        std::lock_guard lk(job_mu_);
        worker_error_.clear();
      } catch (const std::exception& e) {
        std::lock_guard lk(job_mu_);
        worker_error_ = e.what();
      }
      {
        std::lock_guard lk(job_mu_);
        busy_ = false;
      }
      idle_cv_.notify_all();
    }
  }

  void iterate() {
    std::optional<BatchPlan> plan;
    {
      std::unique_lock lk(mu_);
      if (campaign_->phase() != Phase::kIdle) return;
      plan = campaign_->plan_batch();
    }
    if (!plan) return;
    const auto outcome = Campaign::compute_batch(*plan);
    std::unique_lock lk(mu_);
    campaign_->commit_batch(outcome);
  }

  void train_if_due() {
    TrainPlan plan;
    {
      std::unique_lock lk(mu_);
      if (!campaign_->training_due()) return;
      plan = campaign_->plan_training();
    }
    auto model = Campaign::run_training(plan);
    std::unique_lock lk(mu_);
    campaign_->commit_training(std::move(model));
  }

  std::optional<Campaign> campaign_;
  ServiceOptions options_;
  httplib::Server server_;
  mutable std::shared_mutex mu_;

  mutable std::mutex job_mu_;
  std::condition_variable job_cv_;
  std::condition_variable idle_cv_;
  std::optional<Job> job_;
  bool busy_ = false;
  bool shutdown_ = false;
  std::string worker_error_;
  std::thread worker_;
};

}  // namespace plud
