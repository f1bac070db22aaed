// plud: command-line entry point for labeling campaigns.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "plud/campaign.hpp"
#include "plud/service.hpp"
#include "plud/simulate.hpp"

namespace fs = std::filesystem;
using namespace plud;

namespace {

enum Exit { kOk = 0, kFormat = 2, kState = 3, kLock = 4, kPrereq = 5, kEnv = 6 };

int exit_code(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::kInvalidArgument:
    case Error::Kind::kFormat:
    case Error::Kind::kData:
    case Error::Kind::kUnprocessable: return kFormat;
    case Error::Kind::kConflict: return kState;
    case Error::Kind::kLock: return kLock;
    case Error::Kind::kNotFound:
    case Error::Kind::kPrerequisite: return kPrereq;
    case Error::Kind::kEnvironment: return kEnv;
  }
  return 1;
}

struct Options {
  std::string campaign;
  std::string config;
  int verbose = 0;

  fs::path dir() const {
    if (!campaign.empty()) return campaign;
    if (const char* home = std::getenv("PLUD_HOME"); home && *home) return home;
    return "plud-campaign";
  }
};

std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw MissingPrerequisite("cannot open " + path);
  return in;
}

// Checked before locking so a missing campaign is not reported as a lock failure.
void require_campaign(const fs::path& dir) {
  if (!Campaign::exists(dir)) throw MissingPrerequisite("no campaign in " + dir.string() + " (run ingest first)");
}

std::string pct(const std::optional<MetricsSummary>& m) {
  char buf[32];
  if (!m) return "-";
  std::snprintf(buf, sizeof buf, "%.2f", m->accuracy);
  return buf;
}

void print_record_header() {
  std::printf("%4s %10s %10s %8s %8s %8s %8s %8s\n", "iter", "train", "+labeled", "self", "review", "clusters",
              "effort", "acc%");
}

void print_record(const IterationRecord& r) {
  std::printf("%4u %10zu %10zu %8zu %8zu %8zu %8.3f %8s\n", r.index, r.train_size_after,
              r.train_size_after - r.train_size_before, r.high_confidence, r.low_confidence, r.clusters_created,
              r.effort.ratio, pct(r.metrics).c_str());
}

volatile std::sig_atomic_t g_stop = 0;
Service* g_service = nullptr;

void on_signal(int) {
  g_stop = 1;
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plud: cluster, review, train, route"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--campaign", opt.campaign, "Campaign directory (default: $PLUD_HOME, else ./plud-campaign)");
  app.add_option("--config", opt.config, "Campaign JSON used at ingest");
  app.add_flag("-v,--verbose", opt.verbose, "More output");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Load a manifest and embeddings into a new campaign");
  std::string manifest_path, embeddings_path, labels_path;
  ingest_cmd->add_option("--manifest", manifest_path, "Manifest JSON Lines")->required();
  ingest_cmd->add_option("--embeddings", embeddings_path, "PLUDEMB1 embedding file")->required();
  ingest_cmd->add_option("--test-labels", labels_path, "Ground-truth labels JSON Lines");

  // bootstrap
  auto* boot_cmd = app.add_subcommand("bootstrap", "Sample, cluster and open the first review tasks");
  std::string strategy_name = "subject-complete";
  std::size_t subjects = 0, size = 0;
  std::optional<std::size_t> boot_k;
  std::optional<std::uint64_t> boot_seed;
  bool boot_oracle = false;
  boot_cmd->add_option("--strategy", strategy_name, "subject-complete or random");
  boot_cmd->add_option("--subjects", subjects, "Subjects to sample (subject-complete)");
  boot_cmd->add_option("--size", size, "Items to sample (random)");
  boot_cmd->add_option("--k", boot_k, "Cluster count");
  boot_cmd->add_option("--seed", boot_seed, "Sampling and clustering seed");
  boot_cmd->add_flag("--oracle", boot_oracle, "Answer reviews from ground truth and train");

  // iterate
  auto* iter_cmd = app.add_subcommand("iterate", "Run iterations of the loop");
  std::size_t n_iter = 1;
  std::optional<std::size_t> batch;
  std::optional<double> threshold, percentile;
  bool iter_oracle = false;
  iter_cmd->add_option("--n", n_iter, "Iterations to run");
  iter_cmd->add_option("--batch", batch, "Batch size");
  iter_cmd->add_option("--threshold", threshold, "Fixed confidence threshold");
  iter_cmd->add_option("--percentile", percentile, "Percentile routing instead of a fixed threshold");
  iter_cmd->add_flag("--oracle", iter_oracle, "Answer reviews from ground truth");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate the latest model on the held-out test set");
  std::vector<std::size_t> eval_ks;
  std::string eval_json;
  eval_cmd->add_option("--k", eval_ks, "Top-k values (repeatable)");
  eval_cmd->add_option("--json", eval_json, "Report path (default: <campaign>/reports/eval-NNNN.json)");

  // confidences
  auto* conf_cmd = app.add_subcommand("confidences", "Confidence histogram of the next batch");
  std::size_t conf_batch = 1000;
  conf_cmd->add_option("--batch", conf_batch, "Batch size");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve the review API");
  std::optional<int> port;
  std::string host = "127.0.0.1";
  serve_cmd->add_option("--port", port, "Port (default: campaign service.port)");
  serve_cmd->add_option("--host", host, "Bind address");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Run a desk-scale experiment preset");
  std::string preset;
  std::size_t seeds = 0;
  std::string sim_out;
  sim_cmd->add_option("--preset", preset, "fig2, table1 or table3")->required()->check(
      CLI::IsMember({"fig2", "table1", "table3"}));
  sim_cmd->add_option("--seeds", seeds, "Seeds (default: fig2 1, otherwise 10)");
  sim_cmd->add_option("--out", sim_out, "Write the CSV here instead of stdout");

  // export
  auto* export_cmd = app.add_subcommand("export", "Write active labels as JSON Lines");
  std::string export_out;
  export_cmd->add_option("--out", export_out, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kFormat;
  }

  try {
    const auto dir = opt.dir();

    if (*ingest_cmd) {
      fs::create_directories(dir);
      LockFile lock(dir / "lock");
      auto m_in = open_input(manifest_path);
      auto e_in = open_input(embeddings_path, true);
      std::optional<std::ifstream> t_in;
      if (!labels_path.empty()) t_in = open_input(labels_path);
      const auto cfg = opt.config.empty() ? CampaignConfig{} : load_config(opt.config);
      const auto c = Campaign::create(dir, m_in, e_in, t_in ? &*t_in : nullptr, cfg);
      std::printf("ingested %zu items (pool %zu, test %zu, d=%zu) into %s\n", c.snapshot().items().size(),
                  c.snapshot().unlabeled_pool().size(), c.snapshot().held_out_test().size(),
                  c.snapshot().embeddings().cols(), dir.c_str());
      return kOk;
    }

    if (*sim_cmd) {
      const auto n = seeds ? seeds : (preset == "fig2" ? 1 : 10);
      const auto report = sim::run_preset(preset, n);
      if (sim_out.empty()) {
        std::cout << report.csv;
      } else {
        std::ofstream out(sim_out);
        out << report.csv;
        if (!out) throw EnvironmentError("cannot write " + sim_out);
      }
      for (const auto& line : report.summary) std::cout << "# " << line << '\n';
      std::cout << "# verdict: " << (report.pass ? "PASS" : "FAIL") << '\n';
      return kOk;
    }

    if (*serve_cmd) {
      LockFile lock(dir / "lock");
      std::optional<Campaign> campaign;
      if (Campaign::exists(dir)) campaign = Campaign::open(dir);
      ServiceOptions so;
      so.base_dir = dir;
      const int p = port ? *port : (campaign ? campaign->config().service.port : 8080);
      if (campaign) so.static_dir = campaign->config().service.static_dir;
      Service service(std::move(campaign), so);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      if (!service.server().bind_to_port(host, p)) {
        g_service = nullptr;
        throw EnvironmentError("cannot bind " + host + ":" + std::to_string(p));
      }
      std::printf("serving %s on http://%s:%d\n", dir.c_str(), host.c_str(), p);
      std::fflush(stdout);
      service.server().listen_after_bind();
      service.wait_idle();
      g_service = nullptr;
      std::printf("stopped\n");
      return kOk;
    }

    if (*boot_cmd) {
      require_campaign(dir);
      LockFile lock(dir / "lock");
      auto c = Campaign::open(dir);
      SamplingStrategy s = c.config().sampling;
      s.kind = parse_sampling_kind(strategy_name);
      if (subjects) s.subjects = subjects;
      if (size) s.size = size;
      if (boot_seed) {
        s.seed = *boot_seed;
        c.config().cluster.seed = *boot_seed;
      }
      c.bootstrap(s, boot_k);
      std::size_t sampled = 0;
      for (const auto& t : c.tasks()) sampled += t.members.size();
      std::printf("bootstrap sample: %zu items in %zu clusters\n", sampled, c.tasks().size());
      if (!boot_oracle) {
        std::printf("%zu review tasks pending; run `plud serve` to review them\n", c.pending_tasks());
        return kOk;
      }
      c.submit_all(c.make_oracle());
      const auto& r = c.finish_round();
      std::printf("initial train size %zu, test accuracy %s%%\n", r.train_size_after, pct(r.metrics).c_str());
      return kOk;
    }

    if (*iter_cmd) {
      require_campaign(dir);
      LockFile lock(dir / "lock");
      auto c = Campaign::open(dir);
      auto& routing = c.config().routing;
      if (batch) routing.batch_size = *batch;
      if (threshold) {
        routing.mode = RoutingConfig::Mode::kFixed;
        routing.threshold = *threshold;
      }
      if (percentile) {
        routing.mode = RoutingConfig::Mode::kPercentile;
        routing.percentile = *percentile;
      }
      routing.validate();
      if (n_iter == 0) return kOk;
      if (c.phase() == Phase::kIngested) throw MissingPrerequisite("campaign is not bootstrapped");
      std::optional<Oracle> oracle;
      if (iter_oracle) oracle.emplace(c.make_oracle());
      print_record_header();
      if (c.phase() != Phase::kIdle) {
        // Finish the round left open by an earlier run or the service.
        if (c.phase() == Phase::kReview && !oracle) {
          std::printf("%zu review tasks pending; review them via `plud serve` or pass --oracle\n", c.pending_tasks());
          return kOk;
        }
        if (oracle) c.submit_all(*oracle);
        print_record(c.finish_round());
      }
      for (std::size_t i = 0; i < n_iter; ++i) {
        const auto outcome = c.run_iteration(oracle ? &*oracle : nullptr);
        if (outcome == IterationOutcome::kPoolExhausted) {
          std::printf("unlabeled pool exhausted after %zu iterations\n", c.records().size() - 1);
          break;
        }
        if (outcome == IterationOutcome::kAwaitingReview) {
          std::printf("iteration %zu awaiting review: %zu tasks pending; review them via `plud serve`\n",
                      c.records().size(), c.pending_tasks());
          break;
        }
        print_record(c.records().back());
      }
      return kOk;
    }

    if (*eval_cmd) {
      auto c = Campaign::open(dir);
      if (!c.model()) throw MissingPrerequisite("no trained model yet");
      if (eval_ks.empty()) eval_ks = {1, 3};
      const auto rep = c.evaluate(*c.model(), eval_ks);
      if (!rep) throw MissingPrerequisite("no held-out test items with labels");
      std::cout << to_text(*rep);
      fs::path out = eval_json;
      if (out.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "eval-%04zu.json", c.records().size() - 1);
        fs::create_directories(dir / "reports");
        out = dir / "reports" / name;
      }
      std::ofstream f(out);
      f << to_json(*rep).dump(2) << '\n';
      if (!f) throw EnvironmentError("cannot write " + out.string());
      std::printf("report written to %s\n", out.c_str());
      return kOk;
    }

    if (*conf_cmd) {
      auto c = Campaign::open(dir);
      if (!c.model()) throw MissingPrerequisite("no trained model yet");
      c.config().routing.batch_size = conf_batch;
      const auto ids = c.draw_batch(static_cast<std::uint32_t>(c.records().size()));
      std::vector<double> conf;
      if (!ids.empty()) {
        for (const auto& p : predict(*c.model(), c.input_rows(ids), ids)) conf.push_back(p.confidence);
      }
      std::array<std::size_t, 20> bins{};
      for (const double v : conf) bins[std::min<std::size_t>(19, static_cast<std::size_t>(v * 20.0))]++;
      std::printf("confidence histogram over %zu pool items\n", conf.size());
      for (std::size_t b = 0; b < bins.size(); ++b) {
        std::printf("[%.2f, %.2f%c %6zu\n", b / 20.0, (b + 1) / 20.0, b == 19 ? ']' : ')', bins[b]);
      }
      if (!conf.empty()) {
        std::sort(conf.begin(), conf.end());
        std::printf("suggested cuts (percentile -> threshold, share sent to review):\n");
        for (const double p : {25.0, 50.0, 75.0, 90.0}) {
          const auto idx = std::min(conf.size() - 1, static_cast<std::size_t>(p / 100.0 * static_cast<double>(conf.size())));
          std::printf("  p%-3.0f -> %.4f (%.0f%%)\n", p, conf[idx], p);
        }
        const double tau = c.config().routing.threshold;
        const auto below = std::lower_bound(conf.begin(), conf.end(), tau) - conf.begin();
        std::printf("  fixed %.2f -> %.1f%% to review\n", tau, 100.0 * static_cast<double>(below) / static_cast<double>(conf.size()));
      }
      return kOk;
    }

    if (*export_cmd) {
      const auto c = Campaign::open(dir);
      if (export_out.empty()) {
        c.store().export_labels(std::cout);
      } else {
        std::ofstream out(export_out);
        const auto n = c.store().export_labels(out);
        if (!out) throw EnvironmentError("cannot write " + export_out);
        std::printf("exported %zu labels to %s\n", n, export_out.c_str());
      }
      return kOk;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "plud: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "plud: %s\n", e.what());
    return kEnv;
  }
  return kOk;
}
