#pragma once

// Desk-scale experiments behind `plud simulate`. Each preset builds its
// synthetic world, runs oracle-reviewed campaigns and returns the CSV rows,
// summary lines and a verdict against its thresholds.

#include <chrono>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "plud/campaign.hpp"
#include "plud/synthetic.hpp"

namespace plud::sim {

struct Thresholds {
  double fig2_min_gain = 10.0;        // accuracy points, final model over bootstrap model
  double table1_min_purity = 0.9;
  double table1_max_ratio = 0.35;
};

/// 10 classes, 21 camera views per class (a canonical one plus look-alike
/// off-angle views), one phase, 40 pool subjects x 350 items = 14,000 pool
/// items, 10 test subjects.
inline WorldSpec fig2_world(std::uint64_t seed) {
  WorldSpec w;
  w.separation = 4.0;
  w.sigma = 0.3;
  w.schedule = {35};
  w.views = 21;
  w.view_spread = 5.0;
  w.view_pull = 0.6;
  w.canonical_share = 0.55;
  w.pool_subjects = 40;
  w.test_subjects = 10;
  w.seed = seed;
  return w;
}

/// Plain well-separated classes: what a good feature space gives a reviewer.
inline WorldSpec table1_world(std::uint64_t seed) {
  WorldSpec w;
  w.separation = 4.0;
  w.sigma = 1.0;
  w.schedule = {10};
  w.pool_subjects = 10;
  w.test_subjects = 1;
  w.seed = seed;
  return w;
}

/// Five decomposition stages, fresh photos dominate each series, later
/// stages look like other body parts; 3 test subjects.
inline WorldSpec table3_world(std::uint64_t seed) {
  WorldSpec w;
  w.separation = 4.0;
  w.sigma = 0.3;
  w.schedule = {4, 1, 1, 1, 1};
  w.phase_shift = 3.0;
  w.phase_pull = 0.6;
  w.drift_rate = 0.2;
  w.pool_subjects = 40;
  w.test_subjects = 3;
  w.seed = seed;
  return w;
}

inline CampaignConfig preset_config(std::uint64_t seed) {
  CampaignConfig c;
  c.campaign_id = "simulate";
  c.seed = seed;
  c.cluster.seed = seed;
  c.train.seed = seed;
  c.train.learning_rate = 0.5;
  c.train.epochs = 100;
  c.train.patience = 15;
  c.oracle.seed = seed;
  c.routing.threshold = 0.9;
  c.routing.batch_size = 1000;
  return c;
}

struct Fig2Run {
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;
  double bootstrap_accuracy = 0.0;
  double final_accuracy = 0.0;
  bool growth_exact = false;     // train size before iteration i is 1000 * i
  double early_review = 0.0;     // mean review fraction, iterations 1-3
  double late_review = 0.0;      // mean review fraction, iterations 11-13
  double seconds = 0.0;

  double gain() const { return final_accuracy - bootstrap_accuracy; }
  bool pass(const Thresholds& t) const { return growth_exact && gain() >= t.fig2_min_gain && late_review <= early_review; }
};

inline Fig2Run run_fig2(std::uint64_t seed, std::size_t iterations = 13) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto world = make_world(fig2_world(seed));
  Campaign campaign(world.snapshot(), world.truth, preset_config(seed));
  const auto oracle = campaign.make_oracle();
  SamplingStrategy strategy;
  strategy.kind = SamplingStrategy::Kind::kRandom;
  strategy.size = 1000;
  strategy.seed = seed;
  campaign.run_campaign(strategy, iterations, oracle, 150);

  Fig2Run run;
  run.seed = seed;
  run.records = campaign.records();
  const auto& r = run.records;
  run.bootstrap_accuracy = r.front().metrics->accuracy;
  run.final_accuracy = r.back().metrics->accuracy;
  run.growth_exact = r.size() == iterations + 1;
  for (std::size_t i = 1; i < r.size(); ++i) run.growth_exact &= r[i].train_size_before == 1000 * i;
  auto mean_review = [&](std::size_t first, std::size_t last) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = first; i <= last && i < r.size(); ++i, ++n) sum += r[i].review_fraction();
    return n ? sum / static_cast<double>(n) : 0.0;
  };
  if (iterations >= 6) {
    run.early_review = mean_review(1, 3);
    run.late_review = mean_review(iterations - 2, iterations);
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

struct EffortRound {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  double purity = 0.0;
  std::size_t misclustered = 0;
  EffortReport effort;
};

/// One oracle-reviewed bootstrap round of `n` random items with k = class
/// count.
inline EffortRound run_effort_round(std::uint64_t seed, std::size_t n) {
  const auto spec = table1_world(seed);
  const auto world = make_world(spec);
  Campaign campaign(world.snapshot(), world.truth, preset_config(seed));
  SamplingStrategy strategy;
  strategy.kind = SamplingStrategy::Kind::kRandom;
  strategy.size = n;
  strategy.seed = seed;
  campaign.bootstrap(strategy, spec.classes);
  campaign.submit_all(campaign.make_oracle());
  const auto& r = campaign.finish_round();
  return {seed, n, r.clusters_created, r.cluster_purity.value_or(0.0), r.misclustered_corrections, r.effort};
}

struct SamplingRun {
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  double subject_complete = 0.0;
  double random = 0.0;
};

/// Bootstrap models from SUBJECT_COMPLETE (3 subjects) and from RANDOM with
/// the same number of items, on the same world.
inline SamplingRun run_sampling(std::uint64_t seed, std::size_t subjects = 3) {
  const auto spec = table3_world(seed);
  const auto world = make_world(spec);
  SamplingRun run;
  run.seed = seed;
  auto train_on = [&](const SamplingStrategy& strategy) {
    Campaign campaign(world.snapshot(), world.truth, preset_config(seed));
    campaign.bootstrap(strategy, spec.classes * spec.phases());
    campaign.submit_all(campaign.make_oracle());
    const auto& r = campaign.finish_round();
    run.train_size = r.train_size_after;
    return r.metrics->accuracy;
  };
  SamplingStrategy sc;
  sc.kind = SamplingStrategy::Kind::kSubjectComplete;
  sc.subjects = subjects;
  sc.seed = seed;
  run.subject_complete = train_on(sc);
  SamplingStrategy random;
  random.kind = SamplingStrategy::Kind::kRandom;
  random.size = run.train_size;
  random.seed = seed;
  run.random = train_on(random);
  return run;
}

struct Report {
  std::string csv;
  std::vector<std::string> summary;
  bool pass = false;
};

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline Report fig2(std::size_t seeds, const Thresholds& t = {}) {
  Report rep;
  rep.pass = seeds > 0;
  std::ostringstream csv;
  csv << "seed,iteration,train_size,accuracy,review_fraction,effort_ratio\n";
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    const auto run = run_fig2(s);
    // Row i: the model trained on `train_size` items routes iteration i.
    for (std::size_t i = 1; i < run.records.size(); ++i) {
      const auto& r = run.records[i];
      csv << s << ',' << i << ',' << r.train_size_before << ',' << fmt("%.2f", run.records[i - 1].metrics->accuracy)
          << ',' << fmt("%.4f", r.review_fraction()) << ',' << fmt("%.4f", r.effort.ratio) << '\n';
    }
    const bool ok = run.pass(t);
    rep.pass &= ok;
    rep.summary.push_back("seed " + std::to_string(s) + ": bootstrap " + fmt("%.2f", run.bootstrap_accuracy) +
                          "% -> final " + fmt("%.2f", run.final_accuracy) + "% (gain " + fmt("%.2f", run.gain()) +
                          "), review fraction " + fmt("%.3f", run.early_review) + " -> " +
                          fmt("%.3f", run.late_review) + ", growth " + (run.growth_exact ? "exact" : "BROKEN") +
                          ", " + fmt("%.1f", run.seconds) + "s: " + (ok ? "PASS" : "FAIL"));
  }
  rep.csv = csv.str();
  return rep;
}

inline Report table1(std::size_t seeds, const Thresholds& t = {}) {
  Report rep;
  std::ostringstream csv;
  csv << "seed,n,k,purity,misclustered,basic_clicks,assisted_clicks,ratio\n";
  rep.pass = seeds > 0;
  for (const std::size_t n : {150, 300}) {
    double purity = 0.0;
    double ratio = 0.0;
    std::size_t qualifying = 0;
    bool ok = true;
    for (std::uint64_t s = 1; s <= seeds; ++s) {
      const auto r = run_effort_round(s, n);
      csv << s << ',' << n << ',' << r.k << ',' << fmt("%.4f", r.purity) << ',' << r.misclustered << ','
          << r.effort.basic_clicks << ',' << r.effort.assisted_clicks << ',' << fmt("%.4f", r.effort.ratio) << '\n';
      purity += r.purity;
      ratio += r.effort.ratio;
      if (r.purity >= t.table1_min_purity) {
        ++qualifying;
        ok &= r.effort.ratio <= t.table1_max_ratio;
      }
    }
    ok &= qualifying > 0;
    rep.pass &= ok;
    const auto m = static_cast<double>(seeds);
    rep.summary.push_back("n=" + std::to_string(n) + ": mean purity " + fmt("%.3f", purity / m) + ", mean ratio " +
                          fmt("%.3f", ratio / m) + ", " + std::to_string(qualifying) + "/" + std::to_string(seeds) +
                          " rounds with purity >= " + fmt("%.2f", t.table1_min_purity) + ": " + (ok ? "PASS" : "FAIL"));
  }
  rep.csv = csv.str();
  return rep;
}

inline Report table3(std::size_t seeds) {
  Report rep;
  std::ostringstream csv;
  csv << "seed,strategy,train_size,accuracy\n";
  double sc = 0.0;
  double random = 0.0;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    const auto r = run_sampling(s);
    csv << s << ",SUBJECT_COMPLETE," << r.train_size << ',' << fmt("%.2f", r.subject_complete) << '\n';
    csv << s << ",RANDOM," << r.train_size << ',' << fmt("%.2f", r.random) << '\n';
    sc += r.subject_complete;
    random += r.random;
  }
  const auto m = static_cast<double>(std::max<std::size_t>(seeds, 1));
  rep.pass = seeds > 0 && sc >= random;
  rep.summary.push_back("mean accuracy over " + std::to_string(seeds) + " seeds: SUBJECT_COMPLETE " +
                        fmt("%.2f", sc / m) + "%, RANDOM " + fmt("%.2f", random / m) + "%: " +
                        (rep.pass ? "PASS" : "FAIL"));
  rep.csv = csv.str();
  return rep;
}

inline Report run_preset(std::string_view preset, std::size_t seeds) {
  if (preset == "fig2") return fig2(seeds);
  if (preset == "table1") return table1(seeds);
  if (preset == "table3") return table3(seeds);
  throw InvalidArgument("unknown preset '" + std::string(preset) + "' (expected fig2, table1 or table3)");
}

}  // namespace plud::sim
