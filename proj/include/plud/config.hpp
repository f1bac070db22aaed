#pragma once

// Campaign configuration: one JSON document with sampling, routing, cluster,
// train, oracle and service sections. Missing keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "plud/classifier.hpp"
#include "plud/clustering.hpp"
#include "plud/error.hpp"
#include "plud/orchestrator.hpp"

namespace plud {

struct OracleSettings {
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct ServiceSettings {
  int port = 8080;
  std::string static_dir;
};

struct CampaignConfig {
  std::string campaign_id = "default";
  std::uint64_t seed = 0;  // batch draws
  SamplingStrategy sampling;
  RoutingConfig routing;
  ClusterConfig cluster;
  bool auto_k = true;          // bootstrap k from the sample size when no k is given
  std::size_t review_k = 0;    // 0: class registry size
  bool normalize = true;       // l2-normalize embeddings before clustering and classification
  bool return_misclustered_to_pool = false;
  ModelSpec model;
  TrainConfig train;
  OracleSettings oracle;
  ServiceSettings service;
};

inline nlohmann::ordered_json to_json(const CampaignConfig& c) {
  nlohmann::ordered_json j;
  j["campaign_id"] = c.campaign_id;
  j["seed"] = c.seed;
  j["sampling"] = {{"kind", to_string(c.sampling.kind)},
                   {"size", c.sampling.size},
                   {"subjects", c.sampling.subjects},
                   {"seed", c.sampling.seed}};
  j["routing"] = {{"mode", c.routing.mode == RoutingConfig::Mode::kFixed ? "FIXED" : "PERCENTILE"},
                  {"threshold", c.routing.threshold},
                  {"percentile", c.routing.percentile},
                  {"batch_size", c.routing.batch_size}};
  j["cluster"] = {{"algorithm", to_string(c.cluster.algorithm)},
                  {"k", c.auto_k ? 0 : c.cluster.k},
                  {"seed", c.cluster.seed},
                  {"max_iters", c.cluster.max_iters},
                  {"tol", c.cluster.tol},
                  {"restarts", c.cluster.restarts},
                  {"linkage", to_string(c.cluster.linkage)},
                  {"review_k", c.review_k},
                  {"normalize", c.normalize},
                  {"return_misclustered_to_pool", c.return_misclustered_to_pool}};
  j["train"] = {{"architecture", to_string(c.model.architecture)},
                {"hidden", c.model.hidden},
                {"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"l2", c.train.l2},
                {"seed", c.train.seed},
                {"patience", c.train.patience},
                {"validation_fraction", c.train.validation_fraction}};
  j["oracle"] = {{"noise", c.oracle.noise}, {"seed", c.oracle.seed}};
  j["service"] = {{"port", c.service.port}, {"static_dir", c.service.static_dir}};
  return j;
}

inline CampaignConfig config_from_json(const nlohmann::json& j) {
  CampaignConfig c;
  try {
    c.campaign_id = j.value("campaign_id", c.campaign_id);
    c.seed = j.value("seed", c.seed);
    if (const auto s = j.find("sampling"); s != j.end()) {
      if (s->contains("kind")) c.sampling.kind = parse_sampling_kind(s->at("kind").get<std::string>());
      c.sampling.size = s->value("size", c.sampling.size);
      c.sampling.subjects = s->value("subjects", c.sampling.subjects);
      c.sampling.seed = s->value("seed", c.sampling.seed);
    }
    if (const auto r = j.find("routing"); r != j.end()) {
      const auto mode = r->value("mode", std::string("FIXED"));
      if (mode == "FIXED") {
        c.routing.mode = RoutingConfig::Mode::kFixed;
      } else if (mode == "PERCENTILE") {
        c.routing.mode = RoutingConfig::Mode::kPercentile;
      } else {
        throw InvalidArgument("config: unknown routing mode '" + mode + "'");
      }
      c.routing.threshold = r->value("threshold", c.routing.threshold);
      c.routing.percentile = r->value("percentile", c.routing.percentile);
      c.routing.batch_size = r->value("batch_size", c.routing.batch_size);
      c.routing.validate();
    }
    if (const auto k = j.find("cluster"); k != j.end()) {
      if (k->contains("algorithm")) c.cluster.algorithm = parse_cluster_algorithm(k->at("algorithm").get<std::string>());
      const auto kk = k->value("k", std::size_t{0});
      c.auto_k = kk == 0;
      if (kk != 0) c.cluster.k = kk;
      c.cluster.seed = k->value("seed", c.cluster.seed);
      c.cluster.max_iters = k->value("max_iters", c.cluster.max_iters);
      c.cluster.tol = k->value("tol", c.cluster.tol);
      c.cluster.restarts = k->value("restarts", c.cluster.restarts);
      if (k->contains("linkage")) c.cluster.linkage = parse_linkage(k->at("linkage").get<std::string>());
      c.review_k = k->value("review_k", c.review_k);
      c.normalize = k->value("normalize", c.normalize);
      c.return_misclustered_to_pool = k->value("return_misclustered_to_pool", c.return_misclustered_to_pool);
    }
    if (const auto t = j.find("train"); t != j.end()) {
      if (t->contains("architecture")) c.model.architecture = parse_architecture(t->at("architecture").get<std::string>());
      c.model.hidden = t->value("hidden", c.model.hidden);
      c.train.learning_rate = t->value("learning_rate", c.train.learning_rate);
      c.train.epochs = t->value("epochs", c.train.epochs);
      c.train.batch_size = t->value("batch_size", c.train.batch_size);
      c.train.l2 = t->value("l2", c.train.l2);
      c.train.seed = t->value("seed", c.train.seed);
      c.train.patience = t->value("patience", c.train.patience);
      c.train.validation_fraction = t->value("validation_fraction", c.train.validation_fraction);
      c.train.validate();
    }
    if (const auto o = j.find("oracle"); o != j.end()) {
      c.oracle.noise = o->value("noise", c.oracle.noise);
      c.oracle.seed = o->value("seed", c.oracle.seed);
      if (!(c.oracle.noise >= 0.0 && c.oracle.noise <= 1.0)) throw InvalidArgument("config: oracle.noise outside [0,1]");
    }
    if (const auto s = j.find("service"); s != j.end()) {
      c.service.port = s->value("port", c.service.port);
      c.service.static_dir = s->value("static_dir", c.service.static_dir);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("campaign config: ") + e.what());
  }
  return c;
}

inline CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open campaign config " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("campaign config " + path.string() + ": " + e.what());
  }
}

}  // namespace plud
