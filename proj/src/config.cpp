#include "texsig/config.hpp"

#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

namespace texsig::config {

using nlohmann::json;

dcn::TrainConfig PipelineConfig::train_config() const {
  dcn::TrainConfig tc;
  tc.lambda = lambda;
  tc.k = k;
  tc.pretrain_epochs = pretrain_epochs;
  tc.joint_epochs = joint_epochs;
  tc.batch_size = batch_size;
  tc.learning_rate = learning_rate;
  tc.seed = seed;
  if (centroid_update_mode == "online")
    tc.centroid_mode = dcn::TrainConfig::CentroidMode::online;
  else if (centroid_update_mode == "batch")
    tc.centroid_mode = dcn::TrainConfig::CentroidMode::batch;
  else
    throw ConfigError("centroid_update_mode must be 'online' or 'batch', got '" +
                      centroid_update_mode + "'");
  return tc;
}

void PipelineConfig::validate() const {
  train_config().validate();
  if (n_patches < 1) throw ConfigError("n_patches must be >= 1");
  if (!(window_mm > 0.0)) throw ConfigError("window_mm must be > 0");
  if (out_px < 8 || out_px % 8 != 0) throw ConfigError("out_px must be a positive multiple of 8");
  if (stride_px < 1) throw ConfigError("stride_px must be >= 1");
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (mtry < 0) throw ConfigError("mtry must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

namespace {

json to_json(const PipelineConfig& c) {
  return json{{"lambda", c.lambda},
              {"k", c.k},
              {"pretrain_epochs", c.pretrain_epochs},
              {"joint_epochs", c.joint_epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"centroid_update_mode", c.centroid_update_mode},
              {"n_patches", c.n_patches},
              {"window_mm", c.window_mm},
              {"out_px", c.out_px},
              {"stride_px", c.stride_px},
              {"n_trees", c.n_trees},
              {"mtry", c.mtry},
              {"seed", c.seed},
              {"threads", c.threads}};
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  PipelineConfig cfg;
  const json defaults = to_json(cfg);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key))
      throw ConfigError("unknown config key '" + key + "' in " + path.string());
    try {
      if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "k") cfg.k = value.get<int>();
      else if (key == "pretrain_epochs") cfg.pretrain_epochs = value.get<int>();
      else if (key == "joint_epochs") cfg.joint_epochs = value.get<int>();
      else if (key == "batch_size") cfg.batch_size = value.get<int>();
      else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
      else if (key == "centroid_update_mode") cfg.centroid_update_mode = value.get<std::string>();
      else if (key == "n_patches") cfg.n_patches = value.get<long long>();
      else if (key == "window_mm") cfg.window_mm = value.get<double>();
      else if (key == "out_px") cfg.out_px = value.get<int>();
      else if (key == "stride_px") cfg.stride_px = value.get<int>();
      else if (key == "n_trees") cfg.n_trees = value.get<int>();
      else if (key == "mtry") cfg.mtry = value.get<int>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "threads") cfg.threads = value.get<int>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "' has the wrong type in " + path.string() +
                        ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void write_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config: " + path.string());
  out << to_json(cfg).dump(2) << "\n";
}

void apply_threads(const PipelineConfig& cfg) {
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#else
  (void)cfg;
#endif
}

}  // namespace texsig::config
