#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "texsig/dcn.hpp"

// Flat-key JSON pipeline configuration. Every field has a default; unknown
// keys are rejected; command-line flags override file values. The effective
// configuration is echoed into each command's output directory.

namespace texsig::config {

struct PipelineConfig {
  // training
  double lambda = 0.05;
  int k = 10;
  int pretrain_epochs = 20;
  int joint_epochs = 50;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::string centroid_update_mode = "online";  // "online" or "batch"
  // extraction
  long long n_patches = 50000;
  double window_mm = 14.0;
  int out_px = 32;
  // signature
  int stride_px = 8;
  // linker
  int n_trees = 100;
  int mtry = 0;  // 0 = ceil(sqrt(k))
  // global
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = library default

  dcn::TrainConfig train_config() const;
  void validate() const;
};

// Merges file values over defaults; unknown keys raise ConfigError.
PipelineConfig load_config(const std::filesystem::path& path);

void write_config(const std::filesystem::path& path, const PipelineConfig& cfg);

// Applies cfg.threads to the OpenMP runtime when nonzero.
void apply_threads(const PipelineConfig& cfg);

}  // namespace texsig::config
