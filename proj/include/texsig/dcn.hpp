#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "texsig/net.hpp"
#include "texsig/volume_io.hpp"

// Joint training of the convolutional autoencoder and its k-means head:
// reconstruction-only pretraining, centroid initialization in latent space,
// then alternating updates of (1) network parameters, (2) cluster
// assignments, (3) cluster centroids.

namespace texsig::dcn {

struct TrainConfig {
  double lambda = 0.05;  // cluster-loss weight, >= 0
  int k = 10;            // cluster count, >= 2
  int pretrain_epochs = 20;
  int joint_epochs = 50;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  enum class CentroidMode { online, batch };
  CentroidMode centroid_mode = CentroidMode::online;
  bool parallel = true;

  void validate() const {
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (k < 2) throw ConfigError("k must be >= 2");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (pretrain_epochs < 0 || joint_epochs < 0)
      throw ConfigError("epoch counts must be >= 0");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  }
};

struct DcnModel {
  net::AutoencoderParams<float> params;
  int k = 0;
  std::vector<float> centroids;    // k x latent
  std::vector<long long> counts;   // per-cluster online update counts
};

struct EpochStats {
  int epoch = 0;
  double recon = 0.0;
  double cluster = 0.0;
  double total = 0.0;
  double reassigned_fraction = 0.0;
};
using TrainLog = std::vector<EpochStats>;

struct LossTerms {
  double recon = 0.0;
  double cluster = 0.0;
  double total = 0.0;
};

// Nearest centroid for a float latent code; distances accumulate in double,
// ties break to the lowest index.
int nearest_centroid(const float* code, const float* centroids, int k, int latent);

// Reconstruction-only minibatch training (the joint loss with lambda = 0).
// Adam state starts fresh; epoch shuffles derive from (seed, epoch index).
TrainLog pretrain(net::AutoencoderParams<float>& params, const io::PatchSet& patches,
                  const TrainConfig& config);

// Encodes the corpus and runs k-means++ plus Lloyd in latent space. Returns
// assignments recomputed against the float-cast centroids.
struct CentroidInit {
  std::vector<float> centroids;
  std::vector<int> assignment;
  std::vector<long long> cluster_sizes;
};
CentroidInit init_centroids(const net::AutoencoderParams<float>& params,
                            const io::PatchSet& patches, int k, std::uint64_t seed,
                            bool parallel = true);

// Alternating scheme. Per batch: one Adam step on the joint loss with (M, s)
// fixed, then re-encode and reassign batch members, then (online mode) the
// count-damped centroid step. At epoch end all assignments refresh; batch
// mode additionally applies a Lloyd mean step over the full corpus, rejected
// wholesale if the summed cluster term would rise (rounding floor).
TrainLog joint_train(DcnModel& model, const io::PatchSet& patches,
                     const TrainConfig& config, std::vector<int>& assignments);

// Loss terms under argmin assignments: total = recon + lambda * cluster.
LossTerms evaluate_loss(const DcnModel& model, const io::PatchSet& patches,
                        double lambda, bool parallel = true);

// Checkpoint: one JSON header line {"arch":"dcn-v1","k":K,"latent":L,
// "param_count":P}, then the parameter blob (f32le, layout order) and the
// centroid block (K x L f32le).
void save_checkpoint(const std::filesystem::path& path, const DcnModel& model);
DcnModel load_checkpoint(const std::filesystem::path& path);

void write_trainlog(const std::filesystem::path& path, const TrainLog& log);

}  // namespace texsig::dcn
