#include "texsig/dcn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "texsig/kmeans.hpp"
#include "texsig/rng.hpp"

namespace texsig::dcn {

using nlohmann::json;

int nearest_centroid(const float* code, const float* centroids, int k, int latent) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    const float* m = centroids + static_cast<std::size_t>(c) * latent;
    double d = 0.0;
    for (int i = 0; i < latent; ++i) {
      const double t = static_cast<double>(code[i]) - static_cast<double>(m[i]);
      d += t * t;
    }
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  return best;
}

namespace {

struct Adam {
  std::vector<float> m, v;
  long long t = 0;
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  Adam(std::size_t n, double learning_rate) : m(n, 0.0f), v(n, 0.0f), lr(learning_rate) {}

  void step(float* params, const float* grad, std::size_t n) {
    ++t;
    const float c1 = static_cast<float>(lr / (1.0 - std::pow(beta1, static_cast<double>(t))));
    const float bc2 = static_cast<float>(1.0 - std::pow(beta2, static_cast<double>(t)));
    const float b1 = static_cast<float>(beta1), b2 = static_cast<float>(beta2);
    const float e = static_cast<float>(eps);
    for (std::size_t i = 0; i < n; ++i) {
      const float g = grad[i];
      m[i] = b1 * m[i] + (1.0f - b1) * g;
      v[i] = b2 * v[i] + (1.0f - b2) * g * g;
      const float vh = v[i] / bc2;
      params[i] -= c1 * m[i] / (std::sqrt(vh) + e);
    }
  }
};

double sq_dist_f(const float* a, const float* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc;
}

// Summed per point in index order; every monotonicity comparison uses this.
double cluster_term_sum(const std::vector<float>& latents, const float* centroids,
                        const int* assign, std::size_t n, int latent) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += sq_dist_f(latents.data() + i * latent,
                     centroids + static_cast<std::size_t>(assign[i]) * latent, latent);
  return acc;
}

struct EpochPlan {
  std::vector<std::size_t> order;
  explicit EpochPlan(std::size_t n, std::uint64_t seed, int epoch) : order(n) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, Stream::batch_shuffle, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
  }
};

// Gathers shuffled batch members into a contiguous block.
void gather_batch(const io::PatchSet& patches, const std::vector<std::size_t>& order,
                  std::size_t begin, std::size_t count, std::vector<float>& out) {
  const std::size_t npix = static_cast<std::size_t>(patches.px) * patches.px;
  out.resize(count * npix);
  for (std::size_t i = 0; i < count; ++i)
    std::memcpy(out.data() + i * npix, patches.patch(order[begin + i]), npix * 4);
}

void refresh_assignments(const std::vector<float>& latents, const float* centroids,
                         int k, int latent, std::vector<int>& assign,
                         std::size_t& changed, bool parallel) {
  const std::size_t n = latents.size() / latent;
  std::vector<int> next(n);
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      next[i] = nearest_centroid(latents.data() + static_cast<std::size_t>(i) * latent,
                                 centroids, k, latent);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      next[i] = nearest_centroid(latents.data() + i * latent, centroids, k, latent);
  }
  changed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (next[i] != assign[i]) ++changed;
  assign.swap(next);
}

// Lloyd mean step over the full corpus with empty-cluster repair. The whole
// step is rejected if the summed cluster term would increase.
void batch_centroid_update(const std::vector<float>& latents, std::vector<int>& assign,
                           DcnModel& model) {
  const int k = model.k;
  const int latent = model.params.arch.latent;
  const std::size_t n = latents.size() / latent;

  // repair empties: steal the point farthest from its assigned centroid
  std::vector<long long> sizes(k, 0);
  for (std::size_t i = 0; i < n; ++i) ++sizes[assign[i]];
  for (int c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    double worst = -1.0;
    std::size_t steal = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (sizes[assign[i]] <= 1) continue;
      const double d = sq_dist_f(latents.data() + i * latent,
                                 model.centroids.data() + static_cast<std::size_t>(assign[i]) * latent,
                                 latent);
      if (d > worst) {
        worst = d;
        steal = i;
      }
    }
    if (steal == n) continue;  // nothing stealable; leave the cluster empty
    --sizes[assign[steal]];
    assign[steal] = c;
    sizes[c] = 1;
    std::copy_n(latents.data() + steal * latent, latent,
                model.centroids.begin() + static_cast<std::size_t>(c) * latent);
  }

  const double before = cluster_term_sum(latents, model.centroids.data(), assign.data(), n, latent);

  std::vector<double> sums(static_cast<std::size_t>(k) * latent, 0.0);
  std::vector<long long> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const float* x = latents.data() + i * latent;
    double* s = sums.data() + static_cast<std::size_t>(assign[i]) * latent;
    for (int d = 0; d < latent; ++d) s[d] += x[d];
    ++counts[assign[i]];
  }
  std::vector<float> next = model.centroids;
  for (int c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (int d = 0; d < latent; ++d)
        next[static_cast<std::size_t>(c) * latent + d] = static_cast<float>(
            sums[static_cast<std::size_t>(c) * latent + d] / static_cast<double>(counts[c]));

  const double after = cluster_term_sum(latents, next.data(), assign.data(), n, latent);
  if (after <= before) model.centroids = std::move(next);
  model.counts.assign(counts.begin(), counts.end());
}

// Shared epoch loop. `model` is null during pretraining; with a model the
// joint loss and the centroid/assignment updates are in play.
TrainLog run_epochs(net::AutoencoderParams<float>& params, const io::PatchSet& patches,
                    const TrainConfig& cfg, int epochs, DcnModel* model,
                    std::vector<int>* assignments) {
  cfg.validate();
  if (patches.count() == 0) throw DegenerateDataError("patch set is empty");
  const std::size_t n = patches.count();
  const std::size_t npix = static_cast<std::size_t>(patches.px) * patches.px;
  if (static_cast<int>(npix) != params.arch.in_px * params.arch.in_px)
    throw ShapeError("patch size does not match the network input");
  const int latent = params.arch.latent;
  const double lambda = model ? cfg.lambda : 0.0;
  const std::size_t max_batch = std::min<std::size_t>(cfg.batch_size, n);

  net::BatchBuffers<float> bb(params.arch, max_batch);
  auto enc_ws = net::make_workspaces(params.arch);
  std::vector<float> grad(net::param_count(params.arch));
  std::vector<float> batch_px;
  std::vector<float> batch_lat(max_batch * latent);
  std::vector<int> batch_assign(max_batch);
  Adam adam(grad.size(), cfg.learning_rate);
  TrainLog log;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    EpochPlan plan(n, cfg.seed, epoch);
    double sum_recon = 0.0, sum_cluster = 0.0;

    for (std::size_t begin = 0; begin < n; begin += max_batch) {
      const std::size_t bsz = std::min(max_batch, n - begin);
      gather_batch(patches, plan.order, begin, bsz, batch_px);
      if (model)
        for (std::size_t i = 0; i < bsz; ++i)
          batch_assign[i] = (*assignments)[plan.order[begin + i]];

      const net::BatchLoss bl = net::batch_loss_grad(
          params, batch_px.data(), bsz, model ? model->centroids.data() : nullptr,
          batch_assign.data(), lambda, grad.data(), bb, cfg.parallel);
      if (!std::isfinite(bl.total(lambda)))
        throw DivergenceError("training diverged (non-finite loss) at epoch " +
                                  std::to_string(epoch),
                              epoch, cfg.learning_rate);
      sum_recon += bl.recon * static_cast<double>(bsz);
      sum_cluster += bl.cluster * static_cast<double>(bsz);
      adam.step(params.flat.data(), grad.data(), grad.size());

      if (model) {
        // re-encode batch members under the updated parameters, then
        // reassign and (online mode) pull centroids toward them
        net::encode_batch(params, batch_px.data(), bsz, batch_lat.data(), enc_ws,
                          cfg.parallel);
        for (std::size_t i = 0; i < bsz; ++i) {
          const float* code = batch_lat.data() + i * latent;
          const int s = nearest_centroid(code, model->centroids.data(), model->k, latent);
          (*assignments)[plan.order[begin + i]] = s;
          if (cfg.centroid_mode == TrainConfig::CentroidMode::online) {
            long long& c = model->counts[s];
            c += 1;
            float* m = model->centroids.data() + static_cast<std::size_t>(s) * latent;
            if (c == 1) {
              std::copy_n(code, latent, m);
            } else {
              const float step = 1.0f / static_cast<float>(c);
              for (int d = 0; d < latent; ++d) m[d] += step * (code[d] - m[d]);
            }
          }
        }
      }
    }

    EpochStats st;
    st.epoch = epoch;
    st.recon = sum_recon / static_cast<double>(n);
    st.cluster = sum_cluster / static_cast<double>(n);
    st.total = st.recon + lambda * st.cluster;

    if (model) {
      // epoch-end full refresh
      std::vector<float> latents(n * latent);
      net::encode_batch(params, patches.pixels.data(), n, latents.data(), enc_ws,
                        cfg.parallel);
      std::size_t changed = 0;
      refresh_assignments(latents, model->centroids.data(), model->k, latent,
                          *assignments, changed, cfg.parallel);
      st.reassigned_fraction = static_cast<double>(changed) / static_cast<double>(n);
      if (cfg.centroid_mode == TrainConfig::CentroidMode::batch)
        batch_centroid_update(latents, *assignments, *model);
    }
    log.push_back(st);
  }
  return log;
}

}  // namespace

TrainLog pretrain(net::AutoencoderParams<float>& params, const io::PatchSet& patches,
                  const TrainConfig& config) {
  return run_epochs(params, patches, config, config.pretrain_epochs, nullptr, nullptr);
}

CentroidInit init_centroids(const net::AutoencoderParams<float>& params,
                            const io::PatchSet& patches, int k, std::uint64_t seed,
                            bool parallel) {
  if (k < 2) throw ConfigError("k must be >= 2");
  if (patches.count() == 0) throw DegenerateDataError("patch set is empty");
  const std::size_t n = patches.count();
  const int latent = params.arch.latent;

  std::vector<float> latents(n * latent);
  auto ws = net::make_workspaces(params.arch);
  net::encode_batch(params, patches.pixels.data(), n, latents.data(), ws, parallel);

  std::vector<double> pts(latents.begin(), latents.end());
  const kmeans::Dataset data{pts.data(), n, latent};
  auto seeds = kmeans::kmeans_pp_seed(data, k, derive_seed(seed, Stream::kmeans_seed));
  auto res = kmeans::lloyd(data, std::move(seeds), k, 300, 1e-6, parallel);

  CentroidInit out;
  out.centroids.resize(static_cast<std::size_t>(k) * latent);
  for (std::size_t i = 0; i < out.centroids.size(); ++i)
    out.centroids[i] = static_cast<float>(res.centroids[i]);

  // assignments against the float-cast centroids the model will carry
  out.assignment.resize(n);
  out.cluster_sizes.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    out.assignment[i] =
        nearest_centroid(latents.data() + i * latent, out.centroids.data(), k, latent);
    ++out.cluster_sizes[out.assignment[i]];
  }
  return out;
}

TrainLog joint_train(DcnModel& model, const io::PatchSet& patches,
                     const TrainConfig& config, std::vector<int>& assignments) {
  if (model.k < 2) throw ConfigError("model has no centroids");
  if (assignments.size() != patches.count())
    throw ShapeError("assignment count does not match patch count");
  if (static_cast<int>(model.counts.size()) != model.k)
    throw ShapeError("cluster count vector does not match k");
  return run_epochs(model.params, patches, config, config.joint_epochs, &model,
                    &assignments);
}

LossTerms evaluate_loss(const DcnModel& model, const io::PatchSet& patches,
                        double lambda, bool parallel) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  const std::size_t n = patches.count();
  if (n == 0) throw DegenerateDataError("patch set is empty");
  const int latent = model.params.arch.latent;

  auto ws = net::make_workspaces(model.params.arch);
  std::vector<float> latents(n * latent);
  net::encode_batch(model.params, patches.pixels.data(), n, latents.data(), ws, parallel);
  std::vector<double> recon(n);
  net::recon_mse_batch(model.params, patches.pixels.data(), n, recon.data(), ws, parallel);

  LossTerms t;
  for (std::size_t i = 0; i < n; ++i) t.recon += recon[i];
  t.recon /= static_cast<double>(n);
  double csum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float* code = latents.data() + i * latent;
    const int s = nearest_centroid(code, model.centroids.data(), model.k, latent);
    csum += sq_dist_f(code, model.centroids.data() + static_cast<std::size_t>(s) * latent, latent);
  }
  t.cluster = csum / static_cast<double>(n);
  t.total = t.recon + lambda * t.cluster;
  return t;
}

void save_checkpoint(const std::filesystem::path& path, const DcnModel& model) {
  const std::size_t pc = net::param_count(model.params.arch);
  if (model.params.flat.size() != pc) throw ShapeError("parameter vector size mismatch");
  if (model.centroids.size() !=
      static_cast<std::size_t>(model.k) * model.params.arch.latent)
    throw ShapeError("centroid block size mismatch");
  json j;
  j["arch"] = "dcn-v1";
  j["k"] = model.k;
  j["latent"] = model.params.arch.latent;
  j["param_count"] = pc;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
  out.write(reinterpret_cast<const char*>(model.params.flat.data()),
            static_cast<std::streamsize>(pc * 4));
  out.write(reinterpret_cast<const char*>(model.centroids.data()),
            static_cast<std::streamsize>(model.centroids.size() * 4));
}

DcnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw FormatError("checkpoint missing header: " + path.string());
  json j;
  try {
    j = json::parse(header);
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }
  for (const auto& [key, _] : j.items())
    if (key != "arch" && key != "k" && key != "latent" && key != "param_count")
      throw FormatError("unknown checkpoint header field '" + key + "' in " + path.string());
  if (!j.contains("arch") || j["arch"].get<std::string>() != "dcn-v1")
    throw FormatError("checkpoint arch must be \"dcn-v1\" in " + path.string());
  const int k = j.at("k").get<int>();
  const int latent = j.at("latent").get<int>();
  const std::size_t pc = j.at("param_count").get<std::size_t>();

  net::ArchSpec arch{};
  bool found = false;
  for (const net::ArchSpec& cand : {net::ArchSpec::full(), net::ArchSpec::twin()}) {
    if (cand.latent == latent && net::param_count(cand) == pc) {
      arch = cand;
      found = true;
      break;
    }
  }
  if (!found)
    throw FormatError("checkpoint header does not describe a known architecture (latent " +
                      std::to_string(latent) + ", param_count " + std::to_string(pc) + ")");
  if (k < 2) throw FormatError("checkpoint k must be >= 2");

  DcnModel model;
  model.params = net::AutoencoderParams<float>(arch);
  model.k = k;
  model.centroids.resize(static_cast<std::size_t>(k) * latent);
  in.read(reinterpret_cast<char*>(model.params.flat.data()),
          static_cast<std::streamsize>(pc * 4));
  in.read(reinterpret_cast<char*>(model.centroids.data()),
          static_cast<std::streamsize>(model.centroids.size() * 4));
  if (!in || static_cast<std::size_t>(in.gcount()) != model.centroids.size() * 4)
    throw FormatError("checkpoint payload truncated in " + path.string());
  char extra;
  if (in.read(&extra, 1))
    throw FormatError("checkpoint payload has trailing bytes in " + path.string());
  model.counts.assign(k, 1);
  return model;
}

void write_trainlog(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write train log: " + path.string());
  out << "epoch,recon,cluster,total,reassigned_fraction\n";
  char buf[64];
  auto fmt = [&buf](double v) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
  };
  for (const auto& e : log)
    out << e.epoch << "," << fmt(e.recon) << "," << fmt(e.cluster) << "," << fmt(e.total)
        << "," << fmt(e.reassigned_fraction) << "\n";
}

}  // namespace texsig::dcn
