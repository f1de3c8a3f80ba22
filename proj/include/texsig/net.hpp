#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "texsig/errors.hpp"
#include "texsig/kernels.hpp"
#include "texsig/rng.hpp"

// Convolutional autoencoder: encoder f maps a px*px patch through three
// conv(3x3)+relu+maxpool stages and a linear dense bridge to the latent code;
// decoder g mirrors it with dense+relu, then three upsample+conv stages, the
// last with a sigmoid so reconstructions live in (0, 1).

namespace texsig::net {

struct ArchSpec {
  int in_px;             // input side, divisible by 8
  int c1, c2, c3;        // encoder feature map counts
  int latent;

  static ArchSpec full() { return {32, 50, 20, 10, 20}; }
  // Downsized configuration used by double-precision gradient checks.
  static ArchSpec twin() { return {8, 4, 3, 2, 2}; }

  int p1() const { return in_px / 2; }
  int p2() const { return in_px / 4; }
  int p3() const { return in_px / 8; }
  int flat() const { return c3 * p3() * p3(); }

  void validate() const {
    if (in_px < 8 || in_px % 8 != 0)
      throw ShapeError("architecture input side must be a positive multiple of 8");
    if (c1 < 1 || c2 < 1 || c3 < 1 || latent < 1)
      throw ShapeError("architecture widths must be >= 1");
  }

  bool operator==(const ArchSpec&) const = default;
};

// Flat parameter vector offsets, in checkpoint order: encoder convs, encoder
// dense, decoder dense, decoder convs. Conv blocks are kernels then bias.
struct ParamLayout {
  std::size_t e1k, e1b, e2k, e2b, e3k, e3b;
  std::size_t edw, edb;
  std::size_t ddw, ddb;
  std::size_t d1k, d1b, d2k, d2b, d3k, d3b;
  std::size_t total;

  explicit ParamLayout(const ArchSpec& a) {
    std::size_t o = 0;
    auto take = [&o](std::size_t n) { std::size_t at = o; o += n; return at; };
    e1k = take(static_cast<std::size_t>(a.c1) * 1 * 9);  e1b = take(a.c1);
    e2k = take(static_cast<std::size_t>(a.c2) * a.c1 * 9); e2b = take(a.c2);
    e3k = take(static_cast<std::size_t>(a.c3) * a.c2 * 9); e3b = take(a.c3);
    edw = take(static_cast<std::size_t>(a.latent) * a.flat()); edb = take(a.latent);
    ddw = take(static_cast<std::size_t>(a.flat()) * a.latent); ddb = take(a.flat());
    d1k = take(static_cast<std::size_t>(a.c2) * a.c3 * 9); d1b = take(a.c2);
    d2k = take(static_cast<std::size_t>(a.c1) * a.c2 * 9); d2b = take(a.c1);
    d3k = take(static_cast<std::size_t>(1) * a.c1 * 9);    d3b = take(1);
    total = o;
  }
};

inline std::size_t param_count(const ArchSpec& a) { return ParamLayout(a).total; }

template <class T>
struct AutoencoderParams {
  ArchSpec arch{};
  std::vector<T> flat;

  AutoencoderParams() = default;
  explicit AutoencoderParams(const ArchSpec& a) : arch(a) {
    a.validate();
    flat.assign(param_count(a), T(0));
  }

  template <class U>
  AutoencoderParams<U> cast() const {
    AutoencoderParams<U> out(arch);
    for (std::size_t i = 0; i < flat.size(); ++i)
      out.flat[i] = static_cast<U>(flat[i]);
    return out;
  }
};

// He-style init: weight std = sqrt(2 / fan_in), zero biases. Draw order is
// the flat layout order, so a seed pins every parameter.
template <class T>
AutoencoderParams<T> init_params(const ArchSpec& arch, std::uint64_t seed) {
  AutoencoderParams<T> p(arch);
  const ParamLayout L(arch);
  Rng rng(derive_seed(seed, Stream::param_init));
  auto fill = [&](std::size_t at, std::size_t n, int fan_in) {
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (std::size_t i = 0; i < n; ++i)
      p.flat[at + i] = static_cast<T>(rng.normal() * std_dev);
  };
  const ArchSpec& a = arch;
  fill(L.e1k, static_cast<std::size_t>(a.c1) * 9, 9);
  fill(L.e2k, static_cast<std::size_t>(a.c2) * a.c1 * 9, a.c1 * 9);
  fill(L.e3k, static_cast<std::size_t>(a.c3) * a.c2 * 9, a.c2 * 9);
  fill(L.edw, static_cast<std::size_t>(a.latent) * a.flat(), a.flat());
  fill(L.ddw, static_cast<std::size_t>(a.flat()) * a.latent, a.latent);
  fill(L.d1k, static_cast<std::size_t>(a.c2) * a.c3 * 9, a.c3 * 9);
  fill(L.d2k, static_cast<std::size_t>(a.c1) * a.c2 * 9, a.c2 * 9);
  fill(L.d3k, static_cast<std::size_t>(a.c1) * 9, a.c1 * 9);
  return p;
}

// Per-sample activation and gradient scratch. One instance per thread.
template <class T>
struct Workspace {
  ArchSpec arch{};
  // encoder: conv pre-act, relu act, pooled act, pool argmax per stage
  std::vector<T> z1, a1, p1v, z2, a2, p2v, z3, a3, p3v, lat;
  std::vector<int> i1, i2, i3;
  // decoder
  std::vector<T> hz, ha, up1, z4, a4, up2, z5, a5, up3, z6, recon;
  // backward scratch, one buffer per distinct shape class
  std::vector<T> g_big1, g_big2, g_mid1, g_mid2, g_sml1, g_sml2, g_lat, g_flat1, g_flat2;

  Workspace() = default;
  explicit Workspace(const ArchSpec& a) : arch(a) {
    const int px = a.in_px, h1 = a.p1(), h2 = a.p2(), h3 = a.p3();
    auto sz = [](int c, int s) { return static_cast<std::size_t>(c) * s * s; };
    z1.resize(sz(a.c1, px)); a1.resize(sz(a.c1, px)); p1v.resize(sz(a.c1, h1));
    z2.resize(sz(a.c2, h1)); a2.resize(sz(a.c2, h1)); p2v.resize(sz(a.c2, h2));
    z3.resize(sz(a.c3, h2)); a3.resize(sz(a.c3, h2)); p3v.resize(sz(a.c3, h3));
    i1.resize(sz(a.c1, h1)); i2.resize(sz(a.c2, h2)); i3.resize(sz(a.c3, h3));
    lat.resize(a.latent);
    hz.resize(a.flat()); ha.resize(a.flat());
    up1.resize(sz(a.c3, h2)); z4.resize(sz(a.c2, h2)); a4.resize(sz(a.c2, h2));
    up2.resize(sz(a.c2, h1)); z5.resize(sz(a.c1, h1)); a5.resize(sz(a.c1, h1));
    up3.resize(sz(a.c1, px)); z6.resize(sz(1, px)); recon.resize(sz(1, px));
    // decoder stages mirror channel counts at each resolution, so the
    // scratch at p1/p2 must fit the wider of the two
    const int w1 = std::max(a.c1, a.c2), w2 = std::max(a.c2, a.c3);
    g_big1.resize(sz(a.c1, px)); g_big2.resize(sz(a.c1, px));
    g_mid1.resize(sz(w1, h1)); g_mid2.resize(sz(w1, h1));
    g_sml1.resize(sz(w2, h2)); g_sml2.resize(sz(w2, h2));
    g_lat.resize(a.latent); g_flat1.resize(a.flat()); g_flat2.resize(a.flat());
  }
};

// Encoder forward. Input is a single px*px patch; the latent code lands in
// ws.lat. Intermediate shapes for the full architecture: 50x16x16, 20x8x8,
// 10x4x4 after the three pool stages.
template <class T>
TEXSIG_NOINLINE void encode(const AutoencoderParams<T>& p, const T* x, Workspace<T>& ws) {
  const ArchSpec& a = p.arch;
  const ParamLayout L(a);
  const T* f = p.flat.data();
  namespace K = texsig::kernels;
  K::conv2d_fwd(x, 1, a.in_px, a.in_px, f + L.e1k, f + L.e1b, a.c1, ws.z1.data());
  K::relu_fwd(ws.z1.data(), ws.z1.size(), ws.a1.data());
  K::maxpool2_fwd(ws.a1.data(), a.c1, a.in_px, a.in_px, ws.p1v.data(), ws.i1.data());
  K::conv2d_fwd(ws.p1v.data(), a.c1, a.p1(), a.p1(), f + L.e2k, f + L.e2b, a.c2, ws.z2.data());
  K::relu_fwd(ws.z2.data(), ws.z2.size(), ws.a2.data());
  K::maxpool2_fwd(ws.a2.data(), a.c2, a.p1(), a.p1(), ws.p2v.data(), ws.i2.data());
  K::conv2d_fwd(ws.p2v.data(), a.c2, a.p2(), a.p2(), f + L.e3k, f + L.e3b, a.c3, ws.z3.data());
  K::relu_fwd(ws.z3.data(), ws.z3.size(), ws.a3.data());
  K::maxpool2_fwd(ws.a3.data(), a.c3, a.p2(), a.p2(), ws.p3v.data(), ws.i3.data());
  // flatten is a view: p3v already holds the c3*p3*p3 vector in layout order
  K::dense_fwd(ws.p3v.data(), f + L.edw, f + L.edb, a.latent, a.flat(), ws.lat.data());
}

// Decoder forward from ws-independent code; reconstruction lands in ws.recon.
template <class T>
TEXSIG_NOINLINE void decode(const AutoencoderParams<T>& p, const T* code, Workspace<T>& ws) {
  const ArchSpec& a = p.arch;
  const ParamLayout L(a);
  const T* f = p.flat.data();
  namespace K = texsig::kernels;
  K::dense_fwd(code, f + L.ddw, f + L.ddb, a.flat(), a.latent, ws.hz.data());
  K::relu_fwd(ws.hz.data(), ws.hz.size(), ws.ha.data());
  // reshape to c3 x p3 x p3 is a view
  K::upsample2_fwd(ws.ha.data(), a.c3, a.p3(), a.p3(), ws.up1.data());
  K::conv2d_fwd(ws.up1.data(), a.c3, a.p2(), a.p2(), f + L.d1k, f + L.d1b, a.c2, ws.z4.data());
  K::relu_fwd(ws.z4.data(), ws.z4.size(), ws.a4.data());
  K::upsample2_fwd(ws.a4.data(), a.c2, a.p2(), a.p2(), ws.up2.data());
  K::conv2d_fwd(ws.up2.data(), a.c2, a.p1(), a.p1(), f + L.d2k, f + L.d2b, a.c1, ws.z5.data());
  K::relu_fwd(ws.z5.data(), ws.z5.size(), ws.a5.data());
  K::upsample2_fwd(ws.a5.data(), a.c1, a.p1(), a.p1(), ws.up3.data());
  K::conv2d_fwd(ws.up3.data(), a.c1, a.in_px, a.in_px, f + L.d3k, f + L.d3b, 1, ws.z6.data());
  K::sigmoid_fwd(ws.z6.data(), ws.z6.size(), ws.recon.data());
}

template <class T>
std::vector<T> encode_patch(const AutoencoderParams<T>& p, std::span<const T> patch) {
  const std::size_t need = static_cast<std::size_t>(p.arch.in_px) * p.arch.in_px;
  if (patch.size() != need)
    throw ShapeError("encode expects a " + std::to_string(p.arch.in_px) + "x" +
                     std::to_string(p.arch.in_px) + " patch");
  Workspace<T> ws(p.arch);
  encode(p, patch.data(), ws);
  return ws.lat;
}

template <class T>
std::vector<T> decode_code(const AutoencoderParams<T>& p, std::span<const T> code) {
  if (static_cast<int>(code.size()) != p.arch.latent)
    throw ShapeError("decode expects a length-" + std::to_string(p.arch.latent) + " code");
  Workspace<T> ws(p.arch);
  decode(p, code.data(), ws);
  return ws.recon;
}

struct SampleLoss {
  double recon = 0.0;    // mse(g(f(x)), x)
  double cluster = 0.0;  // ||f(x) - m_s||^2
};

// Forward + loss + backward for one sample. Writes the gradient of
//   scale * [ mse(g(f(x)), x) + lambda * ||f(x) - centroid||^2 ]
// into grad (flat layout, overwritten). centroid may be null when lambda == 0;
// centroids are constants here, gradients flow only into W and Z.
template <class T>
TEXSIG_NOINLINE SampleLoss grad_one_sample(const AutoencoderParams<T>& p, const T* x,
                                           const T* centroid, double lambda, T scale,
                                           Workspace<T>& ws, T* grad) {
  const ArchSpec& a = p.arch;
  const ParamLayout L(a);
  const T* f = p.flat.data();
  namespace K = texsig::kernels;
  encode(p, x, ws);
  decode(p, ws.lat.data(), ws);

  SampleLoss loss;
  const std::size_t npix = ws.recon.size();
  loss.recon = K::mse(ws.recon.data(), x, npix);
  if (lambda > 0.0) {
    double d2 = 0.0;
    for (int i = 0; i < a.latent; ++i) {
      const double d = static_cast<double>(ws.lat[i]) - static_cast<double>(centroid[i]);
      d2 += d * d;
    }
    loss.cluster = d2;
  }

  // decoder backward
  K::mse_grad(ws.recon.data(), x, npix, scale, ws.z6.data());  // z6 reused as d_recon
  K::sigmoid_bwd(ws.recon.data(), ws.z6.data(), npix, ws.g_big1.data());  // d_z6 (1 plane)
  K::conv2d_bwd(ws.up3.data(), f + L.d3k, ws.g_big1.data(), a.c1, a.in_px, a.in_px, 1,
                ws.g_big2.data(), grad + L.d3k, grad + L.d3b);        // d_up3
  K::upsample2_bwd(ws.g_big2.data(), a.c1, a.p1(), a.p1(), ws.g_mid1.data());  // d_a5
  K::relu_bwd(ws.a5.data(), ws.g_mid1.data(), ws.a5.size(), ws.g_mid2.data()); // d_z5
  K::conv2d_bwd(ws.up2.data(), f + L.d2k, ws.g_mid2.data(), a.c2, a.p1(), a.p1(), a.c1,
                ws.g_mid1.data(), grad + L.d2k, grad + L.d2b);        // d_up2
  K::upsample2_bwd(ws.g_mid1.data(), a.c2, a.p2(), a.p2(), ws.g_sml1.data());  // d_a4
  K::relu_bwd(ws.a4.data(), ws.g_sml1.data(), ws.a4.size(), ws.g_sml2.data()); // d_z4
  K::conv2d_bwd(ws.up1.data(), f + L.d1k, ws.g_sml2.data(), a.c3, a.p2(), a.p2(), a.c2,
                ws.g_sml1.data(), grad + L.d1k, grad + L.d1b);        // d_up1
  K::upsample2_bwd(ws.g_sml1.data(), a.c3, a.p3(), a.p3(), ws.g_flat1.data()); // d_ha
  K::relu_bwd(ws.ha.data(), ws.g_flat1.data(), ws.ha.size(), ws.g_flat2.data()); // d_hz
  K::dense_bwd(ws.lat.data(), f + L.ddw, ws.g_flat2.data(), a.flat(), a.latent,
               ws.g_lat.data(), grad + L.ddw, grad + L.ddb);          // d_lat (recon path)

  if (lambda > 0.0) {
    const T lf = static_cast<T>(2.0 * lambda) * scale;
    for (int i = 0; i < a.latent; ++i)
      ws.g_lat[i] += lf * (ws.lat[i] - centroid[i]);
  }

  // encoder backward
  K::dense_bwd(ws.p3v.data(), f + L.edw, ws.g_lat.data(), a.latent, a.flat(),
               ws.g_flat1.data(), grad + L.edw, grad + L.edb);        // d_p3 (flat view)
  K::maxpool2_bwd(ws.g_flat1.data(), ws.i3.data(), a.c3, a.p2(), a.p2(), ws.g_sml1.data());
  K::relu_bwd(ws.a3.data(), ws.g_sml1.data(), ws.a3.size(), ws.g_sml2.data());
  K::conv2d_bwd(ws.p2v.data(), f + L.e3k, ws.g_sml2.data(), a.c2, a.p2(), a.p2(), a.c3,
                ws.g_sml1.data(), grad + L.e3k, grad + L.e3b);        // d_p2 in g_sml1
  K::maxpool2_bwd(ws.g_sml1.data(), ws.i2.data(), a.c2, a.p1(), a.p1(), ws.g_mid1.data());
  K::relu_bwd(ws.a2.data(), ws.g_mid1.data(), ws.a2.size(), ws.g_mid2.data());
  K::conv2d_bwd(ws.p1v.data(), f + L.e2k, ws.g_mid2.data(), a.c1, a.p1(), a.p1(), a.c2,
                ws.g_mid1.data(), grad + L.e2k, grad + L.e2b);        // d_p1 in g_mid1
  K::maxpool2_bwd(ws.g_mid1.data(), ws.i1.data(), a.c1, a.in_px, a.in_px, ws.g_big1.data());
  K::relu_bwd(ws.a1.data(), ws.g_big1.data(), ws.a1.size(), ws.g_big2.data());
  // d_input is not needed; the spent recon buffer serves as its sink
  K::conv2d_bwd(x, f + L.e1k, ws.g_big2.data(), 1, a.in_px, a.in_px, a.c1,
                ws.recon.data(), grad + L.e1k, grad + L.e1b);
  return loss;
}

struct BatchLoss {
  double recon = 0.0;
  double cluster = 0.0;
  double total(double lambda) const { return recon + lambda * cluster; }
};

// Scratch for batch fan-out: one workspace per thread, one gradient row per
// sample. Per-sample rows are reduced in sample order, so the accumulated
// gradient is bit-identical at any thread count.
template <class T>
struct BatchBuffers {
  std::vector<Workspace<T>> ws;
  std::vector<T> sample_grads;  // capacity rows x param_count
  std::vector<SampleLoss> losses;
  std::size_t rows = 0;

  BatchBuffers(const ArchSpec& arch, std::size_t max_batch) : rows(max_batch) {
    int nthreads = 1;
#ifdef _OPENMP
    nthreads = omp_get_max_threads();
#endif
    for (int t = 0; t < nthreads; ++t) ws.emplace_back(arch);
    sample_grads.assign(max_batch * param_count(arch), T(0));
    losses.resize(max_batch);
  }
};

// Mean-reduced loss and gradient over a batch:
//   (1/B) sum_i [ mse(g(f(x_i)), x_i) + lambda * ||f(x_i) - M s_i||^2 ]
// assignments index into centroids (k rows of `latent` values). `parallel`
// selects the OpenMP fan-out; the serial path is the reference and produces
// identical bits.
template <class T>
BatchLoss batch_loss_grad(const AutoencoderParams<T>& p, const T* patches,
                          std::size_t batch, const T* centroids,
                          const int* assignments, double lambda, T* grad_out,
                          BatchBuffers<T>& bb, bool parallel) {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (batch == 0 || batch > bb.rows)
    throw ShapeError("batch size out of range for buffers");
  const std::size_t pc = param_count(p.arch);
  const std::size_t npix = static_cast<std::size_t>(p.arch.in_px) * p.arch.in_px;
  const T scale = static_cast<T>(1.0 / static_cast<double>(batch));
  const int latent = p.arch.latent;

  auto run_one = [&](std::size_t i, int tid) {
    const T* x = patches + i * npix;
    const T* c = (lambda > 0.0) ? centroids + static_cast<std::size_t>(assignments[i]) * latent
                                : nullptr;
    bb.losses[i] = grad_one_sample(p, x, c, lambda, scale, bb.ws[tid],
                                   bb.sample_grads.data() + i * pc);
  };

  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 4)
    for (long long i = 0; i < static_cast<long long>(batch); ++i)
      run_one(static_cast<std::size_t>(i), omp_get_thread_num());
#else
    for (std::size_t i = 0; i < batch; ++i) run_one(i, 0);
#endif
  } else {
    for (std::size_t i = 0; i < batch; ++i) run_one(i, 0);
  }

  // fixed-order reduction over samples
  std::fill(grad_out, grad_out + pc, T(0));
  for (std::size_t i = 0; i < batch; ++i) {
    const T* g = bb.sample_grads.data() + i * pc;
    for (std::size_t j = 0; j < pc; ++j) grad_out[j] += g[j];
  }
  BatchLoss out;
  for (std::size_t i = 0; i < batch; ++i) {
    out.recon += bb.losses[i].recon;
    out.cluster += bb.losses[i].cluster;
  }
  out.recon /= static_cast<double>(batch);
  out.cluster /= static_cast<double>(batch);
  return out;
}

// Encodes `n` patches into `latents` (n x latent, row-major).
template <class T>
void encode_batch(const AutoencoderParams<T>& p, const T* patches, std::size_t n,
                  T* latents, std::vector<Workspace<T>>& ws, bool parallel) {
  const std::size_t npix = static_cast<std::size_t>(p.arch.in_px) * p.arch.in_px;
  const int latent = p.arch.latent;
  auto run_one = [&](std::size_t i, int tid) {
    encode(p, patches + i * npix, ws[tid]);
    std::memcpy(latents + i * latent, ws[tid].lat.data(), sizeof(T) * latent);
  };
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      run_one(static_cast<std::size_t>(i), omp_get_thread_num());
#else
    for (std::size_t i = 0; i < n; ++i) run_one(i, 0);
#endif
  } else {
    for (std::size_t i = 0; i < n; ++i) run_one(i, 0);
  }
}

// Per-sample reconstruction mse for `n` patches.
template <class T>
void recon_mse_batch(const AutoencoderParams<T>& p, const T* patches, std::size_t n,
                     double* out, std::vector<Workspace<T>>& ws, bool parallel) {
  const std::size_t npix = static_cast<std::size_t>(p.arch.in_px) * p.arch.in_px;
  auto run_one = [&](std::size_t i, int tid) {
    Workspace<T>& w = ws[tid];
    encode(p, patches + i * npix, w);
    decode(p, w.lat.data(), w);
    out[i] = texsig::kernels::mse(w.recon.data(), patches + i * npix, npix);
  };
  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      run_one(static_cast<std::size_t>(i), omp_get_thread_num());
#else
    for (std::size_t i = 0; i < n; ++i) run_one(i, 0);
#endif
  } else {
    for (std::size_t i = 0; i < n; ++i) run_one(i, 0);
  }
}

inline std::vector<Workspace<float>> make_workspaces(const ArchSpec& a) {
  int nthreads = 1;
#ifdef _OPENMP
  nthreads = omp_get_max_threads();
#endif
  std::vector<Workspace<float>> ws;
  for (int t = 0; t < nthreads; ++t) ws.emplace_back(a);
  return ws;
}

// Smallest |pre-activation| across every relu, the smallest winner margin
// across every pool window, and |z6| slack for the sigmoid. Finite-difference
// probes stay valid only when this margin comfortably exceeds the step.
template <class T>
double smoothness_margin(const AutoencoderParams<T>& p, const T* x, Workspace<T>& ws) {
  encode(p, x, ws);
  decode(p, ws.lat.data(), ws);
  double margin = 1e300;
  auto scan_relu = [&margin](const std::vector<T>& z) {
    for (const T v : z) margin = std::min(margin, std::abs(static_cast<double>(v)));
  };
  scan_relu(ws.z1); scan_relu(ws.z2); scan_relu(ws.z3); scan_relu(ws.hz);
  scan_relu(ws.z4); scan_relu(ws.z5);
  auto scan_pool = [&margin](const std::vector<T>& act, const std::vector<int>& arg,
                             int c, int h, int w) {
    const int oh = h / 2, ow = w / 2;
    for (int ci = 0; ci < c; ++ci)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          const int best = arg[(static_cast<std::size_t>(ci) * oh + y) * ow + xx];
          const double bv = act[best];
          const int base = ci * h * w;
          const int cand[4] = {base + 2 * y * w + 2 * xx, base + 2 * y * w + 2 * xx + 1,
                               base + (2 * y + 1) * w + 2 * xx,
                               base + (2 * y + 1) * w + 2 * xx + 1};
          for (int idx : cand)
            if (idx != best) margin = std::min(margin, bv - static_cast<double>(act[idx]));
        }
  };
  const ArchSpec& a = p.arch;
  scan_pool(ws.a1, ws.i1, a.c1, a.in_px, a.in_px);
  scan_pool(ws.a2, ws.i2, a.c2, a.p1(), a.p1());
  scan_pool(ws.a3, ws.i3, a.c3, a.p2(), a.p2());
  return margin;
}

}  // namespace texsig::net
