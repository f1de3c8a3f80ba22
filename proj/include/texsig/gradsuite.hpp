#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "texsig/gradcheck.hpp"
#include "texsig/kernels.hpp"
#include "texsig/net.hpp"
#include "texsig/rng.hpp"

// Finite-difference verification of every layer backward pass and of the
// full autoencoder gradient on the downsized twin network. All checks run in
// double precision; layers are probed through a fixed random projection so
// each has a scalar objective. Non-smooth coordinates (relu kinks, pool
// ties) are excluded or resampled away.

namespace texsig::gradsuite {

struct CheckResult {
  std::string name;
  FdReport report;
  bool pass = false;
};

constexpr double kEps = 1e-3;
constexpr double kAtol = 1e-6;
constexpr double kRtol = 1e-4;

namespace detail {

inline double project(const std::vector<double>& a, const std::vector<double>& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * w[i];
  return acc;
}

inline void fill_uniform(Rng& rng, std::vector<double>& v, double lo, double hi) {
  for (auto& x : v) x = rng.uniform(lo, hi);
}

inline CheckResult make_result(std::string name, const FdReport& r) {
  CheckResult c;
  c.name = std::move(name);
  c.report = r;
  c.pass = r.ok();
  return c;
}

}  // namespace detail

inline std::vector<CheckResult> run_layer_checks(std::uint64_t seed) {
  using Tensor = texsig::Tensor<double>;
  namespace ops = texsig::ops;
  std::vector<CheckResult> results;
  Rng rng(derive_seed(seed, Stream::gradcheck));

  {  // conv2d: input, kernel, and bias gradients
    Tensor x({2, 5, 5}), k({3, 2, 3, 3}), b({3}), w({3, 5, 5});
    detail::fill_uniform(rng, x.data, -1.0, 1.0);
    detail::fill_uniform(rng, k.data, -1.0, 1.0);
    detail::fill_uniform(rng, b.data, -0.5, 0.5);
    detail::fill_uniform(rng, w.data, -1.0, 1.0);
    auto f = [&] { return detail::project(ops::conv2d(x, k, b).data, w.data); };
    const auto g = ops::conv2d_backward(x, k, Tensor(w.shape, w.data));
    results.push_back(detail::make_result(
        "conv2d/d_input", finite_diff_check(f, x.data, g.d_input.data, kEps, kAtol, kRtol)));
    results.push_back(detail::make_result(
        "conv2d/d_kernel", finite_diff_check(f, k.data, g.d_params[0].data, kEps, kAtol, kRtol)));
    results.push_back(detail::make_result(
        "conv2d/d_bias", finite_diff_check(f, b.data, g.d_params[1].data, kEps, kAtol, kRtol)));
  }

  {  // maxpool2 at non-tied points: resample until every 2x2 winner is clear
    Tensor x({1, 4, 4}), w({1, 2, 2});
    for (int tries = 0;; ++tries) {
      detail::fill_uniform(rng, x.data, -1.0, 1.0);
      const auto pooled = ops::maxpool2(x);
      double margin = 1e300;
      for (std::size_t i = 0; i < pooled.out.numel(); ++i) {
        const int y = static_cast<int>(i) / 2, xx = static_cast<int>(i) % 2;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * 4 + (2 * xx + dx);
            if (idx != pooled.argmax[i])
              margin = std::min(margin, pooled.out[i] - x.data[idx]);
          }
      }
      if (margin > 0.05 || tries > 100) break;
    }
    detail::fill_uniform(rng, w.data, -1.0, 1.0);
    auto f = [&] { return detail::project(ops::maxpool2(x).out.data, w.data); };
    const auto pooled = ops::maxpool2(x);
    const auto d_in = ops::maxpool2_backward(Tensor(w.shape, w.data), pooled.argmax, x.shape);
    results.push_back(detail::make_result(
        "maxpool2/d_input", finite_diff_check(f, x.data, d_in.data, kEps, kAtol, kRtol)));
  }

  {  // upsample2
    Tensor x({1, 3, 3}), w({1, 6, 6});
    detail::fill_uniform(rng, x.data, -1.0, 1.0);
    detail::fill_uniform(rng, w.data, -1.0, 1.0);
    auto f = [&] { return detail::project(ops::upsample2(x).data, w.data); };
    const auto d_in = ops::upsample2_backward(Tensor(w.shape, w.data), x.shape);
    results.push_back(detail::make_result(
        "upsample2/d_input", finite_diff_check(f, x.data, d_in.data, kEps, kAtol, kRtol)));
  }

  {  // dense 4 -> 3
    Tensor x({4}), wgt({3, 4}), b({3}), w({3});
    detail::fill_uniform(rng, x.data, -1.0, 1.0);
    detail::fill_uniform(rng, wgt.data, -1.0, 1.0);
    detail::fill_uniform(rng, b.data, -0.5, 0.5);
    detail::fill_uniform(rng, w.data, -1.0, 1.0);
    auto f = [&] { return detail::project(ops::dense(x, wgt, b).data, w.data); };
    const auto g = ops::dense_backward(x, wgt, Tensor(w.shape, w.data));
    results.push_back(detail::make_result(
        "dense/d_input", finite_diff_check(f, x.data, g.d_input.data, kEps, kAtol, kRtol)));
    results.push_back(detail::make_result(
        "dense/d_weights", finite_diff_check(f, wgt.data, g.d_params[0].data, kEps, kAtol, kRtol)));
    results.push_back(detail::make_result(
        "dense/d_bias", finite_diff_check(f, b.data, g.d_params[1].data, kEps, kAtol, kRtol)));
  }

  {  // relu probed only away from the kink (|x| > 0.1)
    Tensor x({16}), w({16});
    detail::fill_uniform(rng, x.data, -1.0, 1.0);
    detail::fill_uniform(rng, w.data, -1.0, 1.0);
    auto f = [&] { return detail::project(ops::relu(x).data, w.data); };
    const auto act = ops::relu(x);
    const auto d_in = ops::relu_backward(act, Tensor(w.shape, w.data));
    auto skip = [&](std::size_t i) { return std::abs(x.data[i]) <= 0.1; };
    results.push_back(detail::make_result(
        "relu/d_input", finite_diff_check(f, x.data, d_in.data, kEps, kAtol, kRtol, skip)));
  }

  {  // sigmoid
    Tensor x({16}), w({16});
    detail::fill_uniform(rng, x.data, -2.0, 2.0);
    detail::fill_uniform(rng, w.data, -1.0, 1.0);
    auto f = [&] { return detail::project(ops::sigmoid(x).data, w.data); };
    const auto act = ops::sigmoid(x);
    const auto d_in = ops::sigmoid_backward(act, Tensor(w.shape, w.data));
    results.push_back(detail::make_result(
        "sigmoid/d_input", finite_diff_check(f, x.data, d_in.data, kEps, kAtol, kRtol)));
  }

  {  // mse: quadratic, so central differences are exact up to roundoff
    Tensor p({12}), t({12});
    detail::fill_uniform(rng, p.data, -1.0, 1.0);
    detail::fill_uniform(rng, t.data, -1.0, 1.0);
    auto f = [&] { return ops::mse(p, t); };
    const auto d_p = ops::mse_backward(p, t);
    results.push_back(detail::make_result(
        "mse/d_pred", finite_diff_check(f, p.data, d_p.data, kEps, 1e-8, kRtol)));
  }

  return results;
}

// Full-parameter finite differences on the twin autoencoder objective
//   mse(g(f(x)), x) + lambda ||f(x) - m||^2.
// Seeds are re-derived until the forward pass clears the smoothness margin.
inline CheckResult run_twin_check(std::uint64_t seed, double lambda) {
  const net::ArchSpec arch = net::ArchSpec::twin();
  const std::size_t npix = static_cast<std::size_t>(arch.in_px) * arch.in_px;

  net::AutoencoderParams<double> params;
  std::vector<double> x(npix), centroid(arch.latent);
  net::Workspace<double> ws(arch);
  bool smooth = false;
  for (std::uint64_t attempt = 0; attempt < 64 && !smooth; ++attempt) {
    const std::uint64_t s = derive_seed(seed, Stream::twin_probe, attempt);
    params = net::init_params<double>(arch, s);
    Rng rng(derive_seed(s, Stream::gradcheck, 1));
    for (auto& v : x) v = rng.uniform();
    for (auto& v : centroid) v = rng.uniform(-0.5, 0.5);
    smooth = net::smoothness_margin(params, x.data(), ws) > 0.05;
  }

  auto loss = [&]() {
    net::encode(params, x.data(), ws);
    net::decode(params, ws.lat.data(), ws);
    double l = texsig::kernels::mse(ws.recon.data(), x.data(), npix);
    if (lambda > 0.0) {
      double d2 = 0.0;
      for (int i = 0; i < arch.latent; ++i) {
        const double d = ws.lat[i] - centroid[i];
        d2 += d * d;
      }
      l += lambda * d2;
    }
    return l;
  };

  std::vector<double> grad(net::param_count(arch));
  net::grad_one_sample(params, x.data(), centroid.data(), lambda, 1.0, ws, grad.data());
  const FdReport r =
      finite_diff_check(loss, std::span<double>(params.flat), grad, kEps, kAtol, kRtol);
  return detail::make_result(
      lambda > 0.0 ? "twin_autoencoder/joint" : "twin_autoencoder/recon", r);
}

// One line per check per seed; returns overall pass.
inline bool run_all(std::uint64_t base_seed, int n_seeds, std::ostream& log) {
  bool all_pass = true;
  for (int s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    std::vector<CheckResult> checks = run_layer_checks(seed);
    checks.push_back(run_twin_check(seed, 0.0));
    checks.push_back(run_twin_check(seed, 0.3));
    for (const auto& c : checks) {
      log << (c.pass ? "  [ok]  " : "  [FAIL]") << " seed " << seed << "  " << c.name
          << "  max_abs " << c.report.max_abs << "  max_rel " << c.report.max_rel << "\n";
      all_pass = all_pass && c.pass;
    }
  }
  return all_pass;
}

}  // namespace texsig::gradsuite
