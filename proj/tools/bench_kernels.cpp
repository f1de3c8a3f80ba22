// Timing comparison between the serial reference paths and the OpenMP
// fan-outs: batch gradient, k-means assignment, signature scan, forest fit.
// The parallel paths must reproduce the serial results bit for bit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "texsig/dcn.hpp"
#include "texsig/kmeans.hpp"
#include "texsig/linker.hpp"
#include "texsig/net.hpp"
#include "texsig/rng.hpp"
#include "texsig/signature.hpp"
#include "texsig/synth.hpp"

using namespace texsig;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-28s serial %9.2f ms   omp %9.2f ms   speedup %5.2fx   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (no OpenMP)\n");
#endif

  {  // batch gradient, full architecture
    const net::ArchSpec arch = net::ArchSpec::full();
    const std::size_t batch = 64;
    const std::size_t npix = static_cast<std::size_t>(arch.in_px) * arch.in_px;
    auto params = net::init_params<float>(arch, 7);
    Rng rng(11);
    std::vector<float> patches(batch * npix);
    for (auto& v : patches) v = static_cast<float>(rng.uniform());
    const int k = 10;
    std::vector<float> centroids(static_cast<std::size_t>(k) * arch.latent);
    for (auto& v : centroids) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    std::vector<int> assign(batch);
    for (auto& a : assign) a = static_cast<int>(rng.uniform_index(k));

    net::BatchBuffers<float> bb(arch, batch);
    std::vector<float> g_serial(net::param_count(arch)), g_omp(g_serial.size());
    auto t0 = Clock::now();
    net::batch_loss_grad(params, patches.data(), batch, centroids.data(), assign.data(),
                         0.05, g_serial.data(), bb, false);
    const double t_serial = ms_since(t0);
    t0 = Clock::now();
    net::batch_loss_grad(params, patches.data(), batch, centroids.data(), assign.data(),
                         0.05, g_omp.data(), bb, true);
    const double t_omp = ms_since(t0);
    report("batch_loss_grad (64x32x32)", t_serial, t_omp,
           std::memcmp(g_serial.data(), g_omp.data(), g_serial.size() * 4) == 0);
  }

  {  // k-means assignment
    const std::size_t n = 200000;
    const int dim = 20, k = 10;
    Rng rng(13);
    std::vector<double> pts(n * dim), cent(static_cast<std::size_t>(k) * dim);
    for (auto& v : pts) v = rng.normal();
    for (auto& v : cent) v = rng.normal();
    const kmeans::Dataset data{pts.data(), n, dim};
    std::vector<int> a_serial(n), a_omp(n);
    auto t0 = Clock::now();
    kmeans::assign(data, cent.data(), k, a_serial.data(), false);
    const double t_serial = ms_since(t0);
    t0 = Clock::now();
    kmeans::assign(data, cent.data(), k, a_omp.data(), true);
    const double t_omp = ms_since(t0);
    report("kmeans assign (200k x 20)", t_serial, t_omp, a_serial == a_omp);
  }

  {  // signature scan over one phantom case
    synth::PhantomSpec spec;
    spec.seed = 5;
    synth::PhantomCase pc = synth::generate_phantom(spec, 12);
    io::normalize(pc.volume, pc.mask);
    dcn::DcnModel model;
    model.params = net::init_params<float>(net::ArchSpec::full(), 7);
    model.k = 10;
    Rng rng(17);
    model.centroids.resize(static_cast<std::size_t>(model.k) * model.params.arch.latent);
    for (auto& v : model.centroids) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    model.counts.assign(model.k, 1);

    sig::SigParams sp;
    sp.parallel = false;
    auto t0 = Clock::now();
    const auto serial = sig::compute_signature(model, pc.volume, pc.mask, sp, "bench");
    const double t_serial = ms_since(t0);
    sp.parallel = true;
    t0 = Clock::now();
    const auto parallel = sig::compute_signature(model, pc.volume, pc.mask, sp, "bench");
    const double t_omp = ms_since(t0);
    report("signature scan (1 case)", t_serial, t_omp,
           serial.first.proportions == parallel.first.proportions &&
               serial.first.window_count == parallel.first.window_count);
  }

  {  // random forest fit
    Rng rng(19);
    std::vector<linker::LabeledSignature> data;
    for (int i = 0; i < 200; ++i) {
      linker::LabeledSignature d;
      d.case_id = "s" + std::to_string(i);
      d.grade = static_cast<int>(rng.uniform_index(4));
      d.features.resize(10);
      for (auto& f : d.features) f = rng.uniform() + (d.grade >= 2 ? 0.3 : 0.0);
      data.push_back(std::move(d));
    }
    linker::ForestConfig fc;
    fc.n_trees = 200;
    fc.seed = 23;
    fc.parallel = false;
    auto t0 = Clock::now();
    const auto serial = linker::fit_forest(data, fc);
    const double t_serial = ms_since(t0);
    fc.parallel = true;
    t0 = Clock::now();
    const auto parallel = linker::fit_forest(data, fc);
    const double t_omp = ms_since(t0);
    report("forest fit (200x10, 200 trees)", t_serial, t_omp,
           serial.importance == parallel.importance);
  }

  return 0;
}
