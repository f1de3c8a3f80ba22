#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "texsig/errors.hpp"
#include "texsig/rng.hpp"

// Lloyd's k-means with k-means++ seeding, double precision. Used to
// initialize the clustering head and as the in-latent-space oracle.

namespace texsig::kmeans {

struct Dataset {
  const double* points;  // n x dim, row-major
  std::size_t n;
  int dim;
  const double* row(std::size_t i) const { return points + i * dim; }
};

inline double sq_dist(const double* a, const double* b, int dim) {
  double acc = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// Nearest centroid by squared Euclidean distance; ties break to the lowest
// centroid index.
inline int nearest(const double* x, const double* centroids, int k, int dim) {
  int best = 0;
  double bd = sq_dist(x, centroids, dim);
  for (int c = 1; c < k; ++c) {
    const double d = sq_dist(x, centroids + static_cast<std::size_t>(c) * dim, dim);
    if (d < bd) {
      bd = d;
      best = c;
    }
  }
  return best;
}

inline void assign_serial(const Dataset& data, const double* centroids, int k,
                          int* out) {
  for (std::size_t i = 0; i < data.n; ++i)
    out[i] = nearest(data.row(i), centroids, k, data.dim);
}

// Per-point work is independent; results match assign_serial bit for bit.
inline void assign(const Dataset& data, const double* centroids, int k, int* out,
                   bool parallel = true) {
  if (!parallel) {
    assign_serial(data, centroids, k, out);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(data.n); ++i)
    out[i] = nearest(data.row(i), centroids, k, data.dim);
#else
  assign_serial(data, centroids, k, out);
#endif
}

inline std::size_t count_distinct(const Dataset& data) {
  std::vector<std::size_t> order(data.n);
  for (std::size_t i = 0; i < data.n; ++i) order[i] = i;
  const int dim = data.dim;
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(data.row(a), data.row(a) + dim,
                                        data.row(b), data.row(b) + dim);
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = data.n == 0 ? 0 : 1;
  for (std::size_t i = 1; i < data.n; ++i)
    if (less(order[i - 1], order[i])) ++distinct;
  return distinct;
}

// D^2 seeding: first centroid uniform, each next one drawn with probability
// proportional to the squared distance to the nearest chosen centroid.
inline std::vector<double> kmeans_pp_seed(const Dataset& data, int k,
                                          std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be >= 2");
  if (count_distinct(data) < static_cast<std::size_t>(k))
    throw DegenerateDataError("k-means++ needs at least k distinct points");
  const int dim = data.dim;
  Rng rng(seed);
  std::vector<double> centroids(static_cast<std::size_t>(k) * dim);
  std::vector<double> min_d2(data.n);

  const std::size_t first = rng.uniform_index(data.n);
  std::copy_n(data.row(first), dim, centroids.begin());
  for (std::size_t i = 0; i < data.n; ++i)
    min_d2[i] = sq_dist(data.row(i), centroids.data(), dim);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) total += min_d2[i];
    // total > 0 is guaranteed while fewer than k distinct points are chosen
    const double target = rng.uniform() * total;
    double run = 0.0;
    std::size_t pick = data.n;
    std::size_t last_positive = data.n;
    for (std::size_t i = 0; i < data.n; ++i) {
      if (min_d2[i] > 0.0) last_positive = i;
      run += min_d2[i];
      if (run > target && min_d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    if (pick == data.n) pick = last_positive;  // rounding pushed target past the last bin
    double* dst = centroids.data() + static_cast<std::size_t>(c) * dim;
    std::copy_n(data.row(pick), dim, dst);
    for (std::size_t i = 0; i < data.n; ++i)
      min_d2[i] = std::min(min_d2[i], sq_dist(data.row(i), dst, dim));
  }
  return centroids;
}

struct LloydResult {
  std::vector<double> centroids;   // k x dim
  std::vector<int> assignment;
  double cost = 0.0;               // sum of squared distances to assigned centroid
  int iterations = 0;
  std::vector<double> cost_history;  // one entry per iteration
};

// Cost summed per point in index order; all monotonicity bookkeeping uses
// this one summation structure.
inline double clustering_cost(const Dataset& data, const double* centroids,
                              const int* assignment, int dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.n; ++i)
    acc += sq_dist(data.row(i), centroids + static_cast<std::size_t>(assignment[i]) * dim, dim);
  return acc;
}

// Moves the point farthest from its assigned centroid into each empty
// cluster. Ties break to the lowest point index.
inline void repair_empty_clusters(const Dataset& data, std::vector<double>& centroids,
                                  std::vector<int>& assignment, int k) {
  const int dim = data.dim;
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < data.n; ++i) ++counts[assignment[i]];
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    double worst = -1.0;
    std::size_t steal = 0;
    for (std::size_t i = 0; i < data.n; ++i) {
      if (counts[assignment[i]] <= 1) continue;  // do not empty another cluster
      const double d = sq_dist(data.row(i),
                               centroids.data() + static_cast<std::size_t>(assignment[i]) * dim, dim);
      if (d > worst) {
        worst = d;
        steal = i;
      }
    }
    if (worst < 0.0) throw DegenerateDataError("cannot repair empty cluster");
    --counts[assignment[steal]];
    assignment[steal] = c;
    counts[c] = 1;
    std::copy_n(data.row(steal), dim, centroids.begin() + static_cast<std::size_t>(c) * dim);
  }
}

// Alternates nearest-centroid assignment and mean updates until the
// assignment reaches a fixpoint, the relative cost change drops below tol,
// or max_iter. The mean step is rejected if the recomputed cost would rise
// (possible only at the rounding floor), so the recorded cost sequence is
// non-increasing without tolerance.
inline LloydResult lloyd(const Dataset& data, std::vector<double> centroids, int k,
                         int max_iter = 300, double tol = 1e-6,
                         bool parallel = true) {
  if (static_cast<int>(centroids.size()) != k * data.dim)
    throw ShapeError("initial centroids must be k x dim");
  const int dim = data.dim;
  LloydResult r;
  r.centroids = std::move(centroids);
  r.assignment.assign(data.n, -1);
  std::vector<int> prev_assign(data.n, -1);
  double prev_cost = std::numeric_limits<double>::infinity();

  for (int it = 0; it < max_iter; ++it) {
    assign(data, r.centroids.data(), k, r.assignment.data(), parallel);
    repair_empty_clusters(data, r.centroids, r.assignment, k);

    // mean update, accumulated in point order
    std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < data.n; ++i) {
      const int c = r.assignment[i];
      const double* x = data.row(i);
      double* s = sums.data() + static_cast<std::size_t>(c) * dim;
      for (int d = 0; d < dim; ++d) s[d] += x[d];
      ++counts[c];
    }
    std::vector<double> next = r.centroids;
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (int d = 0; d < dim; ++d)
          next[static_cast<std::size_t>(c) * dim + d] =
              sums[static_cast<std::size_t>(c) * dim + d] / static_cast<double>(counts[c]);

    const double cost_new = clustering_cost(data, next.data(), r.assignment.data(), dim);
    const double cost_old = clustering_cost(data, r.centroids.data(), r.assignment.data(), dim);
    double cost = cost_old;
    if (cost_new <= cost_old) {
      r.centroids = std::move(next);
      cost = cost_new;
    }
    r.cost_history.push_back(cost);
    r.iterations = it + 1;
    r.cost = cost;

    if (r.assignment == prev_assign) break;
    if (std::isfinite(prev_cost) &&
        std::abs(prev_cost - cost) < tol * std::max(prev_cost, 1e-300))
      break;
    prev_assign = r.assignment;
    prev_cost = cost;
  }
  return r;
}

}  // namespace texsig::kmeans
