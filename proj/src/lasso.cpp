#include <algorithm>
#include <cmath>

#include "texsig/linker.hpp"

namespace texsig::linker {

namespace {

double soft_threshold(double z, double a) {
  if (z > a) return z - a;
  if (z < -a) return z + a;
  return 0.0;
}

}  // namespace

LassoModel fit_lasso(const std::vector<std::vector<double>>& X,
                     const std::vector<double>& y, double alpha, int max_iter,
                     double tol) {
  const std::size_t n = X.size();
  if (n < 2) throw DegenerateDataError("lasso needs at least 2 samples");
  if (y.size() != n) throw ShapeError("target length does not match sample count");
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  const std::size_t k = X.front().size();
  for (const auto& row : X)
    if (row.size() != k) throw ShapeError("inconsistent feature lengths");

  LassoModel m;
  m.alpha = alpha;
  m.mu.assign(k, 0.0);
  m.sd.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += X[i][j];
    m.mu[j] = s / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = X[i][j] - m.mu[j];
      s2 += d * d;
    }
    const double var = s2 / static_cast<double>(n);  // population variance
    m.sd[j] = var > 1e-24 ? std::sqrt(var) : 0.0;    // 0 marks constant features
  }

  // standardized design, column-major for the sweep
  std::vector<std::vector<double>> Z(k, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < k; ++j)
    if (m.sd[j] > 0.0)
      for (std::size_t i = 0; i < n; ++i) Z[j][i] = (X[i][j] - m.mu[j]) / m.sd[j];

  double ymean = 0.0;
  for (double v : y) ymean += v;
  ymean /= static_cast<double>(n);
  m.intercept = ymean;

  m.beta.assign(k, 0.0);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - ymean;

  const double inv_n = 1.0 / static_cast<double>(n);
  for (int sweep = 0; sweep < max_iter; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (m.sd[j] == 0.0) continue;  // constant feature keeps coefficient 0
      const double old = m.beta[j];
      double corr = 0.0;
      for (std::size_t i = 0; i < n; ++i) corr += Z[j][i] * residual[i];
      // standardized columns have Z_j . Z_j / n == 1
      const double z = corr * inv_n + old;
      const double next = soft_threshold(z, alpha);
      if (next != old) {
        const double delta = next - old;
        for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * Z[j][i];
        m.beta[j] = next;
      }
      max_change = std::max(max_change, std::abs(next - old));
    }
    m.sweeps = sweep + 1;
    if (max_change < tol) return m;
    if (sweep == max_iter - 1)
      throw ConvergenceError("lasso did not converge in " + std::to_string(max_iter) +
                                 " sweeps (last max coefficient change " +
                                 std::to_string(max_change) + ")",
                             max_change);
  }
  return m;
}

double predict_lasso(const LassoModel& model, const std::vector<double>& features) {
  if (features.size() != model.beta.size())
    throw ShapeError("feature vector length does not match the lasso model");
  double out = model.intercept;
  for (std::size_t j = 0; j < features.size(); ++j)
    if (model.sd[j] > 0.0)
      out += model.beta[j] * (features[j] - model.mu[j]) / model.sd[j];
  return out;
}

double lasso_objective(const std::vector<std::vector<double>>& X,
                       const std::vector<double>& y, const LassoModel& model) {
  const std::size_t n = X.size();
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - predict_lasso(model, X[i]);
    rss += r * r;
  }
  double l1 = 0.0;
  for (double b : model.beta) l1 += std::abs(b);
  return rss / (2.0 * static_cast<double>(n)) + model.alpha * l1;
}

}  // namespace texsig::linker
