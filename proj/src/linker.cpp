#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "texsig/linker.hpp"
#include "texsig/rng.hpp"

namespace texsig::linker {

ConfusionMetrics confusion_metrics(const std::vector<bool>& predictions,
                                   const std::vector<bool>& truths) {
  if (predictions.size() != truths.size())
    throw ShapeError("prediction and truth lengths differ");
  if (predictions.empty()) throw DegenerateDataError("no predictions to score");
  ConfusionMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i], t = truths[i];
    if (p && t) ++m.tp;
    else if (!p && !t) ++m.tn;
    else if (p && !t) ++m.fp;
    else ++m.fn;
  }
  const auto n = static_cast<double>(predictions.size());
  auto ratio = [&m](long long num, long long den) {
    if (den == 0) {
      m.division_by_zero = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = static_cast<double>(m.tp + m.tn) / n;
  m.sensitivity = ratio(m.tp, m.tp + m.fn);
  m.specificity = ratio(m.tn, m.tn + m.fp);
  const double precision = ratio(m.tp, m.tp + m.fp);
  if (precision + m.sensitivity > 0.0)
    m.f1 = 2.0 * precision * m.sensitivity / (precision + m.sensitivity);
  else {
    m.f1 = 0.0;
    m.division_by_zero = true;
  }
  return m;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman input lengths differ");
  if (a.size() < 2) throw DegenerateDataError("spearman needs at least 2 pairs");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

ImportanceStability importance_stability(const std::vector<std::vector<double>>& per_fold) {
  if (per_fold.size() < 2)
    throw DegenerateDataError("importance stability needs at least 2 folds");
  const std::size_t k = per_fold.front().size();
  for (const auto& f : per_fold)
    if (f.size() != k) throw ShapeError("inconsistent importance lengths across folds");
  const double nf = static_cast<double>(per_fold.size());

  ImportanceStability s;
  s.mean.assign(k, 0.0);
  s.sd.assign(k, 0.0);
  s.top1_freq.assign(k, 0.0);
  s.top2_freq.assign(k, 0.0);
  s.top4_freq.assign(k, 0.0);

  for (const auto& f : per_fold)
    for (std::size_t j = 0; j < k; ++j) s.mean[j] += f[j];
  for (auto& v : s.mean) v /= nf;
  for (const auto& f : per_fold)
    for (std::size_t j = 0; j < k; ++j) {
      const double d = f[j] - s.mean[j];
      s.sd[j] += d * d;
    }
  for (auto& v : s.sd) v = std::sqrt(v / (nf - 1.0));

  for (const auto& f : per_fold) {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // descending importance, ties to the lower cluster index
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
    for (std::size_t r = 0; r < k; ++r) {
      if (r < 1) s.top1_freq[order[r]] += 1.0;
      if (r < 2) s.top2_freq[order[r]] += 1.0;
      if (r < 4) s.top4_freq[order[r]] += 1.0;
    }
  }
  for (auto& v : s.top1_freq) v /= nf;
  for (auto& v : s.top2_freq) v /= nf;
  for (auto& v : s.top4_freq) v /= nf;
  return s;
}

namespace {

// Round-robin inner CV over the training cases; mean held-out squared error
// per alpha, ties to the smaller alpha (grid walked in order).
double select_alpha(const std::vector<std::vector<double>>& X,
                    const std::vector<double>& y, const LinkerConfig& cfg) {
  const std::size_t n = X.size();
  const int folds = std::max(2, std::min<int>(cfg.lasso_inner_folds, static_cast<int>(n)));
  double best_alpha = cfg.lasso_alphas.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (const double alpha : cfg.lasso_alphas) {
    double sse = 0.0;
    std::size_t n_val = 0;
    bool usable = true;
    for (int f = 0; f < folds && usable; ++f) {
      std::vector<std::vector<double>> Xt;
      std::vector<double> yt;
      std::vector<std::size_t> val_idx;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<int>(i % folds) == f) {
          val_idx.push_back(i);
        } else {
          Xt.push_back(X[i]);
          yt.push_back(y[i]);
        }
      }
      if (Xt.size() < 2 || val_idx.empty()) {
        usable = false;
        break;
      }
      try {
        const LassoModel m = fit_lasso(Xt, yt, alpha);
        for (std::size_t i : val_idx) {
          const double r = y[i] - predict_lasso(m, X[i]);
          sse += r * r;
          ++n_val;
        }
      } catch (const std::exception&) {
        usable = false;
      }
    }
    if (!usable || n_val == 0) continue;
    const double mse = sse / static_cast<double>(n_val);
    if (mse < best_mse) {
      best_mse = mse;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

}  // namespace

MetricsReport loo_cv(const std::vector<LabeledSignature>& data, Task task,
                     const LinkerConfig& cfg) {
  const std::size_t n = data.size();
  if (n < 3) throw DegenerateDataError("leave-one-out needs at least 3 cases");
  if (cfg.lasso_alphas.empty()) throw ConfigError("lasso alpha grid is empty");

  MetricsReport report;
  report.task = task;
  report.folds.resize(n);

  std::vector<std::vector<double>> fold_importance(n);

  auto run_fold = [&](std::size_t f) {
    FoldPrediction& fp = report.folds[f];
    fp.case_id = data[f].case_id;
    fp.true_grade = data[f].grade;
    fp.true_high = data[f].high();

    std::vector<LabeledSignature> train;
    train.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i)
      if (i != f) train.push_back(data[i]);

    if (task == Task::binary_forest) {
      bool any_low = false, any_high = false;
      for (const auto& d : train) (d.high() ? any_high : any_low) = true;
      if (!any_low || !any_high) {
        fp.failed = true;
        return;
      }
      ForestConfig fc = cfg.forest;
      fc.seed = derive_seed(cfg.seed, Stream::loo_fold, static_cast<std::uint64_t>(f));
      fc.parallel = false;  // folds are already the parallel unit
      const ForestModel forest = fit_forest(train, fc);
      fp.predicted_high = predict_forest(forest, data[f].features);
      fold_importance[f] = forest.importance;
    } else {
      std::vector<std::vector<double>> X;
      std::vector<double> y;
      for (const auto& d : train) {
        X.push_back(d.features);
        y.push_back(static_cast<double>(d.grade));
      }
      try {
        const double alpha = select_alpha(X, y, cfg);
        const LassoModel m = fit_lasso(X, y, alpha);
        fp.lasso_alpha = alpha;
        fp.predicted_grade = predict_lasso(m, data[f].features);
      } catch (const std::exception&) {
        fp.failed = true;
      }
    }
  };

  if (cfg.parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (long long f = 0; f < static_cast<long long>(n); ++f)
      run_fold(static_cast<std::size_t>(f));
  } else {
    for (std::size_t f = 0; f < n; ++f) run_fold(f);
  }

  for (std::size_t f = 0; f < n; ++f)
    if (report.folds[f].failed) report.failed_folds.push_back(static_cast<int>(f));

  if (task == Task::binary_forest) {
    std::vector<bool> preds, truths;
    for (const auto& fp : report.folds) {
      if (fp.failed) continue;
      preds.push_back(fp.predicted_high);
      truths.push_back(fp.true_high);
    }
    if (preds.empty()) throw DegenerateDataError("every fold failed");
    report.metrics = confusion_metrics(preds, truths);
    for (std::size_t f = 0; f < n; ++f)
      if (!report.folds[f].failed)
        report.per_fold_importance.push_back(fold_importance[f]);
    if (report.per_fold_importance.size() >= 2)
      report.importance = importance_stability(report.per_fold_importance);
  } else {
    std::vector<double> preds, truths;
    for (const auto& fp : report.folds) {
      if (fp.failed) continue;
      preds.push_back(fp.predicted_grade);
      truths.push_back(static_cast<double>(fp.true_grade));
    }
    if (preds.size() < 2) throw DegenerateDataError("too few successful folds");
    report.spearman_grade = spearman(preds, truths);
  }
  return report;
}

}  // namespace texsig::linker
