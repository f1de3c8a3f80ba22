#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "texsig/errors.hpp"

// Links signatures to grade: random-forest low/high classification with
// impurity-based feature importance, LASSO grade regression, leave-one-out
// cross-validation, and the derived metrics.

namespace texsig::linker {

struct LabeledSignature {
  std::string case_id;
  std::vector<double> features;  // length k
  int grade = 0;                 // 0..3
  bool high() const { return grade >= 2; }  // low = grades 0,1; high = 2,3
};

// ---- random forest ----

struct TreeNode {
  int feature = -1;        // -1 for leaves
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1, right = -1;
  long long n_low = 0, n_high = 0;  // training distribution at the node
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root
};

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<double> importance;  // normalized mean decrease in impurity
  int n_features = 0;
};

struct ForestConfig {
  int n_trees = 100;
  int mtry = 0;  // features tried per split; 0 = ceil(sqrt(k))
  std::uint64_t seed = 0;
  bool parallel = true;
};

// CART with Gini impurity, exhaustive threshold search over midpoints of
// sorted unique values, grown until pure or fewer than 2 samples. Bootstrap
// per tree; per-tree seeds derive from the config seed, so results are
// thread-count independent.
ForestModel fit_forest(const std::vector<LabeledSignature>& data, const ForestConfig& cfg);

// Majority vote over trees; ties predict low.
bool predict_forest(const ForestModel& forest, const std::vector<double>& features);

// ---- lasso ----

struct LassoModel {
  std::vector<double> beta;  // on standardized features
  double intercept = 0.0;
  double alpha = 0.0;
  std::vector<double> mu, sd;  // standardization stats; sd 0 marks constants
  int sweeps = 0;
};

// Minimizes (1/2n)||y - X beta - b||^2 + alpha ||beta||_1 by cyclic
// coordinate descent with soft thresholding, on features standardized to
// mean 0 / population variance 1. Converged when the max coefficient change
// in a sweep drops below tol; exceeding max_iter sweeps is an error.
LassoModel fit_lasso(const std::vector<std::vector<double>>& X,
                     const std::vector<double>& y, double alpha,
                     int max_iter = 1000, double tol = 1e-9);

double predict_lasso(const LassoModel& model, const std::vector<double>& features);

double lasso_objective(const std::vector<std::vector<double>>& X,
                       const std::vector<double>& y, const LassoModel& model);

// ---- metrics ----

struct ConfusionMetrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;  // TP / (TP + FN), positive class = high
  double specificity = 0.0;  // TN / (TN + FP)
  double f1 = 0.0;
  long long tp = 0, tn = 0, fp = 0, fn = 0;
  bool division_by_zero = false;  // any metric defaulted to 0
};

ConfusionMetrics confusion_metrics(const std::vector<bool>& predictions,
                                   const std::vector<bool>& truths);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// ---- importance stability across folds ----

struct ImportanceStability {
  std::vector<double> mean;      // per cluster
  std::vector<double> sd;        // sample sd across folds
  std::vector<double> top1_freq;
  std::vector<double> top2_freq;
  std::vector<double> top4_freq;  // fraction of folds in the top-4 ranks
};

// Ranks break ties toward the lower cluster index.
ImportanceStability importance_stability(const std::vector<std::vector<double>>& per_fold);

// ---- leave-one-out cross-validation ----

enum class Task { binary_forest, grade_lasso };

struct FoldPrediction {
  std::string case_id;
  int true_grade = 0;
  bool true_high = false;
  bool predicted_high = false;  // binary task
  double predicted_grade = 0.0; // lasso task
  double lasso_alpha = 0.0;     // alpha chosen for this fold
  bool failed = false;
};

struct MetricsReport {
  Task task = Task::binary_forest;
  ConfusionMetrics metrics;                  // binary task
  std::vector<FoldPrediction> folds;
  std::vector<int> failed_folds;
  ImportanceStability importance;            // binary task
  std::vector<std::vector<double>> per_fold_importance;
  double spearman_grade = 0.0;               // lasso task
};

struct LinkerConfig {
  ForestConfig forest;
  std::vector<double> lasso_alphas{0.001, 0.01, 0.05, 0.1, 0.5};
  int lasso_inner_folds = 5;
  std::uint64_t seed = 0;
  bool parallel = true;
};

// n folds, each holding out one case. Binary task: per-fold forest, held-out
// predictions aggregated into confusion metrics, per-fold importance
// recorded. Lasso task: per-fold alpha chosen by inner round-robin CV on the
// training cases (mean squared error, ties to the smaller alpha), held-out
// grade predictions plus their Spearman correlation against truth. Folds
// whose training set is single-class are recorded as failures and excluded.
MetricsReport loo_cv(const std::vector<LabeledSignature>& data, Task task,
                     const LinkerConfig& cfg);

}  // namespace texsig::linker
