#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "texsig/linker.hpp"
#include "texsig/rng.hpp"

namespace texsig::linker {

namespace {

double gini(long long n_low, long long n_high) {
  const long long n = n_low + n_high;
  if (n == 0) return 0.0;
  const double pl = static_cast<double>(n_low) / n;
  const double ph = static_cast<double>(n_high) / n;
  return 1.0 - pl * pl - ph * ph;
}

struct TreeBuilder {
  const std::vector<LabeledSignature>& data;
  int n_features;
  int mtry;
  Rng rng;
  Tree tree;
  std::vector<double> importance;  // unnormalized count-weighted Gini decrease

  TreeBuilder(const std::vector<LabeledSignature>& d, int nf, int mt, std::uint64_t seed)
      : data(d), n_features(nf), mtry(mt), rng(seed), importance(nf, 0.0) {}

  // Sampled without replacement, then sorted so the threshold search walks
  // candidates in feature-index order (first best split wins ties).
  std::vector<int> sample_features() {
    std::vector<int> all(n_features);
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < mtry; ++i) {
      const int j = i + static_cast<int>(rng.uniform_index(n_features - i));
      std::swap(all[i], all[j]);
    }
    all.resize(mtry);
    std::sort(all.begin(), all.end());
    return all;
  }

  int build(std::vector<int>& samples) {
    TreeNode node;
    for (int i : samples) (data[i].high() ? node.n_high : node.n_low)++;
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);

    const long long n = node.n_low + node.n_high;
    if (n < 2 || node.n_low == 0 || node.n_high == 0) return node_id;

    const double parent_gini = gini(node.n_low, node.n_high);
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_decrease = 0.0;

    for (const int f : sample_features()) {
      std::vector<std::pair<double, bool>> vals;
      vals.reserve(samples.size());
      for (int i : samples) vals.emplace_back(data[i].features[f], data[i].high());
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      long long left_low = 0, left_high = 0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        (vals[i].second ? left_high : left_low)++;
        if (vals[i].first == vals[i + 1].first) continue;
        const double thr = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
        const long long nl = left_low + left_high, nr = n - nl;
        const double decrease = parent_gini * static_cast<double>(n) -
                                gini(left_low, left_high) * static_cast<double>(nl) -
                                gini(node.n_low - left_low, node.n_high - left_high) *
                                    static_cast<double>(nr);
        if (decrease > best_decrease) {
          best_decrease = decrease;
          best_feature = f;
          best_threshold = thr;
        }
      }
    }
    if (best_feature < 0 || best_decrease <= 0.0) return node_id;

    std::vector<int> left, right;
    for (int i : samples)
      (data[i].features[best_feature] <= best_threshold ? left : right).push_back(i);
    if (left.empty() || right.empty()) return node_id;

    importance[best_feature] += best_decrease;
    samples.clear();
    samples.shrink_to_fit();
    const int l = build(left);
    const int r = build(right);
    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    tree.nodes[node_id].left = l;
    tree.nodes[node_id].right = r;
    return node_id;
  }
};

bool predict_tree(const Tree& tree, const std::vector<double>& x) {
  int at = 0;
  while (tree.nodes[at].feature >= 0) {
    const TreeNode& nd = tree.nodes[at];
    at = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  const TreeNode& leaf = tree.nodes[at];
  return leaf.n_high > leaf.n_low;  // tie -> low
}

}  // namespace

ForestModel fit_forest(const std::vector<LabeledSignature>& data, const ForestConfig& cfg) {
  if (data.size() < 2) throw DegenerateDataError("forest needs at least 2 samples");
  const int nf = static_cast<int>(data.front().features.size());
  for (const auto& d : data)
    if (static_cast<int>(d.features.size()) != nf)
      throw ShapeError("inconsistent feature lengths");
  bool any_low = false, any_high = false;
  for (const auto& d : data) (d.high() ? any_high : any_low) = true;
  if (!any_low || !any_high)
    throw DegenerateDataError("forest training data has a single class");
  if (cfg.n_trees < 1) throw ConfigError("n_trees must be >= 1");
  const int mtry = cfg.mtry > 0 ? std::min(cfg.mtry, nf)
                                : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(nf))));

  ForestModel forest;
  forest.n_features = nf;
  forest.trees.resize(cfg.n_trees);
  std::vector<std::vector<double>> tree_importance(cfg.n_trees);

  auto build_one = [&](int t) {
    TreeBuilder builder(data, nf, mtry,
                        derive_seed(cfg.seed, Stream::forest_tree, static_cast<std::uint64_t>(t)));
    std::vector<int> bootstrap(data.size());
    for (auto& idx : bootstrap) idx = static_cast<int>(builder.rng.uniform_index(data.size()));
    builder.build(bootstrap);
    forest.trees[t] = std::move(builder.tree);
    tree_importance[t] = std::move(builder.importance);
  };

  if (cfg.parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int t = 0; t < cfg.n_trees; ++t) build_one(t);
  } else {
    for (int t = 0; t < cfg.n_trees; ++t) build_one(t);
  }

  forest.importance.assign(nf, 0.0);
  for (int t = 0; t < cfg.n_trees; ++t)
    for (int f = 0; f < nf; ++f) forest.importance[f] += tree_importance[t][f];
  double total = 0.0;
  for (double v : forest.importance) total += v;
  if (total > 0.0)
    for (auto& v : forest.importance) v /= total;
  return forest;
}

bool predict_forest(const ForestModel& forest, const std::vector<double>& features) {
  if (static_cast<int>(features.size()) != forest.n_features)
    throw ShapeError("feature vector length does not match the forest");
  long long votes_high = 0;
  for (const auto& t : forest.trees) votes_high += predict_tree(t, features) ? 1 : 0;
  return 2 * votes_high > static_cast<long long>(forest.trees.size());  // tie -> low
}

}  // namespace texsig::linker
