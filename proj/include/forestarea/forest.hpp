#pragma once

// Random forest classifier: bagged CART trees, Gini impurity splits on
// rank-midpoint thresholds, majority vote. Trees are seeded independently
// from (seed, tree index) so serial and parallel training produce the same
// forest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "forestarea/errors.hpp"
#include "forestarea/rng.hpp"

namespace forestarea {

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;
  std::vector<double> features;  // n x p, row-major
  std::vector<int> labels;       // indices into class_labels
  std::vector<double> metric_weights;  // sampling weights for accuracy; may be empty

  std::size_t n() const { return labels.size(); }
  std::size_t p() const { return feature_names.size(); }
  double feature(std::size_t row, std::size_t col) const {
    return features[row * p() + col];
  }
  double metric_weight(std::size_t row) const {
    return metric_weights.empty() ? 1.0 : metric_weights[row];
  }
};

// feature < 0 marks a leaf; values <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_class = -1;
};

struct Tree {
  std::vector<TreeNode> nodes;
};

struct ForestParams {
  int ntrees = 500;
  int mtry = 0;  // 0: floor(p / 3), at least 1
};

struct Forest {
  std::vector<Tree> trees;
  int ntrees = 0;
  int mtry = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_labels;
  std::vector<double> importance;  // mean decrease in Gini per feature
};

namespace rf_detail {

struct SplitResult {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double decrease = 0.0;
};

inline double gini(const std::vector<int>& counts, int n) {
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (int c : counts) {
    const double f = static_cast<double>(c) / n;
    sum += f * f;
  }
  return 1.0 - sum;
}

struct TreeBuilder {
  const Dataset& data;
  int mtry;
  int n_classes;
  Rng rng;
  Tree tree;
  std::vector<double>& importance;  // accumulated across trees
  std::size_t n_bootstrap = 0;

  TreeBuilder(const Dataset& d, int mtry_, int n_classes_, std::uint64_t seed,
              std::vector<double>& imp)
      : data(d), mtry(mtry_), n_classes(n_classes_), rng(seed),
        importance(imp) {}

  int majority(const std::vector<std::size_t>& idx) const {
    std::vector<int> counts(n_classes, 0);
    for (auto i : idx) ++counts[data.labels[i]];
    int best = 0;
    for (int c = 1; c < n_classes; ++c) {
      if (counts[c] > counts[best]) best = c;  // tie: lowest class index
    }
    return best;
  }

  bool pure(const std::vector<std::size_t>& idx) const {
    for (std::size_t i = 1; i < idx.size(); ++i) {
      if (data.labels[idx[i]] != data.labels[idx[0]]) return false;
    }
    return true;
  }

  SplitResult best_split(const std::vector<std::size_t>& idx) {
    const int n = static_cast<int>(idx.size());
    std::vector<int> parent_counts(n_classes, 0);
    for (auto i : idx) ++parent_counts[data.labels[i]];
    const double parent_gini = gini(parent_counts, n);

    // mtry features without replacement, draw order fixed by the stream.
    std::vector<int> feats(data.p());
    std::iota(feats.begin(), feats.end(), 0);
    const int m = std::min<int>(mtry, static_cast<int>(feats.size()));
    for (int i = 0; i < m; ++i) {
      std::swap(feats[i], feats[i + static_cast<int>(
                                      rng.below(feats.size() - i))]);
    }

    SplitResult best;
    std::vector<std::pair<double, int>> vals(idx.size());
    std::vector<int> left_counts(n_classes);
    for (int fi = 0; fi < m; ++fi) {
      const int f = feats[fi];
      for (std::size_t k = 0; k < idx.size(); ++k) {
        vals[k] = {data.feature(idx[k], f), data.labels[idx[k]]};
      }
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::fill(left_counts.begin(), left_counts.end(), 0);
      int nl = 0;
      for (int k = 0; k + 1 < n; ++k) {
        ++left_counts[vals[k].second];
        ++nl;
        if (vals[k].first == vals[k + 1].first) continue;
        std::vector<int> right_counts = parent_counts;
        for (int c = 0; c < n_classes; ++c) right_counts[c] -= left_counts[c];
        const int nr = n - nl;
        const double child =
            (nl * gini(left_counts, nl) + nr * gini(right_counts, nr)) / n;
        const double dec = parent_gini - child;
        // strictly better wins; ties keep the earlier (draw order, then
        // lower threshold)
        if (dec > best.decrease + 1e-15 || !best.found) {
          if (dec <= 1e-12) continue;
          best.found = true;
          best.feature = f;
          best.decrease = dec;
          best.threshold = vals[k].first + 0.5 * (vals[k + 1].first -
                                                  vals[k].first);
        }
      }
    }
    return best;
  }

  int build(std::vector<std::size_t> idx) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (idx.size() < 2 || pure(idx)) {
      tree.nodes[node_id].leaf_class = majority(idx);
      return node_id;
    }
    const SplitResult s = best_split(idx);
    if (!s.found) {
      tree.nodes[node_id].leaf_class = majority(idx);
      return node_id;
    }
    importance[static_cast<std::size_t>(s.feature)] +=
        s.decrease * static_cast<double>(idx.size()) /
        static_cast<double>(n_bootstrap);

    std::vector<std::size_t> left, right;
    for (auto i : idx) {
      (data.feature(i, s.feature) <= s.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    tree.nodes[node_id].feature = s.feature;
    tree.nodes[node_id].threshold = s.threshold;
    const int l = build(std::move(left));
    const int r = build(std::move(right));
    tree.nodes[node_id].left = l;
    tree.nodes[node_id].right = r;
    return node_id;
  }
};

inline std::uint64_t tree_seed(std::uint64_t forest_seed, int tree_index) {
  std::uint64_t s = forest_seed + static_cast<std::uint64_t>(tree_index);
  return splitmix64(s);
}

}  // namespace rf_detail

inline int resolve_mtry(const ForestParams& params, std::size_t p) {
  int mtry = params.mtry;
  if (mtry == 0) mtry = static_cast<int>(p) / 3;
  if (mtry < 1) mtry = 1;
  return mtry;
}

// Trains one tree on a bootstrap sample. sample_weights, when given, bias
// the bootstrap draw (weighted resampling); splits stay unweighted.
inline Tree train_tree(const Dataset& data, int mtry, int n_classes,
                       std::uint64_t seed,
                       std::span<const double> sample_weights,
                       std::vector<double>& importance) {
  rf_detail::TreeBuilder b(data, mtry, n_classes, seed, importance);
  const std::size_t n = data.n();
  b.n_bootstrap = n;
  std::vector<std::size_t> idx(n);
  if (sample_weights.empty()) {
    for (std::size_t i = 0; i < n; ++i) idx[i] = b.rng.below(n);
  } else {
    std::vector<double> cum(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (sample_weights[i] < 0.0) throw InputError("negative sample weight");
      acc += sample_weights[i];
      cum[i] = acc;
    }
    if (acc <= 0.0) throw InputError("sample weights sum to zero");
    for (std::size_t i = 0; i < n; ++i) {
      const double u = b.rng.uniform() * acc;
      idx[i] = static_cast<std::size_t>(
          std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
      if (idx[i] >= n) idx[i] = n - 1;
    }
  }
  b.build(std::move(idx));
  return std::move(b.tree);
}

inline Forest train(const Dataset& data, const ForestParams& params,
                    std::uint64_t seed,
                    std::span<const double> sample_weights = {},
                    int n_threads = 1) {
  if (data.n() == 0 || data.p() == 0) throw InputError("empty training data");
  if (params.ntrees < 1) throw InputError("ntrees must be >= 1");
  const int n_classes = static_cast<int>(data.class_labels.size());
  {
    std::vector<bool> present(n_classes, false);
    int distinct = 0;
    for (int l : data.labels) {
      if (l < 0 || l >= n_classes) throw InputError("label out of range");
      if (!present[l]) {
        present[l] = true;
        ++distinct;
      }
    }
    if (distinct < 2) {
      throw NumericError("training data contains a single class");
    }
  }
  if (params.mtry > static_cast<int>(data.p())) {
    throw InputError("mtry exceeds the number of features");
  }
  const int mtry = resolve_mtry(params, data.p());

  Forest forest;
  forest.ntrees = params.ntrees;
  forest.mtry = mtry;
  forest.seed = seed;
  forest.feature_names = data.feature_names;
  forest.class_labels = data.class_labels;
  forest.trees.resize(static_cast<std::size_t>(params.ntrees));

  // One importance slot per tree so the final reduction runs in tree-index
  // order regardless of how trees were distributed over threads.
  std::vector<std::vector<double>> imps;
  const int nt = std::max(1, n_threads);
  imps.assign(static_cast<std::size_t>(params.ntrees),
              std::vector<double>(data.p(), 0.0));

  auto worker = [&](int thread_id) {
    for (int t = thread_id; t < params.ntrees; t += nt) {
      forest.trees[static_cast<std::size_t>(t)] =
          train_tree(data, mtry, n_classes, rf_detail::tree_seed(seed, t),
                     sample_weights, imps[static_cast<std::size_t>(t)]);
    }
  };
  if (nt == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (int i = 0; i < nt; ++i) threads.emplace_back(worker, i);
    for (auto& th : threads) th.join();
  }

  forest.importance.assign(data.p(), 0.0);
  for (const auto& part : imps) {
    for (std::size_t f = 0; f < data.p(); ++f) forest.importance[f] += part[f];
  }
  for (auto& v : forest.importance) v /= static_cast<double>(params.ntrees);
  return forest;
}

inline int predict_tree(const Tree& tree, std::span<const double> features) {
  int node = 0;
  for (;;) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (nd.feature < 0) return nd.leaf_class;
    node = features[static_cast<std::size_t>(nd.feature)] <= nd.threshold
               ? nd.left
               : nd.right;
  }
}

// Majority vote over trees; tie-break by class-label order.
inline int predict_class(const Forest& forest,
                         std::span<const double> features) {
  if (features.size() != forest.feature_names.size()) {
    throw InputError("feature vector length mismatch");
  }
  std::vector<int> votes(forest.class_labels.size(), 0);
  for (const auto& t : forest.trees) {
    ++votes[static_cast<std::size_t>(predict_tree(t, features))];
  }
  int best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(c);
    }
  }
  return best;
}

inline const std::vector<double>& gini_importance(const Forest& forest) {
  return forest.importance;
}

}  // namespace forestarea
