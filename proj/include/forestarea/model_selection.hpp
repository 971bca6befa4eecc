#pragma once

// k-fold cross-validation, parameter tuning, and the forward/backward
// variable-selection scheme. Selection decisions use cross-validated,
// sampling-weighted overall accuracy throughout.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "forestarea/errors.hpp"
#include "forestarea/forest.hpp"
#include "forestarea/rng.hpp"

namespace forestarea {

inline std::uint64_t splitmix_fold_seed(std::uint64_t seed, int fold) {
  std::uint64_t s = seed ^ (0xf01df01dULL + static_cast<std::uint64_t>(fold));
  return splitmix64(s);
}

inline std::uint64_t splitmix64_copy(std::uint64_t s) { return splitmix64(s); }

struct CvResult {
  std::vector<int> predictions;  // per sample, cross-validated
  double weighted_oa = 0.0;
  std::vector<std::string> warnings;
};

inline Dataset subset_features(const Dataset& data,
                               const std::vector<int>& feature_idx) {
  Dataset out;
  for (int f : feature_idx) {
    if (f < 0 || f >= static_cast<int>(data.p())) {
      throw InputError("feature index out of range");
    }
    out.feature_names.push_back(data.feature_names[static_cast<std::size_t>(f)]);
  }
  out.class_labels = data.class_labels;
  out.labels = data.labels;
  out.metric_weights = data.metric_weights;
  out.features.resize(data.n() * feature_idx.size());
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t k = 0; k < feature_idx.size(); ++k) {
      out.features[i * feature_idx.size() + k] =
          data.feature(i, static_cast<std::size_t>(feature_idx[k]));
    }
  }
  return out;
}

inline double weighted_oa_of(const Dataset& data,
                             const std::vector<int>& predictions) {
  double hit = 0.0, total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double w = data.metric_weight(i);
    total += w;
    if (predictions[i] == data.labels[i]) hit += w;
  }
  if (total <= 0.0) throw InputError("zero total metric weight");
  return hit / total;
}

// Seeded fold assignment: shuffled index i goes to fold (position mod k).
inline std::vector<int> kfold_assignment(std::size_t n, int k,
                                         std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(splitmix64(seed));
  rng.shuffle(idx);
  std::vector<int> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    fold[idx[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return fold;
}

inline CvResult kfold_cv(const Dataset& data, int k, const ForestParams& params,
                         std::uint64_t seed, int n_threads = 1) {
  if (k < 2) throw InputError("k must be >= 2");
  if (data.n() < static_cast<std::size_t>(k)) {
    throw InputError("fewer samples than folds");
  }
  const std::vector<int> fold = kfold_assignment(data.n(), k, seed);

  CvResult result;
  result.predictions.assign(data.n(), -1);
  for (int f = 0; f < k; ++f) {
    Dataset train_set;
    train_set.feature_names = data.feature_names;
    train_set.class_labels = data.class_labels;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (fold[i] == f) {
        test_idx.push_back(i);
      } else {
        train_set.labels.push_back(data.labels[i]);
        for (std::size_t c = 0; c < data.p(); ++c) {
          train_set.features.push_back(data.feature(i, c));
        }
      }
    }
    {
      std::vector<bool> present(data.class_labels.size(), false);
      for (int l : train_set.labels) present[static_cast<std::size_t>(l)] = true;
      for (std::size_t c = 0; c < present.size(); ++c) {
        if (!present[c]) {
          result.warnings.push_back("class '" + data.class_labels[c] +
                                    "' absent from training data of fold " +
                                    std::to_string(f));
        }
      }
    }
    int distinct = 0;
    {
      std::vector<bool> present(data.class_labels.size(), false);
      for (int l : train_set.labels) {
        if (!present[static_cast<std::size_t>(l)]) {
          present[static_cast<std::size_t>(l)] = true;
          ++distinct;
        }
      }
    }
    if (distinct < 2) {
      // degenerate fold: predict the only class seen
      const int only = train_set.labels.empty() ? 0 : train_set.labels[0];
      for (auto i : test_idx) result.predictions[i] = only;
      result.warnings.push_back("fold " + std::to_string(f) +
                                " trained on a single class");
      continue;
    }
    const Forest forest =
        train(train_set, params, splitmix_fold_seed(seed, f), {}, n_threads);
    std::vector<double> row(data.p());
    for (auto i : test_idx) {
      for (std::size_t c = 0; c < data.p(); ++c) row[c] = data.feature(i, c);
      result.predictions[i] = predict_class(forest, row);
    }
  }
  result.weighted_oa = weighted_oa_of(data, result.predictions);
  return result;
}

struct SelectionStep {
  std::string action;  // add | remove | keep
  std::string feature;
  double oa_before = 0.0;
  double oa_after = 0.0;
};

struct SelectionResult {
  std::vector<int> selected;  // feature indices into the full dataset
  std::vector<SelectionStep> trace;
  double final_oa = 0.0;
  std::vector<std::string> warnings;
};

// Majority-class weighted frequency: the OA of an empty (constant) model.
inline double majority_baseline_oa(const Dataset& data) {
  std::vector<double> w(data.class_labels.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    w[static_cast<std::size_t>(data.labels[i])] += data.metric_weight(i);
    total += data.metric_weight(i);
  }
  return *std::max_element(w.begin(), w.end()) / total;
}

// Forward pass: add candidates (in given order) that strictly improve the
// cross-validated OA. Backward pass: visit surviving features in ascending
// Gini importance and drop any whose removal does not reduce the OA.
inline SelectionResult select_variables(const Dataset& data,
                                        const std::vector<int>& candidates,
                                        const ForestParams& params, int k,
                                        std::uint64_t seed, int n_threads = 1) {
  if (candidates.empty()) throw InputError("no candidate features");
  auto cv_oa = [&](const std::vector<int>& feats) {
    return kfold_cv(subset_features(data, feats), k, params, seed, n_threads)
        .weighted_oa;
  };

  SelectionResult result;
  double current_oa = majority_baseline_oa(data);

  // forward
  double best_single_oa = -1.0;
  int best_single = candidates.front();
  for (int f : candidates) {
    std::vector<int> trial = result.selected;
    trial.push_back(f);
    const double oa = cv_oa(trial);
    if (result.selected.empty()) {
      const double single = cv_oa({f});
      if (single > best_single_oa) {
        best_single_oa = single;
        best_single = f;
      }
    }
    if (oa > current_oa) {
      result.trace.push_back({"add", data.feature_names[static_cast<std::size_t>(f)],
                              current_oa, oa});
      result.selected.push_back(f);
      current_oa = oa;
    }
  }
  if (result.selected.empty()) {
    // nothing beat the majority baseline; fall back to the best single
    result.warnings.push_back(
        "no candidate improved on the majority baseline; keeping best single "
        "feature");
    result.selected.push_back(best_single);
    result.trace.push_back(
        {"add", data.feature_names[static_cast<std::size_t>(best_single)],
         current_oa, best_single_oa});
    current_oa = best_single_oa;
  }

  // backward, ascending importance from a forest on the selected set
  if (result.selected.size() > 1) {
    const Forest forest =
        train(subset_features(data, result.selected), params,
              splitmix64_copy(seed ^ 0xbac0ULL), {}, n_threads);
    const auto& imp = gini_importance(forest);
    std::vector<std::size_t> order(result.selected.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return imp[a] < imp[b];
                     });
    std::vector<int> visit;
    for (auto o : order) visit.push_back(result.selected[o]);

    for (int f : visit) {
      if (result.selected.size() <= 1) break;
      std::vector<int> trial;
      for (int g : result.selected) {
        if (g != f) trial.push_back(g);
      }
      const double oa = cv_oa(trial);
      const auto& name = data.feature_names[static_cast<std::size_t>(f)];
      if (oa >= current_oa) {
        result.trace.push_back({"remove", name, current_oa, oa});
        result.selected = trial;
        current_oa = oa;
      } else {
        result.trace.push_back({"keep", name, current_oa, current_oa});
      }
    }
  }
  result.final_oa = current_oa;
  return result;
}

struct TuneRow {
  int ntrees = 0;
  int mtry = 0;
  double oa = 0.0;
};

// Grid evaluation only; the caller decides (the defaults were kept in the
// workflow this mirrors).
inline std::vector<TuneRow> tune(const Dataset& data,
                                 const std::vector<int>& ntrees_grid,
                                 const std::vector<int>& mtry_grid, int k,
                                 std::uint64_t seed, int n_threads = 1) {
  if (ntrees_grid.empty() || mtry_grid.empty()) {
    throw InputError("empty tuning grid");
  }
  std::vector<TuneRow> rows;
  for (int nt : ntrees_grid) {
    for (int mt : mtry_grid) {
      ForestParams params;
      params.ntrees = nt;
      params.mtry = mt;
      rows.push_back(
          {nt, mt, kfold_cv(data, k, params, seed, n_threads).weighted_oa});
    }
  }
  return rows;
}

}  // namespace forestarea
