#pragma once

// Sampling-weighted confusion matrices with overall / producer's / user's
// accuracy, and stand-level validation against pure reference stands.
// Orientation throughout: predictions in rows, reference in columns.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forestarea/domain.hpp"
#include "forestarea/errors.hpp"
#include "forestarea/estimation.hpp"

namespace forestarea {

class ConfusionMatrix {
public:
  explicit ConfusionMatrix(std::vector<Domain> labels)
      : labels_(std::move(labels)),
        cells_(labels_.size() * labels_.size(), 0.0) {}

  const std::vector<Domain>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  void add(Domain predicted, Domain reference, double weight) {
    if (weight < 0.0) throw InputError("negative confusion weight");
    at(index_of(predicted), index_of(reference)) += weight;
  }

  double& at(std::size_t row, std::size_t col) {
    return cells_[row * labels_.size() + col];
  }
  double at(std::size_t row, std::size_t col) const {
    return cells_[row * labels_.size() + col];
  }

  double total_weight() const {
    double t = 0.0;
    for (double c : cells_) t += c;
    return t;
  }

  double row_marginal(std::size_t row) const {
    double t = 0.0;
    for (std::size_t c = 0; c < size(); ++c) t += at(row, c);
    return t;
  }
  double col_marginal(std::size_t col) const {
    double t = 0.0;
    for (std::size_t r = 0; r < size(); ++r) t += at(r, col);
    return t;
  }

  std::size_t index_of(Domain d) const {
    auto it = std::find(labels_.begin(), labels_.end(), d);
    if (it == labels_.end()) {
      throw InputError("label '" + std::string(domain_name(d)) +
                       "' not in confusion matrix");
    }
    return static_cast<std::size_t>(it - labels_.begin());
  }

private:
  std::vector<Domain> labels_;
  std::vector<double> cells_;
};

// Overall accuracy; nullopt when the matrix is empty.
inline std::optional<double> oa(const ConfusionMatrix& m) {
  const double total = m.total_weight();
  if (total <= 0.0) return std::nullopt;
  double diag = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) diag += m.at(i, i);
  return diag / total;
}

// User's accuracy: diagonal over prediction-row marginal.
inline std::optional<double> ua(const ConfusionMatrix& m, Domain label) {
  const std::size_t i = m.index_of(label);
  const double row = m.row_marginal(i);
  if (row <= 0.0) return std::nullopt;
  return m.at(i, i) / row;
}

// Producer's accuracy: diagonal over reference-column marginal.
inline std::optional<double> pa(const ConfusionMatrix& m, Domain label) {
  const std::size_t i = m.index_of(label);
  const double col = m.col_marginal(i);
  if (col <= 0.0) return std::nullopt;
  return m.at(i, i) / col;
}

// Field selectors for weighted_confusion.
enum class PlotField { Observed, Predicted, PredictedExactMask };

inline Domain plot_field(const SamplePlot& p, PlotField f) {
  switch (f) {
    case PlotField::Observed:
      return p.observed;
    case PlotField::Predicted:
      if (!p.predicted) {
        throw InputError("plot '" + p.id + "' has no prediction");
      }
      return *p.predicted;
    case PlotField::PredictedExactMask:
      if (!p.predicted_exact_mask) {
        throw InputError("plot '" + p.id + "' has no exact-mask prediction");
      }
      return *p.predicted_exact_mask;
  }
  throw InputError("bad plot field");
}

// Each plot adds its sampling weight 1/pi_i to cell (pred, ref).
inline ConfusionMatrix weighted_confusion(const std::vector<SamplePlot>& plots,
                                          std::vector<Domain> labels,
                                          PlotField ref_field,
                                          PlotField pred_field) {
  ConfusionMatrix m(std::move(labels));
  for (const auto& p : plots) {
    if (p.inclusion_probability <= 0.0) {
      throw InputError("plot '" + p.id +
                       "' has non-positive inclusion probability");
    }
    m.add(plot_field(p, pred_field), plot_field(p, ref_field),
          1.0 / p.inclusion_probability);
  }
  return m;
}

struct StandRecord {
  std::string stand_id;
  Domain reference = Domain::Spruce;  // pure-stand label
  std::map<Domain, long long> pixel_counts;
  double area_m2 = 0.0;
};

// Plurality class of the stand's map pixels; ties break by the fixed class
// order spruce < pine < deciduous (< non-forest).
inline Domain stand_plurality(const StandRecord& s) {
  static const Domain order[] = {Domain::Spruce, Domain::Pine,
                                 Domain::Deciduous, Domain::NonForest,
                                 Domain::Unstocked};
  long long best = -1;
  Domain best_d = Domain::Spruce;
  long long total = 0;
  for (Domain d : order) {
    auto it = s.pixel_counts.find(d);
    const long long n = (it != s.pixel_counts.end()) ? it->second : 0;
    total += n;
    if (n > best) {
      best = n;
      best_d = d;
    }
  }
  if (total <= 0) {
    throw InputError("stand '" + s.stand_id + "' has no counted pixels");
  }
  return best_d;
}

// Stand-level confusion; each stand counts once.
inline ConfusionMatrix stand_level_confusion(
    const std::vector<StandRecord>& stands, std::vector<Domain> labels) {
  ConfusionMatrix m(std::move(labels));
  for (const auto& s : stands) {
    m.add(stand_plurality(s), s.reference, 1.0);
  }
  return m;
}

}  // namespace forestarea
