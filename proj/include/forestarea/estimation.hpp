#pragma once

// Design-based area estimators for stratified samples: direct expansion,
// model-assisted (synthetic map total plus a design-weighted residual
// correction), and poststratification on map-derived groups, each with its
// variance, plus relative efficiency between estimators.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forestarea/domain.hpp"
#include "forestarea/errors.hpp"

namespace forestarea {

struct SamplePlot {
  std::string id;
  int stratum_id = 0;
  double x = 0.0;
  double y = 0.0;
  Domain observed = Domain::NonForest;
  std::optional<Domain> predicted;             // cross-validated, within mask
  std::optional<Domain> predicted_exact_mask;  // as if the mask were error-free
  double inclusion_probability = 0.0;          // 1 / sampling weight (km^-2)
  std::vector<double> predictors;
  bool in_model_set = false;
};

struct Stratum {
  int id = 0;
  double area_km2 = 0.0;
  double sampling_weight_km2 = 0.0;  // land area represented by one plot
};

enum class VarianceStatus { Complete, Partial, Unavailable };

struct Estimate {
  double total = 0.0;     // km^2
  double variance = 0.0;  // km^4
  double se = 0.0;        // km^2
  std::optional<double> cv;  // se / total, only when total > 0
  std::optional<double> correction;  // MA correction term C
  std::optional<double> synthetic;   // map-based total
  std::optional<double> relative_efficiency;
  VarianceStatus variance_status = VarianceStatus::Complete;
};

// Full mode rejects strata where the variance is undefined (n_h < 2);
// EstimateOnly still returns the total and flags the variance as partial.
enum class EstimateMode { Full, EstimateOnly };

namespace detail {

// Neumaier compensated sum. Keeps per-stratum accumulation independent of
// how partial sums were grouped, so parallel and serial runs agree bitwise.
class CompensatedSum {
public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Plots grouped per stratum and ordered by plot id, which fixes the
// summation order regardless of input order.
inline std::map<int, std::vector<const SamplePlot*>> group_by_stratum(
    const std::vector<SamplePlot>& plots,
    const std::vector<Stratum>& strata) {
  std::map<int, std::vector<const SamplePlot*>> by_stratum;
  for (const auto& s : strata) by_stratum[s.id];
  for (const auto& p : plots) {
    auto it = by_stratum.find(p.stratum_id);
    if (it == by_stratum.end()) {
      throw InputError("plot '" + p.id + "' references unknown stratum " +
                       std::to_string(p.stratum_id));
    }
    it->second.push_back(&p);
  }
  for (auto& [id, v] : by_stratum) {
    std::sort(v.begin(), v.end(), [](const SamplePlot* a, const SamplePlot* b) {
      return a->id < b->id;
    });
  }
  return by_stratum;
}

// Mean and sample variance (n-1 denominator) of per-plot values given by f,
// in fixed plot-id order with compensated sums.
template <typename F>
std::pair<double, double> mean_and_sample_variance(
    const std::vector<const SamplePlot*>& plots, F&& f) {
  const std::size_t n = plots.size();
  CompensatedSum sum;
  for (const auto* p : plots) sum.add(f(*p));
  const double mean = sum.value() / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  CompensatedSum ss;
  for (const auto* p : plots) {
    const double d = f(*p) - mean;
    ss.add(d * d);
  }
  return {mean, ss.value() / static_cast<double>(n - 1)};
}

// Shared stratified estimator core: total = sum_h A_h * mean_h(f),
// variance = sum_h A_h^2 S_h^2 / n_h.
template <typename F>
Estimate stratified_estimate(const std::vector<SamplePlot>& plots,
                             const std::vector<Stratum>& strata,
                             EstimateMode mode, F&& value_of) {
  const auto by_stratum = group_by_stratum(plots, strata);

  std::map<int, const Stratum*> stratum_by_id;
  for (const auto& s : strata) stratum_by_id[s.id] = &s;

  CompensatedSum total;
  CompensatedSum variance;
  bool partial = false;
  for (const auto& [id, splots] : by_stratum) {
    const Stratum& st = *stratum_by_id.at(id);
    if (splots.empty()) {
      throw InputError("stratum " + std::to_string(id) +
                       " has no sample plots");
    }
    if (splots.size() < 2) {
      if (mode == EstimateMode::Full) {
        throw NumericError("stratum " + std::to_string(id) +
                           " has fewer than 2 plots; variance undefined");
      }
      partial = true;
    }
    const auto [mean, s2] = mean_and_sample_variance(splots, value_of);
    total.add(st.area_km2 * mean);
    if (splots.size() >= 2) {
      variance.add(st.area_km2 * st.area_km2 * s2 /
                   static_cast<double>(splots.size()));
    }
  }

  Estimate e;
  e.total = total.value();
  e.variance = std::max(0.0, variance.value());
  e.se = std::sqrt(e.variance);
  if (e.total > 0.0) e.cv = e.se / e.total;
  e.variance_status = partial ? VarianceStatus::Partial
                              : VarianceStatus::Complete;
  return e;
}

}  // namespace detail

// Direct (expansion) estimate of the area of `target`.
inline Estimate direct_estimate(const std::vector<SamplePlot>& plots,
                                const std::vector<Stratum>& strata,
                                Domain target,
                                EstimateMode mode = EstimateMode::Full) {
  return detail::stratified_estimate(
      plots, strata, mode, [target](const SamplePlot& p) {
        return domain_matches(p.observed, target) ? 1.0 : 0.0;
      });
}

// Model-assisted estimate: synthetic map area plus the design-weighted sum
// of residuals y_i - yhat_i. Variance uses the per-stratum sample variance
// of the residuals.
inline Estimate model_assisted_estimate(const std::vector<SamplePlot>& plots,
                                        const std::vector<Stratum>& strata,
                                        Domain target, double synthetic_km2,
                                        EstimateMode mode = EstimateMode::Full) {
  if (synthetic_km2 < 0.0) throw InputError("synthetic area must be >= 0");
  for (const auto& p : plots) {
    if (!p.predicted) {
      throw InputError("plot '" + p.id + "' has no prediction");
    }
  }
  auto residual = [target](const SamplePlot& p) {
    const double y = domain_matches(p.observed, target) ? 1.0 : 0.0;
    const double yhat = domain_matches(*p.predicted, target) ? 1.0 : 0.0;
    return y - yhat;
  };
  Estimate e = detail::stratified_estimate(plots, strata, mode, residual);

  // Correction from inclusion probabilities, plot-id order per stratum.
  const auto by_stratum = detail::group_by_stratum(plots, strata);
  detail::CompensatedSum correction;
  for (const auto& [id, splots] : by_stratum) {
    for (const auto* p : splots) {
      if (p->inclusion_probability <= 0.0) {
        throw InputError("plot '" + p->id +
                         "' has non-positive inclusion probability");
      }
      correction.add(residual(*p) / p->inclusion_probability);
    }
  }
  e.correction = correction.value();
  e.synthetic = synthetic_km2;
  e.total = synthetic_km2 + *e.correction;
  e.cv = (e.total > 0.0) ? std::optional<double>(e.se / e.total)
                         : std::nullopt;
  return e;
}

// Variance of the model-assisted estimator computed with residuals against
// the exact-mask predictions. A diagnostic that separates the variance
// contribution of the forest mask from the species map; the total is not
// meaningful and is reported as 0.
inline Estimate ma_variance_exact_mask(const std::vector<SamplePlot>& plots,
                                       const std::vector<Stratum>& strata,
                                       Domain target,
                                       EstimateMode mode = EstimateMode::Full) {
  for (const auto& p : plots) {
    if (!p.predicted_exact_mask) {
      throw InputError("plot '" + p.id + "' has no exact-mask prediction");
    }
  }
  Estimate e = detail::stratified_estimate(
      plots, strata, mode, [target](const SamplePlot& p) {
        const double y = domain_matches(p.observed, target) ? 1.0 : 0.0;
        const double yhat =
            domain_matches(*p.predicted_exact_mask, target) ? 1.0 : 0.0;
        return y - yhat;
      });
  e.total = 0.0;
  e.cv.reset();
  return e;
}

struct PostStratumGroup {
  bool in_domain = false;
  double mapped_area_km2 = 0.0;
  std::vector<std::string> plot_ids;
};

// groups: per design stratum, the map-derived groups partitioning its plots.
inline Estimate poststratified_estimate(
    const std::vector<SamplePlot>& plots, const std::vector<Stratum>& strata,
    const std::map<int, std::vector<PostStratumGroup>>& groups, Domain target,
    EstimateMode mode = EstimateMode::Full) {
  std::map<std::string, const SamplePlot*> plot_by_id;
  for (const auto& p : plots) plot_by_id[p.id] = &p;

  detail::CompensatedSum total;
  detail::CompensatedSum variance;
  bool partial = false;
  for (const auto& st : strata) {
    auto git = groups.find(st.id);
    if (git == groups.end()) {
      throw InputError("no poststratum groups for stratum " +
                       std::to_string(st.id));
    }
    for (const auto& g : git->second) {
      std::vector<const SamplePlot*> members;
      for (const auto& pid : g.plot_ids) {
        auto it = plot_by_id.find(pid);
        if (it == plot_by_id.end()) {
          throw InputError("poststratum group references unknown plot '" +
                           pid + "'");
        }
        members.push_back(it->second);
      }
      std::sort(members.begin(), members.end(),
                [](const SamplePlot* a, const SamplePlot* b) {
                  return a->id < b->id;
                });
      if (members.empty()) {
        if (g.mapped_area_km2 > 0.0) {
          throw NumericError(
              "empty poststratum group with positive mapped area in stratum " +
              std::to_string(st.id) + "; PS not applicable");
        }
        continue;
      }
      if (members.size() < 2) {
        if (mode == EstimateMode::Full) {
          throw NumericError("poststratum group with a single plot in stratum " +
                             std::to_string(st.id) + "; variance undefined");
        }
        partial = true;
      }
      const auto [mean, s2] = detail::mean_and_sample_variance(
          members, [target](const SamplePlot& p) {
            return domain_matches(p.observed, target) ? 1.0 : 0.0;
          });
      total.add(g.mapped_area_km2 * mean);
      if (members.size() >= 2) {
        variance.add(g.mapped_area_km2 * g.mapped_area_km2 * s2 /
                     static_cast<double>(members.size()));
      }
    }
  }

  Estimate e;
  e.total = total.value();
  e.variance = std::max(0.0, variance.value());
  e.se = std::sqrt(e.variance);
  if (e.total > 0.0) e.cv = e.se / e.total;
  e.variance_status = partial ? VarianceStatus::Partial
                              : VarianceStatus::Complete;
  return e;
}

// Convenience: build the binary in-domain / out-of-domain groups of the
// poststratified estimator from mapped in-domain areas per stratum and the
// plots' map predictions.
inline std::map<int, std::vector<PostStratumGroup>> binary_groups(
    const std::vector<SamplePlot>& plots, const std::vector<Stratum>& strata,
    Domain target, const std::map<int, double>& in_domain_area_km2) {
  std::map<int, std::vector<PostStratumGroup>> groups;
  for (const auto& st : strata) {
    auto it = in_domain_area_km2.find(st.id);
    const double a_in = (it != in_domain_area_km2.end()) ? it->second : 0.0;
    if (a_in > st.area_km2 + 1e-9) {
      throw InputError("mapped in-domain area exceeds area of stratum " +
                       std::to_string(st.id));
    }
    PostStratumGroup in, out;
    in.in_domain = true;
    in.mapped_area_km2 = a_in;
    out.in_domain = false;
    out.mapped_area_km2 = st.area_km2 - a_in;
    groups[st.id] = {in, out};
  }
  for (const auto& p : plots) {
    if (!p.predicted) throw InputError("plot '" + p.id + "' has no prediction");
    auto& g = groups.at(p.stratum_id);
    const bool in = domain_matches(*p.predicted, target);
    g[in ? 0 : 1].plot_ids.push_back(p.id);
  }
  return groups;
}

// Ratio of variances, direct over alternative. +inf when only the
// alternative variance is zero, NaN when both are zero (reported as
// "undefined" downstream).
inline double relative_efficiency(double v_direct, double v_alt) {
  if (v_direct < 0.0 || v_alt < 0.0) {
    throw InputError("variances must be non-negative");
  }
  if (v_alt == 0.0) {
    return v_direct == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                           : std::numeric_limits<double>::infinity();
  }
  return v_direct / v_alt;
}

}  // namespace forestarea
