#pragma once

// Spherical variogram and universal kriging with a {1, covariate} drift
// basis, used to interpolate the design-stratum indicator between field
// plots. Observation counts are small, so the system is solved densely
// with partially pivoted LU.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "forestarea/errors.hpp"
#include "forestarea/raster.hpp"

namespace forestarea {

struct VariogramModel {
  double nugget = 0.0;
  double sill = 0.73;
  double range_m = 5600.0;
};

inline double spherical_gamma(double h, const VariogramModel& m) {
  if (h < 0.0) throw InputError("negative lag distance");
  if (m.nugget < 0.0 || m.sill <= m.nugget || m.range_m <= 0.0) {
    throw InputError("invalid variogram parameters");
  }
  if (h == 0.0) return m.nugget;
  if (h >= m.range_m) return m.sill;
  const double u = h / m.range_m;
  return m.nugget + (m.sill - m.nugget) * (1.5 * u - 0.5 * u * u * u);
}

struct KrigingObservation {
  double x = 0.0;
  double y = 0.0;
  double response = 0.0;
  double covariate = 0.0;
};

// Logit of elevation normalized to (0, 1) by e / (e_max + 1 m), clamped
// away from the endpoints.
inline double logit_elevation(double elevation_m, double max_elevation_m) {
  double u = elevation_m / (max_elevation_m + 1.0);
  u = std::min(1.0 - 1e-6, std::max(1e-6, u));
  return std::log(u / (1.0 - u));
}

namespace krig_detail {

// LU factorization with partial pivoting; A is n x n row-major.
struct LuFactors {
  std::vector<double> lu;
  std::vector<int> piv;
  int n = 0;
};

inline LuFactors lu_factor(std::vector<double> a, int n) {
  LuFactors f;
  f.lu = std::move(a);
  f.n = n;
  f.piv.resize(n);
  for (int i = 0; i < n; ++i) f.piv[i] = i;
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(f.lu[k * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(f.lu[i * n + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best < 1e-12) {
      throw NumericError(
          "singular kriging system (duplicate locations or collinear drift)");
    }
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(f.lu[k * n + j], f.lu[p * n + j]);
      std::swap(f.piv[k], f.piv[p]);
    }
    for (int i = k + 1; i < n; ++i) {
      f.lu[i * n + k] /= f.lu[k * n + k];
      const double m = f.lu[i * n + k];
      for (int j = k + 1; j < n; ++j) f.lu[i * n + j] -= m * f.lu[k * n + j];
    }
  }
  return f;
}

inline std::vector<double> lu_solve(const LuFactors& f,
                                    const std::vector<double>& b) {
  const int n = f.n;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = b[static_cast<std::size_t>(f.piv[i])];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) x[i] -= f.lu[i * n + j] * x[j];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= f.lu[i * n + j] * x[j];
    x[i] /= f.lu[i * n + i];
  }
  return x;
}

}  // namespace krig_detail

class UniversalKriging {
public:
  UniversalKriging(std::vector<KrigingObservation> obs,
                   const VariogramModel& model)
      : obs_(std::move(obs)), model_(model) {
    const int n = static_cast<int>(obs_.size());
    if (n < 3) throw InputError("universal kriging needs >= 3 observations");
    // Extended system: [Gamma F; F' 0] with drift basis {1, covariate}.
    const int m = n + 2;
    std::vector<double> a(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double dx = obs_[i].x - obs_[j].x;
        const double dy = obs_[i].y - obs_[j].y;
        a[static_cast<std::size_t>(i) * m + j] =
            (i == j) ? model_.nugget
                     : spherical_gamma(std::hypot(dx, dy), model_);
      }
      a[static_cast<std::size_t>(i) * m + n] = 1.0;
      a[static_cast<std::size_t>(i) * m + n + 1] = obs_[i].covariate;
      a[static_cast<std::size_t>(n) * m + i] = 1.0;
      a[static_cast<std::size_t>(n + 1) * m + i] = obs_[i].covariate;
    }
    factors_ = krig_detail::lu_factor(std::move(a), m);
  }

  struct Prediction {
    double value = 0.0;
    std::vector<double> weights;  // per observation, sum to 1
  };

  Prediction predict(double x, double y, double covariate) const {
    const int n = static_cast<int>(obs_.size());
    std::vector<double> rhs(static_cast<std::size_t>(n) + 2);
    for (int i = 0; i < n; ++i) {
      const double h = std::hypot(x - obs_[i].x, y - obs_[i].y);
      rhs[static_cast<std::size_t>(i)] =
          (h == 0.0) ? model_.nugget : spherical_gamma(h, model_);
    }
    rhs[static_cast<std::size_t>(n)] = 1.0;
    rhs[static_cast<std::size_t>(n) + 1] = covariate;
    const auto sol = krig_detail::lu_solve(factors_, rhs);
    Prediction p;
    p.weights.assign(sol.begin(), sol.begin() + n);
    double v = 0.0;
    for (int i = 0; i < n; ++i) v += p.weights[static_cast<std::size_t>(i)] *
                                     obs_[i].response;
    p.value = v;
    return p;
  }

  const std::vector<KrigingObservation>& observations() const { return obs_; }

private:
  std::vector<KrigingObservation> obs_;
  VariogramModel model_;
  krig_detail::LuFactors factors_;
};

// Interpolates over a grid whose covariate is given per cell (nodata cells
// propagate).
inline RasterGrid universal_kriging_predict(
    const std::vector<KrigingObservation>& obs, const VariogramModel& model,
    const RasterGrid& covariate_grid) {
  UniversalKriging uk(obs, model);
  RasterGrid out = make_grid(covariate_grid.geom, covariate_grid.nodata,
                             covariate_grid.nodata);
  for (int r = 0; r < out.geom.nrows; ++r) {
    for (int c = 0; c < out.geom.ncols; ++c) {
      if (covariate_grid.is_nodata(r, c)) continue;
      out.at(r, c) = uk.predict(out.geom.center_x(c), out.geom.center_y(r),
                                covariate_grid.at(r, c))
                         .value;
    }
  }
  return out;
}

// Maps the interpolated indicator surface to the two design strata:
// values >= cut become stratum 2 (mountain), the rest stratum 1.
inline ClassMap threshold_to_stratum(const RasterGrid& predicted,
                                     double cut = 0.5) {
  ClassMap m = make_class_map(predicted.geom, {"1", "2"});
  for (std::size_t i = 0; i < predicted.values.size(); ++i) {
    if (predicted.values[i] == predicted.nodata) continue;
    m.codes[i] = predicted.values[i] >= cut ? 1 : 0;
  }
  return m;
}

}  // namespace forestarea
