#pragma once

// Synthetic landscape generator and Monte Carlo harness. One fixed
// landscape with a known census, many stratified sample draws; checks
// estimator bias, variance calibration, CI coverage, and relative
// efficiency against the census truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "forestarea/errors.hpp"
#include "forestarea/estimation.hpp"
#include "forestarea/raster.hpp"
#include "forestarea/raster_ops.hpp"
#include "forestarea/rng.hpp"

namespace forestarea {

inline std::uint64_t splitmix64_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

inline const std::vector<std::string>& sim_class_labels() {
  static const std::vector<std::string> labels = {"spruce", "pine",
                                                  "deciduous", "non-forest"};
  return labels;
}

struct StratumConfig {
  int id = 0;
  double width_fraction = 0.0;   // share of map columns (vertical band)
  double mix[4] = {0, 0, 0, 0};  // spruce, pine, deciduous, non-forest
};

struct LandscapeConfig {
  std::uint64_t seed = 1;
  int nrows = 0;
  int ncols = 0;
  double cell_size_m = 16.0;
  double patch_scale_m = 200.0;
  std::vector<StratumConfig> strata;
  // feature model: per class, one mean per band; shared noise sd
  std::vector<std::vector<double>> class_band_means;
  double noise_sd = 1.0;

  void validate() const {
    if (nrows <= 0 || ncols <= 0 || cell_size_m <= 0) {
      throw InputError("bad landscape dimensions");
    }
    if (patch_scale_m < cell_size_m) {
      throw InputError("patch scale must be >= cell size");
    }
    if (strata.empty()) throw InputError("no strata configured");
    double wsum = 0.0;
    for (const auto& s : strata) {
      wsum += s.width_fraction;
      double msum = 0.0;
      for (double m : s.mix) {
        if (m < 0) throw InputError("negative class fraction");
        msum += m;
      }
      if (std::abs(msum - 1.0) > 1e-9) {
        throw InputError("class mixture of stratum " + std::to_string(s.id) +
                         " does not sum to 1");
      }
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
      throw InputError("stratum width fractions do not sum to 1");
    }
    if (class_band_means.size() != 4) {
      throw InputError("feature model needs means for all 4 classes");
    }
  }
};

struct Landscape {
  ClassMap truth;
  ClassMap stratum_map;  // labels are stratum ids as strings
  MultiBandRaster features;
  std::vector<Stratum> strata;  // areas from the stratum map
};

namespace sim_detail {

// Iterated box blur, separable; approximates a smooth Gaussian-ish field
// at the configured patch scale.
inline void box_blur(std::vector<double>& v, int nrows, int ncols,
                     int radius) {
  if (radius < 1) return;
  std::vector<double> tmp(v.size());
  // horizontal
  for (int r = 0; r < nrows; ++r) {
    double acc = 0.0;
    const double* row = v.data() + static_cast<std::size_t>(r) * ncols;
    double* out = tmp.data() + static_cast<std::size_t>(r) * ncols;
    int lo = 0, hi = -1;
    for (int c = 0; c < ncols; ++c) {
      while (hi < std::min(ncols - 1, c + radius)) acc += row[++hi];
      while (lo < c - radius) acc -= row[lo++];
      out[c] = acc / (hi - lo + 1);
    }
  }
  // vertical
  for (int c = 0; c < ncols; ++c) {
    double acc = 0.0;
    int lo = 0, hi = -1;
    for (int r = 0; r < nrows; ++r) {
      while (hi < std::min(nrows - 1, r + radius)) {
        acc += tmp[static_cast<std::size_t>(++hi) * ncols + c];
      }
      while (lo < r - radius) {
        acc -= tmp[static_cast<std::size_t>(lo++) * ncols + c];
      }
      v[static_cast<std::size_t>(r) * ncols + c] = acc / (hi - lo + 1);
    }
  }
}

}  // namespace sim_detail

// Class patches from thresholded smoothed noise; per stratum, the smoothed
// field is cut at its sample quantiles so realized class fractions track
// the configured mixture closely.
inline Landscape generate_landscape(const LandscapeConfig& config) {
  config.validate();
  const int nrows = config.nrows, ncols = config.ncols;
  GridGeometry geom;
  geom.origin_x = 0.0;
  geom.origin_y = nrows * config.cell_size_m;
  geom.cell_size = config.cell_size_m;
  geom.nrows = nrows;
  geom.ncols = ncols;

  Landscape land;

  // stratum bands over columns
  std::vector<std::string> stratum_labels;
  for (const auto& s : config.strata) {
    stratum_labels.push_back(std::to_string(s.id));
  }
  land.stratum_map = make_class_map(geom, stratum_labels);
  std::vector<int> col_stratum(ncols);
  {
    double cum = 0.0;
    std::vector<int> band_end(config.strata.size());
    for (std::size_t s = 0; s < config.strata.size(); ++s) {
      cum += config.strata[s].width_fraction;
      band_end[s] = std::min(
          ncols, static_cast<int>(std::lround(cum * ncols)));
    }
    int s = 0;
    for (int c = 0; c < ncols; ++c) {
      while (s + 1 < static_cast<int>(band_end.size()) && c >= band_end[s]) ++s;
      col_stratum[c] = s;
    }
  }
  for (int r = 0; r < nrows; ++r) {
    for (int c = 0; c < ncols; ++c) {
      land.stratum_map.at(r, c) = col_stratum[c];
    }
  }

  // smoothed noise field
  std::vector<double> field(geom.cells());
  {
    Rng rng(splitmix64_seed(config.seed, 0x11));
    for (auto& v : field) v = rng.uniform();
    const int radius = std::max(
        1, static_cast<int>(config.patch_scale_m / config.cell_size_m));
    for (int pass = 0; pass < 3; ++pass) {
      sim_detail::box_blur(field, nrows, ncols, radius);
    }
  }

  // per-stratum quantile thresholds -> classes
  land.truth = make_class_map(geom, sim_class_labels());
  for (std::size_t s = 0; s < config.strata.size(); ++s) {
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < geom.cells(); ++i) {
      if (land.stratum_map.codes[i] == static_cast<int>(s)) cells.push_back(i);
    }
    // rank the stratum's cells by field value and hand out classes by
    // position, so realized counts hit the configured mixture exactly
    std::sort(cells.begin(), cells.end(),
              [&](std::size_t a, std::size_t b) {
                return field[a] != field[b] ? field[a] < field[b] : a < b;
              });
    const double n_cells = static_cast<double>(cells.size());
    std::size_t bound[4];
    double cum = 0.0;
    for (int k = 0; k < 3; ++k) {
      cum += config.strata[s].mix[k];
      bound[k] = static_cast<std::size_t>(std::llround(cum * n_cells));
    }
    bound[3] = cells.size();
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k) {
      for (; pos < bound[k] && pos < cells.size(); ++pos) {
        land.truth.codes[cells[pos]] = k;
      }
    }
  }

  // features
  const std::size_t nb = config.class_band_means[0].size();
  land.features.geom = geom;
  land.features.nodata = -9999.0;
  for (std::size_t b = 0; b < nb; ++b) {
    land.features.band_names.push_back("band" + std::to_string(b + 1));
  }
  land.features.bands.assign(nb, std::vector<double>(geom.cells()));
  {
    Rng rng(splitmix64_seed(config.seed, 0x22));
    for (std::size_t i = 0; i < geom.cells(); ++i) {
      const int cls = land.truth.codes[i];
      for (std::size_t b = 0; b < nb; ++b) {
        land.features.bands[b][i] =
            config.class_band_means[static_cast<std::size_t>(cls)][b] +
            config.noise_sd * rng.normal();
      }
    }
  }

  // stratum areas from cell counts
  const double cell_km2 = (config.cell_size_m / 1000.0) *
                          (config.cell_size_m / 1000.0);
  for (std::size_t s = 0; s < config.strata.size(); ++s) {
    long long count = 0;
    for (int code : land.stratum_map.codes) {
      if (code == static_cast<int>(s)) ++count;
    }
    Stratum st;
    st.id = config.strata[s].id;
    st.area_km2 = static_cast<double>(count) * cell_km2;
    land.strata.push_back(st);
  }
  return land;
}

enum class SamplingDesign { StratifiedSRS, StratifiedSystematic };

inline Domain label_to_domain(const std::string& label) {
  return parse_domain_or_throw(label);
}

// Draws a stratified sample from the landscape; observed labels come from
// the truth map, predictions (when a predicted map is given) from it.
// Plot weight is A_h / n_h realized.
inline std::vector<SamplePlot> draw_sample(const Landscape& land,
                                           SamplingDesign design,
                                           const std::map<int, int>& n_per_stratum,
                                           std::uint64_t seed,
                                           const ClassMap* predicted = nullptr,
                                           std::vector<Stratum>* strata_out = nullptr) {
  const auto& geom = land.truth.geom;
  std::vector<SamplePlot> plots;
  std::vector<Stratum> strata = land.strata;

  auto add_plot = [&](std::size_t cell, int stratum_idx) {
    SamplePlot p;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%08zu", cell);
    p.id = buf;
    p.stratum_id = strata[static_cast<std::size_t>(stratum_idx)].id;
    const int r = static_cast<int>(cell / static_cast<std::size_t>(geom.ncols));
    const int c = static_cast<int>(cell % static_cast<std::size_t>(geom.ncols));
    p.x = geom.center_x(c);
    p.y = geom.center_y(r);
    p.observed = label_to_domain(
        land.truth.labels[static_cast<std::size_t>(land.truth.codes[cell])]);
    if (predicted) {
      p.predicted = label_to_domain(predicted->labels[static_cast<std::size_t>(
          predicted->codes[cell])]);
    }
    plots.push_back(std::move(p));
  };

  if (design == SamplingDesign::StratifiedSRS) {
    Rng rng(splitmix64_seed(seed, 0x5a));
    for (std::size_t s = 0; s < strata.size(); ++s) {
      std::vector<std::size_t> cells;
      for (std::size_t i = 0; i < geom.cells(); ++i) {
        if (land.stratum_map.codes[i] == static_cast<int>(s)) {
          cells.push_back(i);
        }
      }
      auto it = n_per_stratum.find(strata[s].id);
      if (it == n_per_stratum.end()) {
        throw InputError("no sample size for stratum " +
                         std::to_string(strata[s].id));
      }
      const int n = it->second;
      if (n < 2 || static_cast<std::size_t>(n) > cells.size()) {
        throw InputError("bad sample size for stratum " +
                         std::to_string(strata[s].id));
      }
      for (int k = 0; k < n; ++k) {  // partial Fisher-Yates, without replacement
        const std::size_t j =
            static_cast<std::size_t>(k) + rng.below(cells.size() - k);
        std::swap(cells[static_cast<std::size_t>(k)], cells[j]);
        add_plot(cells[static_cast<std::size_t>(k)], static_cast<int>(s));
      }
      strata[s].sampling_weight_km2 = strata[s].area_km2 / n;
    }
  } else {
    // one systematic grid over the whole map with a seeded random offset
    long long total_n = 0;
    for (const auto& [id, n] : n_per_stratum) total_n += n;
    const int spacing = std::max(
        1, static_cast<int>(std::sqrt(static_cast<double>(geom.cells()) /
                                      static_cast<double>(total_n))));
    Rng rng(splitmix64_seed(seed, 0x5b));
    const int ox = static_cast<int>(rng.below(spacing));
    const int oy = static_cast<int>(rng.below(spacing));
    std::vector<int> realized(strata.size(), 0);
    for (int r = oy; r < geom.nrows; r += spacing) {
      for (int c = ox; c < geom.ncols; c += spacing) {
        const std::size_t cell =
            static_cast<std::size_t>(r) * geom.ncols + c;
        const int s = land.stratum_map.codes[cell];
        add_plot(cell, s);
        ++realized[static_cast<std::size_t>(s)];
      }
    }
    for (std::size_t s = 0; s < strata.size(); ++s) {
      if (realized[s] < 2) {
        throw InputError("systematic sample left stratum " +
                         std::to_string(strata[s].id) + " with < 2 plots");
      }
      strata[s].sampling_weight_km2 = strata[s].area_km2 / realized[s];
    }
  }

  for (auto& p : plots) {
    for (const auto& s : strata) {
      if (s.id == p.stratum_id) {
        p.inclusion_probability = 1.0 / s.sampling_weight_km2;
      }
    }
  }
  if (strata_out) *strata_out = strata;
  return plots;
}

enum class ClassifierKind { Perfect, Noisy, RandomLabels };

// Error-injected prediction map: Perfect copies the truth, Noisy keeps the
// true label with the given accuracy and otherwise draws one of the other
// classes, RandomLabels draws uniformly regardless of the truth.
inline ClassMap make_predicted_map(const ClassMap& truth, ClassifierKind kind,
                                   double accuracy, std::uint64_t seed) {
  ClassMap pred = truth;
  if (kind == ClassifierKind::Perfect) return pred;
  Rng rng(splitmix64_seed(seed, 0x33));
  const int k = static_cast<int>(truth.labels.size());
  for (auto& code : pred.codes) {
    if (code == ClassMap::kNoData) continue;
    if (kind == ClassifierKind::RandomLabels) {
      code = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    } else if (rng.uniform() >= accuracy) {
      const int shift =
          1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k - 1)));
      code = (code + shift) % k;
    }
  }
  return pred;
}

struct McRow {
  std::string estimator;
  Domain domain = Domain::Spruce;
  int replicates = 0;
  int used = 0;     // replicates where the estimator was applicable
  int skipped = 0;  // recorded, never silently dropped
  double census_km2 = 0.0;
  double mean_total = 0.0;
  double empirical_variance = 0.0;
  double mean_estimated_variance = 0.0;
  double coverage = 0.0;  // 95% CI, normal approximation
  double mean_re = 0.0;   // over replicates with finite RE
  int re_used = 0;
};

struct McReport {
  int replicates = 0;
  std::vector<McRow> rows;
};

struct McOptions {
  SamplingDesign design = SamplingDesign::StratifiedSRS;
  std::map<int, int> n_per_stratum;
  std::vector<Domain> domains = {Domain::Spruce, Domain::Pine,
                                 Domain::Deciduous, Domain::ForestTotal};
  bool run_ma = true;
  bool run_ps = true;
};

inline McReport monte_carlo(const Landscape& land, const ClassMap& predicted,
                            const McOptions& opt, int replicates,
                            std::uint64_t seed, int n_threads = 1) {
  if (replicates < 100) throw InputError("need at least 100 replicates");

  struct RepResult {
    // per domain: totals and estimated variances, applicability
    std::vector<double> direct_total, direct_var;
    std::vector<double> ma_total, ma_var;
    std::vector<double> ps_total, ps_var;
    std::vector<char> ps_ok;
  };
  std::vector<RepResult> reps(static_cast<std::size_t>(replicates));

  std::vector<double> census(opt.domains.size());
  std::vector<double> synth(opt.domains.size());
  std::vector<std::map<int, double>> in_area(opt.domains.size());
  for (std::size_t d = 0; d < opt.domains.size(); ++d) {
    census[d] = synthetic_area(land.truth, opt.domains[d]);
    synth[d] = synthetic_area(predicted, opt.domains[d]);
    in_area[d] =
        synthetic_area_by_stratum(predicted, land.stratum_map, opt.domains[d]);
  }

  auto run_replicate = [&](int r) {
    RepResult& out = reps[static_cast<std::size_t>(r)];
    const std::uint64_t rep_seed =
        splitmix64_seed(seed, 0x1000 + static_cast<std::uint64_t>(r));
    std::vector<Stratum> strata;
    const auto plots =
        draw_sample(land, opt.design, opt.n_per_stratum, rep_seed, &predicted,
                    &strata);
    const std::size_t nd = opt.domains.size();
    out.direct_total.resize(nd);
    out.direct_var.resize(nd);
    out.ma_total.resize(nd);
    out.ma_var.resize(nd);
    out.ps_total.resize(nd);
    out.ps_var.resize(nd);
    out.ps_ok.assign(nd, 0);
    for (std::size_t d = 0; d < nd; ++d) {
      const Domain dom = opt.domains[d];
      const Estimate direct = direct_estimate(plots, strata, dom);
      out.direct_total[d] = direct.total;
      out.direct_var[d] = direct.variance;
      if (opt.run_ma) {
        const Estimate ma =
            model_assisted_estimate(plots, strata, dom, synth[d]);
        out.ma_total[d] = ma.total;
        out.ma_var[d] = ma.variance;
      }
      if (opt.run_ps) {
        try {
          const Estimate ps = poststratified_estimate(
              plots, strata, binary_groups(plots, strata, dom, in_area[d]),
              dom);
          out.ps_total[d] = ps.total;
          out.ps_var[d] = ps.variance;
          out.ps_ok[d] = 1;
        } catch (const NumericError&) {
          out.ps_ok[d] = 0;  // empty or singleton group; replicate skipped
        }
      }
    }
  };

  const int nt = std::max(1, n_threads);
  if (nt == 1) {
    for (int r = 0; r < replicates; ++r) run_replicate(r);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < nt; ++w) {
      threads.emplace_back([&, w] {
        for (int r = w; r < replicates; r += nt) run_replicate(r);
      });
    }
    for (auto& th : threads) th.join();
  }

  McReport report;
  report.replicates = replicates;
  auto summarize = [&](const std::string& name, std::size_t d,
                       auto get_total, auto get_var, auto get_ok) {
    McRow row;
    row.estimator = name;
    row.domain = opt.domains[d];
    row.replicates = replicates;
    row.census_km2 = census[d];
    double sum = 0.0, sum_var = 0.0;
    int used = 0;
    for (int r = 0; r < replicates; ++r) {
      if (!get_ok(reps[static_cast<std::size_t>(r)], d)) continue;
      ++used;
      sum += get_total(reps[static_cast<std::size_t>(r)], d);
      sum_var += get_var(reps[static_cast<std::size_t>(r)], d);
    }
    row.used = used;
    row.skipped = replicates - used;
    if (used > 1) {
      row.mean_total = sum / used;
      row.mean_estimated_variance = sum_var / used;
      double ss = 0.0;
      int covered = 0;
      double re_sum = 0.0;
      int re_used = 0;
      for (int r = 0; r < replicates; ++r) {
        const auto& rep = reps[static_cast<std::size_t>(r)];
        if (!get_ok(rep, d)) continue;
        const double t = get_total(rep, d);
        ss += (t - row.mean_total) * (t - row.mean_total);
        const double se = std::sqrt(get_var(rep, d));
        if (std::abs(t - census[d]) <= 1.96 * se) ++covered;
        const double re = relative_efficiency(rep.direct_var[d],
                                              get_var(rep, d));
        if (std::isfinite(re)) {
          re_sum += re;
          ++re_used;
        }
      }
      row.empirical_variance = ss / (used - 1);
      row.coverage = static_cast<double>(covered) / used;
      row.mean_re = re_used > 0 ? re_sum / re_used : 0.0;
      row.re_used = re_used;
    }
    report.rows.push_back(row);
  };

  for (std::size_t d = 0; d < opt.domains.size(); ++d) {
    summarize("direct", d,
              [](const RepResult& r, std::size_t i) { return r.direct_total[i]; },
              [](const RepResult& r, std::size_t i) { return r.direct_var[i]; },
              [](const RepResult&, std::size_t) { return true; });
    if (opt.run_ma) {
      summarize("ma", d,
                [](const RepResult& r, std::size_t i) { return r.ma_total[i]; },
                [](const RepResult& r, std::size_t i) { return r.ma_var[i]; },
                [](const RepResult&, std::size_t) { return true; });
    }
    if (opt.run_ps) {
      summarize("ps", d,
                [](const RepResult& r, std::size_t i) { return r.ps_total[i]; },
                [](const RepResult& r, std::size_t i) { return r.ps_var[i]; },
                [](const RepResult& r, std::size_t i) {
                  return r.ps_ok[i] != 0;
                });
    }
  }
  return report;
}

}  // namespace forestarea
