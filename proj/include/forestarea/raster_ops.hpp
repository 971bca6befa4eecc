#pragma once

// Map operations: medoid compositing over image epochs, bilinear and
// nearest-neighbor resampling, NDVI, area-weighted circular plot
// extraction, tiled wall-to-wall classification, and class area totals.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "forestarea/domain.hpp"
#include "forestarea/errors.hpp"
#include "forestarea/forest.hpp"
#include "forestarea/raster.hpp"

namespace forestarea {

namespace tile_detail {

struct Tile {
  int r0, r1, c0, c1;
};

inline std::vector<Tile> make_tiles(const GridGeometry& geom, int tile_size) {
  std::vector<Tile> tiles;
  for (int r = 0; r < geom.nrows; r += tile_size) {
    for (int c = 0; c < geom.ncols; c += tile_size) {
      tiles.push_back({r, std::min(r + tile_size, geom.nrows), c,
                       std::min(c + tile_size, geom.ncols)});
    }
  }
  return tiles;
}

// Tiles are disjoint writes, so any schedule yields the same output.
template <typename F>
void for_each_tile(const std::vector<Tile>& tiles, int n_threads, F&& body) {
  const int nt = std::max(1, n_threads);
  if (nt == 1 || tiles.size() <= 1) {
    for (const auto& t : tiles) body(t);
    return;
  }
  std::vector<std::thread> threads;
  for (int w = 0; w < nt; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = static_cast<std::size_t>(w); i < tiles.size();
           i += static_cast<std::size_t>(nt)) {
        body(tiles[i]);
      }
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace tile_detail

// Per pixel, pick the epoch whose spectral vector minimizes the summed
// Euclidean distance to all other valid epochs; ties go to the earliest
// epoch. Epochs with nodata in any band at a pixel are not candidates
// there. A pixel with no valid epoch is nodata in the output.
inline MultiBandRaster medoid_composite(
    const std::vector<MultiBandRaster>& epochs) {
  if (epochs.empty()) throw InputError("medoid_composite: no epochs");
  const auto& first = epochs.front();
  for (const auto& e : epochs) {
    if (!(e.geom == first.geom) || e.n_bands() != first.n_bands()) {
      throw InputError("medoid_composite: epochs do not share grid or bands");
    }
  }
  const std::size_t nb = first.n_bands();
  MultiBandRaster out;
  out.geom = first.geom;
  out.nodata = first.nodata;
  out.band_names = first.band_names;
  out.bands.assign(nb, std::vector<double>(first.geom.cells(), first.nodata));

  const std::size_t cells = first.geom.cells();
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < cells; ++i) {
    valid.clear();
    for (std::size_t e = 0; e < epochs.size(); ++e) {
      bool ok = true;
      for (std::size_t b = 0; b < nb; ++b) {
        if (epochs[e].bands[b][i] == epochs[e].nodata) {
          ok = false;
          break;
        }
      }
      if (ok) valid.push_back(e);
    }
    if (valid.empty()) continue;
    std::size_t best = valid[0];
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t a : valid) {
      double sum = 0.0;
      for (std::size_t b2 : valid) {
        if (a == b2) continue;
        double d2 = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
          const double d = epochs[a].bands[b][i] - epochs[b2].bands[b][i];
          d2 += d * d;
        }
        sum += std::sqrt(d2);
      }
      if (sum < best_sum) {  // strict: earliest epoch wins ties
        best_sum = sum;
        best = a;
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      out.bands[b][i] = epochs[best].bands[b][i];
    }
  }
  return out;
}

// Bilinear interpolation of the 4 surrounding source cell centers at each
// target cell center. Targets outside the source center hull, or with any
// nodata neighbor, become nodata.
inline RasterGrid bilinear_resample(const RasterGrid& src,
                                    const GridGeometry& target) {
  RasterGrid out = make_grid(target, src.nodata, src.nodata);
  for (int r = 0; r < target.nrows; ++r) {
    const double y = target.center_y(r);
    const double gy = (src.geom.origin_y - y) / src.geom.cell_size - 0.5;
    for (int c = 0; c < target.ncols; ++c) {
      const double x = target.center_x(c);
      const double gx = (x - src.geom.origin_x) / src.geom.cell_size - 0.5;
      const int c0 = static_cast<int>(std::floor(gx));
      const int r0 = static_cast<int>(std::floor(gy));
      if (c0 < 0 || r0 < 0 || c0 + 1 >= src.geom.ncols ||
          r0 + 1 >= src.geom.nrows) {
        // exact hit on the outermost center row/column still resolves
        if (gx == static_cast<double>(c0) && gy == static_cast<double>(r0) &&
            c0 >= 0 && r0 >= 0 && c0 < src.geom.ncols && r0 < src.geom.nrows &&
            !src.is_nodata(r0, c0)) {
          out.at(r, c) = src.at(r0, c0);
        }
        continue;
      }
      if (src.is_nodata(r0, c0) || src.is_nodata(r0, c0 + 1) ||
          src.is_nodata(r0 + 1, c0) || src.is_nodata(r0 + 1, c0 + 1)) {
        continue;
      }
      const double fx = gx - c0;
      const double fy = gy - r0;
      out.at(r, c) = (1 - fy) * ((1 - fx) * src.at(r0, c0) +
                                 fx * src.at(r0, c0 + 1)) +
                     fy * ((1 - fx) * src.at(r0 + 1, c0) +
                           fx * src.at(r0 + 1, c0 + 1));
    }
  }
  return out;
}

// Nearest source cell center; equidistant points resolve toward the lower
// index. Targets outside the source extent become nodata.
inline RasterGrid nearest_resample(const RasterGrid& src,
                                   const GridGeometry& target) {
  RasterGrid out = make_grid(target, src.nodata, src.nodata);
  for (int r = 0; r < target.nrows; ++r) {
    const double y = target.center_y(r);
    for (int c = 0; c < target.ncols; ++c) {
      const double x = target.center_x(c);
      if (!src.geom.contains(x, y)) continue;
      const double gx = (x - src.geom.origin_x) / src.geom.cell_size - 0.5;
      const double gy = (src.geom.origin_y - y) / src.geom.cell_size - 0.5;
      int sc = static_cast<int>(std::ceil(gx - 0.5));
      int sr = static_cast<int>(std::ceil(gy - 0.5));
      sc = std::clamp(sc, 0, src.geom.ncols - 1);
      sr = std::clamp(sr, 0, src.geom.nrows - 1);
      out.at(r, c) = src.at(sr, sc);
    }
  }
  return out;
}

inline RasterGrid ndvi(const RasterGrid& nir, const RasterGrid& red) {
  if (!(nir.geom == red.geom)) throw InputError("ndvi: grid mismatch");
  RasterGrid out = make_grid(nir.geom, nir.nodata, nir.nodata);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double n = nir.values[i];
    const double r = red.values[i];
    if (n == nir.nodata || r == red.nodata) continue;
    const double denom = n + r;
    if (denom == 0.0) continue;
    out.values[i] = (n - r) / denom;
  }
  return out;
}

inline constexpr double kPlotRadiusM = 8.92;      // 250 m^2 circle
inline constexpr double kFallbackRadiusM = 18.0;  // empty-pixel fallback

struct ExtractResult {
  std::vector<double> values;
  bool used_fallback = false;
  bool missing = false;  // no valid pixel even at the fallback radius
};

namespace extract_detail {

// Circle/pixel overlap by 16x16 subcell midpoint sampling, counted as the
// fraction of midpoints inside the circle.
inline double overlap_fraction(const GridGeometry& geom, int row, int col,
                               double cx, double cy, double radius) {
  const double px = geom.origin_x + col * geom.cell_size;
  const double py = geom.origin_y - row * geom.cell_size;
  const double r2 = radius * radius;
  int inside = 0;
  for (int i = 0; i < 16; ++i) {
    const double sy = py - (i + 0.5) / 16.0 * geom.cell_size;
    const double dy = sy - cy;
    for (int j = 0; j < 16; ++j) {
      const double sx = px + (j + 0.5) / 16.0 * geom.cell_size;
      const double dx = sx - cx;
      if (dx * dx + dy * dy <= r2) ++inside;
    }
  }
  return inside / 256.0;
}

inline bool weighted_band_means(const MultiBandRaster& stack, double cx,
                                double cy, double radius,
                                std::vector<double>& out) {
  const auto& geom = stack.geom;
  const int c0 = std::max(
      0, static_cast<int>(std::floor((cx - radius - geom.origin_x) /
                                     geom.cell_size)));
  const int c1 = std::min(
      geom.ncols - 1,
      static_cast<int>(std::floor((cx + radius - geom.origin_x) /
                                  geom.cell_size)));
  const int r0 = std::max(
      0, static_cast<int>(std::floor((geom.origin_y - (cy + radius)) /
                                     geom.cell_size)));
  const int r1 = std::min(
      geom.nrows - 1,
      static_cast<int>(std::floor((geom.origin_y - (cy - radius)) /
                                  geom.cell_size)));
  out.assign(stack.n_bands(), 0.0);
  double total_w = 0.0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double w = overlap_fraction(geom, r, c, cx, cy, radius);
      if (w <= 0.0) continue;
      if (stack.any_nodata(r, c)) continue;
      total_w += w;
      for (std::size_t b = 0; b < stack.n_bands(); ++b) {
        out[b] += w * stack.at(b, r, c);
      }
    }
  }
  if (total_w <= 0.0) return false;
  for (auto& v : out) v /= total_w;
  return true;
}

}  // namespace extract_detail

// Area-weighted mean of the pixels intersecting the circular plot, per
// band. When every intersecting pixel is nodata, retries once with the
// 18 m fallback radius; if that is also empty the result is flagged
// missing.
inline ExtractResult extract_plot_predictors(const MultiBandRaster& stack,
                                             double cx, double cy,
                                             double radius_m = kPlotRadiusM) {
  if (!stack.geom.contains(cx, cy)) {
    throw InputError("plot center outside the image stack extent");
  }
  ExtractResult res;
  if (extract_detail::weighted_band_means(stack, cx, cy, radius_m,
                                          res.values)) {
    return res;
  }
  res.used_fallback = true;
  if (extract_detail::weighted_band_means(stack, cx, cy, kFallbackRadiusM,
                                          res.values)) {
    return res;
  }
  res.missing = true;
  res.values.assign(stack.n_bands(), stack.nodata);
  return res;
}

// Wall-to-wall classification. Cells that are forest in the mask and have
// valid features are classified by the forest model; non-forest mask cells
// and empty (nodata-feature) cells map to non-forest; mask nodata
// propagates. Output legend: forest class labels plus "non-forest".
// Processed in tiles; output does not depend on tile size or thread count.
inline ClassMap predict_map(const MultiBandRaster& features,
                            const ClassMap& forest_mask, const Forest& forest,
                            int tile_size = 256, int n_threads = 1) {
  if (!(features.geom == forest_mask.geom)) {
    throw InputError("predict_map: feature and mask grids differ");
  }
  if (features.n_bands() != forest.feature_names.size()) {
    throw InputError("predict_map: stack bands do not match model features");
  }
  std::vector<std::string> legend = forest.class_labels;
  if (std::find(legend.begin(), legend.end(), "non-forest") == legend.end()) {
    legend.push_back("non-forest");
  }
  ClassMap out = make_class_map(features.geom, legend);
  const int non_forest_code = out.code_of("non-forest");
  const int mask_forest_code = forest_mask.code_of("forest");

  const auto tiles = tile_detail::make_tiles(features.geom, tile_size);
  tile_detail::for_each_tile(tiles, n_threads, [&](const tile_detail::Tile& t) {
    std::vector<double> row(features.n_bands());
    for (int r = t.r0; r < t.r1; ++r) {
      for (int c = t.c0; c < t.c1; ++c) {
        const int mask = forest_mask.at(r, c);
        if (mask == ClassMap::kNoData) continue;  // stays nodata
        if (mask != mask_forest_code || features.any_nodata(r, c)) {
          out.at(r, c) = non_forest_code;
          continue;
        }
        for (std::size_t b = 0; b < features.n_bands(); ++b) {
          row[b] = features.at(b, r, c);
        }
        out.at(r, c) = predict_class(forest, row);
      }
    }
  });
  return out;
}

// Pixel-count area of a domain in km^2.
inline double synthetic_area(const ClassMap& map, Domain target) {
  std::vector<bool> matches(map.labels.size(), false);
  bool any_known = false;
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    const auto d = parse_domain(map.labels[i]);
    if (d) {
      any_known = true;
      matches[i] = domain_matches(*d, target);
    }
  }
  if (!any_known) {
    throw InputError("class-map legend has no recognizable domain labels");
  }
  long long count = 0;
  for (int code : map.codes) {
    if (code != ClassMap::kNoData && matches[static_cast<std::size_t>(code)]) {
      ++count;
    }
  }
  const double cell_km = map.geom.cell_size / 1000.0;
  return static_cast<double>(count) * cell_km * cell_km;
}

// Mapped in-domain area per design stratum, for building poststrata.
inline std::map<int, double> synthetic_area_by_stratum(
    const ClassMap& map, const ClassMap& stratum_map, Domain target) {
  if (!(map.geom == stratum_map.geom)) {
    throw InputError("class map and stratum map grids differ");
  }
  std::vector<bool> matches(map.labels.size(), false);
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    const auto d = parse_domain(map.labels[i]);
    if (d) matches[i] = domain_matches(*d, target);
  }
  std::map<int, long long> counts;
  for (std::size_t i = 0; i < map.codes.size(); ++i) {
    const int code = map.codes[i];
    const int s = stratum_map.codes[i];
    if (code == ClassMap::kNoData || s == ClassMap::kNoData) continue;
    if (matches[static_cast<std::size_t>(code)]) {
      ++counts[std::stoi(stratum_map.labels[static_cast<std::size_t>(s)])];
    }
  }
  const double cell_km = map.geom.cell_size / 1000.0;
  std::map<int, double> areas;
  for (const auto& [s, n] : counts) {
    areas[s] = static_cast<double>(n) * cell_km * cell_km;
  }
  return areas;
}

}  // namespace forestarea
