// forestarea: batch CLI over the library. Subcommands mirror the workflow:
// composite imagery, extract plot predictors, train/select/tune the
// classifier, predict wall-to-wall maps, compute weighted accuracies, run
// the area estimators nationally and for sub-populations, krige the
// stratum map, and run the Monte Carlo simulation harness.
//
// Exit codes: 0 success, 2 input error, 3 numeric/degenerate-model error,
// 4 gate inapplicable (smallarea --strict).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forestarea/accuracy.hpp"
#include "forestarea/estimation.hpp"
#include "forestarea/forest.hpp"
#include "forestarea/forest_io.hpp"
#include "forestarea/io_csv.hpp"
#include "forestarea/kriging.hpp"
#include "forestarea/model_selection.hpp"
#include "forestarea/raster.hpp"
#include "forestarea/raster_ops.hpp"
#include "forestarea/simulation.hpp"
#include "forestarea/smallarea.hpp"

namespace fa = forestarea;
namespace fs = std::filesystem;

namespace {

int default_threads() {
  if (const char* env = std::getenv("FORESTAREA_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      // fall through to default
    }
  }
  return 1;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s,
                                      const std::string& context) {
  std::vector<double> out;
  for (const auto& item : split_csv_list(s)) {
    out.push_back(fa::csv_detail::to_double(item, context));
  }
  return out;
}

std::vector<fa::Domain> resolve_targets(const std::string& target) {
  if (target == "all") {
    return {fa::Domain::Spruce, fa::Domain::Pine, fa::Domain::Deciduous,
            fa::Domain::ForestTotal};
  }
  return {fa::parse_domain_or_throw(target)};
}

// Fixed class order for accuracy tables.
std::vector<fa::Domain> label_order(const std::vector<fa::SamplePlot>& plots) {
  const fa::Domain order[] = {fa::Domain::Spruce, fa::Domain::Pine,
                              fa::Domain::Deciduous, fa::Domain::NonForest,
                              fa::Domain::Unstocked};
  std::vector<fa::Domain> labels;
  for (fa::Domain d : order) {
    bool present = false;
    for (const auto& p : plots) {
      if (p.observed == d || (p.predicted && *p.predicted == d)) {
        present = true;
        break;
      }
    }
    if (present) labels.push_back(d);
  }
  return labels;
}

fa::Dataset dataset_from_plots(const fa::PlotTable& table,
                               const std::vector<int>& feature_idx,
                               bool model_set_only) {
  fa::Dataset data;
  for (int f : feature_idx) {
    data.feature_names.push_back(
        table.feature_names[static_cast<std::size_t>(f)]);
  }
  // class labels in fixed domain order, restricted to observed classes
  const fa::Domain order[] = {fa::Domain::Spruce, fa::Domain::Pine,
                              fa::Domain::Deciduous, fa::Domain::NonForest,
                              fa::Domain::Unstocked};
  std::map<fa::Domain, int> class_of;
  for (fa::Domain d : order) {
    for (const auto& p : table.plots) {
      if (model_set_only && !p.in_model_set) continue;
      if (p.observed == d) {
        class_of[d] = static_cast<int>(data.class_labels.size());
        data.class_labels.emplace_back(fa::domain_name(d));
        break;
      }
    }
  }
  for (const auto& p : table.plots) {
    if (model_set_only && !p.in_model_set) continue;
    if (p.predictors.size() != table.feature_names.size()) {
      throw fa::InputError("plot '" + p.id + "' has missing feature values");
    }
    data.labels.push_back(class_of.at(p.observed));
    data.metric_weights.push_back(1.0 / p.inclusion_probability);
    for (int f : feature_idx) {
      data.features.push_back(p.predictors[static_cast<std::size_t>(f)]);
    }
  }
  return data;
}

std::vector<int> resolve_feature_indices(const fa::PlotTable& table,
                                         const std::string& features) {
  std::vector<int> idx;
  if (features.empty()) {
    for (std::size_t i = 0; i < table.feature_names.size(); ++i) {
      idx.push_back(static_cast<int>(i));
    }
    return idx;
  }
  for (const auto& name : split_csv_list(features)) {
    bool found = false;
    for (std::size_t i = 0; i < table.feature_names.size(); ++i) {
      if (table.feature_names[i] == name) {
        idx.push_back(static_cast<int>(i));
        found = true;
        break;
      }
    }
    if (!found) throw fa::InputError("unknown feature column '" + name + "'");
  }
  return idx;
}

fa::LandscapeConfig landscape_config_from_kv(
    const std::map<std::string, std::string>& kv,
    std::map<int, int>& n_per_stratum) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw fa::InputError("config missing key '" + key + "'");
    return it->second;
  };
  fa::LandscapeConfig cfg;
  cfg.seed = std::stoull(get("seed"));
  cfg.nrows = fa::csv_detail::to_int(get("nrows"), "config");
  cfg.ncols = fa::csv_detail::to_int(get("ncols"), "config");
  cfg.cell_size_m = fa::csv_detail::to_double(get("cell_size_m"), "config");
  cfg.patch_scale_m = fa::csv_detail::to_double(get("patch_scale_m"), "config");
  cfg.noise_sd = fa::csv_detail::to_double(get("noise_sd"), "config");
  for (const auto& sid : split_csv_list(get("strata"))) {
    fa::StratumConfig sc;
    sc.id = fa::csv_detail::to_int(sid, "config strata");
    sc.width_fraction =
        fa::csv_detail::to_double(get("stratum." + sid + ".width"), "config");
    const auto mix = parse_double_list(get("stratum." + sid + ".mix"),
                                       "config stratum mix");
    if (mix.size() != 4) {
      throw fa::InputError("stratum." + sid +
                           ".mix needs 4 values (spruce,pine,deciduous,"
                           "non-forest)");
    }
    for (int i = 0; i < 4; ++i) sc.mix[i] = mix[static_cast<std::size_t>(i)];
    n_per_stratum[sc.id] =
        fa::csv_detail::to_int(get("stratum." + sid + ".n"), "config");
    cfg.strata.push_back(sc);
  }
  for (const auto* cls : {"spruce", "pine", "deciduous", "non-forest"}) {
    cfg.class_band_means.push_back(
        parse_double_list(get(std::string("mean.") + cls), "config means"));
  }
  return cfg;
}

void write_mc_report(const fa::McReport& report, const std::string& csv_path,
                     const std::string& summary_path) {
  fa::atomic_write(csv_path, [&](const std::string& tmp) {
    std::ofstream out(tmp);
    out.precision(17);
    out << "estimator,domain,replicates,used,skipped,census_km2,mean_total,"
           "bias,empirical_variance,mean_estimated_variance,variance_ratio,"
           "coverage,mean_re,re_used\n";
    for (const auto& r : report.rows) {
      const double ratio = r.empirical_variance > 0
                               ? r.mean_estimated_variance /
                                     r.empirical_variance
                               : 0.0;
      out << r.estimator << "," << fa::domain_name(r.domain) << ","
          << r.replicates << "," << r.used << "," << r.skipped << ","
          << r.census_km2 << "," << r.mean_total << ","
          << r.mean_total - r.census_km2 << "," << r.empirical_variance << ","
          << r.mean_estimated_variance << "," << ratio << "," << r.coverage
          << "," << r.mean_re << "," << r.re_used << "\n";
    }
  });
  fa::atomic_write(summary_path, [&](const std::string& tmp) {
    std::ofstream out(tmp);
    out << "Monte Carlo report (" << report.replicates << " replicates)\n";
    for (const auto& r : report.rows) {
      char buf[256];
      const double ratio = r.empirical_variance > 0
                               ? r.mean_estimated_variance /
                                     r.empirical_variance
                               : 0.0;
      std::snprintf(buf, sizeof(buf),
                    "%-7s %-12s census %.1f km2  bias %+.1f  var-ratio %.3f  "
                    "coverage %.3f  mean RE %.2f (n=%d, skipped %d)\n",
                    r.estimator.c_str(),
                    std::string(fa::domain_name(r.domain)).c_str(),
                    r.census_km2, r.mean_total - r.census_km2, ratio,
                    r.coverage, r.mean_re, r.used, r.skipped);
      out << buf;
    }
  });
}

struct MetricRow {
  std::string name;
  std::optional<double> value;
};

void write_metrics_csv(const fa::ConfusionMatrix& m, const std::string& path) {
  fa::atomic_write(path, [&](const std::string& tmp) {
    std::ofstream out(tmp);
    out << "metric,label,percent\n";
    auto emit = [&](const std::string& metric, const std::string& label,
                    std::optional<double> v) {
      out << metric << "," << label << ",";
      if (v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *v);
        out << buf;
      } else {
        out << "undefined";
      }
      out << "\n";
    };
    emit("oa", "", fa::oa(m));
    for (const auto& l : m.labels()) {
      emit("pa", std::string(fa::domain_name(l)), fa::pa(m, l));
      emit("ua", std::string(fa::domain_name(l)), fa::ua(m, l));
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forestarea: tree-species mapping and design-based area "
               "estimation toolkit"};
  app.require_subcommand(1);
  int threads = default_threads();
  app.add_option("--threads", threads,
                 "worker threads (env FORESTAREA_THREADS)");

  // ---- composite ----
  auto* cmd_composite = app.add_subcommand(
      "composite", "medoid composite of image epochs (band manifests)");
  std::vector<std::string> epoch_manifests;
  std::string out_dir;
  std::string ndvi_bands;
  cmd_composite->add_option("--epoch", epoch_manifests,
                            "band manifest per epoch, earliest first")
      ->required()
      ->expected(1, -1);
  cmd_composite->add_option("--out-dir", out_dir, "output directory")
      ->required();
  cmd_composite->add_option("--ndvi", ndvi_bands,
                            "append an NDVI band, e.g. --ndvi nir,red");

  // ---- extract ----
  auto* cmd_extract = app.add_subcommand(
      "extract", "area-weighted plot predictors from a band stack");
  std::string stack_path, plots_path, out_path;
  double radius = fa::kPlotRadiusM;
  cmd_extract->add_option("--stack", stack_path, "band manifest")->required();
  cmd_extract->add_option("--plots", plots_path, "plot CSV")->required();
  cmd_extract->add_option("--out", out_path, "output plot CSV")->required();
  cmd_extract->add_option("--radius", radius, "plot radius in meters");

  // ---- train ----
  auto* cmd_train =
      app.add_subcommand("train", "train the random forest classifier");
  std::string features_arg, forest_out;
  int ntrees = 500, mtry = 0, kfolds = 10;
  std::uint64_t seed = 42;
  bool all_plots = false;
  cmd_train->add_option("--plots", plots_path, "plot CSV")->required();
  cmd_train->add_option("--features", features_arg,
                        "comma list of feature columns (default: all)");
  cmd_train->add_option("--ntrees", ntrees, "number of trees");
  cmd_train->add_option("--mtry", mtry, "features per split (0: p/3)");
  cmd_train->add_option("--seed", seed, "RNG seed");
  cmd_train->add_flag("--all-plots", all_plots,
                      "ignore the in_model_set flag");
  cmd_train->add_option("--out", forest_out, "forest JSON output")->required();

  // ---- select-vars ----
  auto* cmd_select = app.add_subcommand(
      "select-vars", "forward/backward variable selection by CV accuracy");
  cmd_select->add_option("--plots", plots_path, "plot CSV")->required();
  cmd_select->add_option("--features", features_arg,
                         "candidate columns in order (default: all)");
  cmd_select->add_option("--ntrees", ntrees, "number of trees");
  cmd_select->add_option("--mtry", mtry, "features per split (0: p/3)");
  cmd_select->add_option("--k", kfolds, "CV folds");
  cmd_select->add_option("--seed", seed, "RNG seed");
  cmd_select->add_option("--out", out_path, "selection trace CSV")->required();

  // ---- tune ----
  auto* cmd_tune =
      app.add_subcommand("tune", "grid evaluation of ntrees and mtry");
  std::string ntrees_grid_arg = "100,200,300,400,500,600,700,800,900,1000";
  std::string mtry_grid_arg;
  cmd_tune->add_option("--plots", plots_path, "plot CSV")->required();
  cmd_tune->add_option("--features", features_arg,
                       "feature columns (default: all)");
  cmd_tune->add_option("--ntrees-grid", ntrees_grid_arg, "comma list");
  cmd_tune->add_option("--mtry-grid", mtry_grid_arg,
                       "comma list (default: p/1..p/10)");
  cmd_tune->add_option("--k", kfolds, "CV folds");
  cmd_tune->add_option("--seed", seed, "RNG seed");
  cmd_tune->add_option("--out", out_path, "result table CSV")->required();

  // ---- predict ----
  auto* cmd_predict = app.add_subcommand(
      "predict", "wall-to-wall species map within the forest mask");
  std::string mask_path, forest_path;
  int tile_size = 256;
  cmd_predict->add_option("--stack", stack_path, "band manifest")->required();
  cmd_predict->add_option("--mask", mask_path, "forest mask class map")
      ->required();
  cmd_predict->add_option("--forest", forest_path, "forest JSON")->required();
  cmd_predict->add_option("--tile", tile_size, "tile size in cells");
  cmd_predict->add_option("--out", out_path, "output class map")->required();

  // ---- accuracy ----
  auto* cmd_accuracy = app.add_subcommand(
      "accuracy", "sampling-weighted confusion matrix and OA/PA/UA");
  std::string stands_path;
  cmd_accuracy->add_option("--plots", plots_path, "plot CSV with predictions")
      ->required();
  cmd_accuracy->add_option("--stands", stands_path,
                           "stand CSV for stand-level validation");
  cmd_accuracy->add_option("--out-dir", out_dir, "output directory")
      ->required();

  // ---- estimate ----
  auto* cmd_estimate = app.add_subcommand(
      "estimate", "direct / model-assisted / poststratified area estimates");
  std::string strata_path, mapped_areas_path, method = "all", target = "all";
  cmd_estimate->add_option("--plots", plots_path, "plot CSV")->required();
  cmd_estimate->add_option("--strata", strata_path, "stratum CSV")->required();
  cmd_estimate->add_option("--mapped-areas", mapped_areas_path,
                           "mapped-area CSV (stratum_id,domain,"
                           "mapped_area_km2), required for ma and ps");
  cmd_estimate->add_option("--method", method,
                           "direct | ma | ma-exact-mask | ps | all");
  cmd_estimate->add_option("--target", target, "domain or 'all'");
  cmd_estimate->add_option("--out", out_path, "report CSV")->required();

  // ---- smallarea ----
  auto* cmd_smallarea = app.add_subcommand(
      "smallarea", "sub-population estimates with applicability gates");
  std::string subpops_path, membership_path;
  bool strict = false;
  cmd_smallarea->add_option("--plots", plots_path, "plot CSV")->required();
  cmd_smallarea->add_option("--subpops", subpops_path, "sub-population CSV")
      ->required();
  cmd_smallarea->add_option("--membership", membership_path,
                            "plot-to-subpop CSV")
      ->required();
  cmd_smallarea->add_option("--method", method, "ma | ps");
  cmd_smallarea->add_option("--target", target, "domain or 'all'");
  cmd_smallarea->add_flag("--strict", strict,
                          "exit 4 when a gate fails anywhere");
  cmd_smallarea->add_option("--out", out_path, "report CSV")->required();

  // ---- krige-strata ----
  auto* cmd_krige = app.add_subcommand(
      "krige-strata", "universal kriging of the stratum indicator");
  std::string obs_path, covariate_path, pred_out, strata_out;
  double nugget = 0.0, sill = 0.73, range_m = 5600.0, cut = 0.5;
  cmd_krige->add_option("--obs", obs_path, "observation CSV")->required();
  cmd_krige->add_option("--covariate", covariate_path,
                        "covariate grid (defines the target grid)")
      ->required();
  cmd_krige->add_option("--nugget", nugget, "variogram nugget");
  cmd_krige->add_option("--sill", sill, "variogram sill");
  cmd_krige->add_option("--range", range_m, "variogram range (m)");
  cmd_krige->add_option("--cut", cut, "stratum threshold");
  cmd_krige->add_option("--out-prediction", pred_out, "prediction grid")
      ->required();
  cmd_krige->add_option("--out-strata", strata_out, "stratum class map")
      ->required();

  // ---- simulate ----
  auto* cmd_simulate = app.add_subcommand(
      "simulate", "Monte Carlo validation on a synthetic landscape");
  std::string config_path, classifier = "noisy", design = "srs";
  int replicates = 1000;
  double accuracy_target = 0.8;
  cmd_simulate->add_option("--config", config_path, "landscape config")
      ->required();
  cmd_simulate->add_option("--replicates", replicates, "sample draws");
  cmd_simulate->add_option("--seed", seed, "RNG seed");
  cmd_simulate->add_option("--classifier", classifier,
                           "perfect | noisy | random");
  cmd_simulate->add_option("--accuracy", accuracy_target,
                           "per-pixel accuracy for --classifier noisy");
  cmd_simulate->add_option("--design", design, "srs | systematic");
  cmd_simulate->add_option("--out-dir", out_dir, "output directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_composite) {
      std::vector<fa::MultiBandRaster> epochs;
      for (const auto& m : epoch_manifests) {
        epochs.push_back(fa::read_stack_manifest(m));
      }
      fa::MultiBandRaster composite = fa::medoid_composite(epochs);
      if (!ndvi_bands.empty()) {
        const auto parts = split_csv_list(ndvi_bands);
        if (parts.size() != 2) {
          throw fa::InputError("--ndvi expects two band names");
        }
        auto band_grid = [&](const std::string& name) {
          for (std::size_t b = 0; b < composite.n_bands(); ++b) {
            if (composite.band_names[b] == name) {
              fa::RasterGrid g;
              g.geom = composite.geom;
              g.nodata = composite.nodata;
              g.values = composite.bands[b];
              return g;
            }
          }
          throw fa::InputError("NDVI band '" + name + "' not in composite");
        };
        const fa::RasterGrid nd =
            fa::ndvi(band_grid(parts[0]), band_grid(parts[1]));
        composite.band_names.push_back("ndvi");
        composite.bands.push_back(nd.values);
      }
      fa::write_stack(composite, out_dir);
    } else if (*cmd_extract) {
      const fa::MultiBandRaster stack = fa::read_stack_manifest(stack_path);
      fa::PlotTable table = fa::read_plots_csv(plots_path);
      table.feature_names = stack.band_names;
      int fallbacks = 0, missing = 0;
      for (auto& p : table.plots) {
        fa::ExtractResult res;
        try {
          res = fa::extract_plot_predictors(stack, p.x, p.y, radius);
        } catch (const fa::InputError& e) {
          throw fa::InputError(std::string(e.what()) + " (plot '" + p.id +
                               "')");
        }
        p.predictors = res.values;
        if (res.used_fallback) ++fallbacks;
        if (res.missing) {
          ++missing;
          std::cerr << "warning: plot '" << p.id
                    << "' has no valid pixels, predictors flagged missing\n";
        }
      }
      if (fallbacks > 0) {
        std::cerr << "note: " << fallbacks
                  << " plot(s) used the 18 m fallback radius\n";
      }
      fa::atomic_write(out_path, [&](const std::string& tmp) {
        fa::write_plots_csv(table, tmp);
      });
    } else if (*cmd_train) {
      const fa::PlotTable table = fa::read_plots_csv(plots_path);
      const auto feat_idx = resolve_feature_indices(table, features_arg);
      const fa::Dataset data = dataset_from_plots(table, feat_idx, !all_plots);
      fa::ForestParams params;
      params.ntrees = ntrees;
      params.mtry = mtry;
      const fa::Forest forest = fa::train(data, params, seed, {}, threads);
      fa::atomic_write(forest_out, [&](const std::string& tmp) {
        fa::save_forest(forest, tmp);
      });
      std::cout << "trained " << forest.ntrees << " trees on " << data.n()
                << " plots, mtry " << forest.mtry << "\n";
    } else if (*cmd_select) {
      const fa::PlotTable table = fa::read_plots_csv(plots_path);
      const auto feat_idx = resolve_feature_indices(table, features_arg);
      const fa::Dataset data = dataset_from_plots(
          table, resolve_feature_indices(table, ""), true);
      fa::ForestParams params;
      params.ntrees = ntrees;
      params.mtry = mtry;
      const fa::SelectionResult sel =
          fa::select_variables(data, feat_idx, params, kfolds, seed, threads);
      fa::atomic_write(out_path, [&](const std::string& tmp) {
        std::ofstream out(tmp);
        out << "# OA below is " << kfolds
            << "-fold cross-validated, sampling-weighted\n";
        out << "action,feature,oa_before,oa_after\n";
        out.precision(17);
        for (const auto& s : sel.trace) {
          out << s.action << "," << s.feature << "," << s.oa_before << ","
              << s.oa_after << "\n";
        }
      });
      std::cout << "selected:";
      for (int f : sel.selected) {
        std::cout << " " << data.feature_names[static_cast<std::size_t>(f)];
      }
      std::cout << "\nfinal OA: " << sel.final_oa << "\n";
      for (const auto& w : sel.warnings) std::cerr << "warning: " << w << "\n";
    } else if (*cmd_tune) {
      const fa::PlotTable table = fa::read_plots_csv(plots_path);
      const auto feat_idx = resolve_feature_indices(table, features_arg);
      const fa::Dataset data = dataset_from_plots(table, feat_idx, true);
      std::vector<int> ntrees_grid, mtry_grid;
      for (const auto& v : split_csv_list(ntrees_grid_arg)) {
        ntrees_grid.push_back(fa::csv_detail::to_int(v, "--ntrees-grid"));
      }
      if (mtry_grid_arg.empty()) {
        // p/1 .. p/10, deduplicated
        const int p = static_cast<int>(data.p());
        int prev = -1;
        for (int div = 1; div <= 10; ++div) {
          const int m = std::max(1, p / div);
          if (m != prev) mtry_grid.push_back(m);
          prev = m;
        }
      } else {
        for (const auto& v : split_csv_list(mtry_grid_arg)) {
          mtry_grid.push_back(fa::csv_detail::to_int(v, "--mtry-grid"));
        }
      }
      const auto rows =
          fa::tune(data, ntrees_grid, mtry_grid, kfolds, seed, threads);
      fa::atomic_write(out_path, [&](const std::string& tmp) {
        std::ofstream out(tmp);
        out << "ntrees,mtry,oa\n";
        out.precision(17);
        for (const auto& r : rows) {
          out << r.ntrees << "," << r.mtry << "," << r.oa << "\n";
        }
      });
    } else if (*cmd_predict) {
      const fa::MultiBandRaster stack = fa::read_stack_manifest(stack_path);
      const fa::ClassMap mask = fa::read_class_map(mask_path);
      const fa::Forest forest = fa::load_forest(forest_path);
      const fa::ClassMap map =
          fa::predict_map(stack, mask, forest, tile_size, threads);
      fa::atomic_write(out_path, [&](const std::string& tmp) {
        fa::write_class_map(map, tmp);
      });
    } else if (*cmd_accuracy) {
      const fa::PlotTable table = fa::read_plots_csv(plots_path);
      const auto labels = label_order(table.plots);
      const fa::ConfusionMatrix m = fa::weighted_confusion(
          table.plots, labels, fa::PlotField::Observed,
          fa::PlotField::Predicted);
      fs::create_directories(out_dir);
      fa::atomic_write((fs::path(out_dir) / "confusion.csv").string(),
                       [&](const std::string& tmp) {
                         fa::write_confusion_csv(m, tmp, false);
                       });
      fa::atomic_write((fs::path(out_dir) / "confusion_percent.csv").string(),
                       [&](const std::string& tmp) {
                         fa::write_confusion_csv(m, tmp, true);
                       });
      write_metrics_csv(m, (fs::path(out_dir) / "metrics.csv").string());
      if (!stands_path.empty()) {
        std::vector<fa::StandRecord> stands;
        bool first = true;
        std::vector<std::pair<int, fa::Domain>> count_cols;
        int i_id = 0, i_ref = 0, i_area = -1;
        fa::for_each_csv_row(
            stands_path, [&](const auto& header, const auto& row, int rn) {
              if (first) {
                first = false;
                i_id = fa::column_index(header, "stand_id", stands_path);
                i_ref = fa::column_index(header, "reference", stands_path);
                i_area = fa::column_index(header, "area_m2", stands_path,
                                          false);
                for (std::size_t i = 0; i < header.size(); ++i) {
                  if (header[i].rfind("count_", 0) == 0) {
                    count_cols.emplace_back(
                        static_cast<int>(i),
                        fa::parse_domain_or_throw(header[i].substr(6)));
                  }
                }
              }
              const std::string ctx =
                  stands_path + " row " + std::to_string(rn);
              fa::StandRecord s;
              s.stand_id = row[static_cast<std::size_t>(i_id)];
              s.reference =
                  fa::parse_domain_or_throw(row[static_cast<std::size_t>(i_ref)]);
              if (i_area >= 0) {
                s.area_m2 = fa::csv_detail::to_double(
                    row[static_cast<std::size_t>(i_area)], ctx);
              }
              for (const auto& [col, dom] : count_cols) {
                s.pixel_counts[dom] = fa::csv_detail::to_int(
                    row[static_cast<std::size_t>(col)], ctx);
              }
              stands.push_back(std::move(s));
            });
        std::vector<fa::Domain> stand_labels;
        for (const auto& [col, dom] : count_cols) stand_labels.push_back(dom);
        const fa::ConfusionMatrix sm =
            fa::stand_level_confusion(stands, stand_labels);
        fa::atomic_write((fs::path(out_dir) / "stand_confusion.csv").string(),
                         [&](const std::string& tmp) {
                           fa::write_confusion_csv(sm, tmp, false);
                         });
        write_metrics_csv(sm,
                          (fs::path(out_dir) / "stand_metrics.csv").string());
      }
    } else if (*cmd_estimate) {
      const fa::PlotTable table = fa::read_plots_csv(plots_path);
      const auto strata = fa::read_strata_csv(strata_path);
      std::map<std::pair<int, fa::Domain>, double> mapped;
      if (!mapped_areas_path.empty()) {
        mapped = fa::read_mapped_areas_csv(mapped_areas_path);
      }
      const bool want_ma = method == "ma" || method == "all";
      const bool want_ps = method == "ps" || method == "all";
      const bool want_direct = method == "direct" || method == "all";
      const bool want_exact = method == "ma-exact-mask" || method == "all";
      if ((want_ma || want_ps) && mapped.empty()) {
        throw fa::InputError(
            "--mapped-areas is required for model-assisted and "
            "poststratified estimates");
      }
      std::vector<fa::ReportRow> rows;
      for (fa::Domain dom : resolve_targets(target)) {
        std::optional<fa::Estimate> direct;
        if (want_direct || want_ma || want_ps) {
          direct = fa::direct_estimate(table.plots, strata, dom);
        }
        if (want_direct) rows.push_back({dom, "direct", *direct});
        auto in_domain_areas = [&] {
          std::map<int, double> areas;
          for (const auto& s : strata) {
            auto it = mapped.find({s.id, dom});
            areas[s.id] = it == mapped.end() ? 0.0 : it->second;
          }
          return areas;
        };
        if (want_ma) {
          double synth = 0.0;
          for (const auto& [k, a] : in_domain_areas()) synth += a;
          fa::Estimate ma =
              fa::model_assisted_estimate(table.plots, strata, dom, synth);
          ma.relative_efficiency =
              fa::relative_efficiency(direct->variance, ma.variance);
          rows.push_back({dom, "ma", ma});
        }
        if (want_exact) {
          bool have = true;
          for (const auto& p : table.plots) {
            if (!p.predicted_exact_mask) {
              have = false;
              break;
            }
          }
          if (have) {
            rows.push_back({dom, "ma-exact-mask",
                            fa::ma_variance_exact_mask(table.plots, strata,
                                                       dom)});
          } else if (method == "ma-exact-mask") {
            throw fa::InputError(
                "plot CSV has no predicted_exact_mask column values");
          }
        }
        if (want_ps) {
          fa::Estimate ps = fa::poststratified_estimate(
              table.plots, strata,
              fa::binary_groups(table.plots, strata, dom, in_domain_areas()),
              dom);
          ps.relative_efficiency =
              fa::relative_efficiency(direct->variance, ps.variance);
          rows.push_back({dom, "ps", ps});
        }
      }
      fa::atomic_write(out_path, [&](const std::string& tmp) {
        fa::write_report_csv(rows, tmp);
      });
    } else if (*cmd_smallarea) {
      const fa::PlotTable table = fa::read_plots_csv(plots_path);
      auto subpops = fa::read_subpops_csv(subpops_path);
      fa::read_membership_csv(membership_path, subpops);
      const fa::Method m = method == "ps" ? fa::Method::PostStratified
                                          : fa::Method::ModelAssisted;
      if (method != "ma" && method != "ps") {
        throw fa::InputError("smallarea --method must be ma or ps");
      }
      bool any_gate_failure = false;
      fa::atomic_write(out_path, [&](const std::string& tmp) {
        std::ofstream out(tmp);
        out.precision(17);
        out << "subpop_id,scope,method,domain,status,total_km2,variance,se,"
               "re\n";
        for (fa::Domain dom : resolve_targets(target)) {
          for (const auto& [id, sp] : subpops) {
            const fa::SubPopEstimate est =
                fa::estimate_subpop(sp, table.plots, m, dom);
            if (!est.verdict.all_pass) any_gate_failure = true;
            for (const auto& v : est.verdict.per_stratum) {
              if (v.pass) continue;
              out << id << ",stratum-" << v.stratum_id << "," << method << ","
                  << fa::domain_name(dom) << ",inapplicable (" << v.reason
                  << "),,,,\n";
            }
            for (const auto& [sid, e] : est.per_stratum) {
              out << id << ",stratum-" << sid << "," << method << ","
                  << fa::domain_name(dom) << ",ok," << e.total << ","
                  << e.variance << "," << e.se << ","
                  << fa::format_re(e.relative_efficiency) << "\n";
            }
            if (est.partial_aggregate) {
              const auto& e = *est.partial_aggregate;
              out << id << "," << (est.applicable ? "all" : "partial") << ","
                  << method << "," << fa::domain_name(dom) << ","
                  << (est.applicable ? "ok" : "partial") << "," << e.total
                  << "," << e.variance << "," << e.se << ","
                  << fa::format_re(e.relative_efficiency) << "\n";
            } else {
              out << id << ",all," << method << "," << fa::domain_name(dom)
                  << ",inapplicable,,,,\n";
            }
          }
        }
      });
      if (strict && any_gate_failure) {
        std::cerr << "gate inapplicable for at least one sub-population\n";
        return 4;
      }
    } else if (*cmd_krige) {
      const auto obs = fa::read_kriging_obs_csv(obs_path);
      const fa::RasterGrid covariate = fa::read_grid(covariate_path);
      fa::VariogramModel model;
      model.nugget = nugget;
      model.sill = sill;
      model.range_m = range_m;
      const fa::RasterGrid pred =
          fa::universal_kriging_predict(obs, model, covariate);
      fa::atomic_write(pred_out, [&](const std::string& tmp) {
        fa::write_grid(pred, tmp);
      });
      const fa::ClassMap strata_map = fa::threshold_to_stratum(pred, cut);
      fa::atomic_write(strata_out, [&](const std::string& tmp) {
        fa::write_class_map(strata_map, tmp);
      });
    } else if (*cmd_simulate) {
      const auto kv = fa::read_kv_config(config_path);
      std::map<int, int> n_per_stratum;
      const fa::LandscapeConfig cfg =
          landscape_config_from_kv(kv, n_per_stratum);
      const fa::Landscape land = fa::generate_landscape(cfg);
      fa::ClassifierKind kind = fa::ClassifierKind::Noisy;
      if (classifier == "perfect") kind = fa::ClassifierKind::Perfect;
      else if (classifier == "random") kind = fa::ClassifierKind::RandomLabels;
      else if (classifier != "noisy") {
        throw fa::InputError("--classifier must be perfect, noisy, or random");
      }
      const fa::ClassMap predicted =
          fa::make_predicted_map(land.truth, kind, accuracy_target, cfg.seed);
      fa::McOptions opt;
      opt.n_per_stratum = n_per_stratum;
      if (design == "systematic") {
        opt.design = fa::SamplingDesign::StratifiedSystematic;
      } else if (design != "srs") {
        throw fa::InputError("--design must be srs or systematic");
      }
      const fa::McReport report =
          fa::monte_carlo(land, predicted, opt, replicates, seed, threads);
      fs::create_directories(out_dir);
      write_mc_report(report, (fs::path(out_dir) / "mcreport.csv").string(),
                      (fs::path(out_dir) / "summary.txt").string());
    }
  } catch (const fa::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const fa::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
