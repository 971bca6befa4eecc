#pragma once

// CSV and config-file I/O for the documented file formats: plot and
// stratum tables, mapped-area tables, sub-population definitions, kriging
// observations, estimate reports, confusion matrices, and the flat
// key=value simulation config. Machine CSVs keep full precision; percent
// views round to 0.1.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "forestarea/accuracy.hpp"
#include "forestarea/errors.hpp"
#include "forestarea/estimation.hpp"
#include "forestarea/kriging.hpp"
#include "forestarea/smallarea.hpp"

namespace forestarea {

namespace csv_detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim
    field.erase(0, field.find_first_not_of(" \t\r"));
    field.erase(field.find_last_not_of(" \t\r") + 1);
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double to_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse number '" + s + "' (" + context + ")");
  }
}

inline int to_int(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse integer '" + s + "' (" + context + ")");
  }
}

}  // namespace csv_detail

// Row-wise CSV reader with a mandatory header. The callback receives the
// 1-based data row number for error messages.
inline void for_each_csv_row(
    const std::string& path,
    const std::function<void(const std::vector<std::string>& header,
                             const std::vector<std::string>& row,
                             int row_number)>& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
  const auto header = csv_detail::split_line(line);
  int row_number = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_number;
    const auto row = csv_detail::split_line(line);
    if (row.size() != header.size()) {
      throw InputError(path + " row " + std::to_string(row_number) +
                       ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(row.size()));
    }
    fn(header, row, row_number);
  }
}

inline int column_index(const std::vector<std::string>& header,
                        const std::string& name, const std::string& path,
                        bool required = true) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  if (required) {
    throw InputError(path + ": missing required column '" + name + "'");
  }
  return -1;
}

struct PlotTable {
  std::vector<SamplePlot> plots;
  std::vector<std::string> feature_names;
};

// Plot CSV: plot_id, x, y, stratum_id, observed, predicted,
// predicted_exact_mask (optional column), weight_km2, in_model_set, then
// feature columns. Empty predicted fields stay unset.
inline PlotTable read_plots_csv(const std::string& path) {
  PlotTable table;
  bool first = true;
  int i_id = 0, i_x = 0, i_y = 0, i_stratum = 0, i_obs = 0, i_pred = 0,
      i_exact = -1, i_w = 0, i_model = 0;
  std::vector<int> feature_cols;
  for_each_csv_row(path, [&](const auto& header, const auto& row, int rn) {
    if (first) {
      first = false;
      i_id = column_index(header, "plot_id", path);
      i_x = column_index(header, "x", path);
      i_y = column_index(header, "y", path);
      i_stratum = column_index(header, "stratum_id", path);
      i_obs = column_index(header, "observed", path);
      i_pred = column_index(header, "predicted", path);
      i_exact = column_index(header, "predicted_exact_mask", path, false);
      i_w = column_index(header, "weight_km2", path);
      i_model = column_index(header, "in_model_set", path);
      for (std::size_t i = 0; i < header.size(); ++i) {
        const int ii = static_cast<int>(i);
        if (ii == i_id || ii == i_x || ii == i_y || ii == i_stratum ||
            ii == i_obs || ii == i_pred || ii == i_exact || ii == i_w ||
            ii == i_model) {
          continue;
        }
        feature_cols.push_back(ii);
        table.feature_names.push_back(header[i]);
      }
    }
    const std::string ctx = path + " row " + std::to_string(rn);
    SamplePlot p;
    p.id = row[static_cast<std::size_t>(i_id)];
    if (p.id.empty()) throw InputError(ctx + ": empty plot_id");
    p.x = csv_detail::to_double(row[static_cast<std::size_t>(i_x)], ctx);
    p.y = csv_detail::to_double(row[static_cast<std::size_t>(i_y)], ctx);
    p.stratum_id =
        csv_detail::to_int(row[static_cast<std::size_t>(i_stratum)], ctx);
    p.observed = parse_domain_or_throw(row[static_cast<std::size_t>(i_obs)]);
    const auto& pred = row[static_cast<std::size_t>(i_pred)];
    if (!pred.empty()) p.predicted = parse_domain_or_throw(pred);
    if (i_exact >= 0) {
      const auto& ex = row[static_cast<std::size_t>(i_exact)];
      if (!ex.empty()) p.predicted_exact_mask = parse_domain_or_throw(ex);
    }
    const double w =
        csv_detail::to_double(row[static_cast<std::size_t>(i_w)], ctx);
    if (w <= 0.0) throw InputError(ctx + ": weight_km2 must be > 0");
    p.inclusion_probability = 1.0 / w;
    const auto& ms = row[static_cast<std::size_t>(i_model)];
    p.in_model_set = (ms == "1" || ms == "true");
    for (int fc : feature_cols) {
      p.predictors.push_back(
          csv_detail::to_double(row[static_cast<std::size_t>(fc)], ctx));
    }
    table.plots.push_back(std::move(p));
  });
  return table;
}

inline void write_plots_csv(const PlotTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "plot_id,x,y,stratum_id,observed,predicted,predicted_exact_mask,"
         "weight_km2,in_model_set";
  for (const auto& f : table.feature_names) out << "," << f;
  out << "\n";
  for (const auto& p : table.plots) {
    out << p.id << "," << p.x << "," << p.y << "," << p.stratum_id << ","
        << domain_name(p.observed) << ","
        << (p.predicted ? domain_name(*p.predicted) : "") << ","
        << (p.predicted_exact_mask ? domain_name(*p.predicted_exact_mask) : "")
        << "," << 1.0 / p.inclusion_probability << ","
        << (p.in_model_set ? 1 : 0);
    for (double v : p.predictors) out << "," << v;
    out << "\n";
  }
}

// Stratum CSV: stratum_id, area_km2 [, weight_km2]. When the weight column
// is absent, plots keep the weight from the plot CSV.
inline std::vector<Stratum> read_strata_csv(const std::string& path) {
  std::vector<Stratum> strata;
  bool first = true;
  int i_id = 0, i_area = 0, i_w = -1;
  for_each_csv_row(path, [&](const auto& header, const auto& row, int rn) {
    if (first) {
      first = false;
      i_id = column_index(header, "stratum_id", path);
      i_area = column_index(header, "area_km2", path);
      i_w = column_index(header, "weight_km2", path, false);
    }
    const std::string ctx = path + " row " + std::to_string(rn);
    Stratum s;
    s.id = csv_detail::to_int(row[static_cast<std::size_t>(i_id)], ctx);
    s.area_km2 =
        csv_detail::to_double(row[static_cast<std::size_t>(i_area)], ctx);
    if (s.area_km2 <= 0.0) throw InputError(ctx + ": area_km2 must be > 0");
    if (i_w >= 0) {
      s.sampling_weight_km2 =
          csv_detail::to_double(row[static_cast<std::size_t>(i_w)], ctx);
    }
    strata.push_back(s);
  });
  if (strata.empty()) throw InputError("'" + path + "' defines no strata");
  return strata;
}

// Mapped-area CSV: stratum_id, domain, mapped_area_km2. Used for the MA
// synthetic total and the PS in-domain group areas.
inline std::map<std::pair<int, Domain>, double> read_mapped_areas_csv(
    const std::string& path) {
  std::map<std::pair<int, Domain>, double> areas;
  bool first = true;
  int i_s = 0, i_d = 0, i_a = 0;
  for_each_csv_row(path, [&](const auto& header, const auto& row, int rn) {
    if (first) {
      first = false;
      i_s = column_index(header, "stratum_id", path);
      i_d = column_index(header, "domain", path);
      i_a = column_index(header, "mapped_area_km2", path);
    }
    const std::string ctx = path + " row " + std::to_string(rn);
    const int s = csv_detail::to_int(row[static_cast<std::size_t>(i_s)], ctx);
    const Domain d =
        parse_domain_or_throw(row[static_cast<std::size_t>(i_d)]);
    areas[{s, d}] =
        csv_detail::to_double(row[static_cast<std::size_t>(i_a)], ctx);
  });
  return areas;
}

// Sub-population CSV: subpop_id, stratum_id, area_km2, then one
// mapped_<domain>_km2 column per mapped domain.
inline std::map<std::string, SubPopulation> read_subpops_csv(
    const std::string& path) {
  std::map<std::string, SubPopulation> subpops;
  bool first = true;
  int i_id = 0, i_s = 0, i_a = 0;
  std::vector<std::pair<int, Domain>> mapped_cols;
  for_each_csv_row(path, [&](const auto& header, const auto& row, int rn) {
    if (first) {
      first = false;
      i_id = column_index(header, "subpop_id", path);
      i_s = column_index(header, "stratum_id", path);
      i_a = column_index(header, "area_km2", path);
      for (std::size_t i = 0; i < header.size(); ++i) {
        const auto& h = header[i];
        if (h.rfind("mapped_", 0) == 0 && h.size() > 11 &&
            h.substr(h.size() - 4) == "_km2") {
          const std::string dom = h.substr(7, h.size() - 11);
          mapped_cols.emplace_back(static_cast<int>(i),
                                   parse_domain_or_throw(dom));
        }
      }
    }
    const std::string ctx = path + " row " + std::to_string(rn);
    const std::string id = row[static_cast<std::size_t>(i_id)];
    auto& sp = subpops[id];
    sp.id = id;
    const int s = csv_detail::to_int(row[static_cast<std::size_t>(i_s)], ctx);
    sp.stratum_area_km2[s] =
        csv_detail::to_double(row[static_cast<std::size_t>(i_a)], ctx);
    for (const auto& [col, dom] : mapped_cols) {
      sp.mapped_area_km2[{s, dom}] =
          csv_detail::to_double(row[static_cast<std::size_t>(col)], ctx);
    }
  });
  return subpops;
}

// Membership CSV: plot_id, subpop_id.
inline void read_membership_csv(const std::string& path,
                                std::map<std::string, SubPopulation>& subpops) {
  bool first = true;
  int i_p = 0, i_s = 0;
  for_each_csv_row(path, [&](const auto& header, const auto& row, int rn) {
    if (first) {
      first = false;
      i_p = column_index(header, "plot_id", path);
      i_s = column_index(header, "subpop_id", path);
    }
    const std::string ctx = path + " row " + std::to_string(rn);
    const std::string sp = row[static_cast<std::size_t>(i_s)];
    auto it = subpops.find(sp);
    if (it == subpops.end()) {
      throw InputError(ctx + ": unknown subpop_id '" + sp + "'");
    }
    it->second.plot_ids.insert(row[static_cast<std::size_t>(i_p)]);
  });
}

// Kriging observation CSV: x, y, response, covariate.
inline std::vector<KrigingObservation> read_kriging_obs_csv(
    const std::string& path) {
  std::vector<KrigingObservation> obs;
  bool first = true;
  int i_x = 0, i_y = 0, i_r = 0, i_c = 0;
  for_each_csv_row(path, [&](const auto& header, const auto& row, int rn) {
    if (first) {
      first = false;
      i_x = column_index(header, "x", path);
      i_y = column_index(header, "y", path);
      i_r = column_index(header, "response", path);
      i_c = column_index(header, "covariate", path);
    }
    const std::string ctx = path + " row " + std::to_string(rn);
    KrigingObservation o;
    o.x = csv_detail::to_double(row[static_cast<std::size_t>(i_x)], ctx);
    o.y = csv_detail::to_double(row[static_cast<std::size_t>(i_y)], ctx);
    o.response = csv_detail::to_double(row[static_cast<std::size_t>(i_r)], ctx);
    o.covariate =
        csv_detail::to_double(row[static_cast<std::size_t>(i_c)], ctx);
    obs.push_back(o);
  });
  return obs;
}

struct ReportRow {
  Domain domain = Domain::Spruce;
  std::string method;
  Estimate estimate;
};

inline std::string format_re(const std::optional<double>& re) {
  if (!re) return "";
  if (std::isnan(*re)) return "undefined";
  if (std::isinf(*re)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *re);
  return buf;
}

// Estimate report CSV: domain, method, total_km2, variance, se, cv,
// correction, synthetic, re.
inline void write_report_csv(const std::vector<ReportRow>& rows,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "domain,method,total_km2,variance,se,cv,correction,synthetic,re\n";
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    out << domain_name(r.domain) << "," << r.method << "," << e.total << ","
        << e.variance << "," << e.se << ",";
    if (e.cv) out << *e.cv;
    out << ",";
    if (e.correction) out << *e.correction;
    out << ",";
    if (e.synthetic) out << *e.synthetic;
    out << "," << format_re(e.relative_efficiency) << "\n";
  }
}

// Confusion matrix CSV with a one-line orientation header; cells keep full
// precision, the percent view rounds to 0.1.
inline void write_confusion_csv(const ConfusionMatrix& m,
                                const std::string& path,
                                bool percent = false) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << "# rows: prediction, columns: reference";
  if (percent) out << " (percent of total weight)";
  out << "\n";
  out << "predicted\\reference";
  for (const auto& l : m.labels()) out << "," << domain_name(l);
  out << "\n";
  const double total = m.total_weight();
  out.precision(17);
  for (std::size_t r = 0; r < m.size(); ++r) {
    out << domain_name(m.labels()[r]);
    for (std::size_t c = 0; c < m.size(); ++c) {
      if (percent) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f",
                      total > 0 ? 100.0 * m.at(r, c) / total : 0.0);
        out << "," << buf;
      } else {
        out << "," << m.at(r, c);
      }
    }
    out << "\n";
  }
}

// Flat key=value config, '#' comments.
inline std::map<std::string, std::string> read_kv_config(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(path + " line " + std::to_string(n) +
                       ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    val.erase(0, val.find_first_not_of(" \t"));
    kv[key] = val;
  }
  return kv;
}

// Writes through a temp file in the same directory, then renames.
inline void atomic_write(const std::string& path,
                         const std::function<void(const std::string&)>& writer) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  writer(tmp.string());
  fs::rename(tmp, target);
}

}  // namespace forestarea
