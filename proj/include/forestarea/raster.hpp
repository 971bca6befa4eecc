#pragma once

// Raster grid types and file I/O. Grids are stored in ESRI-ASCII-grid-style
// text files (ncols / nrows / xllcorner / yllcorner / cellsize /
// NODATA_value header, row-major values, north row first) or in a packed
// binary twin with the same header semantics. Class maps carry an extra
// `legend` header line naming the class codes 0..k-1.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "forestarea/errors.hpp"

namespace forestarea {

struct GridGeometry {
  double origin_x = 0.0;  // west edge
  double origin_y = 0.0;  // north edge
  double cell_size = 0.0;
  int nrows = 0;
  int ncols = 0;

  std::size_t cells() const {
    return static_cast<std::size_t>(nrows) * static_cast<std::size_t>(ncols);
  }
  double center_x(int col) const { return origin_x + (col + 0.5) * cell_size; }
  double center_y(int row) const { return origin_y - (row + 0.5) * cell_size; }
  bool contains(double x, double y) const {
    return x >= origin_x && x <= origin_x + ncols * cell_size &&
           y <= origin_y && y >= origin_y - nrows * cell_size;
  }
  bool operator==(const GridGeometry& o) const {
    return origin_x == o.origin_x && origin_y == o.origin_y &&
           cell_size == o.cell_size && nrows == o.nrows && ncols == o.ncols;
  }
};

struct RasterGrid {
  GridGeometry geom;
  double nodata = -9999.0;
  std::vector<double> values;  // row-major, north row first

  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * geom.ncols + col];
  }
  double& at(int row, int col) {
    return values[static_cast<std::size_t>(row) * geom.ncols + col];
  }
  bool is_nodata(int row, int col) const { return at(row, col) == nodata; }
};

inline RasterGrid make_grid(const GridGeometry& geom, double fill = 0.0,
                            double nodata = -9999.0) {
  RasterGrid g;
  g.geom = geom;
  g.nodata = nodata;
  g.values.assign(geom.cells(), fill);
  return g;
}

// Categorical raster; codes index into labels, -1 is nodata.
struct ClassMap {
  GridGeometry geom;
  std::vector<std::string> labels;
  std::vector<int> codes;  // row-major

  static constexpr int kNoData = -1;

  int at(int row, int col) const {
    return codes[static_cast<std::size_t>(row) * geom.ncols + col];
  }
  int& at(int row, int col) {
    return codes[static_cast<std::size_t>(row) * geom.ncols + col];
  }
  int code_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return static_cast<int>(i);
    }
    throw InputError("label '" + label + "' not in class-map legend");
  }
};

inline ClassMap make_class_map(const GridGeometry& geom,
                               std::vector<std::string> labels,
                               int fill = ClassMap::kNoData) {
  ClassMap m;
  m.geom = geom;
  m.labels = std::move(labels);
  m.codes.assign(geom.cells(), fill);
  return m;
}

// Multi-band image sharing one grid; used for composites and feature stacks.
struct MultiBandRaster {
  GridGeometry geom;
  double nodata = -9999.0;
  std::vector<std::string> band_names;
  std::vector<std::vector<double>> bands;  // band -> row-major values

  std::size_t n_bands() const { return bands.size(); }
  double at(std::size_t band, int row, int col) const {
    return bands[band][static_cast<std::size_t>(row) * geom.ncols + col];
  }
  bool any_nodata(int row, int col) const {
    const std::size_t i = static_cast<std::size_t>(row) * geom.ncols + col;
    for (const auto& b : bands) {
      if (b[i] == nodata) return true;
    }
    return false;
  }
};

namespace io_detail {

struct AsciiHeader {
  GridGeometry geom;
  double nodata = -9999.0;
  std::vector<std::string> legend;
};

inline AsciiHeader read_ascii_header(std::istream& in,
                                     const std::string& path) {
  AsciiHeader h;
  double xll = 0.0, yll = 0.0;
  bool saw_ncols = false, saw_nrows = false, saw_cell = false;
  std::string key;
  for (;;) {
    std::streampos pos = in.tellg();
    if (!(in >> key)) throw InputError("truncated raster header in " + path);
    if (key == "ncols") {
      in >> h.geom.ncols;
      saw_ncols = true;
    } else if (key == "nrows") {
      in >> h.geom.nrows;
      saw_nrows = true;
    } else if (key == "xllcorner") {
      in >> xll;
    } else if (key == "yllcorner") {
      in >> yll;
    } else if (key == "cellsize") {
      in >> h.geom.cell_size;
      saw_cell = true;
    } else if (key == "NODATA_value") {
      in >> h.nodata;
    } else if (key == "legend") {
      std::string rest;
      std::getline(in, rest);
      std::stringstream ss(rest);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) h.legend.push_back(item);
      }
    } else {
      in.seekg(pos);  // first value token
      break;
    }
  }
  if (!saw_ncols || !saw_nrows || !saw_cell || h.geom.ncols <= 0 ||
      h.geom.nrows <= 0 || h.geom.cell_size <= 0) {
    throw InputError("invalid raster header in " + path);
  }
  h.geom.origin_x = xll;
  h.geom.origin_y = yll + h.geom.nrows * h.geom.cell_size;
  return h;
}

inline void write_ascii_header(std::ostream& out, const GridGeometry& geom,
                               double nodata,
                               const std::vector<std::string>& legend) {
  out << "ncols " << geom.ncols << "\n";
  out << "nrows " << geom.nrows << "\n";
  out.precision(12);
  out << "xllcorner " << geom.origin_x << "\n";
  out << "yllcorner " << geom.origin_y - geom.nrows * geom.cell_size << "\n";
  out << "cellsize " << geom.cell_size << "\n";
  out << "NODATA_value " << nodata << "\n";
  if (!legend.empty()) {
    out << "legend ";
    for (std::size_t i = 0; i < legend.size(); ++i) {
      if (i) out << ",";
      out << legend[i];
    }
    out << "\n";
  }
}

inline constexpr char kBinaryMagic[] = "FORESTAREA-GRID-1\n";

}  // namespace io_detail

inline bool is_binary_grid_path(const std::string& path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".bin";
}

inline void write_grid(const RasterGrid& g, const std::string& path) {
  if (is_binary_grid_path(path)) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out.write(io_detail::kBinaryMagic, sizeof(io_detail::kBinaryMagic) - 1);
    const double yll = g.geom.origin_y - g.geom.nrows * g.geom.cell_size;
    const double header[6] = {
        static_cast<double>(g.geom.ncols), static_cast<double>(g.geom.nrows),
        g.geom.origin_x, yll, g.geom.cell_size, g.nodata};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(g.values.data()),
              static_cast<std::streamsize>(g.values.size() * sizeof(double)));
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  io_detail::write_ascii_header(out, g.geom, g.nodata, {});
  out.precision(12);
  for (int r = 0; r < g.geom.nrows; ++r) {
    for (int c = 0; c < g.geom.ncols; ++c) {
      if (c) out << ' ';
      out << g.at(r, c);
    }
    out << '\n';
  }
}

inline RasterGrid read_grid(const std::string& path) {
  if (is_binary_grid_path(path)) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open raster '" + path + "'");
    char magic[sizeof(io_detail::kBinaryMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, sizeof(magic)) != io_detail::kBinaryMagic) {
      throw InputError("'" + path + "' is not a packed grid file");
    }
    double header[6];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) throw InputError("truncated grid header in " + path);
    RasterGrid g;
    g.geom.ncols = static_cast<int>(header[0]);
    g.geom.nrows = static_cast<int>(header[1]);
    g.geom.origin_x = header[2];
    g.geom.cell_size = header[4];
    g.geom.origin_y = header[3] + g.geom.nrows * g.geom.cell_size;
    g.nodata = header[5];
    g.values.resize(g.geom.cells());
    in.read(reinterpret_cast<char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(double)));
    if (!in) throw InputError("truncated grid payload in " + path);
    return g;
  }
  std::ifstream in(path);
  if (!in) throw InputError("cannot open raster '" + path + "'");
  const auto h = io_detail::read_ascii_header(in, path);
  RasterGrid g;
  g.geom = h.geom;
  g.nodata = h.nodata;
  g.values.resize(g.geom.cells());
  for (auto& v : g.values) {
    if (!(in >> v)) throw InputError("truncated raster values in " + path);
  }
  return g;
}

inline void write_class_map(const ClassMap& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  io_detail::write_ascii_header(out, m.geom, ClassMap::kNoData, m.labels);
  for (int r = 0; r < m.geom.nrows; ++r) {
    for (int c = 0; c < m.geom.ncols; ++c) {
      if (c) out << ' ';
      out << m.at(r, c);
    }
    out << '\n';
  }
}

inline ClassMap read_class_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open class map '" + path + "'");
  const auto h = io_detail::read_ascii_header(in, path);
  if (h.legend.empty()) {
    throw InputError("class map '" + path + "' has no legend header line");
  }
  ClassMap m;
  m.geom = h.geom;
  m.labels = h.legend;
  m.codes.resize(m.geom.cells());
  for (auto& v : m.codes) {
    if (!(in >> v)) throw InputError("truncated class map values in " + path);
    if (v != ClassMap::kNoData &&
        (v < 0 || v >= static_cast<int>(m.labels.size()))) {
      throw InputError("class code outside legend in " + path);
    }
  }
  return m;
}

// Band manifest: one `band_name path` pair per line, paths relative to the
// manifest's directory. Lines starting with '#' are comments.
inline MultiBandRaster read_stack_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw InputError("cannot open manifest '" + manifest_path + "'");
  const auto base = std::filesystem::path(manifest_path).parent_path();
  MultiBandRaster stack;
  bool first = true;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string name, rel;
    if (!(ss >> name >> rel)) {
      throw InputError("bad manifest line in " + manifest_path + ": " + line);
    }
    const RasterGrid g = read_grid((base / rel).string());
    if (first) {
      stack.geom = g.geom;
      stack.nodata = g.nodata;
      first = false;
    } else if (!(g.geom == stack.geom)) {
      throw InputError("band '" + name + "' does not share the stack grid (" +
                       manifest_path + ")");
    } else if (g.nodata != stack.nodata) {
      throw InputError("band '" + name + "' has a different nodata value (" +
                       manifest_path + ")");
    }
    stack.band_names.push_back(name);
    stack.bands.push_back(g.values);
  }
  if (stack.bands.empty()) {
    throw InputError("manifest '" + manifest_path + "' lists no bands");
  }
  return stack;
}

inline void write_stack(const MultiBandRaster& stack,
                        const std::string& out_dir,
                        const std::string& manifest_name = "stack.manifest",
                        bool binary = false) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream manifest(fs::path(out_dir) / manifest_name);
  if (!manifest) throw InputError("cannot write manifest in " + out_dir);
  for (std::size_t b = 0; b < stack.n_bands(); ++b) {
    RasterGrid g;
    g.geom = stack.geom;
    g.nodata = stack.nodata;
    g.values = stack.bands[b];
    const std::string fname =
        stack.band_names[b] + (binary ? ".bin" : ".asc");
    write_grid(g, (fs::path(out_dir) / fname).string());
    manifest << stack.band_names[b] << " " << fname << "\n";
  }
}

}  // namespace forestarea
