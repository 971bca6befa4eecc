#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "forestarea/kriging.hpp"

using namespace forestarea;

namespace {

VariogramModel paper_model() {
  VariogramModel m;
  m.nugget = 0.0;
  m.sill = 0.73;
  m.range_m = 5600.0;
  return m;
}

// Independent dense solver (Gauss-Jordan elimination, no shared code with
// the library's LU) used as the oracle for the small kriging systems.
std::vector<double> gauss_jordan(std::vector<double> a, std::vector<double> b,
                                 int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[static_cast<std::size_t>(r) * n + col]) >
          std::abs(a[static_cast<std::size_t>(piv) * n + col])) {
        piv = r;
      }
    }
    for (int c = 0; c < n; ++c) {
      std::swap(a[static_cast<std::size_t>(col) * n + c],
                a[static_cast<std::size_t>(piv) * n + c]);
    }
    std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(piv)]);
    const double d = a[static_cast<std::size_t>(col) * n + col];
    for (int c = 0; c < n; ++c) a[static_cast<std::size_t>(col) * n + c] /= d;
    b[static_cast<std::size_t>(col)] /= d;
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[static_cast<std::size_t>(r) * n + col];
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) {
        a[static_cast<std::size_t>(r) * n + c] -=
            f * a[static_cast<std::size_t>(col) * n + c];
      }
      b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
    }
  }
  return b;
}

}  // namespace

TEST_CASE("spherical variogram values") {
  const VariogramModel m = paper_model();
  CHECK(spherical_gamma(0.0, m) == 0.0);
  CHECK(spherical_gamma(5600.0, m) == Catch::Approx(0.73));
  CHECK(spherical_gamma(9000.0, m) == Catch::Approx(0.73));
  // half range: 0.73 * (0.75 - 0.0625)
  CHECK(spherical_gamma(2800.0, m) == Catch::Approx(0.5018).margin(1e-4));
  CHECK_THROWS_AS(spherical_gamma(-1.0, m), InputError);
  VariogramModel bad = m;
  bad.sill = 0.0;
  CHECK_THROWS_AS(spherical_gamma(1.0, bad), InputError);
}

TEST_CASE("spherical variogram is nondecreasing on [0, range]") {
  const VariogramModel m = paper_model();
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double g = spherical_gamma(i * 56.0, m);
    CHECK(g >= prev);
    prev = g;
  }
}

TEST_CASE("zero-nugget kriging interpolates its observations exactly") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> coord(0.0, 3000.0);
  std::uniform_real_distribution<double> resp(0.0, 1.0);
  std::vector<KrigingObservation> obs;
  for (int i = 0; i < 25; ++i) {
    KrigingObservation o;
    o.x = coord(gen);
    o.y = coord(gen);
    o.response = resp(gen);
    o.covariate = logit_elevation(100.0 + 800.0 * resp(gen), 1500.0);
    obs.push_back(o);
  }
  UniversalKriging uk(obs, paper_model());
  for (const auto& o : obs) {
    const auto p = uk.predict(o.x, o.y, o.covariate);
    CHECK(std::abs(p.value - o.response) < 1e-9);
  }
}

TEST_CASE("kriging weights sum to one") {
  std::mt19937_64 gen(32);
  std::uniform_real_distribution<double> coord(0.0, 8000.0);
  std::vector<KrigingObservation> obs;
  for (int i = 0; i < 12; ++i) {
    obs.push_back({coord(gen), coord(gen), coord(gen) / 8000.0,
                   coord(gen) / 4000.0 - 1.0});
  }
  UniversalKriging uk(obs, paper_model());
  for (int t = 0; t < 20; ++t) {
    const auto p = uk.predict(coord(gen), coord(gen), 0.3);
    double sum = 0.0;
    for (double w : p.weights) sum += w;
    CHECK(std::abs(sum - 1.0) < 1e-10);
  }
}

TEST_CASE("constant responses predict the constant everywhere") {
  std::vector<KrigingObservation> obs = {{0, 0, 0.4, 0.1},
                                         {1000, 0, 0.4, 0.7},
                                         {0, 1000, 0.4, 0.4},
                                         {1500, 1200, 0.4, 0.9}};
  UniversalKriging uk(obs, paper_model());
  for (double x : {250.0, 900.0, 3000.0}) {
    CHECK(uk.predict(x, x / 2.0, 0.5).value == Catch::Approx(0.4).margin(1e-9));
  }
}

TEST_CASE("4-point layout matches an independent dense solve") {
  const std::vector<KrigingObservation> obs = {{0, 0, 0.1, -0.2},
                                               {2000, 0, 0.9, 0.5},
                                               {0, 2000, 0.3, 0.1},
                                               {2500, 2200, 0.7, 0.8}};
  const VariogramModel m = paper_model();
  const double tx = 800.0, ty = 600.0, tc = 0.25;

  const int n = 4, dim = n + 2;
  std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(dim), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double h = std::hypot(obs[static_cast<std::size_t>(i)].x -
                                      obs[static_cast<std::size_t>(j)].x,
                                  obs[static_cast<std::size_t>(i)].y -
                                      obs[static_cast<std::size_t>(j)].y);
      a[static_cast<std::size_t>(i) * dim + j] =
          (i == j) ? 0.0 : spherical_gamma(h, m);
    }
    a[static_cast<std::size_t>(i) * dim + n] = 1.0;
    a[static_cast<std::size_t>(i) * dim + n + 1] =
        obs[static_cast<std::size_t>(i)].covariate;
    a[static_cast<std::size_t>(n) * dim + i] = 1.0;
    a[static_cast<std::size_t>(n + 1) * dim + i] =
        obs[static_cast<std::size_t>(i)].covariate;
    rhs[static_cast<std::size_t>(i)] = spherical_gamma(
        std::hypot(tx - obs[static_cast<std::size_t>(i)].x,
                   ty - obs[static_cast<std::size_t>(i)].y),
        m);
  }
  rhs[static_cast<std::size_t>(n)] = 1.0;
  rhs[static_cast<std::size_t>(n) + 1] = tc;
  const auto sol = gauss_jordan(a, rhs, dim);
  double oracle = 0.0;
  for (int i = 0; i < n; ++i) {
    oracle += sol[static_cast<std::size_t>(i)] *
              obs[static_cast<std::size_t>(i)].response;
  }

  UniversalKriging uk(obs, m);
  CHECK(uk.predict(tx, ty, tc).value == Catch::Approx(oracle).margin(1e-9));
}

TEST_CASE("prediction surface ignores observation ordering") {
  std::vector<KrigingObservation> obs = {{0, 0, 0.1, -0.2},
                                         {2000, 0, 0.9, 0.5},
                                         {0, 2000, 0.3, 0.1},
                                         {2500, 2200, 0.7, 0.8},
                                         {1200, 900, 0.5, 0.3}};
  auto reversed = obs;
  std::reverse(reversed.begin(), reversed.end());
  UniversalKriging a(obs, paper_model());
  UniversalKriging b(reversed, paper_model());
  CHECK(a.predict(777.0, 333.0, 0.2).value ==
        Catch::Approx(b.predict(777.0, 333.0, 0.2).value).margin(1e-10));
}

TEST_CASE("degenerate systems raise numeric errors") {
  // duplicate locations make the gamma matrix singular at zero nugget
  std::vector<KrigingObservation> dup = {{0, 0, 0.1, 0.0},
                                         {0, 0, 0.9, 0.0},
                                         {1000, 1000, 0.5, 1.0}};
  CHECK_THROWS_AS(UniversalKriging(dup, paper_model()), NumericError);
  std::vector<KrigingObservation> few = {{0, 0, 0.1, 0.0}, {1, 1, 0.2, 0.1}};
  CHECK_THROWS_AS(UniversalKriging(few, paper_model()), InputError);
}

TEST_CASE("logit elevation stays finite at the extremes") {
  CHECK(std::isfinite(logit_elevation(0.0, 1000.0)));
  CHECK(std::isfinite(logit_elevation(1000.0, 1000.0)));
  CHECK(logit_elevation(500.0, 999.0) == Catch::Approx(0.0).margin(0.01));
}

TEST_CASE("grid prediction and stratum thresholding") {
  std::vector<KrigingObservation> obs = {{100, 100, 0.0, 0.1},
                                         {900, 100, 1.0, 0.9},
                                         {100, 900, 0.0, 0.2},
                                         {900, 900, 1.0, 0.8}};
  GridGeometry g;
  g.origin_x = 0.0;
  g.origin_y = 1000.0;
  g.cell_size = 200.0;
  g.nrows = 5;
  g.ncols = 5;
  RasterGrid cov = make_grid(g, 0.5);
  cov.at(0, 0) = cov.nodata;
  const RasterGrid pred = universal_kriging_predict(obs, paper_model(), cov);
  CHECK(pred.values[0] == pred.nodata);  // nodata propagates

  RasterGrid lo = make_grid(g, 0.2);
  const ClassMap s1 = threshold_to_stratum(lo);
  for (int code : s1.codes) CHECK(s1.labels[static_cast<std::size_t>(code)] == "1");
  RasterGrid hi = make_grid(g, 0.9);
  const ClassMap s2 = threshold_to_stratum(hi);
  for (int code : s2.codes) CHECK(s2.labels[static_cast<std::size_t>(code)] == "2");
  RasterGrid mid = make_grid(g, 0.5);
  CHECK(threshold_to_stratum(mid).codes[0] == 1);  // >= rule: stratum 2
}
