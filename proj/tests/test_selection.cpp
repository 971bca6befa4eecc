#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "forestarea/model_selection.hpp"

using namespace forestarea;

namespace {

Dataset mixture_fixture(std::size_t n_per_class, std::size_t n_noise,
                        std::uint64_t seed, double sep = 3.0) {
  Dataset d;
  d.feature_names.push_back("signal");
  for (std::size_t i = 0; i < n_noise; ++i) {
    d.feature_names.push_back("noise" + std::to_string(i + 1));
  }
  d.class_labels = {"neg", "pos"};
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const int cls = i < n_per_class ? 0 : 1;
    d.labels.push_back(cls);
    d.features.push_back((cls == 0 ? -sep : sep) + noise(gen));
    for (std::size_t f = 0; f < n_noise; ++f) d.features.push_back(noise(gen));
  }
  return d;
}

}  // namespace

TEST_CASE("fold assignment is seeded, balanced, and reproducible") {
  const auto f1 = kfold_assignment(103, 10, 42);
  const auto f2 = kfold_assignment(103, 10, 42);
  CHECK(f1 == f2);
  const auto f3 = kfold_assignment(103, 10, 43);
  CHECK(f1 != f3);
  std::vector<int> counts(10, 0);
  for (int f : f1) ++counts[static_cast<std::size_t>(f)];
  for (int c : counts) {
    CHECK(c >= 10);
    CHECK(c <= 11);
  }
}

TEST_CASE("leave-one-out on a tiny separable set is perfect") {
  const Dataset d = mixture_fixture(6, 0, 5, 5.0);  // 12 samples
  ForestParams params;
  params.ntrees = 25;
  const CvResult cv = kfold_cv(d, static_cast<int>(d.n()), params, 3);
  CHECK(cv.weighted_oa == 1.0);
}

TEST_CASE("cross-validated and training OA agree on a large easy fixture") {
  const Dataset d = mixture_fixture(150, 1, 6, 4.0);
  ForestParams params;
  params.ntrees = 50;
  const CvResult cv = kfold_cv(d, 10, params, 9);
  const Forest f = train(d, params, 9);
  std::vector<int> resub(d.n());
  std::vector<double> row(d.p());
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (std::size_t c = 0; c < d.p(); ++c) row[c] = d.feature(i, c);
    resub[i] = predict_class(f, row);
  }
  const double train_oa = weighted_oa_of(d, resub);
  CHECK(std::abs(train_oa - cv.weighted_oa) < 0.01);
}

TEST_CASE("degenerate single-class fold warns and continues") {
  // 2 folds over 4 samples arranged so one training half can lack a class
  Dataset d;
  d.feature_names = {"x"};
  d.class_labels = {"a", "b", "c"};
  d.labels = {0, 0, 1, 1};
  d.features = {-2.0, -1.0, 1.0, 2.0};
  ForestParams params;
  params.ntrees = 5;
  const CvResult cv = kfold_cv(d, 2, params, 1);
  // class 'c' never appears; every fold must warn about it
  bool warned = false;
  for (const auto& w : cv.warnings) {
    warned = warned || w.find("'c'") != std::string::npos;
  }
  CHECK(warned);
  for (int p : cv.predictions) CHECK(p >= 0);
}

TEST_CASE("single candidate feature: kept with a one-step trace") {
  const Dataset d = mixture_fixture(20, 0, 7);
  ForestParams params;
  params.ntrees = 20;
  const SelectionResult r = select_variables(d, {0}, params, 5, 4);
  REQUIRE(r.selected.size() == 1);
  CHECK(r.selected[0] == 0);
  CHECK(r.trace.size() == 1);
  CHECK(r.trace[0].action == "add");
}

TEST_CASE("selection trace replays to the final feature set") {
  const Dataset d = mixture_fixture(40, 3, 8);
  ForestParams params;
  params.ntrees = 25;
  const SelectionResult r = select_variables(d, {0, 1, 2, 3}, params, 5, 11);
  std::vector<std::string> replay;
  for (const auto& s : r.trace) {
    if (s.action == "add") replay.push_back(s.feature);
    if (s.action == "remove") {
      replay.erase(std::find(replay.begin(), replay.end(), s.feature));
    }
  }
  std::vector<std::string> selected_names;
  for (int f : r.selected) {
    selected_names.push_back(d.feature_names[static_cast<std::size_t>(f)]);
  }
  std::sort(replay.begin(), replay.end());
  std::sort(selected_names.begin(), selected_names.end());
  CHECK(replay == selected_names);
}

TEST_CASE("noise features rejected in at least 90% of seeded runs") {
  int clean = 0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    const Dataset d =
        mixture_fixture(30, 3, 1000 + static_cast<std::uint64_t>(s));
    ForestParams params;
    params.ntrees = 30;
    const SelectionResult r = select_variables(
        d, {0, 1, 2, 3}, params, 5, 500 + static_cast<std::uint64_t>(s));
    bool has_noise = false;
    for (int f : r.selected) has_noise = has_noise || f != 0;
    const bool has_signal =
        std::find(r.selected.begin(), r.selected.end(), 0) != r.selected.end();
    if (!has_noise && has_signal) ++clean;
  }
  CHECK(clean >= 18);  // >= 90% of 20
}

TEST_CASE("tuning grid: single point equals a direct CV run") {
  const Dataset d = mixture_fixture(25, 1, 12);
  ForestParams params;
  params.ntrees = 30;
  params.mtry = 1;
  const auto rows = tune(d, {30}, {1}, 5, 77);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].ntrees == 30);
  CHECK(rows[0].mtry == 1);
  const CvResult cv = kfold_cv(d, 5, params, 77);
  CHECK(rows[0].oa == cv.weighted_oa);
}

TEST_CASE("tuning: more trees does not hurt much") {
  const Dataset d = mixture_fixture(60, 2, 13, 2.0);
  const auto rows = tune(d, {100, 400}, {1}, 5, 21);
  REQUIRE(rows.size() == 2);
  double oa100 = 0.0, oa400 = 0.0;
  for (const auto& r : rows) {
    if (r.ntrees == 100) oa100 = r.oa;
    if (r.ntrees == 400) oa400 = r.oa;
  }
  CHECK(oa400 >= oa100 - 0.01);
}

TEST_CASE("full tuning grid covers every combination") {
  const Dataset d = mixture_fixture(15, 2, 14);
  const auto rows = tune(d, {10, 20}, {1, 2, 3}, 3, 5);
  CHECK(rows.size() == 6);
}
