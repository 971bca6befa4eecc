#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "forestarea/smallarea.hpp"

using namespace forestarea;

namespace {

SamplePlot plot(std::string id, int stratum, Domain obs, double weight,
                Domain pred) {
  SamplePlot p;
  p.id = std::move(id);
  p.stratum_id = stratum;
  p.observed = obs;
  p.predicted = pred;
  p.inclusion_probability = 1.0 / weight;
  return p;
}

// One stratum, n plots: `n_spruce` observed spruce (first ones predicted
// spruce when map_good, otherwise predicted pine), rest pine.
std::vector<SamplePlot> uniform_plots(int n, int n_spruce, double weight,
                                      bool map_good, int stratum = 1,
                                      const std::string& prefix = "p") {
  std::vector<SamplePlot> out;
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03d", prefix.c_str(), i);
    const Domain obs = i < n_spruce ? Domain::Spruce : Domain::Pine;
    const Domain pred =
        map_good ? obs : (i % 2 == 0 ? Domain::Pine : Domain::Spruce);
    out.push_back(plot(buf, stratum, obs, weight, pred));
  }
  return out;
}

SubPopulation subpop_of(const std::vector<SamplePlot>& plots,
                        std::map<int, double> areas,
                        std::map<std::pair<int, Domain>, double> mapped = {}) {
  SubPopulation sp;
  sp.id = "m1";
  sp.stratum_area_km2 = std::move(areas);
  sp.mapped_area_km2 = std::move(mapped);
  for (const auto& p : plots) sp.plot_ids.insert(p.id);
  return sp;
}

}  // namespace

TEST_CASE("gates: 29 plots fail MA, 30 pass") {
  const auto p29 = uniform_plots(29, 10, 3.0, true);
  const auto p30 = uniform_plots(30, 10, 3.0, true);
  const auto sp29 = subpop_of(p29, {{1, 87.0}});
  const auto sp30 = subpop_of(p30, {{1, 90.0}});
  CHECK_FALSE(gate_check(sp29, p29, Method::ModelAssisted, Domain::Spruce)
                  .all_pass);
  CHECK(gate_check(sp30, p30, Method::ModelAssisted, Domain::Spruce).all_pass);
}

TEST_CASE("gates: PS needs 20 plots in each map group") {
  // 50 plots split 25/25 by predicted spruce vs rest
  const auto p50 = uniform_plots(50, 25, 2.0, true);
  const auto sp = subpop_of(p50, {{1, 100.0}});
  CHECK(gate_check(sp, p50, Method::PostStratified, Domain::Spruce).all_pass);

  // 40 forested plots but only 10 predicted spruce
  const auto p40 = uniform_plots(40, 10, 2.0, true);
  const auto sp40 = subpop_of(p40, {{1, 80.0}});
  const auto v =
      gate_check(sp40, p40, Method::PostStratified, Domain::Spruce);
  CHECK_FALSE(v.all_pass);
  CHECK(v.per_stratum[0].n_in_group == 10);
  // the same sub-population passes MA (40 >= 30)
  CHECK(gate_check(sp40, p40, Method::ModelAssisted, Domain::Spruce).all_pass);
}

TEST_CASE("gate monotonicity: adding plots never flips pass to fail") {
  auto plots = uniform_plots(30, 20, 2.0, true);
  auto sp = subpop_of(plots, {{1, 60.0}});
  REQUIRE(gate_check(sp, plots, Method::ModelAssisted, Domain::Spruce).all_pass);
  auto more = uniform_plots(45, 22, 2.0, true);
  const auto sp2 = subpop_of(more, {{1, 90.0}});
  CHECK(gate_check(sp2, more, Method::ModelAssisted, Domain::Spruce).all_pass);
}

TEST_CASE("restriction to the whole population is the identity") {
  const auto plots = uniform_plots(40, 15, 2.0, false);
  std::vector<Stratum> strata = {{1, 80.0, 2.0}};
  const auto sp = subpop_of(plots, {{1, 80.0}},
                            {{{1, Domain::Spruce}, 30.0}});
  const SubPopEstimate est =
      estimate_subpop(sp, plots, Method::ModelAssisted, Domain::Spruce);
  REQUIRE(est.applicable);
  const Estimate national =
      model_assisted_estimate(plots, strata, Domain::Spruce, 30.0);
  CHECK(est.overall->total == national.total);
  CHECK(est.overall->variance == national.variance);
}

TEST_CASE("direct sub-population totals are additive over a partition") {
  auto a = uniform_plots(10, 4, 3.0, true, 1, "a");
  auto b = uniform_plots(14, 9, 3.0, true, 1, "b");
  std::vector<SamplePlot> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const auto spa = subpop_of(a, {{1, 30.0}});
  const auto spb = subpop_of(b, {{1, 42.0}});
  std::vector<Stratum> whole = {{1, 72.0, 3.0}};
  // national direct with per-subpop stratum areas proportional to plots
  const double ta =
      direct_estimate(restrict_plots(all, spa), subpop_strata(spa),
                      Domain::Spruce)
          .total;
  const double tb =
      direct_estimate(restrict_plots(all, spb), subpop_strata(spb),
                      Domain::Spruce)
          .total;
  const double national = direct_estimate(all, whole, Domain::Spruce).total;
  CHECK(ta + tb == Catch::Approx(national).margin(1e-9));
}

TEST_CASE("anti-correlated local map reports RE below one, not suppressed") {
  // map wrong everywhere: residual variance exceeds the outcome variance
  const auto plots = uniform_plots(40, 20, 2.0, false);
  const auto sp = subpop_of(plots, {{1, 80.0}},
                            {{{1, Domain::Spruce}, 40.0}});
  const SubPopEstimate est =
      estimate_subpop(sp, plots, Method::ModelAssisted, Domain::Spruce);
  REQUIRE(est.applicable);
  REQUIRE(est.overall->relative_efficiency.has_value());
  CHECK(*est.overall->relative_efficiency < 1.0);
}

TEST_CASE("locally perfect map yields the infinite RE sentinel") {
  const auto plots = uniform_plots(40, 20, 2.0, true);
  const auto sp = subpop_of(plots, {{1, 80.0}},
                            {{{1, Domain::Spruce}, 40.0}});
  const SubPopEstimate est =
      estimate_subpop(sp, plots, Method::ModelAssisted, Domain::Spruce);
  REQUIRE(est.applicable);
  REQUIRE(est.overall->relative_efficiency.has_value());
  CHECK(std::isinf(*est.overall->relative_efficiency));
}

TEST_CASE("partial verdicts: failing stratum excluded, aggregate flagged") {
  auto s1 = uniform_plots(35, 15, 2.0, true, 1, "a");
  auto s2 = uniform_plots(5, 2, 9.0, true, 2, "b");  // fails the MA gate
  std::vector<SamplePlot> all = s1;
  all.insert(all.end(), s2.begin(), s2.end());
  const auto sp = subpop_of(all, {{1, 70.0}, {2, 45.0}},
                            {{{1, Domain::Spruce}, 30.0},
                             {{2, Domain::Spruce}, 10.0}});
  const SubPopEstimate est =
      estimate_subpop(sp, all, Method::ModelAssisted, Domain::Spruce);
  CHECK_FALSE(est.applicable);
  CHECK_FALSE(est.overall.has_value());
  REQUIRE(est.per_stratum.size() == 1);
  CHECK(est.per_stratum[0].first == 1);
  REQUIRE(est.partial_aggregate.has_value());
  CHECK(est.partial_aggregate->variance_status == VarianceStatus::Partial);
}

TEST_CASE("failed gates produce verdicts, never fabricated numbers") {
  const auto plots = uniform_plots(10, 4, 2.0, true);
  const auto sp = subpop_of(plots, {{1, 20.0}});
  const SubPopEstimate est =
      estimate_subpop(sp, plots, Method::ModelAssisted, Domain::Spruce);
  CHECK_FALSE(est.applicable);
  CHECK_FALSE(est.overall.has_value());
  CHECK(est.per_stratum.empty());
  CHECK_FALSE(est.partial_aggregate.has_value());
  CHECK_FALSE(est.verdict.per_stratum[0].reason.empty());
}
