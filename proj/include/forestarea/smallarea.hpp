#pragma once

// Sub-population (municipality) estimation: applies the estimators to the
// plots and areas inside a sub-population, guarded by minimum-observation
// gates per design stratum (>= 30 plots for MA; additionally >= 20 plots
// in each of the two map groups for PS).

#include <map>
#include <set>
#include <string>
#include <vector>

#include "forestarea/estimation.hpp"

namespace forestarea {

inline constexpr int kMinPlotsMA = 30;
inline constexpr int kMinPlotsPerGroupPS = 20;

enum class Method { Direct, ModelAssisted, PostStratified };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Direct: return "direct";
    case Method::ModelAssisted: return "ma";
    case Method::PostStratified: return "ps";
  }
  return "?";
}

struct SubPopulation {
  std::string id;
  // stratum id -> area of this sub-population inside the stratum (km^2)
  std::map<int, double> stratum_area_km2;
  std::set<std::string> plot_ids;
  // (stratum id, domain) -> mapped in-domain area inside the sub-population
  std::map<std::pair<int, Domain>, double> mapped_area_km2;

  double mapped_area(int stratum, Domain d) const {
    auto it = mapped_area_km2.find({stratum, d});
    return it == mapped_area_km2.end() ? 0.0 : it->second;
  }
};

struct StratumVerdict {
  int stratum_id = 0;
  int n_plots = 0;
  int n_in_group = 0;   // plots with an in-domain map prediction (PS only)
  int n_out_group = 0;  // remaining plots (PS only)
  bool pass = false;
  std::string reason;
};

struct GateVerdict {
  std::vector<StratumVerdict> per_stratum;
  bool all_pass = false;
  bool any_pass = false;
};

// Restricts plots to a sub-population, keeping input order.
inline std::vector<SamplePlot> restrict_plots(
    const std::vector<SamplePlot>& plots, const SubPopulation& subpop) {
  std::vector<SamplePlot> out;
  for (const auto& p : plots) {
    if (subpop.plot_ids.count(p.id)) out.push_back(p);
  }
  return out;
}

inline std::vector<Stratum> subpop_strata(const SubPopulation& subpop) {
  std::vector<Stratum> strata;
  for (const auto& [id, area] : subpop.stratum_area_km2) {
    Stratum s;
    s.id = id;
    s.area_km2 = area;
    strata.push_back(s);
  }
  return strata;
}

// Per-stratum applicability; verdicts never throw. Plot counts include
// forest and non-forest plots.
inline GateVerdict gate_check(const SubPopulation& subpop,
                              const std::vector<SamplePlot>& plots,
                              Method method, Domain target) {
  GateVerdict verdict;
  const auto sub_plots = restrict_plots(plots, subpop);
  for (const auto& [sid, area] : subpop.stratum_area_km2) {
    StratumVerdict v;
    v.stratum_id = sid;
    for (const auto& p : sub_plots) {
      if (p.stratum_id != sid) continue;
      ++v.n_plots;
      if (method == Method::PostStratified) {
        const bool in = p.predicted && domain_matches(*p.predicted, target);
        ++(in ? v.n_in_group : v.n_out_group);
      }
    }
    if (method == Method::Direct) {
      v.pass = v.n_plots >= 2;
      if (!v.pass) v.reason = "fewer than 2 plots";
    } else if (method == Method::ModelAssisted) {
      v.pass = v.n_plots >= kMinPlotsMA;
      if (!v.pass) v.reason = "fewer than 30 plots";
    } else {
      v.pass = v.n_in_group >= kMinPlotsPerGroupPS &&
               v.n_out_group >= kMinPlotsPerGroupPS;
      if (!v.pass) v.reason = "fewer than 20 plots in a map group";
    }
    verdict.per_stratum.push_back(v);
  }
  verdict.all_pass = !verdict.per_stratum.empty();
  for (const auto& v : verdict.per_stratum) {
    verdict.all_pass = verdict.all_pass && v.pass;
    verdict.any_pass = verdict.any_pass || v.pass;
  }
  return verdict;
}

struct SubPopEstimate {
  GateVerdict verdict;
  bool applicable = false;          // all strata passed
  std::optional<Estimate> overall;  // only when applicable
  // per-stratum estimates for passing strata
  std::vector<std::pair<int, Estimate>> per_stratum;
  // aggregate over passing strata only; flagged partial unless all pass
  std::optional<Estimate> partial_aggregate;
};

// Delegates to the estimators on the restricted plot set. RE against the
// sub-population's own direct estimate is attached where computable.
inline SubPopEstimate estimate_subpop(const SubPopulation& subpop,
                                      const std::vector<SamplePlot>& plots,
                                      Method method, Domain target) {
  SubPopEstimate out;
  out.verdict = gate_check(subpop, plots, method, target);
  const auto sub_plots = restrict_plots(plots, subpop);
  const auto strata = subpop_strata(subpop);

  auto estimate_on = [&](const std::vector<Stratum>& st) -> Estimate {
    std::vector<SamplePlot> pl;
    std::set<int> keep;
    for (const auto& s : st) keep.insert(s.id);
    for (const auto& p : sub_plots) {
      if (keep.count(p.stratum_id)) pl.push_back(p);
    }
    switch (method) {
      case Method::Direct:
        return direct_estimate(pl, st, target);
      case Method::ModelAssisted: {
        double synth = 0.0;
        for (const auto& s : st) synth += subpop.mapped_area(s.id, target);
        return model_assisted_estimate(pl, st, target, synth);
      }
      case Method::PostStratified: {
        std::map<int, double> in_area;
        for (const auto& s : st) in_area[s.id] = subpop.mapped_area(s.id, target);
        return poststratified_estimate(
            pl, st, binary_groups(pl, st, target, in_area), target);
      }
    }
    throw InputError("bad method");
  };

  auto attach_re = [&](Estimate& e, const std::vector<Stratum>& st) {
    if (method == Method::Direct) return;
    try {
      const Estimate direct = [&] {
        std::vector<SamplePlot> pl;
        std::set<int> keep;
        for (const auto& s : st) keep.insert(s.id);
        for (const auto& p : sub_plots) {
          if (keep.count(p.stratum_id)) pl.push_back(p);
        }
        return direct_estimate(pl, st, target);
      }();
      e.relative_efficiency = relative_efficiency(direct.variance, e.variance);
    } catch (const NumericError&) {
      // direct variance unavailable; leave RE unset
    }
  };

  std::vector<Stratum> passing;
  for (const auto& v : out.verdict.per_stratum) {
    if (!v.pass) continue;
    for (const auto& s : strata) {
      if (s.id == v.stratum_id) passing.push_back(s);
    }
  }
  for (const auto& s : passing) {
    Estimate e = estimate_on({s});
    attach_re(e, {s});
    out.per_stratum.emplace_back(s.id, e);
  }
  if (out.verdict.all_pass) {
    out.applicable = true;
    Estimate e = estimate_on(strata);
    attach_re(e, strata);
    out.overall = e;
    out.partial_aggregate = e;
  } else if (!passing.empty()) {
    Estimate e = estimate_on(passing);
    attach_re(e, passing);
    e.variance_status = VarianceStatus::Partial;
    out.partial_aggregate = e;
  }
  return out;
}

}  // namespace forestarea
