#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "forestarea/errors.hpp"

namespace forestarea {

// Estimation target classes. ForestTotal is the union of the stocked species
// classes and Unstocked; it is only ever an estimation target, never a label
// stored on a plot or map cell.
enum class Domain : int {
  Spruce = 0,
  Pine = 1,
  Deciduous = 2,
  NonForest = 3,
  Unstocked = 4,
  ForestTotal = 5,
};

inline constexpr int kNumPlotDomains = 5;  // storable labels

inline std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::Spruce: return "spruce";
    case Domain::Pine: return "pine";
    case Domain::Deciduous: return "deciduous";
    case Domain::NonForest: return "non-forest";
    case Domain::Unstocked: return "unstocked";
    case Domain::ForestTotal: return "forest-total";
  }
  return "?";
}

inline std::optional<Domain> parse_domain(std::string_view s) {
  if (s == "spruce") return Domain::Spruce;
  if (s == "pine") return Domain::Pine;
  if (s == "deciduous") return Domain::Deciduous;
  if (s == "non-forest" || s == "nonforest") return Domain::NonForest;
  if (s == "unstocked") return Domain::Unstocked;
  if (s == "forest-total" || s == "forest") return Domain::ForestTotal;
  return std::nullopt;
}

inline Domain parse_domain_or_throw(std::string_view s) {
  auto d = parse_domain(s);
  if (!d) throw InputError("unknown domain label: '" + std::string(s) + "'");
  return *d;
}

// Indicator y(label, target). Unstocked plots count toward forest-total but
// toward no species domain.
inline bool domain_matches(Domain label, Domain target) {
  if (target == Domain::ForestTotal) {
    return label == Domain::Spruce || label == Domain::Pine ||
           label == Domain::Deciduous || label == Domain::Unstocked;
  }
  return label == target;
}

}  // namespace forestarea
