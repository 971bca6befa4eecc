#pragma once

// Forest (de)serialization. Versioned JSON text format with a magic string
// so files are self-describing; trees are stored as flat node arrays
// [feature, threshold, left, right, leaf_class].

#include <fstream>
#include <string>

#include <json.hpp>

#include "forestarea/errors.hpp"
#include "forestarea/forest.hpp"

namespace forestarea {

inline constexpr const char* kForestMagic = "FORESTAREA-RF-1";

inline nlohmann::json forest_to_json(const Forest& forest) {
  nlohmann::json j;
  j["magic"] = kForestMagic;
  j["ntrees"] = forest.ntrees;
  j["mtry"] = forest.mtry;
  j["seed"] = forest.seed;
  j["feature_names"] = forest.feature_names;
  j["class_labels"] = forest.class_labels;
  j["importance"] = forest.importance;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : forest.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf_class});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

inline Forest forest_from_json(const nlohmann::json& j) {
  if (!j.contains("magic") || j.at("magic") != kForestMagic) {
    throw InputError("not a forest file (magic string mismatch)");
  }
  Forest f;
  f.ntrees = j.at("ntrees").get<int>();
  f.mtry = j.at("mtry").get<int>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  f.class_labels = j.at("class_labels").get<std::vector<std::string>>();
  f.importance = j.at("importance").get<std::vector<double>>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    for (const auto& jn : jt) {
      TreeNode n;
      n.feature = jn.at(0).get<int>();
      n.threshold = jn.at(1).get<double>();
      n.left = jn.at(2).get<int>();
      n.right = jn.at(3).get<int>();
      n.leaf_class = jn.at(4).get<int>();
      t.nodes.push_back(n);
    }
    f.trees.push_back(std::move(t));
  }
  if (static_cast<int>(f.trees.size()) != f.ntrees) {
    throw InputError("forest file corrupt: tree count mismatch");
  }
  return f;
}

inline void save_forest(const Forest& forest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << forest_to_json(forest).dump();
  out << '\n';
}

inline Forest load_forest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open forest file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("cannot parse forest file '" + path + "': " + e.what());
  }
  return forest_from_json(j);
}

}  // namespace forestarea
