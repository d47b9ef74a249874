#include "dynamod/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace dynamod {

namespace {

Json vector_to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Json tree_to_json(const RegressionTree& tree) {
  Json nodes = Json::array();
  for (const auto& nd : tree.nodes()) {
    if (nd.is_leaf()) {
      nodes.push_back({{"value", nd.value}});
    } else {
      nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}, {"left", nd.left}, {"right", nd.right}});
    }
  }
  return {{"max_depth", tree.max_depth()}, {"nodes", std::move(nodes)}};
}

RegressionTree tree_from_json(const Json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& jn : j.at("nodes")) {
    TreeNode nd;
    if (jn.contains("value")) {
      nd.value = jn.at("value").get<double>();
    } else {
      nd.feature = jn.at("feature").get<int>();
      nd.threshold = jn.at("threshold").get<double>();
      nd.left = jn.at("left").get<int>();
      nd.right = jn.at("right").get<int>();
    }
    nodes.push_back(nd);
  }
  const auto count = static_cast<int>(nodes.size());
  for (const auto& nd : nodes) {
    if (!nd.is_leaf() && (nd.left <= 0 || nd.left >= count || nd.right <= 0 || nd.right >= count)) {
      throw std::invalid_argument("tree_from_json: child index out of range");
    }
  }
  return RegressionTree(std::move(nodes), j.at("max_depth").get<int>());
}

Json ensemble_to_json(const Ensemble& e, const std::vector<bool>* unused) {
  Json trees = Json::array();
  for (const auto& t : e.trees) trees.push_back(tree_to_json(t));
  Json j{{"learning_rate", e.learning_rate}, {"trees", std::move(trees)}};
  if (unused) j["unused"] = *unused;
  return j;
}

Ensemble ensemble_from_json(const Json& j) {
  Ensemble e;
  e.learning_rate = j.at("learning_rate").get<double>();
  for (const auto& jt : j.at("trees")) e.trees.push_back(tree_from_json(jt));
  return e;
}

Json scorer_to_json(const Scorer& s) {
  if (const auto* lin = s.get_if<LinearScorer>()) {
    return {{"type", "linear"}, {"w", vector_to_json(lin->w)}};
  }
  if (const auto* ens = s.get_if<EnsembleScorer>()) {
    return {{"type", "ensemble"}, {"ensemble", ensemble_to_json(ens->ensemble)}};
  }
  if (const auto* leaf = s.get_if<LeafLinearScorer>()) {
    return {{"type", "leaf_linear"}, {"base", ensemble_to_json(leaf->base)}, {"w", vector_to_json(leaf->w)}};
  }
  const auto& r = *s.get_if<RandomScorer>();
  return {{"type", "random"}, {"p", r.p}, {"seed", r.seed}};
}

Scorer scorer_from_json(const Json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "linear") return LinearScorer{vector_from_json(j.at("w"))};
  if (type == "ensemble") return EnsembleScorer{ensemble_from_json(j.at("ensemble"))};
  if (type == "leaf_linear") {
    LeafLinearScorer s{ensemble_from_json(j.at("base")), vector_from_json(j.at("w"))};
    if (s.w.size() != static_cast<Eigen::Index>(s.base.leaf_count()) + 2) {
      throw std::invalid_argument("scorer_from_json: leaf weight count does not match the base ensemble");
    }
    return s;
  }
  if (type == "random") return RandomScorer{j.at("p").get<double>(), j.at("seed").get<std::uint64_t>()};
  throw std::invalid_argument("scorer_from_json: unknown scorer type '" + type + "'");
}

Json system_to_json(const AdaptiveSystem& sys) {
  Json meta{{"algorithm", sys.algorithm},
            {"params", {{"gamma", sys.params.gamma}, {"p_full", sys.params.p_full}, {"lr", sys.params.lr}}},
            {"features_f1", sys.f1.features_used()},
            {"features_gate", sys.gate.features_used()}};
  return {{"gate", scorer_to_json(sys.gate)}, {"f1", scorer_to_json(sys.f1)}, {"metadata", std::move(meta)}};
}

AdaptiveSystem system_from_json(const Json& j) {
  AdaptiveSystem sys;
  sys.gate = scorer_from_json(j.at("gate"));
  sys.f1 = scorer_from_json(j.at("f1"));
  const auto& meta = j.at("metadata");
  sys.algorithm = meta.at("algorithm").get<std::string>();
  const auto& p = meta.at("params");
  sys.params = {p.at("gamma").get<double>(), p.at("p_full").get<double>(), p.at("lr").get<double>()};
  return sys;
}

void save_json(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace dynamod
