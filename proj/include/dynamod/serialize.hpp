#pragma once

#include <filesystem>

#include "json.hpp"

#include "dynamod/system.hpp"
#include "dynamod/trees.hpp"

namespace dynamod {

using Json = nlohmann::json;

/// Internal nodes {feature, threshold, left, right}; leaves {value}.
Json tree_to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const Json& j);

/// `unused` flags are written when given.
Json ensemble_to_json(const Ensemble& e, const std::vector<bool>* unused = nullptr);
Ensemble ensemble_from_json(const Json& j);

Json scorer_to_json(const Scorer& s);
Scorer scorer_from_json(const Json& j);

/// {gate, f1, metadata{algorithm, params, features_f1, features_gate}}.
Json system_to_json(const AdaptiveSystem& sys);
AdaptiveSystem system_from_json(const Json& j);

void save_json(const Json& j, const std::filesystem::path& path);
/// Throws DataError on a missing or malformed file.
Json load_json(const std::filesystem::path& path);

}  // namespace dynamod
