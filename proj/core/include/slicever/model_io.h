// Versioned JSON persistence for fitted trees, ensembles and verifier models
// (schema: schemas/verifier_model.schema.json). load(save(m)) == m exactly.
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "slicever/verifier.h"

namespace slicever::model_io {

inline constexpr const char* kModelFormat = "slicever-model";
inline constexpr int kModelVersion = 1;

using Json = nlohmann::ordered_json;

Json to_json(const tree::Tree& t);
tree::Tree tree_from_json(const Json& j);

Json to_json(const tree::Ensemble& e);
tree::Ensemble ensemble_from_json(const Json& j);

Json to_json(const FeatureStats& s);
FeatureStats feature_stats_from_json(const Json& j);

Json to_json(const verify::VerifierModel& m);
verify::VerifierModel model_from_json(const Json& j);

std::string serialize_model(const verify::VerifierModel& m);
verify::VerifierModel parse_model(const std::string& text);

void save_model(const verify::VerifierModel& m, const std::filesystem::path& path);
verify::VerifierModel load_model(const std::filesystem::path& path);

}  // namespace slicever::model_io
