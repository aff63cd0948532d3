#pragma once

#include <filesystem>

#include <json.hpp>

#include "mmr/model.hpp"

namespace mmr {

// Checkpoint document:
//   {"format": "mmr-model", "version": 1, "input_dim": d,
//    "layers": [{"activation": "relu", "weight": [[...], ...], "bias": [...]}, ...],
//    "head": {"weight": [[...], ...], "bias": [...]}}
// Doubles are printed in shortest round-trip form, so save/load is exact.

nlohmann::json model_to_json(const Model& m);
Model model_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Model& m);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace mmr
