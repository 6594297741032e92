#pragma once

// JSON forms of fusion-core types shared by the CLI and the service.

#include "eadf/fusion.hpp"
#include "eadf/session.hpp"
#include "json.hpp"

namespace eadf {

nlohmann::json fusion_config_to_json(const FusionConfig& cfg);
/// Missing keys keep their defaults; unknown keys and invalid values throw
/// ValidationError.
FusionConfig fusion_config_from_json(const nlohmann::json& j, FusionConfig base = {});

/// {new_weights, prediction_before, error_before, lambda, residual_after, status}
nlohmann::json update_result_to_json(const FusionUpdateResult& r);

nlohmann::json label_to_json(OracleLabel label);
/// Accepts -1 or 1 (integer or integral float). Throws ValidationError otherwise.
OracleLabel label_from_json(const nlohmann::json& j);

}  // namespace eadf
