#include "eadf/serialize.hpp"

#include <cmath>
#include <set>
#include <string>

#include "eadf/error.hpp"

namespace eadf {

using nlohmann::json;

json fusion_config_to_json(const FusionConfig& cfg) {
    return json{{"algorithm", to_string(cfg.algorithm)},
                {"mu", cfg.mu},
                {"c", cfg.c},
                {"lambda_min", cfg.lambda_min},
                {"lambda_max", cfg.lambda_max},
                {"lambda_grid_step", cfg.lambda_grid_step},
                {"solver", to_string(cfg.solver)},
                {"root_tolerance", cfg.root_tolerance},
                {"max_root_iterations", cfg.max_root_iterations}};
}

FusionConfig fusion_config_from_json(const json& j, FusionConfig cfg) {
    if (!j.is_object()) throw ValidationError("fusion config must be a JSON object");
    static const std::set<std::string> known{"algorithm",        "mu",     "c",
                                             "lambda_min",       "lambda_max", "lambda_grid_step",
                                             "solver",           "root_tolerance", "max_root_iterations"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ValidationError("unknown fusion config field '" + key + "'");
    }
    auto number = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
        out = j[key].get<double>();
    };
    try {
        if (j.contains("algorithm")) cfg.algorithm = parse_algorithm(j["algorithm"].get<std::string>());
        if (j.contains("solver")) cfg.solver = parse_solver(j["solver"].get<std::string>());
        number("mu", cfg.mu);
        number("c", cfg.c);
        number("lambda_min", cfg.lambda_min);
        number("lambda_max", cfg.lambda_max);
        number("lambda_grid_step", cfg.lambda_grid_step);
        number("root_tolerance", cfg.root_tolerance);
        if (j.contains("max_root_iterations")) {
            if (!j["max_root_iterations"].is_number_integer()) {
                throw ValidationError("'max_root_iterations' must be an integer");
            }
            cfg.max_root_iterations = j["max_root_iterations"].get<int>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid fusion config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json update_result_to_json(const FusionUpdateResult& r) {
    return json{{"new_weights", r.new_weights.as_vector()},
                {"prediction_before", r.prediction_before},
                {"error_before", r.error_before},
                {"lambda", r.lambda ? json(*r.lambda) : json(nullptr)},
                {"residual_after", r.residual_after},
                {"status", to_string(r.status)}};
}

json label_to_json(OracleLabel label) { return label.value(); }

OracleLabel label_from_json(const json& j) {
    if (j.is_number_integer()) return OracleLabel::from_int(j.get<long long>());
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v == 1.0 || v == -1.0) return OracleLabel::from_int(static_cast<long long>(v));
    }
    throw ValidationError("label must be -1 or 1");
}

}  // namespace eadf
