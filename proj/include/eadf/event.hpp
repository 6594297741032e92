#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "eadf/fusion.hpp"

namespace eadf {

/// One time-step sample offered to a fusion session.
struct FusionEvent {
    std::string event_id;
    std::int64_t step = 0;
    DecisionVector decisions;
    std::optional<OracleLabel> truth;
    std::optional<std::string> region_ref;
    std::string preset_id;

    friend bool operator==(const FusionEvent&, const FusionEvent&) = default;
};

}  // namespace eadf
