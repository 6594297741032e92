#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "eadf/event.hpp"
#include "eadf/fusion.hpp"

namespace eadf {

/// One applied update in a session's history.
struct StepRecord {
    std::int64_t step = 0;
    WeightVector weights;  // after the update
    double y_hat = 0.0;
    double error = 0.0;
    OracleLabel decision = OracleLabel::negative();
    UpdateStatus status = UpdateStatus::Skipped;
    std::optional<double> lambda;
};

/// Weight state of one fusion session (one camera preset). Steps must be
/// applied serially; distinct sessions are independent.
class FusionSession {
public:
    FusionSession(FusionConfig config, std::size_t dims);
    FusionSession(FusionConfig config, WeightVector initial);

    const FusionConfig& config() const noexcept { return config_; }
    std::size_t dims() const noexcept { return weights_.size(); }
    const WeightVector& weights() const noexcept { return weights_; }
    const std::vector<StepRecord>& history() const noexcept { return history_; }

    /// Fused estimate and decision for the current weights.
    double estimate(const DecisionVector& d) const { return predict(weights_, d); }

    /// Applies the configured update towards target and records it. Fixed
    /// sessions record nothing and keep their weights.
    std::optional<FusionUpdateResult> apply(std::int64_t step, const DecisionVector& d, double target);

private:
    FusionConfig config_;
    WeightVector weights_;
    std::vector<StepRecord> history_;
};

/// Returns the fused decision for event with the weights held before the
/// step, then applies the configured update when feedback is present.
OracleLabel step_session(FusionSession& session, const FusionEvent& event,
                         std::optional<double> feedback);

}  // namespace eadf
