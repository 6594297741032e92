#include "eadf/session.hpp"

#include <string>

#include "eadf/error.hpp"

namespace eadf {

FusionSession::FusionSession(FusionConfig config, std::size_t dims)
    : FusionSession(config, init_weights(dims)) {}

FusionSession::FusionSession(FusionConfig config, WeightVector initial)
    : config_(config), weights_(std::move(initial)) {
    config_.validate();
    if (weights_.size() == 0) throw DimensionError("session needs at least one sub-algorithm");
    if (config_.algorithm == Algorithm::EADF && !weights_.all_positive()) {
        throw DomainError("EADF sessions need strictly positive initial weights");
    }
}

std::optional<FusionUpdateResult> FusionSession::apply(std::int64_t step, const DecisionVector& d,
                                                       double target) {
    if (d.size() != dims()) {
        throw DimensionError("event has " + std::to_string(d.size()) + " decisions, session expects " +
                             std::to_string(dims()));
    }
    if (config_.algorithm == Algorithm::Fixed) return std::nullopt;

    FusionUpdateResult r = update_weights(weights_, d, target, config_);
    weights_ = r.new_weights;
    history_.push_back(StepRecord{step, weights_, r.prediction_before, r.error_before,
                                  decide(r.prediction_before), r.status, r.lambda});
    return r;
}

OracleLabel step_session(FusionSession& session, const FusionEvent& event,
                         std::optional<double> feedback) {
    if (event.decisions.size() != session.dims()) {
        throw DimensionError("event '" + event.event_id + "' has " +
                             std::to_string(event.decisions.size()) + " decisions, session expects " +
                             std::to_string(session.dims()));
    }
    const OracleLabel decision = decide(session.estimate(event.decisions));
    if (feedback) session.apply(event.step, event.decisions, *feedback);
    return decision;
}

}  // namespace eadf
