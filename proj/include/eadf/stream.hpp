#pragma once

// Synthetic concept-drift decision streams and their on-disk formats.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eadf/event.hpp"
#include "json.hpp"

namespace eadf {

/// Step index -> expert accuracy in [0, 1]. Knots are (step, accuracy)
/// pairs in increasing step order; the value before the first knot is the
/// first accuracy and after the last knot the last accuracy.
class AccuracySchedule {
public:
    enum class Interpolation { Constant, Linear };

    AccuracySchedule() : AccuracySchedule(1.0) {}
    /// Constant accuracy for every step.
    explicit AccuracySchedule(double accuracy);
    AccuracySchedule(std::vector<std::pair<std::int64_t, double>> knots, Interpolation mode);

    double at(std::int64_t step) const;

    const std::vector<std::pair<std::int64_t, double>>& knots() const noexcept { return knots_; }
    Interpolation mode() const noexcept { return mode_; }

private:
    std::vector<std::pair<std::int64_t, double>> knots_;
    Interpolation mode_ = Interpolation::Constant;
};

/// Half-open step interval [start, end).
struct StepInterval {
    std::int64_t start = 0;
    std::int64_t end = 0;
    bool contains(std::int64_t step) const noexcept { return step >= start && step < end; }
};

struct ExpertProfile {
    std::string id;
    AccuracySchedule accuracy_schedule;
    double confidence_noise = 0.0;  // std-dev of additive Gaussian noise
    std::vector<StepInterval> flip_episodes;

    bool flipped_at(std::int64_t step) const;
};

struct StreamConfig {
    std::vector<ExpertProfile> experts;
    std::int64_t length = 1;
    double positive_rate = 0.5;
    std::uint64_t seed = 0;
    std::vector<std::int64_t> drift_switch_steps;
    std::string preset_id = "preset-0";

    /// Throws ValidationError on an invalid configuration.
    void validate() const;
};

/// Deterministic under cfg.seed. Each step draws the truth y (P(+1) =
/// positive_rate) and one magnitude u ~ U(0.5, 1) shared by all experts,
/// then for every expert in order: sign s = +1 with probability a_i(n) else
/// -1, noise eps ~ N(0, sigma_i); D_i = s*y*u + eps, negated inside a flip
/// episode, clamped to [-1, 1].
std::vector<FusionEvent> generate_stream(const StreamConfig& cfg);

enum class StreamFormat { JSONL, CSV };

StreamFormat stream_format_from_path(const std::filesystem::path& path);

void save_stream(const std::filesystem::path& path, const std::vector<FusionEvent>& events,
                 StreamFormat format);
/// Events in file order. CSV rows get event_id "ev-<step>" and the given
/// preset id. Throws ParseError naming the offending line.
std::vector<FusionEvent> load_stream(const std::filesystem::path& path, StreamFormat format,
                                     const std::string& csv_preset_id = "preset-0");

std::string event_to_jsonl(const FusionEvent& event);
/// line is only used for error reporting.
FusionEvent event_from_json(const nlohmann::json& j, std::size_t line);
nlohmann::json event_to_json(const FusionEvent& event);

nlohmann::json stream_config_to_json(const StreamConfig& cfg);
StreamConfig stream_config_from_json(const nlohmann::json& j);
StreamConfig load_stream_config(const std::filesystem::path& path);

/// Reference scenario for method comparison: five sign-accurate experts
/// with noise 0.05..0.25, 2000 steps, positive rate 0.3, and two flip
/// episodes (expert 2 on [400, 700), expert 4 on [1200, 1500)).
StreamConfig reference_drift_config(std::uint64_t seed = 20110);

/// Reference scenario for convergence profiling: 400 steps with a regime
/// switch at step 110. Before it experts 3 and 5 are flipped and the others
/// unreliable; after it experts 1, 3, 4, 5 are clean and expert 2 is flipped.
StreamConfig regime_switch_config(std::uint64_t seed = 125);

}  // namespace eadf
