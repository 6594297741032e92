#pragma once

// Evaluation protocols: stream error metrics, method comparison over a shared
// decision stream, and the ionosphere train/test fusion protocol.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eadf/classifier.hpp"
#include "eadf/event.hpp"
#include "eadf/fusion.hpp"
#include "json.hpp"

namespace eadf {

struct RunMetrics {
    Algorithm algorithm = Algorithm::EADF;
    double avg_sq_error = 0.0;
    std::optional<std::int64_t> first_alarm_step;
    std::optional<std::int64_t> convergence_step;
    std::vector<double> error_series;         // e_n^2 per event
    std::vector<WeightVector> weights_series;  // weights after each event
};

/// (1 / F) * sum_n e_n / normalizer. Throws ValidationError on an empty
/// series or normalizer < 1.
double avg_sq_error(std::span<const double> errors, double normalizer = 1.0);

/// First index n such that |e| < 0.1 * max|e| for the `window` steps
/// starting at n. Takes squared errors. Absent if never reached or if the
/// series is identically zero.
std::optional<std::size_t> convergence_index(std::span<const double> squared_errors, std::size_t window = 10);

struct FeedbackPolicy {
    enum class Kind { Always, TrainThenFreeze };
    Kind kind = Kind::Always;
    std::int64_t freeze_after = 0;  // feedback only for stream positions < freeze_after

    static FeedbackPolicy always() { return {}; }
    static FeedbackPolicy train_then_freeze(std::int64_t k) { return {Kind::TrainThenFreeze, k}; }
    bool allows(std::size_t position) const noexcept {
        return kind == Kind::Always || static_cast<std::int64_t>(position) < freeze_after;
    }
};

/// Runs one independent session per algorithm over the same events. Each
/// event is scored with the weights held before its feedback. Events
/// without truth contribute zero error and no feedback.
std::vector<RunMetrics> run_comparison(const std::vector<FusionEvent>& events,
                                       const std::vector<Algorithm>& algorithms, const FusionConfig& base,
                                       FeedbackPolicy policy = FeedbackPolicy::always());

enum class ReportFormat { JSON, CSV };

nlohmann::json report_to_json(const std::vector<RunMetrics>& metrics);
std::vector<RunMetrics> report_from_json(const nlohmann::json& j);
std::string report_to_csv(const std::vector<RunMetrics>& metrics);
/// Writes the report; throws ValidationError when the path is unwritable.
void emit_report(const std::vector<RunMetrics>& metrics, const std::filesystem::path& path, ReportFormat format);

// ------------------------------------------------------------ ionosphere

struct UciDataset {
    std::vector<std::vector<double>> features;  // 351 x 34
    std::vector<OracleLabel> labels;            // g -> +1, b -> -1
    static constexpr std::size_t kRows = 351;
    static constexpr std::size_t kFeatures = 34;
    static constexpr std::size_t kTrain = 200;
};

/// Parses the repository CSV (34 numbers then 'g' or 'b'). Throws ParseError
/// naming the line on malformed rows, ValidationError on a wrong row count.
UciDataset load_uci(const std::filesystem::path& path);
UciDataset parse_uci(const std::string& text);

struct AccuracyEntry {
    std::string name;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct UciResult {
    std::vector<AccuracyEntry> classifiers;
    AccuracyEntry fused;
    WeightVector weights;
};

struct UciOptions {
    Algorithm fusion = Algorithm::EADF;
    FusionConfig fusion_config;
    ClassifierParams knn{.k = 4, .metric = DistanceMetric::Manhattan};
    ClassifierParams logistic{};
    std::vector<ClassifierKind> sub_classifiers{ClassifierKind::KNN, ClassifierKind::NCC, ClassifierKind::LogisticRef};
};

/// Positional split (first 200 train, rest test). Sub-classifiers are
/// trained on the training split and emit +-1 per sample; fusion weights
/// adapt over the training samples in order with ground-truth feedback and
/// are then frozen for the test split.
UciResult run_uci(const UciDataset& data, const UciOptions& options = {});

nlohmann::json uci_result_to_json(const UciResult& r);

}  // namespace eadf
