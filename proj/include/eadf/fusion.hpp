#pragma once

// Linear decision fusion and the weight-update rules that adapt it from
// oracle feedback: relaxed orthogonal projection (POCS), entropic
// projection (EADF), the generic Bregman projection both derive from, and
// the universal linear predictor (ULP) baseline.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eadf {

/// Confidences of the M sub-detectors for one sample. Values are clamped to
/// [-1, 1] on construction; non-finite values are rejected.
class DecisionVector {
public:
    DecisionVector() = default;
    explicit DecisionVector(std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

    double squared_norm() const noexcept;
    double max_abs() const noexcept;
    bool is_zero() const noexcept { return squared_norm() == 0.0; }

    friend bool operator==(const DecisionVector&, const DecisionVector&) = default;

private:
    std::vector<double> values_;
};

/// Fusion weights. Finite and non-empty; positivity is only required by the
/// entropic update and is checked there.
class WeightVector {
public:
    WeightVector() = default;
    explicit WeightVector(std::vector<double> weights);

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    std::span<const double> values() const noexcept { return weights_; }
    const std::vector<double>& as_vector() const noexcept { return weights_; }

    bool all_positive() const noexcept;

    friend bool operator==(const WeightVector&, const WeightVector&) = default;

private:
    std::vector<double> weights_;
};

/// Oracle verdict: +1 event present, -1 event absent.
class OracleLabel {
public:
    static OracleLabel positive() noexcept { return OracleLabel(1); }
    static OracleLabel negative() noexcept { return OracleLabel(-1); }
    /// Throws ValidationError unless value is -1 or +1.
    static OracleLabel from_int(long long value);

    int value() const noexcept { return value_; }
    double target() const noexcept { return static_cast<double>(value_); }
    bool is_positive() const noexcept { return value_ > 0; }

    friend bool operator==(OracleLabel, OracleLabel) = default;

private:
    explicit OracleLabel(int v) noexcept : value_(v) {}
    int value_;
};

enum class Algorithm { EADF, POCS, ULP, Fixed };
enum class Solver { RootFind, GridSearch };
enum class Cost { Entropy, Euclidean };

/// Outcome of a weight update.
///  Exact       the new weights satisfy the hyperplane within root_tolerance
///  Approximate update applied but the hyperplane is not met to tolerance
///              (relaxed POCS step, grid-search resolution, ULP)
///  Clamped     the hyperplane is unreachable inside [lambda_min, lambda_max];
///              lambda was clamped to the nearer bound
///  Skipped     zero decision vector or Fixed algorithm; weights unchanged
enum class UpdateStatus { Exact, Approximate, Clamped, Skipped };

std::string_view to_string(Algorithm a) noexcept;
std::string_view to_string(Solver s) noexcept;
std::string_view to_string(UpdateStatus s) noexcept;
Algorithm parse_algorithm(std::string_view name);
Solver parse_solver(std::string_view name);
UpdateStatus parse_status(std::string_view name);

struct FusionConfig {
    Algorithm algorithm = Algorithm::EADF;
    double mu = 1.0;  // POCS relaxation, 0 < mu < 2
    double c = 4.0;   // ULP loss temperature
    double lambda_min = -10.0;
    double lambda_max = 10.0;
    double lambda_grid_step = 0.01;
    Solver solver = Solver::RootFind;
    double root_tolerance = 1e-10;
    int max_root_iterations = 200;

    /// Throws ValidationError when any field violates its range.
    void validate() const;
};

struct FusionUpdateResult {
    WeightVector new_weights;
    double prediction_before = 0.0;
    double error_before = 0.0;
    std::optional<double> lambda;
    double residual_after = 0.0;
    UpdateStatus status = UpdateStatus::Skipped;
};

/// M copies of 1/M.
WeightVector init_weights(std::size_t m);

/// Fused estimate sum_i w_i D_i.
double predict(const WeightVector& w, const DecisionVector& d);

/// +1 when y_hat >= 0, otherwise -1.
OracleLabel decide(double y_hat);

// The update rules accept any finite real target so that convergence onto
// arbitrary hyperplanes can be exercised; oracle-driven callers pass
// OracleLabel::target().

/// w' = w + mu * e / ||D||^2 * D. lambda reports the Euclidean Bregman
/// multiplier 2 * mu * e / ||D||^2.
FusionUpdateResult pocs_update(const WeightVector& w, const DecisionVector& d, double target,
                               const FusionConfig& cfg);

/// w'_i = w_i exp(lambda D_i) with lambda chosen so that D.w' = target.
/// Throws DomainError if any w_i <= 0.
FusionUpdateResult eadf_update(const WeightVector& w, const DecisionVector& d, double target,
                               const FusionConfig& cfg);

/// Bregman (e-)projection of w onto {v : D.v = target} under the given cost.
/// Euclidean reduces to the unrelaxed orthogonal projection; Entropy to the
/// exponential update.
FusionUpdateResult bregman_project(const WeightVector& w, const DecisionVector& d, double target,
                                   Cost cost, const FusionConfig& cfg);

/// Universal linear predictor weights exp(-l_i / 2c) / sum_j exp(-l_j / 2c)
/// with l_i = (target - D_i)^2. Independent of the previous weights.
FusionUpdateResult ulp_update(const WeightVector& w, const DecisionVector& d, double target,
                              const FusionConfig& cfg);

/// Dispatches on cfg.algorithm. Fixed returns the weights untouched with
/// status Skipped.
FusionUpdateResult update_weights(const WeightVector& w, const DecisionVector& d, double target,
                                  const FusionConfig& cfg);

/// sum_i w_i exp(lambda D_i) D_i, the fused output after an entropic step of
/// size lambda. Nondecreasing in lambda for positive weights.
double entropic_response(const WeightVector& w, const DecisionVector& d, double lambda);

}  // namespace eadf
