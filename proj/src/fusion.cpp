#include "eadf/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "eadf/error.hpp"

namespace eadf {

namespace {

constexpr double kMaxExponent = 700.0;

void require_same_size(const WeightVector& w, const DecisionVector& d) {
    if (w.size() != d.size()) {
        throw DimensionError("weight vector has " + std::to_string(w.size()) +
                             " entries but decision vector has " + std::to_string(d.size()));
    }
}

void require_finite_target(double target) {
    if (!std::isfinite(target)) throw ValidationError("oracle target must be finite");
}

FusionUpdateResult unchanged(const WeightVector& w, double y_hat, double target, UpdateStatus status,
                             std::optional<double> lambda) {
    FusionUpdateResult r;
    r.new_weights = w;
    r.prediction_before = y_hat;
    r.error_before = target - y_hat;
    r.lambda = lambda;
    r.residual_after = std::abs(target - y_hat);
    r.status = status;
    return r;
}

// A separable convex cost g(w) = sum_i phi(w_i). The e-projection onto
// D.v = y satisfies phi'(v_i) = phi'(w_i) + lambda D_i, so each coordinate
// is an increasing function of lambda and the fused response
// h(lambda) = sum_i D_i v_i(lambda) is nondecreasing.
struct EntropyCost {
    // Floored at the smallest normal double so long runs of negative
    // feedback cannot underflow a weight to zero.
    static double coordinate(double w, double d, double lambda) {
        return std::max(w * std::exp(lambda * d), std::numeric_limits<double>::min());
    }
    static double slope(double w, double d, double lambda) {
        return w * std::exp(lambda * d) * d * d;
    }
    static void bounds(const FusionConfig& cfg, const DecisionVector& d, double& lo, double& hi) {
        const double cap = kMaxExponent / d.max_abs();
        lo = std::max(cfg.lambda_min, -cap);
        hi = std::min(cfg.lambda_max, cap);
    }
};

// phi(w) = w^2: 2 v_i = 2 w_i + lambda D_i.
struct EuclideanCost {
    static double coordinate(double w, double d, double lambda) { return w + 0.5 * lambda * d; }
    static double slope(double, double d, double) { return 0.5 * d * d; }
    static void bounds(const FusionConfig&, const DecisionVector&, double& lo, double& hi) {
        lo = -std::numeric_limits<double>::infinity();
        hi = std::numeric_limits<double>::infinity();
    }
};

template <class CostT>
std::vector<double> mapped_weights(const WeightVector& w, const DecisionVector& d, double lambda) {
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = CostT::coordinate(w[i], d[i], lambda);
    return out;
}

template <class CostT>
double response(const WeightVector& w, const DecisionVector& d, double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += CostT::coordinate(w[i], d[i], lambda) * d[i];
    return s;
}

template <class CostT>
double response_slope(const WeightVector& w, const DecisionVector& d, double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += CostT::slope(w[i], d[i], lambda);
    return s;
}

// Pulls a bound toward zero until the response is finite there.
template <class CostT>
double finite_bound(const WeightVector& w, const DecisionVector& d, double bound) {
    while (bound != 0.0 && std::isfinite(bound) && !std::isfinite(response<CostT>(w, d, bound))) {
        bound *= 0.5;
    }
    return bound;
}

struct LambdaSolution {
    double lambda = 0.0;
    bool clamped = false;
};

// Safeguarded Newton on the monotone response: every iterate tightens the
// bracket [lo, hi], and steps that leave it fall back to bisection.
template <class CostT>
LambdaSolution solve_root(const WeightVector& w, const DecisionVector& d, double target,
                          const FusionConfig& cfg) {
    double lo = 0.0;
    double hi = 0.0;
    CostT::bounds(cfg, d, lo, hi);
    lo = finite_bound<CostT>(w, d, lo);
    hi = finite_bound<CostT>(w, d, hi);

    if (std::isfinite(lo) && response<CostT>(w, d, lo) - target > 0.0) return {lo, true};
    if (std::isfinite(hi) && response<CostT>(w, d, hi) - target < 0.0) return {hi, true};

    double lambda = 0.0;
    for (int it = 0; it < cfg.max_root_iterations; ++it) {
        const double g = response<CostT>(w, d, lambda) - target;
        if (std::abs(g) <= cfg.root_tolerance) break;
        if (g < 0.0) {
            lo = lambda;
        } else {
            hi = lambda;
        }
        const double slope = response_slope<CostT>(w, d, lambda);
        double next = slope > 0.0 ? lambda - g / slope : std::numeric_limits<double>::quiet_NaN();
        if (!(next > lo && next < hi)) {
            if (!std::isfinite(lo) || !std::isfinite(hi)) break;  // no finite bracket to bisect
            next = 0.5 * (lo + hi);
        }
        if (next == lambda) break;
        lambda = next;
    }
    return {lambda, false};
}

// Scan lambda over [lambda_min, lambda_max] at lambda_grid_step and keep the
// point with the smallest absolute residual, starting from the unmodified
// weights.
template <class CostT>
LambdaSolution solve_grid(const WeightVector& w, const DecisionVector& d, double target,
                          const FusionConfig& cfg) {
    double best_lambda = 0.0;
    double best = std::abs(target - response<CostT>(w, d, 0.0));
    const auto steps =
        static_cast<long long>(std::floor((cfg.lambda_max - cfg.lambda_min) / cfg.lambda_grid_step + 1e-9));
    for (long long k = 0; k <= steps; ++k) {
        const double lambda = cfg.lambda_min + static_cast<double>(k) * cfg.lambda_grid_step;
        const double r = std::abs(target - response<CostT>(w, d, lambda));
        if (std::isfinite(r) && r < best) {
            best = r;
            best_lambda = lambda;
        }
    }
    double lo = 0.0;
    double hi = 0.0;
    CostT::bounds(cfg, d, lo, hi);
    lo = finite_bound<CostT>(w, d, lo);
    hi = finite_bound<CostT>(w, d, hi);
    const bool infeasible =
        response<CostT>(w, d, lo) - target > 0.0 || response<CostT>(w, d, hi) - target < 0.0;
    return {best_lambda, infeasible};
}

template <class CostT>
FusionUpdateResult project(const WeightVector& w, const DecisionVector& d, double target,
                           const FusionConfig& cfg, Solver solver) {
    const double y_hat = predict(w, d);
    if (d.is_zero()) return unchanged(w, y_hat, target, UpdateStatus::Skipped, std::nullopt);
    if (std::abs(target - y_hat) <= cfg.root_tolerance) {
        return unchanged(w, y_hat, target, UpdateStatus::Exact, 0.0);
    }

    const LambdaSolution sol = solver == Solver::GridSearch ? solve_grid<CostT>(w, d, target, cfg)
                                                            : solve_root<CostT>(w, d, target, cfg);

    FusionUpdateResult r;
    r.prediction_before = y_hat;
    r.error_before = target - y_hat;
    r.lambda = sol.lambda;
    r.new_weights = WeightVector(mapped_weights<CostT>(w, d, sol.lambda));
    r.residual_after = std::abs(predict(r.new_weights, d) - target);
    if (sol.clamped) {
        r.status = UpdateStatus::Clamped;
    } else if (r.residual_after <= cfg.root_tolerance) {
        r.status = UpdateStatus::Exact;
    } else {
        r.status = UpdateStatus::Approximate;
    }
    return r;
}

}  // namespace

DecisionVector::DecisionVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw DimensionError("decision vector must have at least one entry");
    for (double& v : values_) {
        if (!std::isfinite(v)) throw ValidationError("decision values must be finite");
        v = std::clamp(v, -1.0, 1.0);
    }
}

double DecisionVector::squared_norm() const noexcept {
    return std::inner_product(values_.begin(), values_.end(), values_.begin(), 0.0);
}

double DecisionVector::max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

WeightVector::WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw DimensionError("weight vector must have at least one entry");
    for (double v : weights_) {
        if (!std::isfinite(v)) throw ValidationError("weights must be finite");
    }
}

bool WeightVector::all_positive() const noexcept {
    return std::all_of(weights_.begin(), weights_.end(), [](double v) { return v > 0.0; });
}

OracleLabel OracleLabel::from_int(long long value) {
    if (value == 1) return positive();
    if (value == -1) return negative();
    throw ValidationError("oracle label must be -1 or 1, got " + std::to_string(value));
}

std::string_view to_string(Algorithm a) noexcept {
    switch (a) {
        case Algorithm::EADF: return "eadf";
        case Algorithm::POCS: return "pocs";
        case Algorithm::ULP: return "ulp";
        case Algorithm::Fixed: return "fixed";
    }
    return "unknown";
}

std::string_view to_string(Solver s) noexcept {
    return s == Solver::RootFind ? "root" : "grid";
}

std::string_view to_string(UpdateStatus s) noexcept {
    switch (s) {
        case UpdateStatus::Exact: return "exact";
        case UpdateStatus::Approximate: return "approximate";
        case UpdateStatus::Clamped: return "clamped";
        case UpdateStatus::Skipped: return "skipped";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "eadf") return Algorithm::EADF;
    if (s == "pocs") return Algorithm::POCS;
    if (s == "ulp") return Algorithm::ULP;
    if (s == "fixed") return Algorithm::Fixed;
    throw ValidationError("unknown algorithm '" + std::string(name) + "'");
}

Solver parse_solver(std::string_view name) {
    if (name == "root" || name == "rootfind") return Solver::RootFind;
    if (name == "grid" || name == "gridsearch") return Solver::GridSearch;
    throw ValidationError("unknown solver '" + std::string(name) + "'");
}

UpdateStatus parse_status(std::string_view name) {
    if (name == "exact") return UpdateStatus::Exact;
    if (name == "approximate") return UpdateStatus::Approximate;
    if (name == "clamped") return UpdateStatus::Clamped;
    if (name == "skipped") return UpdateStatus::Skipped;
    throw ValidationError("unknown update status '" + std::string(name) + "'");
}

void FusionConfig::validate() const {
    if (!(mu > 0.0 && mu < 2.0)) throw ValidationError("mu must lie in (0, 2)");
    if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("c must be positive");
    if (!(lambda_min < 0.0 && lambda_max > 0.0)) {
        throw ValidationError("lambda range must satisfy lambda_min < 0 < lambda_max");
    }
    if (!(lambda_grid_step > 0.0)) throw ValidationError("lambda_grid_step must be positive");
    if (!(root_tolerance > 0.0)) throw ValidationError("root_tolerance must be positive");
    if (max_root_iterations < 1) throw ValidationError("max_root_iterations must be >= 1");
}

WeightVector init_weights(std::size_t m) {
    if (m == 0) throw DimensionError("number of sub-algorithms must be positive");
    return WeightVector(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

double predict(const WeightVector& w, const DecisionVector& d) {
    require_same_size(w, d);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * d[i];
    return s;
}

OracleLabel decide(double y_hat) {
    return y_hat >= 0.0 ? OracleLabel::positive() : OracleLabel::negative();
}

FusionUpdateResult pocs_update(const WeightVector& w, const DecisionVector& d, double target,
                               const FusionConfig& cfg) {
    require_finite_target(target);
    cfg.validate();
    const double y_hat = predict(w, d);
    const double norm2 = d.squared_norm();
    if (norm2 == 0.0) return unchanged(w, y_hat, target, UpdateStatus::Skipped, std::nullopt);

    const double e = target - y_hat;
    const double step = cfg.mu * e / norm2;
    std::vector<double> next(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) next[i] = w[i] + step * d[i];

    FusionUpdateResult r;
    r.new_weights = WeightVector(std::move(next));
    r.prediction_before = y_hat;
    r.error_before = e;
    r.lambda = 2.0 * step;
    r.residual_after = std::abs(predict(r.new_weights, d) - target);
    r.status = r.residual_after <= cfg.root_tolerance ? UpdateStatus::Exact : UpdateStatus::Approximate;
    return r;
}

FusionUpdateResult eadf_update(const WeightVector& w, const DecisionVector& d, double target,
                               const FusionConfig& cfg) {
    return bregman_project(w, d, target, Cost::Entropy, cfg);
}

FusionUpdateResult bregman_project(const WeightVector& w, const DecisionVector& d, double target,
                                   Cost cost, const FusionConfig& cfg) {
    require_finite_target(target);
    require_same_size(w, d);
    cfg.validate();
    if (cost == Cost::Euclidean) return project<EuclideanCost>(w, d, target, cfg, Solver::RootFind);
    if (!w.all_positive()) {
        throw DomainError("entropic projection requires strictly positive weights");
    }
    return project<EntropyCost>(w, d, target, cfg, cfg.solver);
}

FusionUpdateResult ulp_update(const WeightVector& w, const DecisionVector& d, double target,
                              const FusionConfig& cfg) {
    require_finite_target(target);
    cfg.validate();
    const double y_hat = predict(w, d);

    // Subtracting the smallest loss keeps the largest exponent at zero.
    std::vector<double> loss(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) loss[i] = (target - d[i]) * (target - d[i]);
    const double min_loss = *std::min_element(loss.begin(), loss.end());
    std::vector<double> v(d.size());
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        v[i] = std::exp(-(loss[i] - min_loss) / (2.0 * cfg.c));
        total += v[i];
    }
    for (double& x : v) x /= total;

    FusionUpdateResult r;
    r.new_weights = WeightVector(std::move(v));
    r.prediction_before = y_hat;
    r.error_before = target - y_hat;
    r.residual_after = std::abs(predict(r.new_weights, d) - target);
    r.status = r.residual_after <= cfg.root_tolerance ? UpdateStatus::Exact : UpdateStatus::Approximate;
    return r;
}

FusionUpdateResult update_weights(const WeightVector& w, const DecisionVector& d, double target,
                                  const FusionConfig& cfg) {
    switch (cfg.algorithm) {
        case Algorithm::EADF: return eadf_update(w, d, target, cfg);
        case Algorithm::POCS: return pocs_update(w, d, target, cfg);
        case Algorithm::ULP: return ulp_update(w, d, target, cfg);
        case Algorithm::Fixed: break;
    }
    require_finite_target(target);
    return unchanged(w, predict(w, d), target, UpdateStatus::Skipped, std::nullopt);
}

double entropic_response(const WeightVector& w, const DecisionVector& d, double lambda) {
    require_same_size(w, d);
    return response<EntropyCost>(w, d, lambda);
}

}  // namespace eadf
