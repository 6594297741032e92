// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eadf/covariance.hpp"
#include "eadf/eval.hpp"
#include "eadf/fusion.hpp"
#include "eadf/service.hpp"
#include "eadf/stream.hpp"
#include "test_util.hpp"

using namespace eadf;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool ok = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Instance {
    WeightVector w;
    DecisionVector d;
    double y = 0.0;
};

// Random positive weights, decisions in [-1, 1] and a +-1 target reachable by
// the entropic update inside the configured lambda bracket.
Instance feasible_instance(std::mt19937_64& rng, const FusionConfig& cfg) {
    std::uniform_int_distribution<int> dims(2, 10);
    std::uniform_real_distribution<double> conf(-1.0, 1.0);
    std::uniform_real_distribution<double> weight(0.01, 1.0);
    for (;;) {
        const int m = dims(rng);
        std::vector<double> w(m), d(m);
        for (auto& v : w) v = weight(rng);
        for (auto& v : d) v = conf(rng);
        Instance in{WeightVector(w), DecisionVector(d), (rng() & 1) ? 1.0 : -1.0};
        const double lo = entropic_response(in.w, in.d, cfg.lambda_min);
        const double hi = entropic_response(in.w, in.d, cfg.lambda_max);
        if (lo <= in.y && in.y <= hi) return in;
    }
}

Verdict projection_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    FusionConfig eadf;
    FusionConfig pocs;
    pocs.algorithm = Algorithm::POCS;
    pocs.mu = 1.0;
    double worst_eadf = 0.0, worst_pocs = 0.0;
    bool positive = true;
    for (int k = 0; k < 10000; ++k) {
        const Instance in = feasible_instance(rng, eadf);
        const auto a = eadf_update(in.w, in.d, in.y, eadf);
        const auto b = pocs_update(in.w, in.d, in.y, pocs);
        worst_eadf = std::max(worst_eadf, std::abs(predict(a.new_weights, in.d) - in.y));
        worst_pocs = std::max(worst_pocs, std::abs(predict(b.new_weights, in.d) - in.y));
        positive = positive && a.new_weights.all_positive();
    }
    const double secs = seconds_since(t0);
    return {worst_eadf <= 1e-8 && worst_pocs <= 1e-8 && positive && secs < 5.0,
            fmt("max residual eadf=%.2e pocs=%.2e, weights positive=%s, %.2fs", worst_eadf, worst_pocs,
                positive ? "yes" : "no", secs)};
}

Verdict bregman_reduction() {
    std::mt19937_64 rng(2);
    FusionConfig cfg;
    cfg.mu = 1.0;
    std::normal_distribution<double> n;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Instance in = feasible_instance(rng, cfg);
        const double y = in.y + 0.5 * n(rng);  // any finite target
        const auto a = bregman_project(in.w, in.d, y, Cost::Euclidean, cfg);
        const auto b = pocs_update(in.w, in.d, y, cfg);
        for (std::size_t i = 0; i < in.w.size(); ++i) worst = std::max(worst, std::abs(a.new_weights[i] - b.new_weights[i]));
    }
    return {worst <= 1e-12, fmt("max elementwise difference %.2e over 1000 instances", worst)};
}

Verdict closed_form() {
    const WeightVector w({0.5, 0.5});
    const DecisionVector d({1.0, -1.0});
    const auto r = eadf_update(w, d, 1.0, FusionConfig{});
    // Independent oracle: scan lambda on a 1e-6 grid for the best hyperplane fit.
    double best_lambda = 0.0, best_gap = std::numeric_limits<double>::infinity();
    for (long k = -3000000; k <= 3000000; ++k) {
        const double lambda = static_cast<double>(k) * 1e-6;
        const double gap = std::abs(0.5 * std::exp(lambda) - 0.5 * std::exp(-lambda) - 1.0);
        if (gap < best_gap) {
            best_gap = gap;
            best_lambda = lambda;
        }
    }
    const double lambda = r.lambda.value_or(std::nan(""));
    const bool ok = std::abs(lambda - std::asinh(1.0)) <= 1e-9 && std::abs(lambda - best_lambda) <= 1e-6 &&
                    std::abs(r.new_weights[0] - 1.207107) <= 1e-6 && std::abs(r.new_weights[1] - 0.207107) <= 1e-6;
    return {ok, fmt("lambda=%.12f asinh(1)=%.12f grid=%.6f w'=(%.6f, %.6f)", lambda, std::asinh(1.0), best_lambda,
                    r.new_weights[0], r.new_weights[1])};
}

Verdict method_ordering() {
    const auto t0 = Clock::now();
    const auto events = generate_stream(reference_drift_config());
    const auto m = run_comparison(events, {Algorithm::EADF, Algorithm::POCS, Algorithm::ULP, Algorithm::Fixed},
                                  FusionConfig{});
    const double e = m[0].avg_sq_error, p = m[1].avg_sq_error, u = m[2].avg_sq_error, f = m[3].avg_sq_error;
    const double secs = seconds_since(t0);
    return {e <= p && p < u && u < f && secs < 10.0,
            fmt("eadf=%.4e pocs=%.4e ulp=%.4e fixed=%.4e, %.2fs", e, p, u, f, secs)};
}

Verdict convergence_ordering() {
    const auto events = generate_stream(regime_switch_config());
    const auto m = run_comparison(events, {Algorithm::EADF, Algorithm::POCS}, FusionConfig{});
    constexpr auto never = std::numeric_limits<std::int64_t>::max();
    const auto e = m[0].convergence_step.value_or(never);
    const auto p = m[1].convergence_step.value_or(never);
    auto show = [](std::int64_t v) { return v == never ? std::string("none") : std::to_string(v); };
    return {m[0].convergence_step.has_value() && e <= p,
            "eadf=" + show(e) + " pocs=" + show(p)};
}

// Two-pass reference over the pixels the one-pass accumulator uses.
std::array<double, 81> naive_covariance(const FeatureGrid& g) {
    std::vector<const PixelFeature*> used;
    for (std::size_t x2 = 0; x2 < g.height; ++x2)
        for (std::size_t x1 = 0; x1 < g.width; ++x1)
            if (g.interior(x1, x2)) used.push_back(&g.at(x1, x2));
    std::array<double, 9> mean{};
    for (const auto* p : used)
        for (int i = 0; i < 9; ++i) mean[i] += (*p)[i];
    for (auto& v : mean) v /= static_cast<double>(used.size());
    std::array<double, 81> c{};
    for (const auto* p : used)
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j) c[i * 9 + j] += ((*p)[i] - mean[i]) * ((*p)[j] - mean[j]);
    for (auto& v : c) v /= static_cast<double>(used.size() - 1);
    return c;
}

Verdict covariance_oracle() {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> side(3, 64);
    std::uniform_real_distribution<double> px(0.0, 255.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        ImageRegion r(side(rng), side(rng));
        for (auto* plane : {&r.Y, &r.U, &r.V})
            for (auto& v : *plane) v = px(rng);
        const FeatureGrid g = pixel_features(r);
        const auto fast = region_covariance(g, BorderPolicy::InteriorOnly);
        const auto slow = naive_covariance(g);
        for (std::size_t i = 0; i < 81; ++i) worst = std::max(worst, std::abs(fast.C[i] - slow[i]));
    }

    ImageRegion flat(20, 16);
    for (auto& v : flat.Y) v = 117.0;
    for (auto* plane : {&flat.U, &flat.V})
        for (auto& v : *plane) v = px(rng);
    const auto c = region_covariance(pixel_features(flat));
    double y_dependent = 0.0;
    for (std::size_t i : {2u, 5u, 6u, 7u, 8u})
        for (std::size_t j = 0; j < 9; ++j) y_dependent = std::max({y_dependent, std::abs(c(i, j)), std::abs(c(j, i))});

    const RegionFeature f = describe_region(flat);
    const bool ok = worst <= 1e-9 && y_dependent == 0.0 && f.size() == 42;
    return {ok, fmt("fast vs naive max diff %.2e on 100 regions, constant-Y max |c|=%.1e, feature length %zu", worst,
                    y_dependent, f.size())};
}

Verdict uci_ionosphere() {
    const auto t0 = Clock::now();
    const UciResult r = run_uci(load_uci(std::filesystem::path(EADF_SOURCE_DIR) / "data" / "ionosphere.data"));
    double knn = -1.0, best = 0.0;
    for (const auto& c : r.classifiers) {
        best = std::max(best, c.test_accuracy);
        if (c.name == "knn") knn = c.test_accuracy;
    }
    const double secs = seconds_since(t0);
    const bool ok = std::abs(knn - 0.9735) <= 0.03 && r.fused.test_accuracy >= best - 0.02 && secs < 30.0;
    return {ok, fmt("knn test %.2f%% (reference 97.35%%), fused %.2f%% (reference 98.01%%), best single %.2f%%, %.2fs",
                    100 * knn, 100 * r.fused.test_accuracy, 100 * best, secs)};
}

Verdict event_sourcing() {
    eadf::testing::TempDir dir;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> conf(-1.0, 1.0);
    double worst = 0.0;
    int sessions = 0;
    for (Algorithm alg : {Algorithm::EADF, Algorithm::POCS, Algorithm::ULP, Algorithm::Fixed}) {
        for (const auto& mode : {OracleMode::human(), OracleMode::ground_truth(), OracleMode::noisy(0.2, 9),
                                 OracleMode::intermittent(40)}) {
            SessionSpec spec;
            spec.id = "s";
            spec.dims = 5;
            spec.mode = mode;
            spec.config.algorithm = alg;
            OracleSession s(spec);
            for (int k = 0; k < 200; ++k) {
                std::vector<double> d(5);
                for (auto& v : d) v = conf(rng);
                const auto label = (rng() & 1) ? OracleLabel::positive() : OracleLabel::negative();
                const auto id = "e" + std::to_string(k);
                const auto res = s.submit_event(FusionEvent{id, k, DecisionVector(d), label, {}, {}}, rng() % 4 == 0);
                if (res.pending && rng() % 3 != 0) s.apply_feedback(id, label);
            }
            s.persist(dir / "log.jsonl");
            const auto back = replay_session(dir / "log.jsonl");
            const auto a = s.weights(), b = back->weights();
            if (a.size() != b.size()) return {false, "weight dimension changed on replay"};
            for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
            ++sessions;
        }
    }
    return {worst <= 1e-12, fmt("max weight difference %.2e over %d sessions", worst, sessions)};
}

Verdict cli_golden() {
    eadf::testing::TempDir dir;
    auto run = [&](const std::string& args) {
        const std::string cmd = "'" + std::string(EADF_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
        const int raw = std::system(cmd.c_str());
        return WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
    };
    auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
    for (const char* tag : {"1", "2"}) {
        const auto stream = dir / (std::string("s") + tag + ".jsonl");
        if (!run("simulate --reference drift --seed 20110 --out " + q(stream))) return {false, "simulate failed"};
        if (!run("run --stream " + q(stream) + " --report " + q(dir / (std::string("r") + tag + ".json"))))
            return {false, "run failed"};
        if (!run("run --stream " + q(stream) + " --format csv --report " + q(dir / (std::string("r") + tag + ".csv"))))
            return {false, "run failed"};
    }
    using eadf::testing::slurp;
    const bool same_stream = slurp(dir / "s1.jsonl") == slurp(dir / "s2.jsonl");
    const bool same_json = slurp(dir / "r1.json") == slurp(dir / "r2.json");
    const bool same_csv = slurp(dir / "r1.csv") == slurp(dir / "r2.csv");
    return {same_stream && same_json && same_csv,
            fmt("stream identical=%s, json report identical=%s, csv report identical=%s", same_stream ? "yes" : "no",
                same_json ? "yes" : "no", same_csv ? "yes" : "no")};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"projection-correctness", projection_correctness},
        {"bregman-reduction", bregman_reduction},
        {"closed-form-check", closed_form},
        {"method-ordering", method_ordering},
        {"convergence-ordering", convergence_ordering},
        {"covariance-oracle", covariance_oracle},
        {"uci-ionosphere", uci_ionosphere},
        {"event-sourcing-determinism", event_sourcing},
        {"cli-golden-runs", cli_golden},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s %s: %s\n", v.ok ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
        failures += v.ok ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
