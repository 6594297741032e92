#include "eadf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eadf/csv.hpp"
#include "eadf/error.hpp"
#include "eadf/session.hpp"

namespace eadf {

using nlohmann::json;

double avg_sq_error(std::span<const double> errors, double normalizer) {
    if (errors.empty()) throw ValidationError("error series is empty");
    if (!(normalizer >= 1.0)) throw ValidationError("normalizer must be >= 1");
    double sum = 0.0;
    for (double e : errors) sum += e / normalizer;
    return sum / static_cast<double>(errors.size());
}

std::optional<std::size_t> convergence_index(std::span<const double> squared_errors, std::size_t window) {
    if (squared_errors.empty() || window == 0) return std::nullopt;
    const double peak = *std::max_element(squared_errors.begin(), squared_errors.end());
    if (!(peak > 0.0)) return std::nullopt;
    // |e| < 0.1 max|e|  <=>  e^2 < 0.01 max e^2
    const double limit = 0.01 * peak;
    std::size_t run = 0;
    for (std::size_t n = 0; n < squared_errors.size(); ++n) {
        run = squared_errors[n] < limit ? run + 1 : 0;
        if (run == window) return n + 1 - window;
    }
    return std::nullopt;
}

std::vector<RunMetrics> run_comparison(const std::vector<FusionEvent>& events,
                                       const std::vector<Algorithm>& algorithms, const FusionConfig& base,
                                       FeedbackPolicy policy) {
    if (events.empty()) throw ValidationError("stream is empty");
    const std::size_t m = events.front().decisions.size();
    std::optional<std::int64_t> onset;
    for (const auto& ev : events) {
        if (ev.decisions.size() != m) throw DimensionError("events in stream disagree on M");
        if (!onset && ev.truth && ev.truth->is_positive()) onset = ev.step;
    }

    std::vector<RunMetrics> out;
    for (Algorithm alg : algorithms) {
        FusionConfig cfg = base;
        cfg.algorithm = alg;
        FusionSession session(cfg, m);
        RunMetrics metrics;
        metrics.algorithm = alg;
        metrics.error_series.reserve(events.size());
        metrics.weights_series.reserve(events.size());
        bool onset_seen = false;
        for (std::size_t pos = 0; pos < events.size(); ++pos) {
            const FusionEvent& ev = events[pos];
            const double y_hat = session.estimate(ev.decisions);
            const OracleLabel decision = decide(y_hat);
            if (ev.truth && ev.truth->is_positive()) onset_seen = true;
            if (onset_seen && !metrics.first_alarm_step && decision.is_positive()) metrics.first_alarm_step = ev.step;

            double sq = 0.0;
            std::optional<double> feedback;
            if (ev.truth) {
                const double e = ev.truth->target() - y_hat;
                sq = e * e;
                if (policy.allows(pos)) feedback = ev.truth->target();
            }
            step_session(session, ev, feedback);
            metrics.error_series.push_back(sq);
            metrics.weights_series.push_back(session.weights());
        }
        metrics.avg_sq_error = avg_sq_error(metrics.error_series);
        if (auto idx = convergence_index(metrics.error_series)) metrics.convergence_step = events[*idx].step;
        out.push_back(std::move(metrics));
    }
    return out;
}

json report_to_json(const std::vector<RunMetrics>& metrics) {
    json algs = json::array();
    for (const auto& m : metrics) {
        json weights = json::array();
        for (const auto& w : m.weights_series) weights.push_back(w.as_vector());
        json j;
        j["algorithm"] = to_string(m.algorithm);
        j["avg_sq_error"] = m.avg_sq_error;
        j["first_alarm_step"] = m.first_alarm_step ? json(*m.first_alarm_step) : json(nullptr);
        j["convergence_step"] = m.convergence_step ? json(*m.convergence_step) : json(nullptr);
        j["error_series"] = m.error_series;
        j["weights_series"] = std::move(weights);
        algs.push_back(std::move(j));
    }
    return json{{"algorithms", algs}};
}

std::vector<RunMetrics> report_from_json(const json& j) {
    std::vector<RunMetrics> out;
    try {
        for (const auto& a : j.at("algorithms")) {
            RunMetrics m;
            m.algorithm = parse_algorithm(a.at("algorithm").get<std::string>());
            m.avg_sq_error = a.at("avg_sq_error").get<double>();
            if (!a.at("first_alarm_step").is_null()) m.first_alarm_step = a["first_alarm_step"].get<std::int64_t>();
            if (!a.at("convergence_step").is_null()) m.convergence_step = a["convergence_step"].get<std::int64_t>();
            m.error_series = a.at("error_series").get<std::vector<double>>();
            for (const auto& w : a.at("weights_series")) m.weights_series.emplace_back(w.get<std::vector<double>>());
            out.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid report: ") + e.what());
    }
    return out;
}

std::string report_to_csv(const std::vector<RunMetrics>& metrics) {
    std::ostringstream out;
    out << "algorithm,avg_sq_error,first_alarm_step,convergence_step\n";
    for (const auto& m : metrics) {
        out << csv::escape(to_string(m.algorithm)) << ',' << json(m.avg_sq_error).dump() << ',';
        if (m.first_alarm_step) out << *m.first_alarm_step;
        out << ',';
        if (m.convergence_step) out << *m.convergence_step;
        out << '\n';
    }
    return out.str();
}

void emit_report(const std::vector<RunMetrics>& metrics, const std::filesystem::path& path, ReportFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write report to '" + path.string() + "'");
    if (format == ReportFormat::JSON) {
        out << report_to_json(metrics).dump(2) << '\n';
    } else {
        out << report_to_csv(metrics);
    }
    if (!out) throw ValidationError("failed writing report to '" + path.string() + "'");
}

}  // namespace eadf
