#include "eadf/stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "eadf/csv.hpp"
#include "eadf/error.hpp"
#include "eadf/rng.hpp"

namespace eadf {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double parse_double(const std::string& s, std::size_t line, const std::string& what) {
    // strtod accepts the forms written by the saver and by spreadsheet exports
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (s.empty() || end == begin || *end != '\0' || !std::isfinite(v)) {
        throw ParseError(line, "invalid number '" + s + "' in " + what);
    }
    return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line, const std::string& what) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(line, "invalid integer '" + s + "' in " + what);
    }
    return v;
}

std::string format_double(double v) {
    // Shortest representation that round-trips, same as the JSON writer.
    return json(v).dump();
}

std::string default_event_id(std::int64_t step) { return "ev-" + std::to_string(step); }

json schedule_to_json(const AccuracySchedule& s) {
    json knots = json::array();
    for (const auto& [step, a] : s.knots()) knots.push_back(json::array({step, a}));
    return json{{"interpolation",
                 s.mode() == AccuracySchedule::Interpolation::Linear ? "linear" : "constant"},
                {"knots", knots}};
}

AccuracySchedule schedule_from_json(const json& j) {
    if (j.is_number()) return AccuracySchedule(j.get<double>());
    const std::string mode = j.value("interpolation", "constant");
    AccuracySchedule::Interpolation interp;
    if (mode == "constant") {
        interp = AccuracySchedule::Interpolation::Constant;
    } else if (mode == "linear") {
        interp = AccuracySchedule::Interpolation::Linear;
    } else {
        throw ValidationError("unknown interpolation '" + mode + "'");
    }
    std::vector<std::pair<std::int64_t, double>> knots;
    for (const auto& k : j.at("knots")) knots.emplace_back(k.at(0).get<std::int64_t>(), k.at(1).get<double>());
    return AccuracySchedule(std::move(knots), interp);
}

}  // namespace

AccuracySchedule::AccuracySchedule(double accuracy)
    : AccuracySchedule({{0, accuracy}}, Interpolation::Constant) {}

AccuracySchedule::AccuracySchedule(std::vector<std::pair<std::int64_t, double>> knots, Interpolation mode)
    : knots_(std::move(knots)), mode_(mode) {
    if (knots_.empty()) throw ValidationError("accuracy schedule needs at least one knot");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        const double a = knots_[i].second;
        if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("accuracy must lie in [0, 1]");
        if (i > 0 && knots_[i].first <= knots_[i - 1].first) {
            throw ValidationError("accuracy knots must have increasing steps");
        }
    }
}

double AccuracySchedule::at(std::int64_t step) const {
    if (step <= knots_.front().first) return knots_.front().second;
    if (step >= knots_.back().first) return knots_.back().second;
    const auto upper = std::upper_bound(knots_.begin(), knots_.end(), step,
                                        [](std::int64_t s, const auto& k) { return s < k.first; });
    const auto lower = std::prev(upper);
    if (mode_ == Interpolation::Constant) return lower->second;
    const double t = static_cast<double>(step - lower->first) /
                     static_cast<double>(upper->first - lower->first);
    return lower->second + t * (upper->second - lower->second);
}

bool ExpertProfile::flipped_at(std::int64_t step) const {
    return std::any_of(flip_episodes.begin(), flip_episodes.end(),
                       [step](const StepInterval& e) { return e.contains(step); });
}

void StreamConfig::validate() const {
    if (experts.empty()) throw ValidationError("stream needs at least one expert");
    if (length < 1) throw ValidationError("stream length must be >= 1");
    if (!(positive_rate >= 0.0 && positive_rate <= 1.0)) {
        throw ValidationError("positive_rate must lie in [0, 1]");
    }
    for (const auto& e : experts) {
        if (!(e.confidence_noise >= 0.0) || !std::isfinite(e.confidence_noise)) {
            throw ValidationError("confidence_noise of expert '" + e.id + "' must be >= 0");
        }
        for (const auto& ep : e.flip_episodes) {
            if (ep.end < ep.start) throw ValidationError("flip episode end precedes start");
        }
    }
}

std::vector<FusionEvent> generate_stream(const StreamConfig& cfg) {
    cfg.validate();
    StreamRng rng(cfg.seed);
    std::vector<FusionEvent> events;
    events.reserve(static_cast<std::size_t>(cfg.length));
    std::vector<double> d(cfg.experts.size());
    for (std::int64_t n = 0; n < cfg.length; ++n) {
        const double y = rng.bernoulli(cfg.positive_rate) ? 1.0 : -1.0;
        const double u = rng.uniform(0.5, 1.0);  // one confidence level per step, shared by all experts
        for (std::size_t i = 0; i < cfg.experts.size(); ++i) {
            const ExpertProfile& e = cfg.experts[i];
            const double s = rng.bernoulli(e.accuracy_schedule.at(n)) ? 1.0 : -1.0;
            const double eps = e.confidence_noise * rng.normal();
            double v = s * y * u + eps;
            if (e.flipped_at(n)) v = -v;
            d[i] = std::clamp(v, -1.0, 1.0);
        }
        events.push_back(FusionEvent{default_event_id(n), n, DecisionVector(d),
                                     y > 0 ? OracleLabel::positive() : OracleLabel::negative(),
                                     std::nullopt, cfg.preset_id});
    }
    return events;
}

StreamFormat stream_format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? StreamFormat::CSV : StreamFormat::JSONL;
}

json event_to_json(const FusionEvent& ev) {
    json j;
    j["event_id"] = ev.event_id;
    j["step"] = ev.step;
    j["decisions"] = std::vector<double>(ev.decisions.values().begin(), ev.decisions.values().end());
    j["truth"] = ev.truth ? json(ev.truth->value()) : json(nullptr);
    j["preset_id"] = ev.preset_id;
    if (ev.region_ref) j["region_ref"] = *ev.region_ref;
    return j;
}

std::string event_to_jsonl(const FusionEvent& ev) { return event_to_json(ev).dump(); }

FusionEvent event_from_json(const json& j, std::size_t line) {
    try {
        FusionEvent ev;
        ev.event_id = j.at("event_id").get<std::string>();
        ev.step = j.at("step").get<std::int64_t>();
        ev.decisions = DecisionVector(j.at("decisions").get<std::vector<double>>());
        if (j.contains("truth") && !j["truth"].is_null()) {
            ev.truth = OracleLabel::from_int(j["truth"].get<long long>());
        }
        ev.preset_id = j.value("preset_id", std::string("preset-0"));
        if (j.contains("region_ref") && !j["region_ref"].is_null()) {
            ev.region_ref = j["region_ref"].get<std::string>();
        }
        return ev;
    } catch (const json::exception& e) {
        throw ParseError(line, std::string("malformed event: ") + e.what());
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(line, e.what());
    }
}

void save_stream(const std::filesystem::path& path, const std::vector<FusionEvent>& events,
                 StreamFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    if (format == StreamFormat::JSONL) {
        for (const auto& ev : events) out << event_to_jsonl(ev) << '\n';
        return;
    }
    const std::size_t m = events.empty() ? 0 : events.front().decisions.size();
    const bool with_truth = std::any_of(events.begin(), events.end(),
                                        [](const FusionEvent& e) { return e.truth.has_value(); });
    out << "step";
    for (std::size_t i = 1; i <= m; ++i) out << ",d" << i;
    if (with_truth) out << ",truth";
    out << "\r\n";
    for (const auto& ev : events) {
        out << ev.step;
        for (double v : ev.decisions.values()) out << ',' << format_double(v);
        if (with_truth) {
            out << ',';
            if (ev.truth) out << ev.truth->value();
        }
        out << "\r\n";
    }
}

std::vector<FusionEvent> load_stream(const std::filesystem::path& path, StreamFormat format,
                                     const std::string& csv_preset_id) {
    const std::string text = read_file(path);
    std::vector<FusionEvent> events;
    std::size_t dims = 0;
    auto check_dims = [&](const FusionEvent& ev, std::size_t line) {
        if (dims == 0) dims = ev.decisions.size();
        if (ev.decisions.size() != dims) {
            throw ParseError(line, "expected " + std::to_string(dims) + " decisions, found " +
                                       std::to_string(ev.decisions.size()));
        }
    };

    if (format == StreamFormat::JSONL) {
        std::set<std::string> ids;
        std::istringstream in(text);
        std::string row;
        std::size_t line = 0;
        while (std::getline(in, row)) {
            ++line;
            if (!row.empty() && row.back() == '\r') row.pop_back();
            if (row.find_first_not_of(" \t") == std::string::npos) continue;
            json j;
            try {
                j = json::parse(row);
            } catch (const json::parse_error& e) {
                throw ParseError(line, std::string("invalid JSON: ") + e.what());
            }
            FusionEvent ev = event_from_json(j, line);
            check_dims(ev, line);
            if (!ids.insert(ev.event_id).second) {
                throw ParseError(line, "duplicate event_id '" + ev.event_id + "'");
            }
            events.push_back(std::move(ev));
        }
        return events;
    }

    const auto rows = csv::parse(text);
    if (rows.empty()) throw ParseError(1, "missing CSV header");
    const auto& header = rows.front().fields;
    if (header.empty() || header.front() != "step") throw ParseError(rows.front().line, "header must start with 'step'");
    const bool with_truth = header.back() == "truth";
    const std::size_t m = header.size() - 1 - (with_truth ? 1 : 0);
    if (m == 0) throw ParseError(rows.front().line, "header names no decision columns");
    for (std::size_t i = 0; i < m; ++i) {
        if (header[i + 1] != "d" + std::to_string(i + 1)) {
            throw ParseError(rows.front().line, "unexpected column '" + header[i + 1] + "'");
        }
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t found = row.fields.size() - 1 - (with_truth ? 1 : 0);
        if (row.fields.size() < 2 || found != m) {
            throw ParseError(row.line, "expected " + std::to_string(m) + " decisions, found " +
                                           std::to_string(row.fields.size() < 2 ? 0 : found));
        }
        FusionEvent ev;
        ev.step = parse_int(row.fields[0], row.line, "step");
        std::vector<double> d(m);
        for (std::size_t i = 0; i < m; ++i) d[i] = parse_double(row.fields[i + 1], row.line, "d" + std::to_string(i + 1));
        ev.decisions = DecisionVector(std::move(d));
        if (with_truth && !row.fields.back().empty()) {
            const auto t = parse_int(row.fields.back(), row.line, "truth");
            if (t != 1 && t != -1) throw ParseError(row.line, "truth must be -1 or 1");
            ev.truth = OracleLabel::from_int(t);
        }
        ev.event_id = default_event_id(ev.step);
        ev.preset_id = csv_preset_id;
        check_dims(ev, row.line);
        events.push_back(std::move(ev));
    }
    return events;
}

json stream_config_to_json(const StreamConfig& cfg) {
    json experts = json::array();
    for (const auto& e : cfg.experts) {
        json eps = json::array();
        for (const auto& ep : e.flip_episodes) eps.push_back(json::array({ep.start, ep.end}));
        experts.push_back(json{{"id", e.id},
                               {"accuracy_schedule", schedule_to_json(e.accuracy_schedule)},
                               {"confidence_noise", e.confidence_noise},
                               {"flip_episodes", eps}});
    }
    return json{{"experts", experts},
                {"length", cfg.length},
                {"positive_rate", cfg.positive_rate},
                {"seed", cfg.seed},
                {"drift_switch_steps", cfg.drift_switch_steps},
                {"preset_id", cfg.preset_id}};
}

StreamConfig stream_config_from_json(const json& j) {
    try {
        StreamConfig cfg;
        for (const auto& e : j.at("experts")) {
            ExpertProfile p;
            p.id = e.value("id", "expert-" + std::to_string(cfg.experts.size() + 1));
            p.accuracy_schedule = schedule_from_json(e.at("accuracy_schedule"));
            p.confidence_noise = e.value("confidence_noise", 0.0);
            if (e.contains("flip_episodes")) {
                for (const auto& ep : e["flip_episodes"]) {
                    p.flip_episodes.push_back({ep.at(0).get<std::int64_t>(), ep.at(1).get<std::int64_t>()});
                }
            }
            cfg.experts.push_back(std::move(p));
        }
        cfg.length = j.at("length").get<std::int64_t>();
        cfg.positive_rate = j.value("positive_rate", 0.5);
        cfg.seed = j.value("seed", std::uint64_t{0});
        cfg.drift_switch_steps = j.value("drift_switch_steps", std::vector<std::int64_t>{});
        cfg.preset_id = j.value("preset_id", std::string("preset-0"));
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid stream config: ") + e.what());
    }
}

StreamConfig load_stream_config(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("invalid JSON in '" + path.string() + "': " + e.what());
    }
    return stream_config_from_json(j);
}

StreamConfig reference_drift_config(std::uint64_t seed) {
    StreamConfig cfg;
    cfg.length = 2000;
    cfg.positive_rate = 0.3;
    cfg.seed = seed;
    cfg.drift_switch_steps = {400, 700, 1200, 1500};
    const double noise[] = {0.05, 0.1, 0.15, 0.2, 0.25};
    for (int i = 0; i < 5; ++i) {
        cfg.experts.push_back(ExpertProfile{"d" + std::to_string(i + 1), AccuracySchedule(1.0), noise[i], {}});
    }
    cfg.experts[1].flip_episodes.push_back({400, 700});
    cfg.experts[3].flip_episodes.push_back({1200, 1500});
    return cfg;
}

StreamConfig regime_switch_config(std::uint64_t seed) {
    constexpr std::int64_t kSwitch = 110;
    StreamConfig cfg;
    cfg.length = 400;
    cfg.positive_rate = 0.3;
    cfg.seed = seed;
    cfg.drift_switch_steps = {kSwitch};
    using Knots = std::vector<std::pair<std::int64_t, double>>;
    struct Regime {
        double before;
        double after;
        bool flipped_before;
        bool flipped_after;
        double noise;
    };
    // Before the switch two experts are in a false-alarm episode and the
    // rest are unreliable; afterwards four experts are clean and one flips.
    const Regime regimes[] = {{0.6, 1.0, false, false, 0.15},
                              {0.75, 1.0, false, true, 0.15},
                              {1.0, 1.0, true, false, 0.1},
                              {0.55, 1.0, false, false, 0.05},
                              {1.0, 1.0, true, false, 0.1}};
    for (int i = 0; i < 5; ++i) {
        const Regime& r = regimes[i];
        ExpertProfile e{"d" + std::to_string(i + 1),
                        AccuracySchedule(Knots{{0, r.before}, {kSwitch, r.after}},
                                         AccuracySchedule::Interpolation::Constant),
                        r.noise,
                        {}};
        if (r.flipped_before) e.flip_episodes.push_back({0, kSwitch});
        if (r.flipped_after) e.flip_episodes.push_back({kSwitch, cfg.length});
        cfg.experts.push_back(std::move(e));
    }
    return cfg;
}

}  // namespace eadf
