#include "eadf/service.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "eadf/error.hpp"
#include "eadf/serialize.hpp"
#include "eadf/stream.hpp"

namespace eadf {

using nlohmann::json;

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void validate_session_id(const std::string& id) {
    static const std::regex pattern("[A-Za-z0-9._-]{1,64}");
    if (!std::regex_match(id, pattern) || id == "." || id == "..") {
        throw ValidationError("session id must match [A-Za-z0-9._-]{1,64}");
    }
}

}  // namespace

std::string_view to_string(FeedbackSource s) noexcept {
    switch (s) {
        case FeedbackSource::Human: return "human";
        case FeedbackSource::GroundTruth: return "ground_truth";
        case FeedbackSource::NoisyOracle: return "noisy_oracle";
    }
    return "unknown";
}

FeedbackSource parse_feedback_source(std::string_view name) {
    if (name == "human") return FeedbackSource::Human;
    if (name == "ground_truth") return FeedbackSource::GroundTruth;
    if (name == "noisy_oracle") return FeedbackSource::NoisyOracle;
    throw ValidationError("unknown feedback source '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- JSON

void OracleMode::validate() const {
    if (kind == Kind::Noisy && !(p_flip >= 0.0 && p_flip <= 0.5)) {
        throw ValidationError("p_flip must lie in [0, 0.5]");
    }
    if (kind == Kind::Intermittent && k < 0) throw ValidationError("intermittent k must be >= 0");
}

json oracle_mode_to_json(const OracleMode& m) {
    switch (m.kind) {
        case OracleMode::Kind::GroundTruth: return json{{"kind", "ground_truth"}};
        case OracleMode::Kind::Human: return json{{"kind", "human"}};
        case OracleMode::Kind::Noisy: return json{{"kind", "noisy"}, {"p_flip", m.p_flip}, {"seed", m.seed}};
        case OracleMode::Kind::Intermittent: return json{{"kind", "intermittent"}, {"k", m.k}};
    }
    return json{};
}

OracleMode oracle_mode_from_json(const json& j) {
    try {
        const json obj = j.is_string() ? json{{"kind", j}} : j;
        if (!obj.is_object()) throw ValidationError("oracle_mode must be a string or an object");
        const std::string kind = obj.at("kind").get<std::string>();
        OracleMode m;
        if (kind == "ground_truth") {
            m = OracleMode::ground_truth();
        } else if (kind == "human") {
            m = OracleMode::human();
        } else if (kind == "noisy") {
            m = OracleMode::noisy(obj.value("p_flip", 0.0), obj.value("seed", std::uint64_t{0}));
        } else if (kind == "intermittent") {
            m = OracleMode::intermittent(obj.at("k").get<std::int64_t>());
        } else {
            throw ValidationError("unknown oracle mode '" + kind + "'");
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid oracle_mode: ") + e.what());
    }
}

json session_spec_to_json(const SessionSpec& spec) {
    json j{{"id", spec.id},
           {"config", fusion_config_to_json(spec.config)},
           {"oracle_mode", oracle_mode_to_json(spec.mode)},
           {"dims", spec.dims}};
    if (spec.initial_weights) j["initial_weights"] = *spec.initial_weights;
    if (spec.pending_ttl) j["pending_ttl_ms"] = spec.pending_ttl->count();
    return j;
}

SessionSpec session_spec_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("session request must be a JSON object");
    try {
        SessionSpec spec;
        spec.id = j.value("id", std::string());
        if (j.contains("config")) spec.config = fusion_config_from_json(j["config"]);
        if (j.contains("oracle_mode")) spec.mode = oracle_mode_from_json(j["oracle_mode"]);
        if (j.contains("initial_weights")) spec.initial_weights = j["initial_weights"].get<std::vector<double>>();
        if (j.contains("dims")) {
            if (!j["dims"].is_number_integer() || j["dims"].get<long long>() < 1) {
                throw ValidationError("dims must be a positive integer");
            }
            spec.dims = j["dims"].get<std::size_t>();
        } else if (spec.initial_weights) {
            spec.dims = spec.initial_weights->size();
        } else {
            throw ValidationError("session needs 'dims' or 'initial_weights'");
        }
        if (j.contains("pending_ttl_ms") && !j["pending_ttl_ms"].is_null()) {
            const auto ms = j["pending_ttl_ms"].get<long long>();
            if (ms <= 0) throw ValidationError("pending_ttl_ms must be positive");
            spec.pending_ttl = std::chrono::milliseconds(ms);
        }
        return spec;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid session request: ") + e.what());
    }
}

json history_entry_to_json(const HistoryEntry& h) {
    return json{{"event_id", h.event_id},
                {"step", h.step},
                {"weights", h.weights},
                {"y_hat", h.y_hat},
                {"error", h.error},
                {"squared_error", h.error * h.error},
                {"decision", h.decision.value()},
                {"label", h.label.value()},
                {"source", to_string(h.source)},
                {"status", to_string(h.status)},
                {"lambda", h.lambda ? json(*h.lambda) : json(nullptr)}};
}

json pending_entry_to_json(const PendingEntry& p) {
    json j = event_to_json(p.event);
    j["y_hat"] = p.y_hat;
    j["decision"] = p.decision.value();
    j["flagged"] = p.flagged;
    return j;
}

json snapshot_to_json(const SessionSnapshot& s) {
    json history = json::array();
    for (const auto& h : s.history) history.push_back(history_entry_to_json(h));
    json pending = json::array();
    for (const auto& p : s.pending) pending.push_back(pending_entry_to_json(p));
    return json{{"id", s.id},
                {"config", fusion_config_to_json(s.config)},
                {"oracle_mode", oracle_mode_to_json(s.mode)},
                {"version", s.version},
                {"weights", s.weights},
                {"history_size", s.history_size},
                {"history", history},
                {"pending", pending},
                {"submitted", s.submitted},
                {"feedback_count", s.feedback_count},
                {"expired", s.expired}};
}

// ---------------------------------------------------------------- session

namespace {

FusionSession make_fusion(const SessionSpec& spec) {
    if (spec.initial_weights) {
        if (spec.initial_weights->size() != spec.dims) throw DimensionError("initial_weights length differs from dims");
        return FusionSession(spec.config, WeightVector(*spec.initial_weights));
    }
    return FusionSession(spec.config, spec.dims);
}

}  // namespace

OracleSession::OracleSession(SessionSpec spec)
    : spec_(std::move(spec)), fusion_(make_fusion(spec_)), noise_rng_(spec_.mode.seed) {
    validate_session_id(spec_.id);
    spec_.mode.validate();
    log_locked(json{{"type", "session"}, {"spec", session_spec_to_json(spec_)}});
}

void OracleSession::bump_locked() {
    ++version_;
    changed_.notify_all();
}

void OracleSession::log_locked(const json& line) {
    log_.push_back(line.dump());
    if (log_file_) {
        std::ofstream out(*log_file_, std::ios::binary | std::ios::app);
        out << log_.back() << '\n';
    }
}

FusionUpdateResult OracleSession::apply_locked(const FusionEvent& event, OracleLabel label,
                                               FeedbackSource source, std::int64_t timestamp_ms) {
    const WeightVector before = fusion_.weights();
    std::optional<FusionUpdateResult> r = fusion_.apply(event.step, event.decisions, label.target());
    if (!r) {
        // Fixed weights: record the verdict, leave the weights alone.
        const double y = predict(before, event.decisions);
        r = FusionUpdateResult{before, y, label.target() - y, std::nullopt, std::abs(label.target() - y),
                               UpdateStatus::Skipped};
    }
    HistoryEntry h;
    h.event_id = event.event_id;
    h.step = event.step;
    h.weights = r->new_weights.as_vector();
    h.y_hat = r->prediction_before;
    h.error = r->error_before;
    h.decision = decide(r->prediction_before);
    h.label = label;
    h.source = source;
    h.status = r->status;
    h.lambda = r->lambda;
    history_.push_back(std::move(h));
    resolved_ids_.insert(event.event_id);
    feedback_log_.push_back(FeedbackRecord{event.event_id, label, source, timestamp_ms});
    log_locked(json{{"type", "feedback"},
                    {"event_id", event.event_id},
                    {"label", label.value()},
                    {"source", to_string(source)},
                    {"timestamp_ms", timestamp_ms}});
    return *r;
}

SubmitResult OracleSession::submit_locked(const FusionEvent& event, bool flagged) {
    if (event.decisions.size() != fusion_.dims()) {
        throw DimensionError("event '" + event.event_id + "' has " + std::to_string(event.decisions.size()) +
                             " decisions, session expects " + std::to_string(fusion_.dims()));
    }
    if (event.event_id.empty()) throw ValidationError("event_id must not be empty");
    if (seen_ids_.contains(event.event_id)) {
        throw ConflictError("event '" + event.event_id + "' was already submitted");
    }

    SubmitResult out;
    out.y_hat = fusion_.estimate(event.decisions);
    out.decision = decide(out.y_hat);

    std::optional<OracleLabel> inline_label;
    FeedbackSource source = FeedbackSource::GroundTruth;
    switch (spec_.mode.kind) {
        case OracleMode::Kind::GroundTruth: inline_label = event.truth; break;
        case OracleMode::Kind::Intermittent:
            if (static_cast<std::int64_t>(submitted_) < spec_.mode.k) inline_label = event.truth;
            break;
        case OracleMode::Kind::Noisy:
            if (event.truth) {
                const bool flip = noise_rng_.bernoulli(spec_.mode.p_flip);
                inline_label = flip ? OracleLabel::from_int(-event.truth->value()) : *event.truth;
                source = FeedbackSource::NoisyOracle;
            }
            break;
        case OracleMode::Kind::Human:
            out.pending = out.decision.is_positive() || flagged;
            break;
    }

    seen_ids_.insert(event.event_id);
    ++submitted_;
    log_locked(json{{"type", "event"}, {"event", event_to_json(event)}, {"flagged", flagged}, {"pending", out.pending}});
    if (out.pending) {
        pending_.push_back(PendingEntry{event, out.y_hat, out.decision, flagged, std::chrono::steady_clock::now()});
    }
    if (inline_label) out.update = apply_locked(event, *inline_label, source, now_ms());
    bump_locked();
    return out;
}

SubmitResult OracleSession::submit_event(const FusionEvent& event, bool flagged) {
    std::lock_guard lock(mutex_);
    return submit_locked(event, flagged);
}

FusionUpdateResult OracleSession::apply_feedback(const std::string& event_id, OracleLabel label,
                                                 FeedbackSource source) {
    std::lock_guard lock(mutex_);
    if (spec_.pending_ttl) {
        // Expire before resolving so a late verdict sees a consistent queue.
        const auto now = std::chrono::steady_clock::now();
        std::vector<std::string> stale;
        for (const auto& p : pending_) {
            if (now - p.enqueued > *spec_.pending_ttl) stale.push_back(p.event.event_id);
        }
        for (const auto& id : stale) expire_locked(id);
        if (!stale.empty()) bump_locked();
    }
    auto it = std::find_if(pending_.begin(), pending_.end(),
                           [&](const PendingEntry& p) { return p.event.event_id == event_id; });
    if (it == pending_.end()) {
        if (resolved_ids_.contains(event_id)) throw ConflictError("event '" + event_id + "' is already resolved");
        if (expired_ids_.contains(event_id)) throw ConflictError("event '" + event_id + "' expired before feedback");
        if (seen_ids_.contains(event_id)) throw NotFoundError("event '" + event_id + "' is not awaiting feedback");
        throw NotFoundError("unknown event '" + event_id + "'");
    }
    const PendingEntry entry = *it;
    pending_.erase(it);
    FusionUpdateResult r = apply_locked(entry.event, label, source, now_ms());
    bump_locked();
    return r;
}

void OracleSession::expire_locked(const std::string& event_id) {
    auto it = std::find_if(pending_.begin(), pending_.end(),
                           [&](const PendingEntry& p) { return p.event.event_id == event_id; });
    if (it == pending_.end()) return;
    pending_.erase(it);
    expired_ids_.insert(event_id);
    log_locked(json{{"type", "expire"}, {"event_id", event_id}});
}

std::size_t OracleSession::expire_pending(std::chrono::steady_clock::time_point now) {
    std::lock_guard lock(mutex_);
    if (!spec_.pending_ttl) return 0;
    std::vector<std::string> stale;
    for (const auto& p : pending_) {
        if (now - p.enqueued > *spec_.pending_ttl) stale.push_back(p.event.event_id);
    }
    for (const auto& id : stale) expire_locked(id);
    if (!stale.empty()) bump_locked();
    return stale.size();
}

SessionSnapshot OracleSession::snapshot(std::optional<std::size_t> last) const {
    std::lock_guard lock(mutex_);
    SessionSnapshot s;
    s.id = spec_.id;
    s.config = spec_.config;
    s.mode = spec_.mode;
    s.version = version_;
    s.weights = fusion_.weights().as_vector();
    s.history_size = history_.size();
    const std::size_t n = last ? std::min(*last, history_.size()) : history_.size();
    s.history.assign(history_.end() - static_cast<std::ptrdiff_t>(n), history_.end());
    s.pending.assign(pending_.begin(), pending_.end());
    s.submitted = submitted_;
    s.feedback_count = feedback_log_.size();
    s.expired = expired_ids_.size();
    return s;
}

std::vector<double> OracleSession::weights() const {
    std::lock_guard lock(mutex_);
    return fusion_.weights().as_vector();
}

std::vector<PendingEntry> OracleSession::pending() const {
    std::lock_guard lock(mutex_);
    return {pending_.begin(), pending_.end()};
}

std::vector<FeedbackRecord> OracleSession::feedback_log() const {
    std::lock_guard lock(mutex_);
    return feedback_log_;
}

std::vector<std::string> OracleSession::log_lines() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void OracleSession::persist(const std::filesystem::path& path) const {
    const auto lines = log_lines();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

void OracleSession::attach_log_file(const std::filesystem::path& path) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    for (const auto& l : log_) out << l << '\n';
    log_file_ = path;
}

std::uint64_t OracleSession::version() const {
    std::lock_guard lock(mutex_);
    return version_;
}

std::uint64_t OracleSession::wait_for_change(std::uint64_t seen, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mutex_);
    changed_.wait_for(lock, timeout, [&] { return version_ != seen || closed_; });
    return version_;
}

void OracleSession::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    changed_.notify_all();
}

bool OracleSession::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

// ---------------------------------------------------------------- replay

std::unique_ptr<OracleSession> replay_session_text(const std::string& text, const std::optional<SessionSpec>& base) {
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    std::unique_ptr<OracleSession> session;
    // Every event seen so far, needed to replay inline feedback.
    std::map<std::string, FusionEvent> events;

    while (std::getline(in, raw)) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.empty()) continue;
        json j;
        try {
            j = json::parse(raw);
        } catch (const json::parse_error& e) {
            throw ParseError(line, std::string("invalid JSON: ") + e.what());
        }
        try {
            const std::string type = j.at("type").get<std::string>();
            if (type == "session") {
                if (session) throw ParseError(line, "duplicate or late session header");
                session = std::make_unique<OracleSession>(session_spec_from_json(j.at("spec")));
                continue;
            }
            if (!session && base) session = std::make_unique<OracleSession>(*base);
            if (!session) throw ParseError(line, "log must start with a session header");
            OracleSession& s = *session;
            if (type == "event") {
                FusionEvent ev = event_from_json(j.at("event"), line);
                if (ev.decisions.size() != s.fusion_.dims()) throw ParseError(line, "event dimension mismatch");
                if (!s.seen_ids_.insert(ev.event_id).second) {
                    throw ParseError(line, "duplicate event '" + ev.event_id + "'");
                }
                // Keep the noisy oracle's draw sequence aligned with the live run.
                if (s.spec_.mode.kind == OracleMode::Kind::Noisy && ev.truth) s.noise_rng_.bernoulli(s.spec_.mode.p_flip);
                ++s.submitted_;
                s.log_locked(j);
                if (j.at("pending").get<bool>()) {
                    const double y = s.fusion_.estimate(ev.decisions);
                    s.pending_.push_back(PendingEntry{ev, y, decide(y), j.value("flagged", false),
                                                      std::chrono::steady_clock::now()});
                }
                events.emplace(ev.event_id, std::move(ev));
            } else if (type == "feedback") {
                const std::string id = j.at("event_id").get<std::string>();
                auto it = events.find(id);
                if (it == events.end()) throw ParseError(line, "feedback for unknown event '" + id + "'");
                if (s.resolved_ids_.contains(id)) throw ParseError(line, "duplicate feedback for '" + id + "'");
                std::erase_if(s.pending_, [&](const PendingEntry& p) { return p.event.event_id == id; });
                s.apply_locked(it->second, label_from_json(j.at("label")),
                               parse_feedback_source(j.at("source").get<std::string>()),
                               j.at("timestamp_ms").get<std::int64_t>());
            } else if (type == "expire") {
                const std::string id = j.at("event_id").get<std::string>();
                const auto before = s.pending_.size();
                s.expire_locked(id);
                if (s.pending_.size() == before) throw ParseError(line, "expiry of a non-pending event '" + id + "'");
            } else {
                throw ParseError(line, "unknown record type '" + type + "'");
            }
            ++s.version_;
        } catch (const ParseError&) {
            throw;
        } catch (const json::exception& e) {
            throw ParseError(line, std::string("malformed record: ") + e.what());
        } catch (const Error& e) {
            throw ParseError(line, e.what());
        }
    }
    if (!session && base) session = std::make_unique<OracleSession>(*base);
    if (!session) throw ParseError(line + 1, "log is empty");
    return session;
}

std::unique_ptr<OracleSession> replay_session(const std::filesystem::path& path, const std::optional<SessionSpec>& base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return replay_session_text(ss.str(), base);
}

// ---------------------------------------------------------------- manager

SessionManager::SessionManager(std::optional<std::filesystem::path> data_dir) : data_dir_(std::move(data_dir)) {
    if (!data_dir_) return;
    std::filesystem::create_directories(*data_dir_);
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(*data_dir_)) {
        if (entry.path().extension() == ".jsonl") logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& p : logs) {
        std::shared_ptr<OracleSession> s;
        try {
            s = replay_session(p);
        } catch (const ParseError& e) {
            throw ValidationError(p.string() + ": " + e.what());
        }
        s->attach_log_file(p);
        sessions_.emplace(s->id(), std::move(s));
    }
}

SessionManager::~SessionManager() { close_all(); }

std::shared_ptr<OracleSession> SessionManager::create(SessionSpec spec) {
    std::unique_lock lock(mutex_);
    if (spec.id.empty()) {
        do {
            spec.id = "session-" + std::to_string(next_id_++);
        } while (sessions_.contains(spec.id));
    }
    if (sessions_.contains(spec.id)) throw ConflictError("session '" + spec.id + "' already exists");
    auto session = std::make_shared<OracleSession>(std::move(spec));
    if (data_dir_) session->attach_log_file(*data_dir_ / (session->id() + ".jsonl"));
    sessions_.emplace(session->id(), session);
    return session;
}

std::shared_ptr<OracleSession> SessionManager::get(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
}

std::vector<std::shared_ptr<OracleSession>> SessionManager::list() const {
    std::shared_lock lock(mutex_);
    std::vector<std::shared_ptr<OracleSession>> out;
    for (const auto& [_, s] : sessions_) out.push_back(s);
    return out;
}

void SessionManager::close_all() {
    for (auto& s : list()) s->close();
}

}  // namespace eadf
