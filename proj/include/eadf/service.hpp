#pragma once

// Oracle feedback service: per-preset fusion sessions, a pending queue of
// alarms awaiting verdicts, and an append-only event log for replay.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "eadf/event.hpp"
#include "eadf/fusion.hpp"
#include "eadf/rng.hpp"
#include "eadf/session.hpp"
#include "json.hpp"

namespace eadf {

enum class FeedbackSource { Human, GroundTruth, NoisyOracle };

std::string_view to_string(FeedbackSource s) noexcept;
FeedbackSource parse_feedback_source(std::string_view name);

struct OracleMode {
    enum class Kind { GroundTruth, Noisy, Human, Intermittent };
    Kind kind = Kind::Human;
    double p_flip = 0.0;       // Noisy
    std::uint64_t seed = 0;    // Noisy
    std::int64_t k = 0;        // Intermittent: events with feedback per session

    static OracleMode ground_truth() { return {Kind::GroundTruth}; }
    static OracleMode human() { return {Kind::Human}; }
    static OracleMode noisy(double p, std::uint64_t seed) { return {Kind::Noisy, p, seed, 0}; }
    static OracleMode intermittent(std::int64_t k) { return {Kind::Intermittent, 0.0, 0, k}; }

    /// Throws ValidationError (p_flip outside [0, 0.5], k < 0).
    void validate() const;
};

nlohmann::json oracle_mode_to_json(const OracleMode& m);
/// Accepts a bare kind string ("human", "ground_truth") or an object
/// {"kind": ..., "p_flip": ..., "seed": ..., "k": ...}.
OracleMode oracle_mode_from_json(const nlohmann::json& j);

struct SessionSpec {
    std::string id;
    FusionConfig config;
    OracleMode mode;
    std::size_t dims = 0;
    std::optional<std::vector<double>> initial_weights;
    std::optional<std::chrono::milliseconds> pending_ttl;  // none: pending entries never expire
};

nlohmann::json session_spec_to_json(const SessionSpec& spec);
SessionSpec session_spec_from_json(const nlohmann::json& j);

struct FeedbackRecord {
    std::string event_id;
    OracleLabel label = OracleLabel::negative();
    FeedbackSource source = FeedbackSource::Human;
    std::int64_t timestamp_ms = 0;  // wall clock, milliseconds since the Unix epoch
};

struct PendingEntry {
    FusionEvent event;
    double y_hat = 0.0;
    OracleLabel decision = OracleLabel::negative();
    bool flagged = false;
    std::chrono::steady_clock::time_point enqueued;
};

/// One applied feedback.
struct HistoryEntry {
    std::string event_id;
    std::int64_t step = 0;
    std::vector<double> weights;  // after the update
    double y_hat = 0.0;
    double error = 0.0;
    OracleLabel decision = OracleLabel::negative();
    OracleLabel label = OracleLabel::negative();
    FeedbackSource source = FeedbackSource::Human;
    UpdateStatus status = UpdateStatus::Skipped;
    std::optional<double> lambda;
};

struct SubmitResult {
    OracleLabel decision = OracleLabel::negative();
    double y_hat = 0.0;
    bool pending = false;
    std::optional<FusionUpdateResult> update;  // feedback resolved inline
};

struct SessionSnapshot {
    std::string id;
    FusionConfig config;
    OracleMode mode;
    std::uint64_t version = 0;
    std::vector<double> weights;
    std::size_t history_size = 0;
    std::vector<HistoryEntry> history;  // the last N entries
    std::vector<PendingEntry> pending;
    std::size_t submitted = 0;
    std::size_t feedback_count = 0;
    std::size_t expired = 0;
};

nlohmann::json history_entry_to_json(const HistoryEntry& h);
nlohmann::json pending_entry_to_json(const PendingEntry& p);
nlohmann::json snapshot_to_json(const SessionSnapshot& s);

/// A single fusion session. All public methods lock the session, so writes
/// are serialized and snapshots are never torn.
class OracleSession {
public:
    explicit OracleSession(SessionSpec spec);

    const std::string& id() const noexcept { return spec_.id; }
    const SessionSpec& spec() const noexcept { return spec_; }

    /// Fused decision with the current weights, then feedback per the
    /// oracle mode. Throws DimensionError, ConflictError (event id reused).
    SubmitResult submit_event(const FusionEvent& event, bool flagged = false);

    /// Resolves a pending event. Throws NotFoundError (unknown or never
    /// pending) and ConflictError (already resolved or expired).
    FusionUpdateResult apply_feedback(const std::string& event_id, OracleLabel label,
                                      FeedbackSource source = FeedbackSource::Human);

    SessionSnapshot snapshot(std::optional<std::size_t> last = std::nullopt) const;
    std::vector<double> weights() const;
    std::vector<PendingEntry> pending() const;
    std::vector<FeedbackRecord> feedback_log() const;

    /// Drops pending entries older than the TTL; returns how many expired.
    std::size_t expire_pending(std::chrono::steady_clock::time_point now);
    std::size_t expire_pending() { return expire_pending(std::chrono::steady_clock::now()); }

    /// The session's JSONL log lines (spec, events, feedback, expiries).
    std::vector<std::string> log_lines() const;
    void persist(const std::filesystem::path& path) const;

    /// Mirrors every new log line to path (appending). Existing lines are
    /// written first so the file always holds the complete log.
    void attach_log_file(const std::filesystem::path& path);

    std::uint64_t version() const;
    /// Blocks until version() != seen, the timeout passes or close() is called.
    std::uint64_t wait_for_change(std::uint64_t seen, std::chrono::milliseconds timeout) const;
    void close();
    bool closed() const;

private:
    friend std::unique_ptr<OracleSession> replay_session_text(const std::string& text,
                                                              const std::optional<SessionSpec>& base);

    SubmitResult submit_locked(const FusionEvent& event, bool flagged);
    FusionUpdateResult apply_locked(const FusionEvent& event, OracleLabel label, FeedbackSource source,
                                    std::int64_t timestamp_ms);
    void expire_locked(const std::string& event_id);
    void log_locked(const nlohmann::json& line);
    void bump_locked();

    SessionSpec spec_;
    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    FusionSession fusion_;
    StreamRng noise_rng_;
    std::vector<HistoryEntry> history_;
    std::deque<PendingEntry> pending_;
    std::set<std::string> seen_ids_;
    std::set<std::string> resolved_ids_;
    std::set<std::string> expired_ids_;
    std::vector<FeedbackRecord> feedback_log_;
    std::vector<std::string> log_;
    std::optional<std::filesystem::path> log_file_;
    std::size_t submitted_ = 0;
    std::uint64_t version_ = 0;
    bool closed_ = false;
};

/// Rebuilds a session from a log written by persist(). Pending entries are
/// restored with a fresh enqueue time. Throws ParseError naming the first
/// bad line. With a base spec, a log without a session header (including an
/// empty one) replays onto a fresh session built from base; without one the
/// header is required.
std::unique_ptr<OracleSession> replay_session(const std::filesystem::path& path,
                                              const std::optional<SessionSpec>& base = std::nullopt);
std::unique_ptr<OracleSession> replay_session_text(const std::string& text,
                                                   const std::optional<SessionSpec>& base = std::nullopt);

/// Registry of sessions. Lookups take a shared lock; each session does its
/// own write serialization.
class SessionManager {
public:
    /// With a data directory, every session log is mirrored to
    /// <dir>/<id>.jsonl and existing logs are replayed on construction.
    explicit SessionManager(std::optional<std::filesystem::path> data_dir = std::nullopt);
    ~SessionManager();

    /// Throws ConflictError when the id exists, ValidationError on a bad spec.
    /// An empty id gets "session-<n>".
    std::shared_ptr<OracleSession> create(SessionSpec spec);
    /// Throws NotFoundError.
    std::shared_ptr<OracleSession> get(const std::string& id) const;
    std::vector<std::shared_ptr<OracleSession>> list() const;
    /// Wakes every stream waiter; used on shutdown.
    void close_all();

private:
    std::optional<std::filesystem::path> data_dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<OracleSession>> sessions_;
    std::size_t next_id_ = 1;
};

}  // namespace eadf
