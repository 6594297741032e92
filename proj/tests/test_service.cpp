#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "doctest.h"
#include "eadf/error.hpp"
#include "eadf/serialize.hpp"
#include "eadf/service.hpp"
#include "eadf/stream.hpp"
#include "test_util.hpp"

using namespace eadf;
using eadf::testing::slurp;
using eadf::testing::TempDir;
using eadf::testing::write_text;

namespace {

SessionSpec spec(const std::string& id, OracleMode mode, std::size_t dims = 3, Algorithm alg = Algorithm::EADF) {
    SessionSpec s;
    s.id = id;
    s.config.algorithm = alg;
    s.mode = mode;
    s.dims = dims;
    return s;
}

FusionEvent event(const std::string& id, std::int64_t step, std::vector<double> d, std::optional<int> truth) {
    FusionEvent ev;
    ev.event_id = id;
    ev.step = step;
    ev.decisions = DecisionVector(std::move(d));
    if (truth) ev.truth = OracleLabel::from_int(*truth);
    ev.preset_id = "cam-1";
    return ev;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Drives a Human-mode session with a random stream and random verdicts,
// resolving pending alarms out of order.
void drive_human(OracleSession& s, std::uint64_t seed, std::size_t steps) {
    std::mt19937_64 rng(seed);
    auto cfg = reference_drift_config(seed);
    cfg.length = static_cast<std::int64_t>(steps);
    cfg.experts.resize(s.spec().dims, cfg.experts.front());
    for (const auto& ev : generate_stream(cfg)) {
        s.submit_event(ev, rng() % 7 == 0);
        auto pending = s.pending();
        if (!pending.empty() && rng() % 2 == 0) {
            const auto& pick = pending[rng() % pending.size()];
            s.apply_feedback(pick.event.event_id, *pick.event.truth);
        }
    }
}

}  // namespace

TEST_CASE("oracle modes and specs round trip through JSON") {
    for (const auto& m : {OracleMode::ground_truth(), OracleMode::human(), OracleMode::noisy(0.2, 9),
                          OracleMode::intermittent(100)}) {
        const OracleMode back = oracle_mode_from_json(oracle_mode_to_json(m));
        CHECK(back.kind == m.kind);
        CHECK(back.p_flip == m.p_flip);
        CHECK(back.seed == m.seed);
        CHECK(back.k == m.k);
    }
    CHECK(oracle_mode_from_json("human").kind == OracleMode::Kind::Human);
    CHECK_THROWS_AS(oracle_mode_from_json("psychic"), ValidationError);
    CHECK_THROWS_AS(OracleMode::noisy(0.7, 1).validate(), ValidationError);
    CHECK_THROWS_AS(OracleMode::intermittent(-1).validate(), ValidationError);

    SessionSpec s = spec("cam-1", OracleMode::noisy(0.1, 4), 5, Algorithm::POCS);
    s.config.mu = 0.5;
    s.pending_ttl = std::chrono::milliseconds(2500);
    s.initial_weights = std::vector<double>{0.1, 0.2, 0.3, 0.2, 0.2};
    const SessionSpec back = session_spec_from_json(session_spec_to_json(s));
    CHECK(session_spec_to_json(back) == session_spec_to_json(s));
    CHECK_THROWS_AS(session_spec_from_json(nlohmann::json{{"id", "x"}}), ValidationError);
    CHECK_THROWS_AS(session_spec_from_json(nlohmann::json{{"dims", 0}}), ValidationError);
    CHECK_THROWS_AS(OracleSession(spec("bad id!", OracleMode::human())), ValidationError);
}

TEST_CASE("fresh session") {
    OracleSession s(spec("cam-1", OracleMode::human(), 4));
    const auto snap = s.snapshot();
    CHECK(snap.weights == std::vector<double>(4, 0.25));
    CHECK(snap.history.empty());
    CHECK(snap.pending.empty());
    CHECK(snap.version == 0);
}

TEST_CASE("ground-truth mode applies every label immediately") {
    OracleSession s(spec("gt", OracleMode::ground_truth()));
    const auto r = s.submit_event(event("a", 0, {1.0, -0.5, 0.2}, -1));
    CHECK_FALSE(r.pending);
    REQUIRE(r.update.has_value());
    CHECK(s.snapshot().history_size == 1);
    CHECK(s.weights() == r.update->new_weights.as_vector());
    CHECK(std::abs(predict(WeightVector(s.weights()), DecisionVector({1.0, -0.5, 0.2})) + 1.0) < 1e-8);
    // No truth, nothing to apply.
    CHECK_FALSE(s.submit_event(event("b", 1, {1.0, 1.0, 1.0}, std::nullopt)).update.has_value());
    CHECK(s.snapshot().history_size == 1);
}

TEST_CASE("intermittent mode freezes after k events") {
    OracleSession s(spec("int", OracleMode::intermittent(100)));
    auto events = generate_stream(reference_drift_config());
    for (auto& ev : events) ev.decisions = DecisionVector({ev.decisions[0], ev.decisions[1], ev.decisions[2]});
    for (std::size_t k = 0; k < 100; ++k) s.submit_event(events[k]);
    const auto frozen = s.weights();
    const auto r = s.submit_event(events[100]);
    CHECK_FALSE(r.update.has_value());
    CHECK(s.weights() == frozen);
    CHECK(s.snapshot().history_size == 100);
}

TEST_CASE("noisy oracle flips labels at the configured rate") {
    OracleSession s(spec("noisy", OracleMode::noisy(0.25, 77), 1, Algorithm::Fixed));
    std::size_t flipped = 0;
    for (int k = 0; k < 4000; ++k) {
        const int truth = (k % 2) ? 1 : -1;
        const auto r = s.submit_event(event("e" + std::to_string(k), k, {0.5}, truth));
        REQUIRE(r.update.has_value());
        flipped += s.snapshot(1).history.back().label.value() != truth ? 1 : 0;
    }
    CHECK(std::abs(static_cast<double>(flipped) / 4000.0 - 0.25) < 0.03);
    CHECK(s.feedback_log().back().source == FeedbackSource::NoisyOracle);
}

TEST_CASE("human mode queues only alarms and flagged events") {
    OracleSession s(spec("h", OracleMode::human()));
    CHECK_FALSE(s.submit_event(event("neg", 0, {-1.0, -0.5, -0.2}, -1)).pending);
    CHECK(s.submit_event(event("flag", 1, {-1.0, -0.5, -0.2}, -1), true).pending);
    const auto r = s.submit_event(event("alarm", 2, {1.0, 0.5, -0.2}, -1));
    CHECK(r.pending);
    CHECK(r.decision == OracleLabel::positive());
    CHECK_FALSE(r.update.has_value());
    const auto pending = s.pending();
    REQUIRE(pending.size() == 2);
    CHECK(pending[0].event.event_id == "flag");
    CHECK(pending[0].flagged);
    CHECK(pending[1].event.event_id == "alarm");
    CHECK(s.weights() == std::vector<double>(3, 1.0 / 3.0));
}

TEST_CASE("rejecting a false alarm lowers the weights of the experts that raised it") {
    OracleSession s(spec("fa", OracleMode::human(), 4));
    const std::vector<double> d{0.9, 0.6, -0.4, -0.1};
    const auto before = s.weights();
    REQUIRE(s.submit_event(event("fa-1", 0, d, std::nullopt)).pending);
    const auto r = s.apply_feedback("fa-1", OracleLabel::negative());
    REQUIRE(r.lambda.has_value());
    CHECK(*r.lambda < 0.0);
    const auto after = s.weights();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0) CHECK(after[i] < before[i]);
        if (d[i] < 0) CHECK(after[i] > before[i]);
    }
    const auto snap = s.snapshot();
    REQUIRE(snap.history.size() == 1);
    CHECK(snap.history[0].weights == after);
    CHECK(snap.history[0].label == OracleLabel::negative());
    CHECK(snap.history[0].decision == OracleLabel::positive());
}

TEST_CASE("a verdict already satisfied leaves the weights unchanged") {
    SessionSpec sp = spec("sat", OracleMode::human(), 2);
    sp.initial_weights = std::vector<double>{0.5, 0.5};
    OracleSession s(sp);
    s.submit_event(event("x", 0, {1.0, 1.0}, std::nullopt));
    const auto r = s.apply_feedback("x", OracleLabel::positive());
    CHECK(r.error_before == 0.0);
    CHECK(s.weights() == std::vector<double>{0.5, 0.5});
}

TEST_CASE("feedback errors") {
    OracleSession s(spec("err", OracleMode::human()));
    s.submit_event(event("alarm", 0, {1.0, 1.0, 1.0}, std::nullopt));
    s.submit_event(event("quiet", 1, {-1.0, -1.0, -1.0}, std::nullopt));
    CHECK_THROWS_AS(s.apply_feedback("nope", OracleLabel::positive()), NotFoundError);
    CHECK_THROWS_AS(s.apply_feedback("quiet", OracleLabel::positive()), NotFoundError);
    s.apply_feedback("alarm", OracleLabel::positive());
    const auto snap = s.snapshot();
    CHECK_THROWS_AS(s.apply_feedback("alarm", OracleLabel::negative()), ConflictError);
    CHECK(s.snapshot().weights == snap.weights);
    CHECK(s.snapshot().history_size == snap.history_size);
    CHECK_THROWS_AS(s.submit_event(event("alarm", 5, {1.0, 1.0, 1.0}, std::nullopt)), ConflictError);
    CHECK_THROWS_AS(s.submit_event(event("short", 6, {1.0, 1.0}, std::nullopt)), DimensionError);
}

TEST_CASE("fixed sessions record verdicts without moving") {
    OracleSession s(spec("fixed", OracleMode::human(), 3, Algorithm::Fixed));
    s.submit_event(event("a", 0, {1.0, 0.2, 0.3}, std::nullopt));
    const auto r = s.apply_feedback("a", OracleLabel::negative());
    CHECK(r.status == UpdateStatus::Skipped);
    CHECK(s.weights() == std::vector<double>(3, 1.0 / 3.0));
    CHECK(s.snapshot().history_size == 1);
}

TEST_CASE("pending entries expire after the TTL") {
    SessionSpec sp = spec("ttl", OracleMode::human());
    sp.pending_ttl = std::chrono::milliseconds(50);
    OracleSession s(sp);
    s.submit_event(event("old", 0, {1.0, 1.0, 1.0}, std::nullopt));
    const auto t0 = s.pending().front().enqueued;
    CHECK(s.expire_pending(t0 + std::chrono::milliseconds(10)) == 0);
    CHECK(s.expire_pending(t0 + std::chrono::milliseconds(51)) == 1);
    CHECK(s.pending().empty());
    CHECK(s.snapshot().expired == 1);
    CHECK_THROWS_AS(s.apply_feedback("old", OracleLabel::positive()), ConflictError);

    // Without a TTL nothing expires.
    OracleSession forever(spec("forever", OracleMode::human()));
    forever.submit_event(event("a", 0, {1.0, 1.0, 1.0}, std::nullopt));
    CHECK(forever.expire_pending(std::chrono::steady_clock::now() + std::chrono::hours(1000)) == 0);
}

TEST_CASE("late feedback on a stale entry is refused") {
    SessionSpec sp = spec("late", OracleMode::human());
    sp.pending_ttl = std::chrono::milliseconds(1);
    OracleSession s(sp);
    s.submit_event(event("a", 0, {1.0, 1.0, 1.0}, std::nullopt));
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    CHECK_THROWS_AS(s.apply_feedback("a", OracleLabel::positive()), ConflictError);
}

TEST_CASE("property: every human-mode alarm is pending, resolved or expired") {
    SessionSpec sp = spec("cons", OracleMode::human(), 5);
    sp.pending_ttl = std::chrono::milliseconds(1000);
    OracleSession s(sp);
    drive_human(s, 3, 400);
    s.expire_pending(std::chrono::steady_clock::now() + std::chrono::milliseconds(500));
    std::set<std::string> alarms;
    for (const auto& line : s.log_lines()) {
        const auto j = nlohmann::json::parse(line);
        if (j["type"] == "event" && j["pending"].get<bool>()) alarms.insert(j["event"]["event_id"]);
    }
    std::set<std::string> accounted;
    for (const auto& p : s.pending()) accounted.insert(p.event.event_id);
    for (const auto& f : s.feedback_log()) CHECK(accounted.insert(f.event_id).second);
    for (const auto& line : s.log_lines()) {
        const auto j = nlohmann::json::parse(line);
        if (j["type"] == "expire") CHECK(accounted.insert(j["event_id"].get<std::string>()).second);
    }
    CHECK(accounted == alarms);
}

TEST_CASE("persist then replay reproduces the session") {
    TempDir dir;
    for (Algorithm alg : {Algorithm::EADF, Algorithm::POCS, Algorithm::ULP, Algorithm::Fixed}) {
        for (const auto& mode : {OracleMode::human(), OracleMode::ground_truth(), OracleMode::noisy(0.2, 5),
                                 OracleMode::intermittent(50)}) {
            OracleSession s(spec("p", mode, 4, alg));
            drive_human(s, 11, 300);
            s.persist(dir / "p.jsonl");
            const auto r = replay_session(dir / "p.jsonl");
            CHECK(max_abs_diff(r->weights(), s.weights()) <= 1e-12);
            const auto a = s.snapshot();
            const auto b = r->snapshot();
            CHECK(b.history_size == a.history_size);
            CHECK(b.pending.size() == a.pending.size());
            CHECK(b.submitted == a.submitted);
            CHECK(r->log_lines() == s.log_lines());
            // The replayed session continues exactly like the original.
            const auto next = event("next", 10000, {0.9, 0.8, -0.3, 0.1}, 1);
            const auto ra = s.submit_event(next, true);
            const auto rb = r->submit_event(next, true);
            CHECK(ra.y_hat == rb.y_hat);
            CHECK(s.weights() == r->weights());
        }
    }
}

TEST_CASE("replay errors name the line and leave the live session intact") {
    TempDir dir;
    OracleSession s(spec("t", OracleMode::ground_truth()));
    for (int k = 0; k < 5; ++k) s.submit_event(event("e" + std::to_string(k), k, {0.5, -0.2, 0.9}, k % 2 ? 1 : -1));
    s.persist(dir / "t.jsonl");
    const auto weights = s.weights();
    std::string text = slurp(dir / "t.jsonl");
    const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    text.resize(text.size() - 12);  // cut into the last record
    write_text(dir / "t.jsonl", text);
    try {
        replay_session(dir / "t.jsonl");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == lines);
    }
    CHECK(s.weights() == weights);

    CHECK_THROWS_AS(replay_session_text(R"({"type":"event"})"), ParseError);
    CHECK_THROWS_AS(replay_session_text(""), ParseError);
    const std::string header = s.log_lines().front();
    try {
        replay_session_text(header + "\n" + R"({"type":"feedback","event_id":"ghost","label":1,"source":"human","timestamp_ms":0})");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("an empty log replays to the initial state") {
    SessionSpec sp = spec("empty", OracleMode::human(), 5);
    const auto r = replay_session_text("", sp);
    CHECK(r->weights() == std::vector<double>(5, 0.2));
    CHECK(r->snapshot().history_size == 0);
    const auto h = replay_session_text(OracleSession(sp).log_lines().front() + "\n");
    CHECK(h->weights() == std::vector<double>(5, 0.2));
}

TEST_CASE("snapshots stay consistent under concurrent writers") {
    OracleSession s(spec("stress", OracleMode::ground_truth(), 5));
    constexpr int kWriters = 4;
    constexpr int kPerWriter = 300;
    std::atomic<bool> done{false};
    std::atomic<int> bad{0};
    std::atomic<int> reads{0};
    std::thread reader([&] {
        while (!done) {
            const auto snap = s.snapshot();
            const bool ok = snap.history_size == snap.feedback_count &&
                            (snap.history.empty() ? snap.weights == std::vector<double>(5, 0.2)
                                                  : snap.history.back().weights == snap.weights);
            if (!ok) ++bad;
            ++reads;
        }
    });
    std::vector<std::thread> writers;
    for (int w = 0; w < kWriters; ++w) {
        writers.emplace_back([&, w] {
            std::mt19937_64 rng(static_cast<std::uint64_t>(w));
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (int k = 0; k < kPerWriter; ++k) {
                s.submit_event(event("w" + std::to_string(w) + "-" + std::to_string(k), k,
                                     {u(rng), u(rng), u(rng), u(rng), u(rng)}, (rng() & 1) ? 1 : -1));
            }
        });
    }
    for (auto& t : writers) t.join();
    done = true;
    reader.join();
    CHECK(bad == 0);
    CHECK(reads > 0);
    const auto snap = s.snapshot();
    CHECK(snap.submitted == kWriters * kPerWriter);
    CHECK(snap.history_size == kWriters * kPerWriter);
    // The serialized log is a total order that replays to the same state.
    std::string text;
    for (const auto& l : s.log_lines()) text += l + "\n";
    CHECK(max_abs_diff(replay_session_text(text)->weights(), s.weights()) <= 1e-12);
}

TEST_CASE("wait_for_change wakes on writes and on close") {
    OracleSession s(spec("w", OracleMode::ground_truth()));
    const auto v0 = s.version();
    std::thread t([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        s.submit_event(event("a", 0, {1.0, 0.0, 0.0}, 1));
    });
    CHECK(s.wait_for_change(v0, std::chrono::seconds(5)) != v0);
    t.join();
    const auto v1 = s.version();
    CHECK(s.wait_for_change(v1, std::chrono::milliseconds(10)) == v1);
    s.close();
    CHECK(s.closed());
}

TEST_CASE("session manager") {
    TempDir dir;
    std::vector<double> weights;
    {
        SessionManager m(dir.path());
        auto a = m.create(spec("cam-1", OracleMode::human()));
        auto b = m.create(spec("", OracleMode::ground_truth()));
        CHECK(b->id() == "session-1");
        CHECK_THROWS_AS(m.create(spec("cam-1", OracleMode::human())), ConflictError);
        CHECK_THROWS_AS(m.get("cam-9"), NotFoundError);
        CHECK(m.list().size() == 2);
        drive_human(*a, 21, 200);
        weights = a->weights();
        CHECK(std::filesystem::exists(dir / "cam-1.jsonl"));
    }
    // A restarted manager replays every log it finds.
    SessionManager again(dir.path());
    CHECK(again.list().size() == 2);
    CHECK(max_abs_diff(again.get("cam-1")->weights(), weights) <= 1e-12);
    // New writes keep appending to the same file.
    auto a = again.get("cam-1");
    a->submit_event(event("late", 9999, {1, 1, 1}, std::nullopt));
    CHECK(replay_session(dir / "cam-1.jsonl")->snapshot().submitted == a->snapshot().submitted);
}

TEST_CASE("JSON views") {
    OracleSession s(spec("j", OracleMode::human()));
    s.submit_event(event("a", 3, {1.0, 0.5, 0.0}, std::nullopt));
    s.apply_feedback("a", OracleLabel::negative());
    const auto j = snapshot_to_json(s.snapshot());
    CHECK(j["id"] == "j");
    CHECK(j["history"].size() == 1);
    CHECK(j["history"][0]["event_id"] == "a");
    CHECK(j["history"][0]["step"] == 3);
    CHECK(j["history"][0]["label"] == -1);
    CHECK(j["history"][0]["squared_error"].get<double>() ==
          doctest::Approx(std::pow(j["history"][0]["error"].get<double>(), 2)));
    CHECK(j["weights"].size() == 3);
}
