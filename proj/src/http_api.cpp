#include "eadf/http_api.hpp"

#include <atomic>
#include <charconv>

#include "eadf/error.hpp"
#include "eadf/serialize.hpp"
#include "eadf/stream.hpp"
#include "httplib.h"

namespace eadf {

using nlohmann::json;

struct OracleServer::Impl {
    SessionManager& sessions;
    ServerOptions options;
    httplib::Server server;
    std::atomic<bool> stopping{false};

    Impl(SessionManager& s, ServerOptions o) : sessions(s), options(o) { routes(); }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    // Runs a handler and maps library errors onto HTTP status codes.
    template <class F>
    static void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const NotFoundError& e) {
            reply(res, 404, {{"error", e.what()}});
        } catch (const ConflictError& e) {
            reply(res, 409, {{"error", e.what()}});
        } catch (const json::exception& e) {
            reply(res, 422, {{"error", std::string("invalid JSON: ") + e.what()}});
        } catch (const Error& e) {
            reply(res, 422, {{"error", e.what()}});
        }
    }

    static json parse_body(const httplib::Request& req) {
        if (req.body.empty()) throw ValidationError("request body is empty");
        try {
            return json::parse(req.body);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("request body is not JSON: ") + e.what());
        }
    }

    static json session_summary(const OracleSession& s) {
        const SessionSnapshot snap = s.snapshot(0);
        return json{{"id", snap.id},
                    {"algorithm", to_string(snap.config.algorithm)},
                    {"dims", snap.weights.size()},
                    {"oracle_mode", oracle_mode_to_json(snap.mode)},
                    {"pending_count", snap.pending.size()},
                    {"history_size", snap.history_size},
                    {"version", snap.version}};
    }

    static std::optional<std::size_t> parse_last(const httplib::Request& req) {
        if (!req.has_param("last")) return std::nullopt;
        const std::string v = req.get_param_value("last");
        std::size_t n = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc() || ptr != v.data() + v.size()) {
            throw ValidationError("'last' must be a non-negative integer");
        }
        return n;
    }

    static json delta(const SessionSnapshot& snap, std::size_t& history_seen) {
        json added = json::array();
        // snapshot(last) holds the newest entries; keep only unseen ones.
        const std::size_t fresh = snap.history_size - std::min(history_seen, snap.history_size);
        const std::size_t skip = snap.history.size() - std::min(fresh, snap.history.size());
        for (std::size_t i = skip; i < snap.history.size(); ++i) added.push_back(history_entry_to_json(snap.history[i]));
        history_seen = snap.history_size;
        json pending = json::array();
        for (const auto& p : snap.pending) pending.push_back(p.event.event_id);
        return json{{"version", snap.version},
                    {"weights", snap.weights},
                    {"history_size", snap.history_size},
                    {"history", added},
                    {"pending", pending},
                    {"expired", snap.expired}};
    }

    void routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        server.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                json list = json::array();
                for (const auto& s : sessions.list()) list.push_back(session_summary(*s));
                reply(res, 200, {{"sessions", list}});
            });
        });

        server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = sessions.create(session_spec_from_json(parse_body(req)));
                reply(res, 201, snapshot_to_json(s->snapshot()));
            });
        });

        server.Post(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = sessions.get(req.matches[1]);
                const json body = parse_body(req);
                if (!body.is_object()) throw ValidationError("event must be a JSON object");
                FusionEvent ev;
                try {
                    ev = event_from_json(body, 1);
                } catch (const ParseError& e) {
                    throw ValidationError(e.what());
                }
                if (!body.contains("preset_id")) ev.preset_id = s->id();
                bool flagged = false;
                if (body.contains("flagged")) {
                    if (!body["flagged"].is_boolean()) throw ValidationError("'flagged' must be a boolean");
                    flagged = body["flagged"].get<bool>();
                }
                const SubmitResult r = s->submit_event(ev, flagged);
                reply(res, 200,
                      {{"event_id", ev.event_id},
                       {"decision", r.decision.value()},
                       {"y_hat", r.y_hat},
                       {"pending", r.pending},
                       {"update", r.update ? update_result_to_json(*r.update) : json(nullptr)}});
            });
        });

        server.Get(R"(/sessions/([^/]+)/pending)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = sessions.get(req.matches[1]);
                s->expire_pending();
                json list = json::array();
                for (const auto& p : s->pending()) list.push_back(pending_entry_to_json(p));
                reply(res, 200, {{"pending", list}});
            });
        });

        server.Post(R"(/sessions/([^/]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = sessions.get(req.matches[1]);
                const json body = parse_body(req);
                if (!body.is_object() || !body.contains("event_id") || !body["event_id"].is_string()) {
                    throw ValidationError("feedback needs a string 'event_id'");
                }
                if (!body.contains("label")) throw ValidationError("feedback needs a 'label'");
                const OracleLabel label = label_from_json(body["label"]);
                const FusionUpdateResult r = s->apply_feedback(body["event_id"].get<std::string>(), label);
                reply(res, 200, update_result_to_json(r));
            });
        });

        server.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = sessions.get(req.matches[1]);
                const auto last = parse_last(req);
                s->expire_pending();
                reply(res, 200, snapshot_to_json(s->snapshot(last)));
            });
        });

        server.Get(R"(/sessions/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = sessions.get(req.matches[1]);
                std::size_t max_events = 0;  // 0: unbounded
                if (req.has_param("max_events")) {
                    const std::string v = req.get_param_value("max_events");
                    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), max_events);
                    if (ec != std::errc() || ptr != v.data() + v.size()) {
                        throw ValidationError("'max_events' must be a non-negative integer");
                    }
                }
                struct StreamState {
                    std::uint64_t version = 0;
                    std::size_t history_seen = 0;
                    std::size_t sent = 0;
                    bool started = false;
                };
                auto state = std::make_shared<StreamState>();
                res.set_header("Cache-Control", "no-cache");
                res.set_chunked_content_provider(
                    "text/event-stream", [this, s, state, max_events](std::size_t, httplib::DataSink& sink) {
                        auto send = [&](const char* event, const json& data) {
                            const std::string msg = std::string("event: ") + event + "\ndata: " + data.dump() + "\n\n";
                            ++state->sent;
                            return sink.write(msg.data(), msg.size());
                        };
                        if (!state->started) {
                            state->started = true;
                            const SessionSnapshot snap = s->snapshot();
                            state->version = snap.version;
                            state->history_seen = snap.history_size;
                            if (!send("snapshot", snapshot_to_json(snap))) return false;
                        } else {
                            if (stopping || s->closed()) {
                                sink.done();
                                return true;
                            }
                            const auto v = s->wait_for_change(state->version, options.heartbeat);
                            if (v == state->version) {
                                const std::string ping = ": keepalive\n\n";
                                return sink.write(ping.data(), ping.size());
                            }
                            const SessionSnapshot snap = s->snapshot();
                            state->version = snap.version;
                            if (!send("state", delta(snap, state->history_seen))) return false;
                        }
                        if (max_events > 0 && state->sent >= max_events) sink.done();
                        return true;
                    });
            });
        });
    }
};

OracleServer::OracleServer(SessionManager& sessions, ServerOptions options)
    : impl_(std::make_unique<Impl>(sessions, options)) {}

OracleServer::~OracleServer() { stop(); }

int OracleServer::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void OracleServer::run() { impl_->server.listen_after_bind(); }

void OracleServer::stop() {
    impl_->stopping = true;
    impl_->server.stop();
}

}  // namespace eadf
