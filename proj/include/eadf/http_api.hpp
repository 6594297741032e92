#pragma once

// HTTP/JSON front end of the oracle service.
//
//   GET  /sessions
//   POST /sessions                       {id?, config, oracle_mode, dims, initial_weights?, pending_ttl_ms?}
//   POST /sessions/{id}/events           FusionEvent [+ "flagged"] -> {decision, y_hat, pending, update}
//   GET  /sessions/{id}/pending
//   POST /sessions/{id}/feedback         {event_id, label} -> FusionUpdateResult
//   GET  /sessions/{id}/state?last=N
//   GET  /sessions/{id}/stream           text/event-stream of state deltas
//
// Errors are {"error": message} with 404 (unknown id), 409 (duplicate) or
// 422 (validation).

#include <chrono>
#include <memory>
#include <string>

#include "eadf/service.hpp"

namespace eadf {

struct ServerOptions {
    std::chrono::milliseconds heartbeat{500};  // stream keepalive and shutdown poll interval
};

class OracleServer {
public:
    explicit OracleServer(SessionManager& sessions, ServerOptions options = {});
    ~OracleServer();
    OracleServer(const OracleServer&) = delete;
    OracleServer& operator=(const OracleServer&) = delete;

    /// Binds host:port; port 0 picks a free port. Returns the bound port.
    /// Throws ValidationError when binding fails.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace eadf
