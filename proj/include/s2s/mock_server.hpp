#pragma once

// Scriptable stand-in for a speech-to-speech backend. Each connected session
// gets its own interpreter over the same scenario.

#include <atomic>
#include <chrono>
#include <list>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "s2s/net.hpp"
#include "s2s/protocol.hpp"
#include "s2s/scenario.hpp"

namespace s2s {

class BindFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One frame observed by the server, in either direction.
struct WireRecord {
  std::string session_id;
  std::chrono::steady_clock::time_point at;
  SessionEvent event;
};

class MockServer {
 public:
  /// Binds and starts accepting. Throws BindFailed.
  MockServer(Scenario scenario, const net::Endpoint& bind_address);
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;
  ~MockServer();

  net::Endpoint endpoint() const { return endpoint_; }

  /// Client events in exact arrival order, across sessions.
  std::vector<SessionEvent> receipt_log() const;
  std::vector<SessionEvent> receipt_log(const std::string& session_id) const;
  std::vector<WireRecord> receipts() const;
  /// Events the server sent, in send order.
  std::vector<WireRecord> emissions() const;
  std::vector<WireRecord> emissions(const std::string& session_id) const;

  std::size_t session_count() const { return session_counter_.load(); }

  /// Idempotent; disconnects all sessions.
  void stop();

 private:
  struct Connection;

  void accept_loop();
  void run_connection(Connection& conn);
  void log_receipt(const std::string& session_id, const SessionEvent& event);
  void log_emission(const std::string& session_id, const SessionEvent& event);

  Scenario scenario_;
  net::TcpListener listener_;
  net::Endpoint endpoint_;
  std::atomic<bool> running_{true};
  std::atomic<std::size_t> session_counter_{0};
  std::thread acceptor_;

  mutable std::mutex conn_mutex_;
  std::list<std::unique_ptr<Connection>> connections_;

  mutable std::mutex log_mutex_;
  std::vector<WireRecord> receipts_;
  std::vector<WireRecord> emissions_;
};

inline std::unique_ptr<MockServer> serve(Scenario scenario, const net::Endpoint& bind_address) {
  return std::make_unique<MockServer>(std::move(scenario), bind_address);
}

}  // namespace s2s
