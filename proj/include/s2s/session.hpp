#pragma once

// Client side of the duplex session: provider adapters translating between
// provider frames and SessionEvent, and the session handle that owns the
// connection to a backend.

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "s2s/blocking_queue.hpp"
#include "s2s/net.hpp"
#include "s2s/protocol.hpp"

namespace s2s {

struct AdapterCapabilities {
  bool supports_audio_in = true;
  bool supports_interrupt = true;
};

/// Translates provider-specific frames to and from canonical events.
class ProviderAdapter {
 public:
  virtual ~ProviderAdapter() = default;
  virtual std::string_view name() const = 0;
  virtual AdapterCapabilities capabilities() const = 0;
  virtual std::string to_wire(const SessionEvent& event) const = 0;
  virtual SessionEvent from_wire(std::string_view frame) const = 0;
};

/// Identity translation over the canonical frame encoding.
class CanonicalAdapter final : public ProviderAdapter {
 public:
  std::string_view name() const override { return "canonical"; }
  AdapterCapabilities capabilities() const override { return {true, true}; }
  std::string to_wire(const SessionEvent& event) const override { return encode_event(event); }
  SessionEvent from_wire(std::string_view frame) const override { return decode_event(frame); }
};

enum class SessionErrc { ConnectFailed, ConfigRejected, SessionClosed, AdapterUnavailable };

std::string_view to_string(SessionErrc code);

class SessionFailure : public std::runtime_error {
 public:
  SessionFailure(SessionErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  SessionErrc code() const noexcept { return code_; }

 private:
  SessionErrc code_;
};

/// Cloud providers are declared but not reachable offline; their adapters
/// fail with AdapterUnavailable on first use.
class UnavailableAdapter final : public ProviderAdapter {
 public:
  explicit UnavailableAdapter(std::string provider) : provider_(std::move(provider)) {}
  std::string_view name() const override { return provider_; }
  AdapterCapabilities capabilities() const override { return {true, true}; }
  std::string to_wire(const SessionEvent&) const override;
  SessionEvent from_wire(std::string_view) const override;

 private:
  std::string provider_;
};

/// "canonical", or one of the declared providers: openai, azure, xai, gemini.
/// Throws std::invalid_argument for anything else.
std::shared_ptr<const ProviderAdapter> make_adapter(std::string_view name);
std::vector<std::string> known_adapters();

/// An open session. send() may be called from any thread; the inbound stream
/// (next/next_for) has exactly one consumer.
class SessionHandle {
 public:
  SessionHandle(const SessionHandle&) = delete;
  SessionHandle& operator=(const SessionHandle&) = delete;
  ~SessionHandle();

  /// Sends a client-originated event in FIFO order. Throws SessionFailure
  /// (SessionClosed) or ProtocolError (InvariantViolation).
  void send(const SessionEvent& event);

  /// Next inbound event; nullopt once the session has terminated.
  std::optional<SessionEvent> next();
  std::optional<SessionEvent> next_for(std::chrono::milliseconds timeout);

  /// Idempotent. Terminates the inbound stream.
  void close();

  bool is_open() const { return open_.load(); }
  const std::string& session_id() const { return session_id_; }
  const ProviderAdapter& adapter() const { return *adapter_; }

  /// Registers a runtime-initiated call id so its ToolResultEvent is accepted.
  void declare_local_call(const std::string& call_id);

 private:
  friend std::shared_ptr<SessionHandle> open_session(const SessionConfig&, const net::Endpoint&,
                                                     std::shared_ptr<const ProviderAdapter>,
                                                     std::chrono::milliseconds);
  SessionHandle(net::TcpStream stream, std::shared_ptr<const ProviderAdapter> adapter);
  void read_loop();

  net::TcpStream stream_;
  std::shared_ptr<const ProviderAdapter> adapter_;
  BlockingQueue<SessionEvent> inbound_;
  std::mutex send_mutex_;
  std::mutex invariants_mutex_;
  SessionInvariants invariants_;
  std::atomic<bool> open_{true};
  std::once_flag close_once_;
  std::string session_id_;
  std::thread reader_;
};

/// Connects, delivers `config` as the first frame, and waits for the
/// backend's acknowledgement. Throws SessionFailure (ConnectFailed,
/// ConfigRejected, AdapterUnavailable).
std::shared_ptr<SessionHandle> open_session(const SessionConfig& config, const net::Endpoint& endpoint,
                                            std::shared_ptr<const ProviderAdapter> adapter,
                                            std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));

inline void close_session(SessionHandle& handle) { handle.close(); }

}  // namespace s2s
