#include "s2s/session.hpp"

#include <stdexcept>

namespace s2s {

std::string_view to_string(SessionErrc code) {
  switch (code) {
    case SessionErrc::ConnectFailed: return "ConnectFailed";
    case SessionErrc::ConfigRejected: return "ConfigRejected";
    case SessionErrc::SessionClosed: return "SessionClosed";
    case SessionErrc::AdapterUnavailable: return "AdapterUnavailable";
  }
  return "?";
}

std::string UnavailableAdapter::to_wire(const SessionEvent&) const {
  throw SessionFailure(SessionErrc::AdapterUnavailable,
                       "provider '" + provider_ + "' requires a live connection, which this build does not provide");
}

SessionEvent UnavailableAdapter::from_wire(std::string_view) const {
  throw SessionFailure(SessionErrc::AdapterUnavailable,
                       "provider '" + provider_ + "' requires a live connection, which this build does not provide");
}

std::vector<std::string> known_adapters() { return {"canonical", "openai", "azure", "xai", "gemini"}; }

std::shared_ptr<const ProviderAdapter> make_adapter(std::string_view name) {
  if (name == "canonical") return std::make_shared<CanonicalAdapter>();
  for (const auto& known : known_adapters())
    if (known == name) return std::make_shared<UnavailableAdapter>(known);
  throw std::invalid_argument("unknown adapter '" + std::string(name) + "'");
}

SessionHandle::SessionHandle(net::TcpStream stream, std::shared_ptr<const ProviderAdapter> adapter)
    : stream_(std::move(stream)), adapter_(std::move(adapter)) {}

SessionHandle::~SessionHandle() {
  close();
  stream_.close();
}

void SessionHandle::read_loop() {
  for (;;) {
    std::optional<std::string> line;
    try {
      line = stream_.read_line();
    } catch (const net::NetError&) {
      line.reset();
    }
    if (!line) break;
    if (line->empty()) continue;
    SessionEvent event;
    try {
      event = adapter_->from_wire(*line);
      std::lock_guard lock(invariants_mutex_);
      invariants_.on_server_event(event);
    } catch (const std::exception& e) {
      event = SessionError{std::string("inbound frame rejected: ") + e.what()};
    }
    if (const auto* ack = std::get_if<SessionAck>(&event); ack && session_id_.empty()) session_id_ = ack->session_id;
    inbound_.push(std::move(event));
  }
  open_ = false;
  inbound_.close();
}

void SessionHandle::send(const SessionEvent& event) {
  if (!is_client_originated(event))
    throw ProtocolError(ProtocolErrc::InvariantViolation,
                        "'" + std::string(kind_of(event)) + "' is not a client-originated event");
  std::lock_guard lock(send_mutex_);
  if (!open_) throw SessionFailure(SessionErrc::SessionClosed, "session is closed");
  {
    std::lock_guard inv(invariants_mutex_);
    invariants_.on_client_event(event);
  }
  std::string frame = adapter_->to_wire(event);
  try {
    stream_.write_line(frame);
  } catch (const net::NetError& e) {
    open_ = false;
    throw SessionFailure(SessionErrc::SessionClosed, e.what());
  }
}

std::optional<SessionEvent> SessionHandle::next() { return inbound_.pop(); }

std::optional<SessionEvent> SessionHandle::next_for(std::chrono::milliseconds timeout) {
  return inbound_.pop_for(timeout);
}

void SessionHandle::close() {
  std::call_once(close_once_, [this] {
    open_ = false;
    stream_.shutdown();
    if (reader_.joinable()) reader_.join();
    inbound_.close();
  });
}

void SessionHandle::declare_local_call(const std::string& call_id) {
  std::lock_guard lock(invariants_mutex_);
  invariants_.declare_local_call(call_id);
}

std::shared_ptr<SessionHandle> open_session(const SessionConfig& config, const net::Endpoint& endpoint,
                                            std::shared_ptr<const ProviderAdapter> adapter,
                                            std::chrono::milliseconds timeout) {
  if (!adapter) adapter = std::make_shared<CanonicalAdapter>();
  try {
    check_event(config);
  } catch (const ProtocolError& e) {
    throw SessionFailure(SessionErrc::ConfigRejected, e.what());
  }
  // Fail before touching the network when the adapter cannot translate.
  std::string first_frame = adapter->to_wire(config);

  net::TcpStream stream;
  try {
    stream = net::TcpStream::connect(endpoint, timeout);
  } catch (const net::NetError& e) {
    throw SessionFailure(SessionErrc::ConnectFailed, e.what());
  }
  std::shared_ptr<SessionHandle> handle(new SessionHandle(std::move(stream), std::move(adapter)));
  try {
    handle->stream_.write_line(first_frame);
  } catch (const net::NetError& e) {
    throw SessionFailure(SessionErrc::ConnectFailed, e.what());
  }
  handle->reader_ = std::thread([h = handle.get()] { h->read_loop(); });

  auto reply = handle->inbound_.pop_for(timeout);
  if (!reply) {
    handle->close();
    throw SessionFailure(SessionErrc::ConfigRejected, "backend did not acknowledge the session config");
  }
  if (const auto* err = std::get_if<SessionError>(&*reply)) {
    handle->close();
    throw SessionFailure(SessionErrc::ConfigRejected, err->reason);
  }
  if (!std::holds_alternative<SessionAck>(*reply)) {
    handle->close();
    throw SessionFailure(SessionErrc::ConfigRejected,
                         "expected session_ack, got '" + std::string(kind_of(*reply)) + "'");
  }
  return handle;
}

}  // namespace s2s
