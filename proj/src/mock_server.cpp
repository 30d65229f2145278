#include "s2s/mock_server.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <map>
#include <set>

#include "s2s/blocking_queue.hpp"

namespace s2s {

using Clock = std::chrono::steady_clock;

struct MockServer::Connection {
  net::TcpStream stream;
  std::string session_id;
  BlockingQueue<SessionEvent> inbox;
  std::thread worker;
  std::atomic<bool> done{false};
};

namespace {

bool contains_ci(std::string_view haystack, std::string_view needle) {
  auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(), [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  });
  return it != haystack.end();
}

// Runs one scenario against one session's inbound events.
class Interpreter {
 public:
  using Emit = std::function<bool(const SessionEvent&)>;

  Interpreter(const Scenario& scenario, BlockingQueue<SessionEvent>& inbox, Emit emit)
      : scenario_(scenario), inbox_(inbox), emit_(std::move(emit)) {}

  void run() {
    do {
      call_by_label_.clear();
      result_by_label_.clear();
      for (const auto& s : scenario_.steps)
        if (!std::visit([this](const auto& st) { return execute(st); }, s)) return;
    } while (scenario_.loop && !scenario_.steps.empty());
    // Script finished: keep draining so the session stays responsive to close.
    while (inbox_.pop()) {
    }
  }

 private:
  void absorb(SessionEvent event) {
    if (auto* text = std::get_if<TextInput>(&event)) {
      inputs_.push_back(text->text);
    } else if (auto* audio = std::get_if<AudioInputChunk>(&event)) {
      if (!audio->payload_ref.empty()) {
        if (!audio_text_.empty()) audio_text_ += ' ';
        audio_text_ += audio->payload_ref;
      }
      if (audio->final) {
        inputs_.push_back(audio_text_);
        audio_text_.clear();
      }
    } else if (auto* ctx = std::get_if<ContextInjection>(&event)) {
      // Silent context updates never satisfy an input trigger.
      if (ctx->request_response) {
        last_context_ = ctx->message;
        inputs_.push_back(ctx->message);
      }
    } else if (auto* result = std::get_if<ToolResultEvent>(&event)) {
      results_by_call_[result->call_id] = *result;
    } else if (auto* interrupt = std::get_if<InterruptRequest>(&event)) {
      interrupted_.insert(interrupt->turn_id);
    }
  }

  bool pump_one() {
    auto event = inbox_.pop();
    if (!event) return false;
    absorb(std::move(*event));
    return true;
  }

  // Absorbs events until the deadline; false if the session ended.
  bool pump_until(Clock::time_point deadline) {
    for (;;) {
      auto event = inbox_.pop_until(deadline);
      if (event) {
        absorb(std::move(*event));
        continue;
      }
      if (inbox_.closed()) return false;
      if (Clock::now() >= deadline) return true;
    }
  }

  bool send(const SessionEvent& e) { return emit_(e); }

  bool execute(const step::OnUserInput& s) {
    for (;;) {
      while (inputs_.empty())
        if (!pump_one()) return false;
      std::string input = std::move(inputs_.front());
      inputs_.pop_front();
      if (s.match == "*" || contains_ci(input, s.match)) return true;
    }
  }

  bool execute(const step::EmitTurn& s) { return emit_turn(substitute(s.text), s.audio_ms); }

  bool execute(const step::EmitToolCall& s) {
    std::string call_id = "call-" + std::to_string(++call_counter_);
    call_by_label_[s.label] = call_id;
    return send(ToolCallRequest{call_id, s.name, s.arguments});
  }

  bool execute(const step::AwaitToolResult& s) {
    const std::string& call_id = call_by_label_.at(s.label);
    while (!results_by_call_.count(call_id))
      if (!pump_one()) return false;
    result_by_label_[s.label] = results_by_call_[call_id].payload;
    return true;
  }

  bool execute(const step::EmitContextAck&) {
    std::string text = last_context_.empty() ? "Noted." : "Noted: " + last_context_;
    return emit_turn(text, scenario_.ack_audio_ms);
  }

  std::string substitute(std::string text) const {
    for (const auto& [label, payload] : result_by_label_) {
      const std::string key = "{result:" + label + "}";
      for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + payload.size()))
        text.replace(pos, key.size(), payload);
    }
    return text;
  }

  bool emit_turn(const std::string& text, std::int64_t audio_ms) {
    using std::chrono::milliseconds;
    const auto trigger = Clock::now();
    const std::string turn_id = "turn-" + std::to_string(++turn_counter_);
    const auto& latency = scenario_.latency;

    if (!pump_until(trigger + milliseconds(latency.first_text_ms()))) return false;
    if (!send(ModelTurnStart{turn_id})) return false;
    if (!text.empty() && !send(ModelTextDelta{turn_id, text})) return false;

    if (audio_ms > 0 && !interrupted_.count(turn_id)) {
      if (!pump_until(trigger + milliseconds(latency.first_audio_ms()))) return false;
      auto next = Clock::now();
      std::int64_t remaining = audio_ms;
      while (remaining > 0) {
        if (!pump_until(next)) return false;
        if (interrupted_.count(turn_id)) break;
        std::int64_t chunk = std::min(scenario_.audio_chunk_ms, remaining);
        if (!send(ModelAudioDelta{turn_id, chunk})) return false;
        remaining -= chunk;
        if (scenario_.pace_audio) next += milliseconds(chunk);
      }
      // The turn closes when the last chunk would have finished playing.
      if (!interrupted_.count(turn_id) && !pump_until(next)) return false;
    }
    return send(ModelTurnEnd{turn_id});
  }

  const Scenario& scenario_;
  BlockingQueue<SessionEvent>& inbox_;
  Emit emit_;

  std::deque<std::string> inputs_;
  std::string audio_text_;
  std::string last_context_;
  std::map<std::string, ToolResultEvent> results_by_call_;
  std::map<std::string, std::string> call_by_label_;
  std::map<std::string, std::string> result_by_label_;
  std::set<std::string> interrupted_;
  int turn_counter_ = 0;
  int call_counter_ = 0;
};

}  // namespace

MockServer::MockServer(Scenario scenario, const net::Endpoint& bind_address) : scenario_(std::move(scenario)) {
  validate(scenario_);
  try {
    listener_ = net::TcpListener::bind(bind_address);
  } catch (const net::NetError& e) {
    throw BindFailed(e.what());
  }
  endpoint_ = listener_.local_endpoint();
  if (endpoint_.host == "0.0.0.0") endpoint_.host = "127.0.0.1";
  acceptor_ = std::thread([this] { accept_loop(); });
}

MockServer::~MockServer() { stop(); }

void MockServer::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  std::list<std::unique_ptr<Connection>> conns;
  {
    std::lock_guard lock(conn_mutex_);
    conns.swap(connections_);
  }
  for (auto& c : conns) {
    c->stream.shutdown();
    c->inbox.close();
  }
  for (auto& c : conns)
    if (c->worker.joinable()) c->worker.join();
}

void MockServer::accept_loop() {
  while (running_) {
    auto stream = listener_.accept(std::chrono::milliseconds(50));
    if (!stream) continue;
    auto conn = std::make_unique<Connection>();
    conn->stream = std::move(*stream);
    Connection* raw = conn.get();
    {
      std::lock_guard lock(conn_mutex_);
      connections_.push_back(std::move(conn));
    }
    raw->worker = std::thread([this, raw] { run_connection(*raw); });
  }
}

void MockServer::log_receipt(const std::string& session_id, const SessionEvent& event) {
  std::lock_guard lock(log_mutex_);
  receipts_.push_back({session_id, Clock::now(), event});
}

void MockServer::log_emission(const std::string& session_id, const SessionEvent& event) {
  std::lock_guard lock(log_mutex_);
  emissions_.push_back({session_id, Clock::now(), event});
}

void MockServer::run_connection(Connection& conn) {
  auto emit = [this, &conn](const SessionEvent& event) {
    try {
      log_emission(conn.session_id, event);
      conn.stream.write_line(encode_event(event));
      return true;
    } catch (const net::NetError&) {
      return false;
    }
  };

  auto accept_config = [&](const SessionConfig& config) -> std::optional<std::string> {
    std::set<std::string> declared;
    for (const auto& s : config.tool_schemas) declared.insert(s.name);
    for (const auto& name : required_tools(scenario_))
      if (!declared.count(name)) return "scenario requires tool '" + name + "' which the session did not declare";
    return std::nullopt;
  };

  std::optional<std::string> first;
  try {
    first = conn.stream.read_line();
  } catch (const net::NetError&) {
  }
  if (!first) return;
  const std::size_t index = ++session_counter_;
  conn.session_id = "s" + std::to_string(index);

  SessionEvent first_event;
  try {
    first_event = decode_event(*first);
  } catch (const ProtocolError& e) {
    emit(SessionError{std::string(to_string(e.code())) + ": " + e.what()});
    conn.stream.shutdown();
    return;
  }
  log_receipt(conn.session_id, first_event);
  const auto* config = std::get_if<SessionConfig>(&first_event);
  if (!config) {
    emit(SessionError{"first frame must be session_config"});
    conn.stream.shutdown();
    return;
  }
  if (auto reason = accept_config(*config)) {
    emit(SessionError{*reason});
    conn.stream.shutdown();
    return;
  }
  emit(SessionAck{conn.session_id});

  std::thread interpreter([this, &conn, emit] { Interpreter(scenario_, conn.inbox, emit).run(); });

  for (;;) {
    std::optional<std::string> line;
    try {
      line = conn.stream.read_line();
    } catch (const net::NetError&) {
    }
    if (!line) break;
    if (line->empty()) continue;
    SessionEvent event;
    try {
      event = decode_event(*line);
    } catch (const ProtocolError& e) {
      emit(SessionError{std::string(to_string(e.code())) + ": " + e.what()});
      continue;
    }
    log_receipt(conn.session_id, event);
    if (const auto* again = std::get_if<SessionConfig>(&event)) {
      if (auto reason = accept_config(*again)) emit(SessionError{*reason});
      else emit(SessionAck{conn.session_id});
      continue;
    }
    conn.inbox.push(std::move(event));
  }
  conn.inbox.close();
  interpreter.join();
  conn.done = true;
}

std::vector<SessionEvent> MockServer::receipt_log() const {
  std::lock_guard lock(log_mutex_);
  std::vector<SessionEvent> out;
  for (const auto& r : receipts_) out.push_back(r.event);
  return out;
}

std::vector<SessionEvent> MockServer::receipt_log(const std::string& session_id) const {
  std::lock_guard lock(log_mutex_);
  std::vector<SessionEvent> out;
  for (const auto& r : receipts_)
    if (r.session_id == session_id) out.push_back(r.event);
  return out;
}

std::vector<WireRecord> MockServer::receipts() const {
  std::lock_guard lock(log_mutex_);
  return receipts_;
}

std::vector<WireRecord> MockServer::emissions() const {
  std::lock_guard lock(log_mutex_);
  return emissions_;
}

std::vector<WireRecord> MockServer::emissions(const std::string& session_id) const {
  std::lock_guard lock(log_mutex_);
  std::vector<WireRecord> out;
  for (const auto& r : emissions_)
    if (r.session_id == session_id) out.push_back(r);
  return out;
}

}  // namespace s2s
