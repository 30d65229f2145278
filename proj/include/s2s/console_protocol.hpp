#pragma once

// Operator console feed: records the gateway pushes to a console and the
// commands a console sends back. Same frame grammar as the session protocol
// (one JSON object per line with a "kind" field), in its own namespace of
// kinds; see docs/console-protocol.md.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <variant>

#include "s2s/blocking_queue.hpp"
#include "s2s/net.hpp"
#include "s2s/protocol.hpp"
#include "s2s/robot.hpp"
#include "s2s/tool_registry.hpp"
#include "s2s/turn_manager.hpp"

namespace s2s {

/// One transcript line. `wire` holds the session-protocol kind when the
/// record stands for a SessionEvent that was sent or received, and is empty
/// otherwise (state changes, function cards, inputs held back by the mic gate).
struct TranscriptRecord {
  std::uint64_t seq = 0;
  std::int64_t t_ms = 0;  // since gateway start
  std::string direction;  // user | model | system
  std::string kind;  // text | audio-ms | context | function-card | state-change | tool-call | tool-result | control
  std::string body;
  std::string note;  // "gated", "dropped" or empty
  std::string wire;
  bool operator==(const TranscriptRecord&) const = default;
};

struct TurnLatencySample {
  int turn_index = 0;
  std::string turn_id;
  std::int64_t t_user_end_ms = 0;
  std::int64_t t_first_delta_ms = 0;
  std::int64_t latency_ms = 0;
  bool operator==(const TurnLatencySample&) const = default;
};

namespace console {

struct SendText {
  std::string text;
  bool operator==(const SendText&) const = default;
};
struct SimulateAudio {
  std::int64_t duration_ms = 0;
  std::string label;  // what the simulated speech says, if known
  bool operator==(const SimulateAudio&) const = default;
};
struct Tap {
  bool operator==(const Tap&) const = default;
};
struct Touch {
  TouchSensor sensor = TouchSensor::Head;
  bool operator==(const Touch&) const = default;
};
struct SetInputMode {
  InputMode mode = InputMode::DirectAudio;
  bool operator==(const SetInputMode&) const = default;
};
struct MovePerson {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  bool operator==(const MovePerson&) const = default;
};
struct SetHardware {
  std::string field;
  std::string value;
  bool operator==(const SetHardware&) const = default;
};

using Command = std::variant<SendText, SimulateAudio, Tap, Touch, SetInputMode, MovePerson, SetHardware>;

class ConsoleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view kind_of(const Command& command);
std::string encode_command(const Command& command);
/// Throws ConsoleError for malformed frames, unknown kinds or bad fields.
Command decode_command(std::string_view frame);

// Outbound feed records.
std::string encode_state(turn::TurnState state);
std::string encode_transcript(const TranscriptRecord& record);
std::string encode_card(const FunctionCard& card);
std::string encode_world(const SimWorld& world);
std::string encode_latency(const TurnLatencySample& sample);
std::string encode_error(std::string_view reason);

TranscriptRecord decode_transcript(std::string_view frame);

/// Kind of a feed frame, e.g. "console.state"; empty if unreadable.
std::string feed_kind(std::string_view frame);

}  // namespace console

/// Scripted console: connects to a gateway's console socket, sends commands
/// and reads feed records. Used for headless operation and tests.
class ConsoleClient {
 public:
  static std::unique_ptr<ConsoleClient> connect(const net::Endpoint& endpoint,
                                                std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));
  ConsoleClient(const ConsoleClient&) = delete;
  ConsoleClient& operator=(const ConsoleClient&) = delete;
  ~ConsoleClient();

  void send(const console::Command& command);
  void send_raw(std::string_view line);
  /// Next feed frame; nullopt when the connection ends.
  std::optional<std::string> next();
  /// Next feed frame; nullopt on timeout or when the connection ends.
  std::optional<std::string> next_for(std::chrono::milliseconds timeout);
  /// Reads until a frame satisfies `pred`; nullopt on timeout.
  std::optional<std::string> wait_for(const std::function<bool(const std::string&)>& pred,
                                      std::chrono::milliseconds timeout);
  void close();

 private:
  explicit ConsoleClient(net::TcpStream stream);
  net::TcpStream stream_;
  BlockingQueue<std::string> inbound_;
  std::thread reader_;
};

}  // namespace s2s
