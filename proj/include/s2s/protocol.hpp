#pragma once

// Canonical duplex session protocol: the event vocabulary exchanged between
// the runtime and a speech-to-speech backend, and its newline-delimited
// text encoding. Field names are fixed in docs/protocol.md.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace s2s {

/// Scalar tool argument. Integers and reals are distinct on the wire.
using ArgValue = std::variant<std::string, double, std::int64_t, bool>;
using Arguments = std::map<std::string, ArgValue>;

std::string to_string(const ArgValue& value);

enum class InputMode { DirectAudio, Stt };

std::string_view to_string(InputMode mode);
std::optional<InputMode> parse_input_mode(std::string_view text);

enum class ParamType { String, Number, Integer, Boolean, Enum };

std::string_view to_string(ParamType type);
std::optional<ParamType> parse_param_type(std::string_view text);

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::String;
  bool required = false;
  std::vector<std::string> enum_values;
  // Inclusive bounds, only meaningful for Number and Integer.
  std::optional<double> minimum;
  std::optional<double> maximum;
  std::string description;

  bool operator==(const ParamSpec&) const = default;
};

struct ToolSchema {
  std::string name;
  std::string description;
  std::vector<ParamSpec> parameters;

  const ParamSpec* find(std::string_view param) const;
  bool operator==(const ToolSchema&) const = default;
};

/// Identifier charset for tool names: [A-Za-z_][A-Za-z0-9_]*
bool is_identifier(std::string_view name);

/// Throws ProtocolError(InvariantViolation) if the schema is ill-formed.
void check_schema(const ToolSchema& schema);

// ---- client-originated ----

struct AudioInputChunk {
  std::int64_t seq = 0;
  std::int64_t duration_ms = 0;
  std::string payload_ref;
  bool final = false;  // last chunk of an utterance
  bool operator==(const AudioInputChunk&) const = default;
};

struct TextInput {
  std::string text;
  std::optional<double> confidence;
  bool operator==(const TextInput&) const = default;
};

struct ContextInjection {
  std::string message;
  bool request_response = false;
  bool operator==(const ContextInjection&) const = default;
};

struct ToolResultEvent {
  std::string call_id;
  std::string payload;
  bool is_error = false;
  bool operator==(const ToolResultEvent&) const = default;
};

struct InterruptRequest {
  std::string turn_id;
  bool operator==(const InterruptRequest&) const = default;
};

struct SessionConfig {
  std::vector<ToolSchema> tool_schemas;
  InputMode input_mode = InputMode::DirectAudio;
  std::string system_prompt;
  bool operator==(const SessionConfig&) const = default;
};

// ---- server-originated ----

struct ModelTurnStart {
  std::string turn_id;
  bool operator==(const ModelTurnStart&) const = default;
};

struct ModelTurnEnd {
  std::string turn_id;
  bool operator==(const ModelTurnEnd&) const = default;
};

struct ModelTextDelta {
  std::string turn_id;
  std::string text;
  bool operator==(const ModelTextDelta&) const = default;
};

struct ModelAudioDelta {
  std::string turn_id;
  std::int64_t duration_ms = 0;
  bool operator==(const ModelAudioDelta&) const = default;
};

struct ToolCallRequest {
  std::string call_id;
  std::string name;
  Arguments arguments;
  bool operator==(const ToolCallRequest&) const = default;
};

struct SessionAck {
  std::string session_id;
  bool operator==(const SessionAck&) const = default;
};

struct SessionError {
  std::string reason;
  bool operator==(const SessionError&) const = default;
};

using SessionEvent =
    std::variant<AudioInputChunk, TextInput, ContextInjection, ToolResultEvent,
                 InterruptRequest, SessionConfig, ModelTurnStart, ModelTurnEnd,
                 ModelTextDelta, ModelAudioDelta, ToolCallRequest, SessionAck,
                 SessionError>;

/// Wire tag of the variant, e.g. "tool_call".
std::string_view kind_of(const SessionEvent& event);
bool is_client_originated(const SessionEvent& event);

enum class ProtocolErrc { MalformedFrame, UnknownKind, InvariantViolation };

std::string_view to_string(ProtocolErrc code);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ProtocolErrc code() const noexcept { return code_; }

 private:
  ProtocolErrc code_;
};

/// Type-level invariants of a single event (non-negative durations, confidence
/// in [0,1], well-formed schemas). Throws ProtocolError(InvariantViolation).
void check_event(const SessionEvent& event);

/// Single-line frame without the trailing newline. Deterministic: equal events
/// produce byte-identical frames.
std::string encode_event(const SessionEvent& event);

/// Inverse of encode_event. Unknown extra fields are ignored.
SessionEvent decode_event(std::string_view frame);

/// Per-session ordering invariants: strictly increasing audio seq, tool
/// results only for known calls, model deltas only inside open turns.
class SessionInvariants {
 public:
  void on_client_event(const SessionEvent& event);
  void on_server_event(const SessionEvent& event);
  /// Calls the runtime started on its own (no ToolCallRequest precedes them).
  void declare_local_call(const std::string& call_id);

  bool turn_open(const std::string& turn_id) const { return open_turns_.count(turn_id) > 0; }

 private:
  std::optional<std::int64_t> last_seq_;
  std::set<std::string> known_calls_;
  std::set<std::string> open_turns_;
};

}  // namespace s2s
