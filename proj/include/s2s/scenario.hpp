#pragma once

// Scripts replayed by the mock backend. One step per line; see
// scenarios/README.md for the grammar.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "s2s/protocol.hpp"

namespace s2s {

struct LatencyModel {
  enum class Mode { Cascaded, S2S };
  Mode mode = Mode::S2S;
  std::int64_t stt_ms = 0;
  std::int64_t llm_ms = 0;
  std::int64_t tts_ms = 0;
  std::int64_t first_token_ms = 0;

  /// Delay from trigger to the first text delta.
  std::int64_t first_text_ms() const { return mode == Mode::Cascaded ? stt_ms + llm_ms : first_token_ms; }
  /// Delay from trigger to the first audio delta (the audible response).
  std::int64_t first_audio_ms() const {
    return mode == Mode::Cascaded ? stt_ms + llm_ms + tts_ms : first_token_ms;
  }

  static LatencyModel cascaded(std::int64_t stt, std::int64_t llm, std::int64_t tts) {
    return {Mode::Cascaded, stt, llm, tts, 0};
  }
  static LatencyModel s2s(std::int64_t first_token) { return {Mode::S2S, 0, 0, 0, first_token}; }

  bool operator==(const LatencyModel&) const = default;
};

/// Parses "s2s:900" or "cascaded:800,2000,1200". Throws ScenarioError.
LatencyModel parse_latency(std::string_view text);

namespace step {
struct OnUserInput {
  std::string match;  // case-insensitive substring, "*" matches anything
  bool operator==(const OnUserInput&) const = default;
};
struct EmitTurn {
  std::string text;  // may reference tool results as {result:LABEL}
  std::int64_t audio_ms = 0;
  bool operator==(const EmitTurn&) const = default;
};
struct EmitToolCall {
  std::string label;
  std::string name;
  Arguments arguments;
  bool operator==(const EmitToolCall&) const = default;
};
struct AwaitToolResult {
  std::string label;
  bool operator==(const AwaitToolResult&) const = default;
};
struct EmitContextAck {
  bool operator==(const EmitContextAck&) const = default;
};
}  // namespace step

using ScriptStep =
    std::variant<step::OnUserInput, step::EmitTurn, step::EmitToolCall, step::AwaitToolResult, step::EmitContextAck>;

struct Scenario {
  std::vector<ScriptStep> steps;
  LatencyModel latency;
  bool loop = false;
  std::int64_t audio_chunk_ms = 200;
  bool pace_audio = true;  // stream audio deltas in real time
  std::int64_t ack_audio_ms = 800;

  bool operator==(const Scenario&) const = default;
};

enum class ScenarioErrc { ParseError, ValidationError };

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(ScenarioErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ScenarioErrc code() const noexcept { return code_; }

 private:
  ScenarioErrc code_;
};

/// Throws ScenarioError(ValidationError).
void validate(const Scenario& scenario);

Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Tool names the script will call; a session must declare them all.
std::vector<std::string> required_tools(const Scenario& scenario);

}  // namespace s2s
