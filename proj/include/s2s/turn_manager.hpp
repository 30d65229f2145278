#pragma once

// Conversational state machine: who holds the floor, when the microphone is
// open, and how a status-capsule tap cuts off the model's speech.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "s2s/protocol.hpp"

namespace s2s::turn {

enum class TurnState { Idle, Listening, Thinking, Speaking };

enum class TurnEvent {
  SessionOpened,
  UserInputStart,
  UserInputEnd,
  ModelTurnStarted,
  FirstModelDelta,
  ModelTurnEnded,
  InterruptTapped,
  ToolExecutionStarted,
  ToolExecutionEnded,
  SessionClosed,
};

inline constexpr std::array kAllStates = {TurnState::Idle, TurnState::Listening, TurnState::Thinking,
                                          TurnState::Speaking};
inline constexpr std::array kAllEvents = {
    TurnEvent::SessionOpened,   TurnEvent::UserInputStart,       TurnEvent::UserInputEnd,
    TurnEvent::ModelTurnStarted, TurnEvent::FirstModelDelta,     TurnEvent::ModelTurnEnded,
    TurnEvent::InterruptTapped, TurnEvent::ToolExecutionStarted, TurnEvent::ToolExecutionEnded,
    TurnEvent::SessionClosed};

std::string_view to_string(TurnState state);
std::string_view to_string(TurnEvent event);
std::optional<TurnState> parse_state(std::string_view text);
std::optional<TurnEvent> parse_event(std::string_view text);

namespace action {
struct OpenMic {
  bool operator==(const OpenMic&) const = default;
};
struct CloseMic {
  bool operator==(const CloseMic&) const = default;
};
struct ForwardToSession {
  SessionEvent event;
  bool operator==(const ForwardToSession&) const = default;
};
struct CancelModelTurn {
  bool operator==(const CancelModelTurn&) const = default;
};
struct DropBufferedAudio {
  bool operator==(const DropBufferedAudio&) const = default;
};
struct EmitStateChange {
  TurnState state;
  bool operator==(const EmitStateChange&) const = default;
};
}  // namespace action

using TurnAction = std::variant<action::OpenMic, action::CloseMic, action::ForwardToSession, action::CancelModelTurn,
                                action::DropBufferedAudio, action::EmitStateChange>;

std::string to_string(const TurnAction& action);

struct Transition {
  TurnState state;
  std::vector<TurnAction> actions;
  bool operator==(const Transition&) const = default;
};

/// Pure transition function; total over (state, event). Pairs outside the
/// table leave the state unchanged and emit nothing.
Transition transition(TurnState state, TurnEvent event);

enum class Gate { Forward, Block };

/// Mic gating for client-originated events. Captured user speech (audio
/// chunks, and STT text which is derived from it) is blocked while Speaking,
/// and while Thinking when `gate_during_thinking`. Everything else passes.
Gate gate_input(TurnState state, const SessionEvent& event, bool gate_during_thinking = true);

/// Stateful wrapper used by the runtime loop. Single-threaded by contract.
class TurnManager {
 public:
  explicit TurnManager(bool gate_during_thinking = true) : gate_during_thinking_(gate_during_thinking) {}

  TurnState state() const { return state_; }

  /// Applies the transition and appends EmitStateChange when the state
  /// changes. Tool execution events report the current state as telemetry.
  /// SessionClosed always ends with EmitStateChange(Idle).
  std::vector<TurnAction> handle(TurnEvent event);

  Gate gate(const SessionEvent& event) const { return gate_input(state_, event, gate_during_thinking_); }

  /// Gates a client event: ForwardToSession(event) when allowed, else nothing.
  std::vector<TurnAction> offer(const SessionEvent& event) const;

  /// Maps an inbound backend event onto turn events, tracking the first delta
  /// of each model turn.
  std::vector<TurnAction> on_session_event(const SessionEvent& event);

 private:
  TurnState state_ = TurnState::Idle;
  bool gate_during_thinking_;
  std::optional<std::string> current_turn_;
  bool saw_delta_ = false;
};

}  // namespace s2s::turn
