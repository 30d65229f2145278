#include "s2s/turn_manager.hpp"

namespace s2s::turn {

std::string_view to_string(TurnState state) {
  switch (state) {
    case TurnState::Idle: return "Idle";
    case TurnState::Listening: return "Listening";
    case TurnState::Thinking: return "Thinking";
    case TurnState::Speaking: return "Speaking";
  }
  return "?";
}

std::string_view to_string(TurnEvent event) {
  switch (event) {
    case TurnEvent::SessionOpened: return "SessionOpened";
    case TurnEvent::UserInputStart: return "UserInputStart";
    case TurnEvent::UserInputEnd: return "UserInputEnd";
    case TurnEvent::ModelTurnStarted: return "ModelTurnStarted";
    case TurnEvent::FirstModelDelta: return "FirstModelDelta";
    case TurnEvent::ModelTurnEnded: return "ModelTurnEnded";
    case TurnEvent::InterruptTapped: return "InterruptTapped";
    case TurnEvent::ToolExecutionStarted: return "ToolExecutionStarted";
    case TurnEvent::ToolExecutionEnded: return "ToolExecutionEnded";
    case TurnEvent::SessionClosed: return "SessionClosed";
  }
  return "?";
}

std::optional<TurnState> parse_state(std::string_view text) {
  for (auto s : kAllStates)
    if (to_string(s) == text) return s;
  return std::nullopt;
}

std::optional<TurnEvent> parse_event(std::string_view text) {
  for (auto e : kAllEvents)
    if (to_string(e) == text) return e;
  return std::nullopt;
}

std::string to_string(const TurnAction& a) {
  struct V {
    std::string operator()(const action::OpenMic&) const { return "OpenMic"; }
    std::string operator()(const action::CloseMic&) const { return "CloseMic"; }
    std::string operator()(const action::ForwardToSession& f) const {
      return "ForwardToSession(" + std::string(kind_of(f.event)) + ")";
    }
    std::string operator()(const action::CancelModelTurn&) const { return "CancelModelTurn"; }
    std::string operator()(const action::DropBufferedAudio&) const { return "DropBufferedAudio"; }
    std::string operator()(const action::EmitStateChange& s) const {
      return "EmitStateChange(" + std::string(to_string(s.state)) + ")";
    }
  };
  return std::visit(V{}, a);
}

Transition transition(TurnState state, TurnEvent event) {
  using S = TurnState;
  using E = TurnEvent;
  if (event == E::SessionClosed) return {S::Idle, {action::CloseMic{}}};
  switch (state) {
    case S::Idle:
      if (event == E::SessionOpened) return {S::Listening, {action::OpenMic{}}};
      break;
    case S::Listening:
      if (event == E::UserInputEnd) return {S::Thinking, {}};
      // Unsolicited turns (touch, perception rules) still mute the mic.
      if (event == E::FirstModelDelta) return {S::Speaking, {action::CloseMic{}}};
      break;
    case S::Thinking:
      if (event == E::FirstModelDelta) return {S::Speaking, {action::CloseMic{}}};
      if (event == E::ModelTurnEnded) return {S::Listening, {action::OpenMic{}}};
      break;
    case S::Speaking:
      if (event == E::ModelTurnEnded) return {S::Listening, {action::OpenMic{}}};
      if (event == E::InterruptTapped)
        return {S::Listening, {action::CancelModelTurn{}, action::DropBufferedAudio{}, action::OpenMic{}}};
      break;
  }
  return {state, {}};
}

Gate gate_input(TurnState state, const SessionEvent& event, bool gate_during_thinking) {
  const bool captured_speech =
      std::holds_alternative<AudioInputChunk>(event) || std::holds_alternative<TextInput>(event);
  if (!captured_speech) return Gate::Forward;
  if (state == TurnState::Speaking) return Gate::Block;
  if (state == TurnState::Thinking && gate_during_thinking) return Gate::Block;
  return Gate::Forward;
}

std::vector<TurnAction> TurnManager::handle(TurnEvent event) {
  const TurnState before = state_;
  Transition t = transition(state_, event);
  state_ = t.state;
  std::vector<TurnAction> actions = std::move(t.actions);
  if (event == TurnEvent::SessionClosed) {
    current_turn_.reset();
    saw_delta_ = false;
    actions.push_back(action::EmitStateChange{TurnState::Idle});
  } else if (state_ != before || event == TurnEvent::ToolExecutionStarted ||
             event == TurnEvent::ToolExecutionEnded) {
    actions.push_back(action::EmitStateChange{state_});
  }
  return actions;
}

std::vector<TurnAction> TurnManager::offer(const SessionEvent& event) const {
  if (gate(event) == Gate::Block) return {};
  return {action::ForwardToSession{event}};
}

std::vector<TurnAction> TurnManager::on_session_event(const SessionEvent& event) {
  if (const auto* start = std::get_if<ModelTurnStart>(&event)) {
    current_turn_ = start->turn_id;
    saw_delta_ = false;
    return handle(TurnEvent::ModelTurnStarted);
  }
  if (std::holds_alternative<ModelTextDelta>(event) || std::holds_alternative<ModelAudioDelta>(event)) {
    if (saw_delta_) return {};
    saw_delta_ = true;
    return handle(TurnEvent::FirstModelDelta);
  }
  if (std::holds_alternative<ModelTurnEnd>(event)) {
    current_turn_.reset();
    saw_delta_ = false;
    return handle(TurnEvent::ModelTurnEnded);
  }
  return {};
}

}  // namespace s2s::turn
