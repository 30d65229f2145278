#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "s2s/turn_manager.hpp"
#include "test_support.hpp"

using namespace s2s;
using namespace s2s::turn;

namespace {

struct GoldenRow {
  std::string next;
  std::string actions;
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(' ');
  auto e = s.find_last_not_of(' ');
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::map<std::pair<std::string, std::string>, GoldenRow> load_golden() {
  std::ifstream in(testing::data_path("tests/fixtures/turn_table.golden"));
  REQUIRE(in);
  std::map<std::pair<std::string, std::string>, GoldenRow> table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '|')) cols.push_back(trim(col));
    REQUIRE(cols.size() == 4);
    table[{cols[0], cols[1]}] = {cols[2], cols[3] == "-" ? "" : cols[3]};
  }
  return table;
}

std::string joined(const std::vector<TurnAction>& actions) {
  std::string out;
  for (const auto& a : actions) out += (out.empty() ? "" : " ") + to_string(a);
  return out;
}

}  // namespace

TEST_CASE("transition table equals the golden table over every pair") {
  auto golden = load_golden();
  CHECK(golden.size() == kAllStates.size() * kAllEvents.size());
  std::size_t covered = 0;
  for (auto s : kAllStates) {
    for (auto e : kAllEvents) {
      const auto key = std::make_pair(std::string(to_string(s)), std::string(to_string(e)));
      REQUIRE(golden.count(key));
      const Transition t = transition(s, e);
      INFO(key.first << " + " << key.second);
      CHECK(std::string(to_string(t.state)) == golden[key].next);
      CHECK(joined(t.actions) == golden[key].actions);
      ++covered;
    }
  }
  CHECK(covered == 40);
}

TEST_CASE("names parse back") {
  for (auto s : kAllStates) CHECK(parse_state(to_string(s)) == s);
  for (auto e : kAllEvents) CHECK(parse_event(to_string(e)) == e);
  CHECK_FALSE(parse_state("Dreaming"));
}

TEST_CASE("gating blocks captured speech while the robot holds the floor") {
  const SessionEvent audio = AudioInputChunk{0, 500, "", true};
  const SessionEvent text = TextInput{"hi", 0.9};
  const SessionEvent ctx = ContextInjection{"[x]", true};
  const SessionEvent result = ToolResultEvent{"c", "ok", false};
  CHECK(gate_input(TurnState::Speaking, audio) == Gate::Block);
  CHECK(gate_input(TurnState::Thinking, audio) == Gate::Block);
  CHECK(gate_input(TurnState::Thinking, audio, false) == Gate::Forward);
  CHECK(gate_input(TurnState::Listening, audio) == Gate::Forward);
  CHECK(gate_input(TurnState::Speaking, text) == Gate::Block);
  for (auto s : kAllStates) {
    CHECK(gate_input(s, ctx) == Gate::Forward);
    CHECK(gate_input(s, result) == Gate::Forward);
    CHECK(gate_input(s, InterruptRequest{"t"}) == Gate::Forward);
  }
}

TEST_CASE("manager emits state changes and tool telemetry") {
  TurnManager tm;
  auto a = tm.handle(TurnEvent::SessionOpened);
  CHECK(joined(a) == "OpenMic EmitStateChange(Listening)");
  CHECK(tm.handle(TurnEvent::UserInputStart).empty());
  CHECK(joined(tm.handle(TurnEvent::UserInputEnd)) == "EmitStateChange(Thinking)");
  CHECK(joined(tm.handle(TurnEvent::ToolExecutionStarted)) == "EmitStateChange(Thinking)");
  CHECK(tm.state() == TurnState::Thinking);
  CHECK(joined(tm.handle(TurnEvent::SessionClosed)) == "CloseMic EmitStateChange(Idle)");
  CHECK(joined(tm.handle(TurnEvent::SessionClosed)) == "CloseMic EmitStateChange(Idle)");
}

TEST_CASE("session events drive the turn") {
  TurnManager tm;
  tm.handle(TurnEvent::SessionOpened);
  tm.on_session_event(ModelTurnStart{"t1"});
  CHECK(tm.state() == TurnState::Listening);
  CHECK(joined(tm.on_session_event(ModelTextDelta{"t1", "hi"})) == "CloseMic EmitStateChange(Speaking)");
  CHECK(tm.on_session_event(ModelAudioDelta{"t1", 200}).empty());
  CHECK(tm.offer(AudioInputChunk{0, 100, "", true}).empty());
  CHECK(tm.offer(ContextInjection{"x", false}).size() == 1);
  CHECK(joined(tm.handle(TurnEvent::InterruptTapped)) ==
        "CancelModelTurn DropBufferedAudio OpenMic EmitStateChange(Listening)");
  CHECK(tm.offer(AudioInputChunk{1, 100, "", true}).size() == 1);
}

TEST_CASE("random sequences never forward speech while Speaking or Thinking") {
  auto golden = load_golden();
  testing::EventGenerator gen(7);
  for (int run = 0; run < 300; ++run) {
    const bool gate_thinking = run % 3 != 0;
    TurnManager tm(gate_thinking);
    std::string oracle_state = "Idle";
    for (int step = 0; step < 60; ++step) {
      if (gen.pick(0, 1)) {
        const auto ev = kAllEvents[gen.pick<std::size_t>(0, kAllEvents.size() - 1)];
        tm.handle(ev);
        oracle_state = golden[{oracle_state, std::string(to_string(ev))}].next;
        REQUIRE(std::string(to_string(tm.state())) == oracle_state);
      } else {
        SessionEvent e = gen.event();
        if (!is_client_originated(e)) continue;
        const bool speech = std::holds_alternative<AudioInputChunk>(e) || std::holds_alternative<TextInput>(e);
        const bool muted = oracle_state == "Speaking" || (gate_thinking && oracle_state == "Thinking");
        CHECK(tm.offer(e).size() == (speech && muted ? 0u : 1u));
      }
    }
  }
}
