#include <algorithm>

#include "doctest.h"
#include "s2s/scenario.hpp"
#include "test_support.hpp"

using namespace s2s;

namespace {

ScenarioErrc error_of(std::string_view text) {
  try {
    parse_scenario(text);
  } catch (const ScenarioError& e) {
    return e.code();
  }
  FAIL("scenario accepted: " << text);
  return ScenarioErrc::ParseError;
}

}  // namespace

TEST_CASE("committed ceiling scenario has the five-step tool sequence") {
  Scenario s = load_scenario(testing::data_path("scenarios/ceiling.scenario"));
  REQUIRE(s.steps.size() == 5);
  const auto& gaze = std::get<step::EmitToolCall>(s.steps[0]);
  CHECK(gaze.name == "look_at_position");
  CHECK(gaze.arguments.at("z") == ArgValue(2.0));
  CHECK(std::get<step::AwaitToolResult>(s.steps[1]).label == "gaze");
  CHECK(std::get<step::EmitToolCall>(s.steps[2]).name == "analyze_vision");
  CHECK(std::get<step::AwaitToolResult>(s.steps[3]).label == "vision");
  CHECK(std::get<step::EmitTurn>(s.steps[4]).text.find("{result:vision}") != std::string::npos);
  auto tools = required_tools(s);
  std::sort(tools.begin(), tools.end());
  CHECK(tools == std::vector<std::string>{"analyze_vision", "look_at_position"});
}

TEST_CASE("every committed scenario loads") {
  for (const auto& entry : std::filesystem::directory_iterator(testing::data_path("scenarios"))) {
    if (entry.path().extension() != ".scenario") continue;
    INFO(entry.path());
    CHECK_NOTHROW(load_scenario(entry.path()));
  }
}

TEST_CASE("latency lines and overrides") {
  Scenario s = parse_scenario(
      "{\"step\":\"on_user_input\",\"match\":\"*\"}\n"
      "{\"latency\":{\"mode\":\"cascaded\",\"stt_ms\":800,\"llm_ms\":2000,\"tts_ms\":1200}}\n");
  CHECK(s.latency.first_text_ms() == 2800);
  CHECK(s.latency.first_audio_ms() == 4000);
  CHECK(parse_latency("s2s:900") == LatencyModel::s2s(900));
  CHECK(parse_latency("cascaded:800,2000,1200") == LatencyModel::cascaded(800, 2000, 1200));
  CHECK_THROWS_AS(parse_latency("warp:1"), ScenarioError);
  CHECK_THROWS_AS(parse_latency("s2s:-4"), ScenarioError);
}

TEST_CASE("options and comments") {
  Scenario s = parse_scenario(
      "# comment\n\n"
      "{\"step\":\"emit_context_ack\"}\n"
      "{\"options\":{\"loop\":true,\"pace_audio\":false,\"audio_chunk_ms\":100,\"ack_audio_ms\":300}}\n");
  CHECK(s.loop);
  CHECK_FALSE(s.pace_audio);
  CHECK(s.audio_chunk_ms == 100);
  CHECK(s.ack_audio_ms == 300);
}

TEST_CASE("parse and validation errors") {
  CHECK(error_of("{broken") == ScenarioErrc::ParseError);
  CHECK(error_of("{\"step\":\"dance\"}") == ScenarioErrc::ParseError);
  CHECK(error_of("{\"step\":\"emit_turn\"}") == ScenarioErrc::ParseError);
  CHECK(error_of("{\"step\":\"await_tool_result\",\"label\":\"x\"}") == ScenarioErrc::ValidationError);
  CHECK(error_of("{\"step\":\"emit_tool_call\",\"label\":\"a\",\"name\":\"t\"}\n"
                 "{\"step\":\"emit_tool_call\",\"label\":\"a\",\"name\":\"t\"}") == ScenarioErrc::ValidationError);
  CHECK(error_of("{\"step\":\"emit_tool_call\",\"label\":\"a\",\"name\":\"t\"}\n"
                 "{\"step\":\"emit_turn\",\"text\":\"{result:a}\"}") == ScenarioErrc::ValidationError);
  CHECK(error_of("{\"step\":\"emit_tool_call\",\"label\":\"a\",\"name\":\"bad name\"}") ==
        ScenarioErrc::ValidationError);
  CHECK(error_of("{\"options\":{\"audio_chunk_ms\":0}}") == ScenarioErrc::ValidationError);
}
