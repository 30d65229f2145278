#include "doctest.h"
#include "json.hpp"
#include "s2s/protocol.hpp"
#include "test_support.hpp"

using namespace s2s;
using nlohmann::json;

namespace {

ProtocolErrc decode_error(std::string_view frame) {
  try {
    decode_event(frame);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  FAIL("frame decoded without error: " << frame);
  return ProtocolErrc::MalformedFrame;
}

}  // namespace

TEST_CASE("tool call frame carries kind and typed arguments") {
  ToolCallRequest call{"c1", "look_at_position", {{"x", 0.0}, {"y", 0.0}, {"z", 2.0}}};
  const std::string frame = encode_event(call);
  json j = json::parse(frame);
  CHECK(j["kind"] == "tool_call");
  CHECK(j["call_id"] == "c1");
  CHECK(j["name"] == "look_at_position");
  CHECK(j["arguments"]["z"].is_number_float());
  CHECK(std::get<ToolCallRequest>(decode_event(frame)) == call);
}

TEST_CASE("integer and real arguments stay distinct") {
  ToolCallRequest call{"c", "t", {{"cell", std::int64_t{4}}, {"ratio", 4.0}}};
  auto back = std::get<ToolCallRequest>(decode_event(encode_event(call)));
  CHECK(std::holds_alternative<std::int64_t>(back.arguments.at("cell")));
  CHECK(std::holds_alternative<double>(back.arguments.at("ratio")));
}

TEST_CASE("encoding is deterministic") {
  SessionConfig a;
  a.tool_schemas.push_back({"b_tool", "B", {{"q", ParamType::String, true, {}, {}, {}, "query"}}});
  a.system_prompt = "hi";
  CHECK(encode_event(a) == encode_event(SessionConfig(a)));
  CHECK(encode_event(a).find('\n') == std::string::npos);
}

TEST_CASE("every event kind round-trips") {
  const std::vector<SessionEvent> events = {
      AudioInputChunk{3, 500, "hello", true},
      TextInput{"hello", 0.92},
      TextInput{"no confidence", std::nullopt},
      ContextInjection{"[User touched my right hand]", true},
      ToolResultEvent{"c1", "gaze set", false},
      InterruptRequest{"turn-1"},
      SessionConfig{{}, InputMode::Stt, "prompt"},
      ModelTurnStart{"turn-1"},
      ModelTurnEnd{"turn-1"},
      ModelTextDelta{"turn-1", "hi"},
      ModelAudioDelta{"turn-1", 200},
      ToolCallRequest{"c1", "get_datetime", {}},
      SessionAck{"s1"},
      SessionError{"nope"},
  };
  for (const auto& e : events) CHECK(decode_event(encode_event(e)) == e);
}

TEST_CASE("random events round-trip exactly") {
  testing::EventGenerator gen(42);
  for (int i = 0; i < 2000; ++i) {
    SessionEvent e = gen.event();
    const std::string frame = encode_event(e);
    REQUIRE(decode_event(frame) == e);
    CHECK(encode_event(decode_event(frame)) == frame);
  }
}

TEST_CASE("malformed frame classes map to their errors") {
  CHECK(decode_error("{\"kind\":\"interrupt\",\n\"turn_id\":\"t\"}") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("{not json") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("[1,2]") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("{\"turn_id\":\"t\"}") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("{\"kind\":7}") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("{\"kind\":\"interrupt\"}") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("{\"kind\":\"interrupt\",\"turn_id\":5}") == ProtocolErrc::MalformedFrame);
  CHECK(decode_error("{\"kind\":\"tool_call\",\"call_id\":\"c\",\"name\":\"n\",\"arguments\":{\"a\":[1]}}") ==
        ProtocolErrc::MalformedFrame);
  CHECK(decode_error("{\"kind\":\"teleport\"}") == ProtocolErrc::UnknownKind);
  CHECK(decode_error("{\"kind\":\"model_audio_delta\",\"turn_id\":\"t\",\"duration_ms\":-5}") ==
        ProtocolErrc::InvariantViolation);
  CHECK(decode_error("{\"kind\":\"text_input\",\"text\":\"x\",\"confidence\":1.5}") ==
        ProtocolErrc::InvariantViolation);
}

TEST_CASE("unknown extra fields are ignored") {
  auto e = decode_event("{\"kind\":\"session_ack\",\"session_id\":\"s9\",\"extra\":1}");
  CHECK(std::get<SessionAck>(e).session_id == "s9");
}

TEST_CASE("schema checks") {
  ToolSchema ok{"move_to", "", {{"x", ParamType::Number, false, {}, -1.0, 1.0, ""}}};
  CHECK_NOTHROW(check_schema(ok));
  ToolSchema dup{"t", "", {{"a", ParamType::String, true, {}, {}, {}, ""}, {"a", ParamType::String, true, {}, {}, {}, ""}}};
  CHECK_THROWS_AS(check_schema(dup), ProtocolError);
  ToolSchema empty_enum{"t", "", {{"e", ParamType::Enum, true, {}, {}, {}, ""}}};
  CHECK_THROWS_AS(check_schema(empty_enum), ProtocolError);
  ToolSchema bad_name{"9lives", "", {}};
  CHECK_THROWS_AS(check_schema(bad_name), ProtocolError);
  ToolSchema inverted{"t", "", {{"n", ParamType::Integer, true, {}, 5.0, 1.0, ""}}};
  CHECK_THROWS_AS(check_schema(inverted), ProtocolError);
  SessionConfig twice{{ok, ok}, InputMode::DirectAudio, ""};
  CHECK_THROWS_AS(check_event(twice), ProtocolError);
}

TEST_CASE("session invariants") {
  SessionInvariants inv;
  inv.on_client_event(AudioInputChunk{1, 10, "", false});
  CHECK_THROWS_AS(inv.on_client_event(AudioInputChunk{1, 10, "", false}), ProtocolError);
  CHECK_THROWS_AS(inv.on_client_event(ToolResultEvent{"c1", "x", false}), ProtocolError);
  inv.on_server_event(ToolCallRequest{"c1", "t", {}});
  CHECK_NOTHROW(inv.on_client_event(ToolResultEvent{"c1", "x", false}));
  inv.declare_local_call("self-1");
  CHECK_NOTHROW(inv.on_client_event(ToolResultEvent{"self-1", "x", false}));
  CHECK_THROWS_AS(inv.on_server_event(ModelTextDelta{"t1", "x"}), ProtocolError);
  inv.on_server_event(ModelTurnStart{"t1"});
  CHECK_NOTHROW(inv.on_server_event(ModelAudioDelta{"t1", 200}));
  inv.on_server_event(ModelTurnEnd{"t1"});
  CHECK_THROWS_AS(inv.on_server_event(ModelAudioDelta{"t1", 200}), ProtocolError);
}

TEST_CASE("input mode names") {
  CHECK(to_string(InputMode::DirectAudio) == "direct_audio");
  CHECK(parse_input_mode("stt") == InputMode::Stt);
  CHECK(parse_input_mode("audio") == InputMode::DirectAudio);
  CHECK_FALSE(parse_input_mode("video"));
}
