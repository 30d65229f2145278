#include "doctest.h"
#include "s2s/mock_server.hpp"
#include "s2s/session.hpp"
#include "test_support.hpp"

using namespace s2s;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;

namespace {

const net::Endpoint kAnyPort{"127.0.0.1", 0};

SessionConfig config_with(std::vector<std::string> tools) {
  SessionConfig c;
  for (auto& t : tools) c.tool_schemas.push_back({t, "", {}});
  return c;
}

std::vector<SessionEvent> drain_until_turn_end(SessionHandle& h, std::chrono::milliseconds timeout = 5000ms) {
  std::vector<SessionEvent> out;
  const auto deadline = Clock::now() + timeout;
  while (Clock::now() < deadline) {
    auto e = h.next_for(50ms);
    if (!e) continue;
    out.push_back(*e);
    if (std::holds_alternative<ModelTurnEnd>(*e)) break;
  }
  return out;
}

}  // namespace

TEST_CASE("ceiling script emits calls in order and splices results into the answer") {
  auto server = serve(load_scenario(testing::data_path("scenarios/ceiling.scenario")), kAnyPort);
  auto h = open_session(config_with({"look_at_position", "analyze_vision"}), server->endpoint(), nullptr);
  auto first = h->next_for(2000ms);
  REQUIRE(first);
  auto gaze = std::get<ToolCallRequest>(*first);
  CHECK(gaze.name == "look_at_position");
  CHECK(gaze.call_id == "call-1");
  h->send(ToolResultEvent{gaze.call_id, "gaze set", false});
  auto second = h->next_for(2000ms);
  REQUIRE(second);
  auto vision = std::get<ToolCallRequest>(*second);
  CHECK(vision.name == "analyze_vision");
  h->send(ToolResultEvent{vision.call_id, "a glowing marker", false});
  auto turn = drain_until_turn_end(*h);
  REQUIRE(turn.size() >= 3);
  CHECK(std::holds_alternative<ModelTurnStart>(turn.front()));
  CHECK(std::get<ModelTextDelta>(turn[1]).text == "Looking up, a glowing marker.");
  std::int64_t audio = 0;
  for (const auto& e : turn)
    if (auto* d = std::get_if<ModelAudioDelta>(&e)) audio += d->duration_ms;
  CHECK(audio == 1200);
}

TEST_CASE("missing tool declaration is refused at open") {
  auto server = serve(load_scenario(testing::data_path("scenarios/ceiling.scenario")), kAnyPort);
  try {
    open_session(config_with({"look_at_position"}), server->endpoint(), nullptr);
    FAIL("session opened");
  } catch (const SessionFailure& e) {
    CHECK(e.code() == SessionErrc::ConfigRejected);
    CHECK(std::string(e.what()).find("analyze_vision") != std::string::npos);
  }
}

TEST_CASE("first delta timing follows the latency model") {
  Scenario s = parse_scenario("{\"step\":\"on_user_input\",\"match\":\"*\"}\n"
                              "{\"step\":\"emit_turn\",\"text\":\"hi\",\"audio_ms\":400}\n"
                              "{\"latency\":{\"mode\":\"cascaded\",\"stt_ms\":100,\"llm_ms\":200,\"tts_ms\":150}}\n");
  auto server = serve(s, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), nullptr);
  const auto t0 = Clock::now();
  h->send(TextInput{"hello", 0.9});
  auto turn = drain_until_turn_end(*h);
  std::optional<Clock::time_point> text_at, audio_at;
  for (const auto& r : server->emissions(h->session_id())) {
    if (!text_at && std::holds_alternative<ModelTextDelta>(r.event)) text_at = r.at;
    if (!audio_at && std::holds_alternative<ModelAudioDelta>(r.event)) audio_at = r.at;
  }
  REQUIRE(text_at);
  REQUIRE(audio_at);
  auto ms = [&](Clock::time_point t) { return std::chrono::duration_cast<std::chrono::milliseconds>(t - t0).count(); };
  CHECK(ms(*text_at) >= 300);
  CHECK(ms(*text_at) < 300 + 100);
  CHECK(ms(*audio_at) >= 450);
  CHECK(ms(*audio_at) < 450 + 100);
}

TEST_CASE("interrupt stops audio and closes the turn") {
  Scenario s = parse_scenario("{\"step\":\"on_user_input\",\"match\":\"*\"}\n"
                              "{\"step\":\"emit_turn\",\"text\":\"long\",\"audio_ms\":10000}\n"
                              "{\"latency\":{\"mode\":\"s2s\",\"first_token_ms\":10}}\n");
  auto server = serve(s, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), nullptr);
  h->send(TextInput{"go", std::nullopt});
  std::string turn_id;
  while (auto e = h->next_for(2000ms)) {
    if (auto* d = std::get_if<ModelAudioDelta>(&*e)) {
      turn_id = d->turn_id;
      break;
    }
  }
  REQUIRE_FALSE(turn_id.empty());
  std::this_thread::sleep_for(300ms);
  h->send(InterruptRequest{turn_id});
  const auto sent_at = Clock::now();
  auto rest = drain_until_turn_end(*h, 3000ms);
  REQUIRE_FALSE(rest.empty());
  CHECK(std::holds_alternative<ModelTurnEnd>(rest.back()));
  std::int64_t total = 0;
  for (const auto& r : server->emissions(h->session_id())) {
    if (auto* d = std::get_if<ModelAudioDelta>(&r.event)) {
      total += d->duration_ms;
      // One chunk may already be in flight when the interrupt lands.
      CHECK(r.at <= sent_at + 250ms);
    }
  }
  CHECK(total < 10000);
}

TEST_CASE("malformed frame gets an error and the connection survives") {
  Scenario s = parse_scenario("{\"step\":\"on_user_input\",\"match\":\"ping\"}\n"
                              "{\"step\":\"emit_turn\",\"text\":\"pong\",\"audio_ms\":0}\n");
  auto server = serve(s, kAnyPort);
  auto stream = net::TcpStream::connect(server->endpoint(), 1000ms);
  stream.write_line(encode_event(SessionConfig{}));
  CHECK(std::holds_alternative<SessionAck>(decode_event(*stream.read_line())));
  stream.write_line("{this is not a frame");
  auto err = decode_event(*stream.read_line());
  REQUIRE(std::holds_alternative<SessionError>(err));
  CHECK(std::get<SessionError>(err).reason.find("MalformedFrame") != std::string::npos);
  stream.write_line(encode_event(TextInput{"PING please", std::nullopt}));
  CHECK(std::holds_alternative<ModelTurnStart>(decode_event(*stream.read_line())));
  CHECK(std::get<ModelTextDelta>(decode_event(*stream.read_line())).text == "pong");
}

TEST_CASE("first frame other than a config is refused") {
  auto server = serve(Scenario{}, kAnyPort);
  auto stream = net::TcpStream::connect(server->endpoint(), 1000ms);
  stream.write_line(encode_event(TextInput{"hi", std::nullopt}));
  CHECK(std::holds_alternative<SessionError>(decode_event(*stream.read_line())));
  CHECK_FALSE(stream.read_line());
}

TEST_CASE("resent config is acknowledged again") {
  auto server = serve(Scenario{}, kAnyPort);
  auto stream = net::TcpStream::connect(server->endpoint(), 1000ms);
  stream.write_line(encode_event(SessionConfig{}));
  auto ack = std::get<SessionAck>(decode_event(*stream.read_line()));
  stream.write_line(encode_event(SessionConfig{}));
  CHECK(std::get<SessionAck>(decode_event(*stream.read_line())).session_id == ack.session_id);
}

TEST_CASE("audio input accumulates until the final chunk") {
  Scenario s = parse_scenario("{\"step\":\"on_user_input\",\"match\":\"weather\"}\n"
                              "{\"step\":\"emit_turn\",\"text\":\"sunny\",\"audio_ms\":0}\n");
  auto server = serve(s, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), nullptr);
  h->send(AudioInputChunk{0, 500, "how is the", false});
  h->send(AudioInputChunk{1, 500, "weather", false});
  CHECK_FALSE(h->next_for(200ms));
  h->send(AudioInputChunk{2, 200, "", true});
  auto turn = drain_until_turn_end(*h);
  REQUIRE(turn.size() == 3);
  CHECK(std::get<ModelTextDelta>(turn[1]).text == "sunny");
  CHECK(server->receipt_log(h->session_id()).size() == 4);
}

TEST_CASE("silent context never triggers a reply") {
  Scenario s = parse_scenario("{\"step\":\"on_user_input\",\"match\":\"*\"}\n"
                              "{\"step\":\"emit_context_ack\"}\n{\"options\":{\"ack_audio_ms\":0}}\n");
  auto server = serve(s, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), nullptr);
  h->send(ContextInjection{"[quiet]", false});
  CHECK_FALSE(h->next_for(200ms));
  h->send(ContextInjection{"[User touched my head]", true});
  auto turn = drain_until_turn_end(*h);
  REQUIRE(turn.size() == 3);
  CHECK(std::get<ModelTextDelta>(turn[1]).text == "Noted: [User touched my head]");
}

TEST_CASE("sessions get distinct ids") {
  auto server = serve(Scenario{}, kAnyPort);
  auto a = open_session(SessionConfig{}, server->endpoint(), nullptr);
  auto b = open_session(SessionConfig{}, server->endpoint(), nullptr);
  CHECK(a->session_id() != b->session_id());
  CHECK(server->session_count() == 2);
}
