#include <map>
#include "doctest.h"
#include "s2s/mock_server.hpp"
#include "s2s/session.hpp"
#include "test_support.hpp"

using namespace s2s;
using namespace std::chrono_literals;

namespace {
const net::Endpoint kAnyPort{"127.0.0.1", 0};
}

TEST_CASE("open, send in order, close") {
  auto server = serve(Scenario{}, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), make_adapter("canonical"));
  CHECK(h->is_open());
  CHECK(h->session_id() == "s1");
  std::vector<SessionEvent> sent;
  for (int i = 0; i < 50; ++i) {
    SessionEvent e = i % 2 ? SessionEvent(AudioInputChunk{i, 20, "", false}) : SessionEvent(ContextInjection{std::to_string(i), false});
    h->send(e);
    sent.push_back(e);
  }
  REQUIRE(testing::eventually([&] { return server->receipt_log(h->session_id()).size() == 51; }));
  auto log = server->receipt_log(h->session_id());
  CHECK(std::holds_alternative<SessionConfig>(log.front()));
  CHECK(std::vector<SessionEvent>(log.begin() + 1, log.end()) == sent);
  h->close();
  h->close();
  CHECK_FALSE(h->is_open());
  CHECK_FALSE(h->next());
  CHECK_THROWS_AS(h->send(TextInput{"late", std::nullopt}), SessionFailure);
}

TEST_CASE("connect failure") {
  net::Endpoint closed;
  {
    auto l = net::TcpListener::bind(kAnyPort);
    closed = l.local_endpoint();
  }
  try {
    open_session(SessionConfig{}, closed, nullptr, 500ms);
    FAIL("connected");
  } catch (const SessionFailure& e) {
    CHECK(e.code() == SessionErrc::ConnectFailed);
  }
}

TEST_CASE("ill-formed config is rejected before connecting") {
  SessionConfig bad;
  bad.tool_schemas.push_back({"bad name", "", {}});
  try {
    open_session(bad, {"127.0.0.1", 1}, nullptr);
    FAIL("accepted");
  } catch (const SessionFailure& e) {
    CHECK(e.code() == SessionErrc::ConfigRejected);
  }
}

TEST_CASE("cloud adapters are declared but unavailable") {
  for (const char* name : {"openai", "azure", "xai", "gemini"}) {
    auto adapter = make_adapter(name);
    CHECK(adapter->name() == name);
    try {
      open_session(SessionConfig{}, {"127.0.0.1", 1}, adapter);
      FAIL("opened");
    } catch (const SessionFailure& e) {
      CHECK(e.code() == SessionErrc::AdapterUnavailable);
    }
  }
  CHECK_THROWS_AS(make_adapter("carrier-pigeon"), std::invalid_argument);
}

TEST_CASE("server-side events cannot be sent and invariants are enforced") {
  auto server = serve(Scenario{}, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), nullptr);
  CHECK_THROWS_AS(h->send(ModelTurnStart{"t"}), std::exception);
  CHECK_THROWS_AS(h->send(ToolResultEvent{"nobody", "x", false}), ProtocolError);
  h->declare_local_call("self-1");
  CHECK_NOTHROW(h->send(ToolResultEvent{"self-1", "x", false}));
  h->send(AudioInputChunk{5, 10, "", false});
  CHECK_THROWS_AS(h->send(AudioInputChunk{5, 10, "", false}), ProtocolError);
}

TEST_CASE("server disconnect ends the inbound stream") {
  auto server = serve(Scenario{}, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), nullptr);
  server->stop();
  CHECK_FALSE(h->next_for(2000ms));
  CHECK(testing::eventually([&] { return !h->is_open(); }));
}

TEST_CASE("concurrent senders keep per-thread order") {
  auto server = serve(Scenario{}, kAnyPort);
  auto h = open_session(SessionConfig{}, server->endpoint(), nullptr);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 100; ++i) h->send(ContextInjection{std::to_string(t) + ":" + std::to_string(i), false});
    });
  for (auto& t : threads) t.join();
  REQUIRE(testing::eventually([&] { return server->receipt_log(h->session_id()).size() == 401; }));
  std::map<char, int> last;
  for (const auto& e : server->receipt_log(h->session_id())) {
    auto* c = std::get_if<ContextInjection>(&e);
    if (!c) continue;
    char thread = c->message[0];
    int i = std::stoi(c->message.substr(2));
    CHECK(i == (last.count(thread) ? last[thread] + 1 : 0));
    last[thread] = i;
  }
}
