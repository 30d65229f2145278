#include <thread>

#include "doctest.h"
#include "s2s/cli.hpp"
#include "s2s/mock_server.hpp"
#include "s2s/scenario.hpp"
#include "test_support.hpp"

using namespace s2s;
using namespace std::chrono_literals;

namespace {

int run(int (*main_fn)(int, char**), std::vector<std::string> args) {
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return main_fn(static_cast<int>(args.size()), argv.data());
}

int code_of(const std::vector<std::string>& args) {
  try {
    cli::parse_gateway_args(args);
  } catch (const cli::UsageError& e) {
    return e.exit_code();
  } catch (const ConfigError&) {
    return -2;
  }
  return -1;
}

std::uint16_t free_port() {
  auto l = net::TcpListener::bind({"127.0.0.1", 0});
  return l.local_endpoint().port;
}

}  // namespace

TEST_CASE("gateway flags") {
  auto defaults = cli::parse_gateway_args({});
  CHECK(defaults.config.backend == net::Endpoint{"127.0.0.1", 7700});
  CHECK(defaults.config.input_mode == InputMode::DirectAudio);
  CHECK(defaults.config.gate_during_thinking);
  CHECK(defaults.config.services.weather.mode == ServiceMode::Stub);
  CHECK_FALSE(defaults.config.console_bind);

  const auto world = testing::data_path("worlds/lab.json").string();
  auto o = cli::parse_gateway_args({"--backend", "tcp://localhost:9000", "--mode", "stt", "--world", world,
                                    "--console", "127.0.0.1:0", "--weather", "live", "--no-gate-thinking",
                                    "--utc-offset", "120", "--run-seconds", "2.5", "--stt-confidence", "0.5"});
  CHECK(o.config.backend == net::Endpoint{"localhost", 9000});
  CHECK(o.config.input_mode == InputMode::Stt);
  CHECK(o.config.world_path == world);
  CHECK(o.config.console_bind == net::Endpoint{"127.0.0.1", 0});
  CHECK(o.config.services.weather.mode == ServiceMode::Live);
  CHECK(o.config.services.search.mode == ServiceMode::Stub);
  CHECK_FALSE(o.config.services.weather.key);
  CHECK_FALSE(o.config.gate_during_thinking);
  CHECK(o.config.builtin.utc_offset_minutes == 120);
  CHECK(o.run_seconds == 2.5);
  CHECK(o.config.stt_confidence == 0.5);
}

TEST_CASE("gateway flag errors") {
  CHECK(code_of({"--help"}) == 0);
  CHECK(code_of({"--mode", "smell"}) > 0);
  CHECK(code_of({"--adapter", "nobody"}) > 0);
  CHECK(code_of({"--world", "/nonexistent.json"}) > 0);
  CHECK(code_of({"--backend", "no-port"}) > 0);
  CHECK(code_of({"--weather", "sometimes"}) > 0);
  CHECK(code_of({"--stray"}) > 0);
  CHECK(code_of({"--stt-confidence", "3"}) > 0);
}

TEST_CASE("mock and ctl usage errors") {
  CHECK(run(cli::mock_main, {"s2s-mock"}) != 0);
  CHECK(run(cli::mock_main, {"s2s-mock", "--scenario", "/nonexistent.scenario"}) != 0);
  CHECK(run(cli::ctl_main, {"s2s-ctl", "touch", "tail"}) != 0);
  CHECK(run(cli::ctl_main, {"s2s-ctl", "mode", "smell"}) != 0);
  CHECK(run(cli::ctl_main, {"s2s-ctl", "--console", "127.0.0.1:" + std::to_string(free_port()), "tap"}) == 2);
  CHECK(run(cli::gateway_main, {"s2s-gateway", "--backend", "127.0.0.1:" + std::to_string(free_port())}) == 2);
}

TEST_CASE("gateway and ctl mains work together") {
  auto server = serve(load_scenario(testing::data_path("scenarios/chat.scenario")), {"127.0.0.1", 0});
  const std::string console = "127.0.0.1:" + std::to_string(free_port());
  int gateway_code = -1;
  std::thread gateway([&] {
    gateway_code = run(cli::gateway_main, {"s2s-gateway", "--backend", server->endpoint().to_string(), "--mode",
                                           "stt", "--console", console, "--run-seconds", "3", "--log-level", "warn"});
  });
  REQUIRE(testing::eventually([&] { return server->session_count() == 1; }, 3000ms));
  std::this_thread::sleep_for(200ms);
  CHECK(run(cli::ctl_main, {"s2s-ctl", "send-text", "hello", "--console", console, "--watch", "0.2"}) == 0);
  CHECK(testing::eventually(
      [&] {
        for (const auto& e : server->receipt_log())
          if (e == SessionEvent(TextInput{"hello", 0.92})) return true;
        return false;
      },
      3000ms));
  gateway.join();
  CHECK(gateway_code == 0);
}
