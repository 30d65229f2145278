#include "s2s/cli.hpp"

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "s2s/console_protocol.hpp"
#include "s2s/mock_server.hpp"
#include "s2s/scenario.hpp"

namespace s2s::cli {

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

std::vector<std::string> to_args(int argc, char** argv) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) out.emplace_back(argv[i]);
  return out;
}

// CLI11 expects the remaining arguments in reverse order.
void parse(CLI::App& app, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    throw UsageError(0, app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.get_exit_code() == 0 ? 1 : e.get_exit_code(), e.what() + std::string("\n") + app.help());
  }
}

int report_usage(const UsageError& e) {
  (e.exit_code() == 0 ? std::cout : std::cerr) << e.what() << '\n';
  return e.exit_code();
}

}  // namespace

GatewayOptions parse_gateway_args(const std::vector<std::string>& args) {
  GatewayOptions options;
  GatewayConfig& c = options.config;
  CLI::App app{"Speech-to-speech robot gateway"};
  app.name("s2s-gateway");

  std::string backend = c.backend.to_string();
  std::string mode = "audio";
  std::string world, rules, console_addr, transcript, latency_report;
  std::string weather_mode = "stub", search_mode = "stub", fixtures = "fixtures";
  bool no_gate_thinking = false;

  app.add_option("--backend", backend, "Backend address, host:port or tcp://host:port")->capture_default_str();
  app.add_option("--adapter", c.adapter, "Provider adapter")
      ->check(CLI::IsMember(known_adapters()))
      ->capture_default_str();
  app.add_option("--world", world, "Simulated world file")->check(CLI::ExistingFile);
  app.add_option("--rules", rules, "Perception rules file")->check(CLI::ExistingFile);
  app.add_option("--mode", mode, "Input mode")->check(CLI::IsMember({"audio", "stt"}))->capture_default_str();
  app.add_option("--console", console_addr, "Console feed bind address, host:port");
  app.add_option("--transcript", transcript, "Append transcript records to this file");
  app.add_option("--latency-report", latency_report, "Write the latency table here on exit");
  app.add_option("--weather", weather_mode, "Weather service mode")
      ->check(CLI::IsMember({"stub", "live"}))
      ->capture_default_str();
  app.add_option("--search", search_mode, "Search service mode")
      ->check(CLI::IsMember({"stub", "live"}))
      ->capture_default_str();
  app.add_option("--fixtures", fixtures, "Directory with stub service fixtures")->capture_default_str();
  app.add_option("--utc-offset", c.builtin.utc_offset_minutes, "Local time offset in minutes for get_datetime");
  app.add_option("--stt-confidence", c.stt_confidence, "Confidence attached to simulated transcriptions")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_flag("--no-gate-thinking", no_gate_thinking, "Keep the microphone open while the model is thinking");
  app.add_option("--system-prompt", c.system_prompt, "System prompt sent with the session config");
  app.add_option("--run-seconds", options.run_seconds, "Stop after this many seconds (0 = run until closed)");
  app.add_option("--log-level", options.log_level, "trace, debug, info, warn, error")->capture_default_str();

  parse(app, args);

  try {
    c.backend = net::parse_endpoint(backend);
    if (!console_addr.empty()) c.console_bind = net::parse_endpoint(console_addr);
  } catch (const net::NetError& e) {
    throw UsageError(1, e.what());
  }
  c.input_mode = mode == "stt" ? InputMode::Stt : InputMode::DirectAudio;
  if (!world.empty()) c.world_path = world;
  if (!rules.empty()) c.rules_path = rules;
  if (!transcript.empty()) c.transcript_path = transcript;
  if (!latency_report.empty()) c.latency_report_path = latency_report;
  c.gate_during_thinking = !no_gate_thinking;
  c.services = ExternalClientConfig::from_environment(*parse_service_mode(weather_mode),
                                                      *parse_service_mode(search_mode), fixtures);
  validate(c);
  return options;
}

int gateway_main(int argc, char** argv) {
  GatewayOptions options;
  try {
    options = parse_gateway_args(to_args(argc, argv));
  } catch (const UsageError& e) {
    return report_usage(e);
  } catch (const ConfigError& e) {
    std::cerr << "s2s-gateway: " << e.what() << '\n';
    return 2;
  }
  spdlog::set_level(spdlog::level::from_str(options.log_level));
  install_signal_handlers();

  std::unique_ptr<Gateway> gateway;
  try {
    gateway = std::make_unique<Gateway>(options.config);
    gateway->start();
  } catch (const std::exception& e) {
    spdlog::error("startup failed: {}", e.what());
    return 2;
  }
  spdlog::info("session {} open against {}", gateway->session_id(), options.config.backend.to_string());
  if (auto ep = gateway->console_endpoint()) spdlog::info("console feed on {}", ep->to_string());

  const auto started = std::chrono::steady_clock::now();
  while (gateway->running() && !g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (options.run_seconds > 0 &&
        std::chrono::steady_clock::now() - started > std::chrono::duration<double>(options.run_seconds))
      break;
  }
  gateway->stop();
  const auto samples = gateway->latency_samples();
  spdlog::info("stopped after {} transcript records, {} latency samples", gateway->transcript().size(),
               samples.size());
  if (!samples.empty()) std::cout << format_latency_table(samples);
  return 0;
}

int mock_main(int argc, char** argv) {
  CLI::App app{"Scripted speech-to-speech backend"};
  app.name("s2s-mock");
  std::string scenario_path, bind = "127.0.0.1:7700", latency;
  bool no_pace = false;
  std::string log_level = "info";
  app.add_option("--scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  app.add_option("--bind", bind, "Listen address, host:port (port 0 picks one)")->capture_default_str();
  app.add_option("--latency", latency, "Override latency: s2s:MS or cascaded:STT,LLM,TTS");
  app.add_flag("--no-pace", no_pace, "Send audio deltas without real-time pacing");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")->capture_default_str();
  try {
    parse(app, to_args(argc, argv));
  } catch (const UsageError& e) {
    return report_usage(e);
  }
  spdlog::set_level(spdlog::level::from_str(log_level));
  install_signal_handlers();

  std::unique_ptr<MockServer> server;
  try {
    Scenario scenario = load_scenario(scenario_path);
    if (!latency.empty()) scenario.latency = parse_latency(latency);
    if (no_pace) scenario.pace_audio = false;
    server = serve(std::move(scenario), net::parse_endpoint(bind));
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  std::cout << "listening on " << server->endpoint().to_string() << std::endl;
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server->stop();
  spdlog::info("served {} sessions", server->session_count());
  return 0;
}

int ctl_main(int argc, char** argv) {
  CLI::App app{"Scripted operator console"};
  app.name("s2s-ctl");
  app.require_subcommand(1);
  app.fallthrough();
  std::string console_addr = "127.0.0.1:7701";
  double watch_seconds = 1.0;
  app.add_option("--console", console_addr, "Gateway console address")->capture_default_str();
  app.add_option("--watch", watch_seconds, "Print feed records for this many seconds after sending")
      ->capture_default_str();

  std::optional<console::Command> command;
  std::string text, label, sensor, mode, id, field, value;
  std::int64_t duration_ms = 0;
  double x = 0, y = 0;

  auto* send_text = app.add_subcommand("send-text", "Say something");
  send_text->add_option("text", text)->required();
  send_text->callback([&] { command = console::SendText{text}; });

  auto* audio = app.add_subcommand("audio", "Simulate speech of a given length");
  audio->add_option("duration_ms", duration_ms)->required()->check(CLI::PositiveNumber);
  audio->add_option("--label", label, "What the speech says");
  audio->callback([&] { command = console::SimulateAudio{duration_ms, label}; });

  app.add_subcommand("tap", "Tap the status capsule")->callback([&] { command = console::Tap{}; });

  auto* touch = app.add_subcommand("touch", "Press a touch sensor");
  touch->add_option("sensor", sensor)->required();
  touch->callback([&] {
    auto s = parse_touch_sensor(sensor);
    if (!s) throw CLI::ValidationError("sensor", "unknown touch sensor '" + sensor + "'");
    command = console::Touch{*s};
  });

  auto* set_mode = app.add_subcommand("mode", "Switch the input mode");
  set_mode->add_option("mode", mode)->required()->check(CLI::IsMember({"audio", "stt"}));
  set_mode->callback([&] { command = console::SetInputMode{mode == "stt" ? InputMode::Stt : InputMode::DirectAudio}; });

  auto* move = app.add_subcommand("move-person", "Place a person in the world");
  move->add_option("id", id)->required();
  move->add_option("x", x)->required();
  move->add_option("y", y)->required();
  move->callback([&] { command = console::MovePerson{id, x, y}; });

  auto* hardware = app.add_subcommand("hardware", "Change a hardware status field");
  hardware->add_option("field", field)->required();
  hardware->add_option("value", value)->required();
  hardware->callback([&] { command = console::SetHardware{field, value}; });

  app.add_subcommand("watch", "Only print the feed");

  try {
    parse(app, to_args(argc, argv));
  } catch (const UsageError& e) {
    return report_usage(e);
  }

  try {
    auto client = ConsoleClient::connect(net::parse_endpoint(console_addr));
    if (command) client->send(*command);
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(static_cast<long>(watch_seconds * 1000));
    while (std::chrono::steady_clock::now() < deadline) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      auto frame = client->next_for(left);
      if (!frame) break;
      std::cout << *frame << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "s2s-ctl: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace s2s::cli
