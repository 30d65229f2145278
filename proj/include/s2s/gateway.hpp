#pragma once

// Composition root: one session against a backend, with the turn manager,
// tool registry, simulated robot and perception rules wired into a single
// serialized event loop, plus the console feed, transcript and latency log.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "s2s/blocking_queue.hpp"
#include "s2s/console_protocol.hpp"
#include "s2s/net.hpp"
#include "s2s/perception.hpp"
#include "s2s/protocol.hpp"
#include "s2s/robot.hpp"
#include "s2s/session.hpp"
#include "s2s/tool_registry.hpp"
#include "s2s/tools.hpp"
#include "s2s/turn_manager.hpp"

namespace s2s {

struct GatewayConfig {
  net::Endpoint backend{"127.0.0.1", 7700};
  std::string adapter = "canonical";
  InputMode input_mode = InputMode::DirectAudio;
  std::optional<std::filesystem::path> world_path;
  std::optional<std::filesystem::path> rules_path;
  /// Used when no world path is given.
  SimWorld world;
  /// Used in addition to the rules file.
  std::vector<Rule> rules;
  bool gate_during_thinking = true;
  std::optional<net::Endpoint> console_bind;
  std::optional<std::filesystem::path> transcript_path;
  std::optional<std::filesystem::path> latency_report_path;
  ExternalClientConfig services;
  BuiltinOptions builtin;
  std::string system_prompt =
      "You are a friendly social robot. Use your tools to look, move and find information.";
  double stt_confidence = 0.92;
  std::int64_t audio_chunk_ms = 500;
  std::chrono::milliseconds perception_period{250};
  std::chrono::milliseconds world_snapshot_period{1000};
  std::chrono::milliseconds connect_timeout{3000};
  std::function<std::chrono::system_clock::time_point()> clock;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws ConfigError when a given path does not exist or a value is out of range.
void validate(const GatewayConfig& config);

/// One user utterance before it is shaped for the session.
struct Utterance {
  std::string text;  // spoken words, if known
  std::int64_t duration_ms = 0;
};

/// Rough speaking time for `text`: 400 ms per word, at least 500 ms.
std::int64_t estimate_speech_ms(std::string_view text);

/// DirectAudio: consecutive AudioInputChunks of at most `chunk_ms`, summing to
/// the utterance duration, the first carrying the text as payload_ref and the
/// last marked final. Stt: one TextInput with the configured confidence.
std::vector<SessionEvent> input_mode_transform(InputMode mode, const Utterance& utterance, std::int64_t& next_seq,
                                               std::int64_t chunk_ms = 500, double confidence = 0.92);

/// Plain-text table with one row per sample.
std::string format_latency_table(const std::vector<TurnLatencySample>& samples);

class Gateway {
 public:
  /// Loads world and rules and registers the builtin tools. Throws
  /// ConfigError, RobotError or RuleError.
  explicit Gateway(GatewayConfig config);
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;
  ~Gateway();

  /// Opens the session and starts the loop. Throws SessionFailure or
  /// net::NetError (console bind).
  void start();
  /// Closes the session and joins every thread. Idempotent.
  void stop();
  /// Blocks until the loop has exited.
  void wait();
  bool running() const;

  /// Same entry point as a console command.
  void submit(console::Command command);

  std::optional<net::Endpoint> console_endpoint() const;
  std::string session_id() const;

  // Thread-safe snapshots.
  std::vector<TranscriptRecord> transcript() const;
  std::vector<TurnLatencySample> latency_samples() const;
  std::vector<FunctionCard> function_cards() const;
  std::vector<turn::TurnAction> action_log() const;
  turn::TurnState state() const;
  InputMode input_mode() const;
  SimWorld world() const;
  const ToolRegistry& registry() const { return registry_; }

  /// Waits until `pred` holds over the transcript; false on timeout.
  bool wait_for_transcript(const std::function<bool(const std::vector<TranscriptRecord>&)>& pred,
                           std::chrono::milliseconds timeout) const;

 private:
  struct Inbound {
    SessionEvent event;
  };
  struct SessionEnded {};
  struct CommandItem {
    console::Command command;
  };
  struct ConsoleProblem {
    std::string reason;
  };
  struct ConsoleJoined {
    std::shared_ptr<net::TcpStream> stream;
  };
  struct RobotItem {
    RobotEvent event;
  };
  struct PerceptionTick {};
  struct WorldTick {};
  struct CardItem {
    FunctionCard card;
  };
  struct InjectItem {
    ContextInjection injection;
  };
  struct ToolFinished {
    ToolCall call;
    ToolResult result;
  };
  struct StopItem {};
  using LoopItem = std::variant<Inbound, SessionEnded, CommandItem, ConsoleProblem, ConsoleJoined, RobotItem,
                                PerceptionTick, WorldTick, CardItem, InjectItem, ToolFinished, StopItem>;

  void loop();
  void handle(Inbound& item);
  void handle(SessionEnded&);
  void handle(CommandItem& item);
  void handle(ConsoleProblem& item);
  void handle(ConsoleJoined& item);
  void handle(RobotItem& item);
  void handle(PerceptionTick&);
  void handle(WorldTick&);
  void handle(CardItem& item);
  void handle(InjectItem& item);
  void handle(ToolFinished& item);
  void handle(StopItem&) {}

  void apply(const std::vector<turn::TurnAction>& actions);
  void offer_user_input(const Utterance& utterance);
  void send_event(const SessionEvent& event);
  void start_tool(ToolCall call);
  void on_perception(const PerceptionEvent& event);
  void record(TranscriptRecord record);
  void feed(const std::string& frame);
  std::int64_t now_ms() const;

  void accept_console();
  void ticker();

  GatewayConfig config_;
  ToolRegistry registry_;
  std::shared_ptr<SimRobotController> robot_;
  std::shared_ptr<ExternalServices> services_;
  std::shared_ptr<SessionData> session_data_;
  std::shared_ptr<SessionHandle> session_;
  ExecutionContext context_;
  std::chrono::steady_clock::time_point t0_;

  BlockingQueue<LoopItem> queue_;
  std::thread loop_thread_;
  std::thread pump_thread_;
  std::thread ticker_thread_;
  std::thread console_thread_;
  std::mutex workers_mutex_;
  std::list<std::thread> workers_;

  // Loop-thread state.
  turn::TurnManager turns_;
  RuleEngine rule_engine_;
  PerceptionTracker tracker_;
  InputMode mode_;
  std::int64_t next_seq_ = 0;
  std::uint64_t self_calls_ = 0;
  std::optional<std::string> current_turn_;
  std::set<std::string> cancelled_turns_;
  bool mic_open_ = false;
  std::optional<std::int64_t> pending_trigger_ms_;
  struct OpenTurn {
    std::string turn_id;
    std::optional<std::int64_t> trigger_ms;
    std::optional<std::int64_t> first_text_ms;
    bool sampled = false;
  };
  std::optional<OpenTurn> open_turn_;
  int turn_index_ = 0;

  // Shared with observers; guarded by state_mutex_.
  mutable std::mutex state_mutex_;
  mutable std::condition_variable state_cv_;
  std::vector<TranscriptRecord> transcript_;
  std::vector<TurnLatencySample> samples_;
  std::vector<FunctionCard> cards_;
  std::vector<turn::TurnAction> actions_;
  turn::TurnState state_snapshot_ = turn::TurnState::Idle;
  InputMode mode_snapshot_;
  bool loop_done_ = false;
  bool started_ = false;
  bool stopped_ = false;

  // Console connection.
  std::optional<net::TcpListener> console_listener_;
  std::optional<net::Endpoint> console_endpoint_;
  std::shared_ptr<net::TcpStream> console_stream_;  // loop thread only
  std::mutex console_mutex_;
  std::list<std::shared_ptr<net::TcpStream>> console_streams_;
  std::list<std::thread> console_readers_;
  std::atomic<bool> stopping_{false};
  std::mutex stop_mutex_;
  std::condition_variable stop_cv_;
  std::unique_ptr<std::ofstream> transcript_out_;
};

}  // namespace s2s
