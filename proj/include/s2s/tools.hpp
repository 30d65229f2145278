#pragma once

// Builtin tools: gaze, vision, navigation, information retrieval and one
// game, plus the stub/live clients behind the retrieval tools.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "s2s/tool_registry.hpp"

namespace s2s {

// ---- tic-tac-toe ----

enum class Mark : std::uint8_t { Empty, X, O };
enum class GameStatus { Ongoing, XWins, OWins, Draw };

std::string_view to_string(GameStatus status);

class TicTacToeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TicTacToeState {
  std::array<Mark, 9> board{};
  Mark next = Mark::X;

  /// Places `next` on `cell` and flips the turn. Throws TicTacToeError for an
  /// out-of-range or occupied cell or a finished game.
  void play(int cell);
  GameStatus status() const;
  /// Lowest-index empty cell, or nullopt on a full board.
  std::optional<int> first_empty() const;
  /// Three rows such as "X|O|.".
  std::string render() const;
  /// One-line form, e.g. "X O . / . X . / . . O".
  std::string compact() const;
  bool operator==(const TicTacToeState&) const = default;
};

/// Per-session state owned by the session's execution context.
struct SessionData {
  std::mutex mutex;
  TicTacToeState game;
};

// ---- external services ----

enum class ServiceMode { Stub, Live };

std::string_view to_string(ServiceMode mode);
std::optional<ServiceMode> parse_service_mode(std::string_view text);

struct ServiceConfig {
  ServiceMode mode = ServiceMode::Stub;
  std::string endpoint;
  std::optional<std::string> key;  // only read from the environment
};

struct ExternalClientConfig {
  ServiceConfig weather{ServiceMode::Stub, "https://api.openweathermap.org", std::nullopt};
  ServiceConfig search{ServiceMode::Stub, "https://api.tavily.com", std::nullopt};
  /// Holds weather.json and search.json for stub mode.
  std::filesystem::path fixtures_dir = "fixtures";
  std::chrono::milliseconds timeout{5000};

  /// Keys come from WEATHER_KEY and SEARCH_KEY when set.
  static ExternalClientConfig from_environment(ServiceMode weather_mode, ServiceMode search_mode,
                                               std::filesystem::path fixtures_dir);
};

class ExternalServices {
 public:
  explicit ExternalServices(ExternalClientConfig config);

  /// Failures of any kind come back as is_error outputs.
  ToolOutput weather(const std::string& location) const;
  ToolOutput search(const std::string& query) const;

  const ExternalClientConfig& config() const { return config_; }

 private:
  ExternalClientConfig config_;
};

// ---- registration ----

struct BuiltinOptions {
  int utc_offset_minutes = 0;
};

/// Formats `t` as ISO-8601 with seconds, "Z" for UTC or "+hh:mm" otherwise.
std::string format_datetime(std::chrono::system_clock::time_point t, int utc_offset_minutes = 0);

/// Registers look_at_position, analyze_vision, move_to, get_datetime,
/// get_weather, web_search and tictactoe_move.
void register_builtin_tools(ToolRegistry& registry, BuiltinOptions options = {});

}  // namespace s2s
