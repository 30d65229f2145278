#include <cmath>
#include <cstdio>
#include <ctime>

#include "s2s/robot.hpp"
#include "s2s/tools.hpp"

namespace s2s {

namespace {

ParamSpec number_param(std::string name, std::string description, bool required = true) {
  ParamSpec p;
  p.name = std::move(name);
  p.type = ParamType::Number;
  p.required = required;
  p.description = std::move(description);
  return p;
}

ParamSpec string_param(std::string name, std::string description, bool required = true) {
  ParamSpec p;
  p.name = std::move(name);
  p.type = ParamType::String;
  p.required = required;
  p.description = std::move(description);
  return p;
}

std::string fixed(double value, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

ToolOutput look_at_position(const ValidatedCall& call, const ExecutionContext& ctx) {
  Vec3 target{call.number("x"), call.number("y"), call.number("z")};
  ctx.robot->execute(cmd::LookAt{Gaze{target}});
  return ToolOutput::ok("gaze set");
}

ToolOutput analyze_vision(const ValidatedCall&, const ExecutionContext& ctx) {
  auto reply = ctx.robot->execute(cmd::CaptureImage{});
  if (!reply.image) return ToolOutput::error("the camera returned no image");
  return ToolOutput::ok(reply.image->description);
}

ToolOutput move_to(const ValidatedCall& call, const ExecutionContext& ctx) {
  cmd::MoveTo move;
  if (call.has("location")) {
    move.target = call.text("location");
  } else if (call.has("x") && call.has("y")) {
    move.target = Vec2{call.number("x"), call.number("y")};
  } else {
    return ToolOutput::error("move_to needs either a location name or both x and y");
  }
  RobotController::Reply reply;
  try {
    reply = ctx.robot->execute(move);
  } catch (const RobotError& e) {
    return ToolOutput::error(e.what());
  }
  for (const auto& event : reply.events) {
    if (const auto* blocked = std::get_if<ev::MovementBlocked>(&event))
      return ToolOutput::error("blocked by obstacle " + blocked->obstacle + " at (" + fixed(blocked->at.x) + ", " +
                               fixed(blocked->at.y) + ")");
    if (const auto* done = std::get_if<ev::MovementComplete>(&event))
      return ToolOutput::ok("arrived at (" + fixed(done->pose.x) + ", " + fixed(done->pose.y) + "), heading " +
                            fixed(done->pose.theta * 180.0 / M_PI, 0) + " degrees");
  }
  return ToolOutput::error("movement produced no outcome");
}

ToolOutput tictactoe_move(const ValidatedCall& call, const ExecutionContext& ctx) {
  if (!ctx.session) return ToolOutput::error("no game state is attached to this session");
  const int cell = static_cast<int>(call.integer("cell"));
  std::string payload;
  std::string summary;
  {
    std::lock_guard lock(ctx.session->mutex);
    TicTacToeState& game = ctx.session->game;
    if (game.status() != GameStatus::Ongoing) game = TicTacToeState{};
    try {
      game.play(cell);
    } catch (const TicTacToeError& e) {
      return ToolOutput::error(e.what());
    }
    std::string reply = "none";
    if (game.status() == GameStatus::Ongoing) {
      const int counter = *game.first_empty();
      game.play(counter);
      reply = std::to_string(counter);
    }
    const std::string status(to_string(game.status()));
    payload = game.render() + "\nyour move: " + std::to_string(cell) + "\nmy move: " + reply + "\nstatus: " + status;
    summary = "[Tic-tac-toe: you played " + std::to_string(cell) + ", I played " + reply + "; board " +
              game.compact() + "; status " + status + "]";
  }
  if (ctx.inject) ctx.inject(ContextInjection{summary, false});
  return ToolOutput::ok(payload);
}

}  // namespace

std::string format_datetime(std::chrono::system_clock::time_point t, int utc_offset_minutes) {
  const std::time_t shifted = std::chrono::system_clock::to_time_t(t) + utc_offset_minutes * 60;
  std::tm tm{};
  gmtime_r(&shifted, &tm);
  char buf[40];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
  std::string out = buf;
  if (utc_offset_minutes == 0) return out + "Z";
  const int magnitude = std::abs(utc_offset_minutes);
  std::snprintf(buf, sizeof(buf), "%c%02d:%02d", utc_offset_minutes < 0 ? '-' : '+', magnitude / 60, magnitude % 60);
  return out + buf;
}

void register_builtin_tools(ToolRegistry& registry, BuiltinOptions options) {
  registry.register_tool({{"look_at_position",
                           "Turn the head to look at a 3-D point in the robot frame (meters; x forward, y left, "
                           "z up from the floor).",
                           {number_param("x", "forward distance"), number_param("y", "leftward distance"),
                            number_param("z", "height above the floor")}},
                          look_at_position,
                          Capability::Robot});

  registry.register_tool({{"analyze_vision",
                           "Capture an image from the head camera and describe what is visible.",
                           {string_param("prompt", "what to look for", false)}},
                          analyze_vision,
                          Capability::Robot});

  registry.register_tool({{"move_to",
                           "Drive to a named location or to floor coordinates in the world frame.",
                           {string_param("location", "named location", false),
                            number_param("x", "world x in meters", false),
                            number_param("y", "world y in meters", false)}},
                          move_to,
                          Capability::Robot});

  const int offset = options.utc_offset_minutes;
  registry.register_tool(
      {{"get_datetime", "Current date and time.", {}},
       [offset](const ValidatedCall&, const ExecutionContext& ctx) {
         return ToolOutput::ok(format_datetime(ctx.now(), offset));
       },
       Capability::None});

  registry.register_tool({{"get_weather", "Current weather for a place.", {string_param("location", "city name")}},
                          [](const ValidatedCall& call, const ExecutionContext& ctx) {
                            return ctx.network->weather(call.text("location"));
                          },
                          Capability::Network});

  registry.register_tool({{"web_search", "Search the internet.", {string_param("query", "search terms")}},
                          [](const ValidatedCall& call, const ExecutionContext& ctx) {
                            return ctx.network->search(call.text("query"));
                          },
                          Capability::Network});

  ParamSpec cell;
  cell.name = "cell";
  cell.type = ParamType::Integer;
  cell.required = true;
  cell.minimum = 0;
  cell.maximum = 8;
  cell.description = "board cell, 0 top-left to 8 bottom-right, row by row";
  registry.register_tool({{"tictactoe_move",
                           "Play tic-tac-toe as X; the robot answers as O. A finished game restarts on the next move.",
                           {cell}},
                          tictactoe_move,
                          Capability::None});
}

}  // namespace s2s
