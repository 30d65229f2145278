#include <cstdlib>
#include <filesystem>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "s2s/robot.hpp"
#include "s2s/tools.hpp"
#include "test_support.hpp"

using namespace s2s;

namespace {

// Brute-force oracle on a plain string board of '.', 'X', 'O'.
char oracle_winner(const std::string& b) {
  static const int lines[8][3] = {{0, 1, 2}, {3, 4, 5}, {6, 7, 8}, {0, 3, 6},
                                  {1, 4, 7}, {2, 5, 8}, {0, 4, 8}, {2, 4, 6}};
  for (const auto& l : lines)
    if (b[l[0]] != '.' && b[l[0]] == b[l[1]] && b[l[1]] == b[l[2]]) return b[l[0]];
  return '.';
}

GameStatus oracle_status(const std::string& b) {
  char w = oracle_winner(b);
  if (w == 'X') return GameStatus::XWins;
  if (w == 'O') return GameStatus::OWins;
  return b.find('.') == std::string::npos ? GameStatus::Draw : GameStatus::Ongoing;
}

std::string as_string(const TicTacToeState& s) {
  std::string out;
  for (Mark m : s.board) out += m == Mark::X ? 'X' : m == Mark::O ? 'O' : '.';
  return out;
}

struct Fixture {
  ToolRegistry registry;
  ExecutionContext ctx;
  std::shared_ptr<SimRobotController> robot;
  std::vector<ContextInjection> injected;

  explicit Fixture(SimWorld world = {}, ExternalClientConfig services = {}) {
    register_builtin_tools(registry);
    robot = std::make_shared<SimRobotController>(std::move(world));
    services.fixtures_dir = testing::data_path("fixtures");
    ctx.robot = robot;
    ctx.network = std::make_shared<ExternalServices>(services);
    ctx.session = std::make_shared<SessionData>();
    ctx.inject = [this](const ContextInjection& c) { injected.push_back(c); };
  }

  ToolResult call(const std::string& name, Arguments args = {}) {
    return registry.execute(ToolCall{"c", name, std::move(args), false}, ctx);
  }
};

}  // namespace

TEST_CASE("every reachable board agrees with the brute-force oracle") {
  std::set<std::string> seen;
  std::vector<TicTacToeState> stack{TicTacToeState{}};
  while (!stack.empty()) {
    TicTacToeState s = stack.back();
    stack.pop_back();
    const std::string b = as_string(s);
    if (!seen.insert(b).second) continue;
    REQUIRE(s.status() == oracle_status(b));
    const long xs = std::count(b.begin(), b.end(), 'X'), os = std::count(b.begin(), b.end(), 'O');
    CHECK(s.next == (xs == os ? Mark::X : Mark::O));
    auto empty = b.find('.');
    CHECK(s.first_empty() == (empty == std::string::npos ? std::nullopt : std::optional<int>(int(empty))));
    for (int cell = -1; cell <= 9; ++cell) {
      TicTacToeState t = s;
      const bool legal = cell >= 0 && cell < 9 && b[cell] == '.' && oracle_status(b) == GameStatus::Ongoing;
      if (!legal) {
        CHECK_THROWS_AS(t.play(cell), TicTacToeError);
        CHECK(t == s);
        continue;
      }
      t.play(cell);
      std::string expected = b;
      expected[cell] = xs == os ? 'X' : 'O';
      CHECK(as_string(t) == expected);
      stack.push_back(t);
    }
  }
  // Known count of distinct reachable positions including the empty board.
  CHECK(seen.size() == 5478);
}

TEST_CASE("tic-tac-toe rendering") {
  TicTacToeState s;
  s.play(0);
  s.play(4);
  s.play(8);
  CHECK(s.render() == "X|.|.\n.|O|.\n.|.|X");
  CHECK(s.compact() == "X . . / . O . / . . X");
  CHECK(to_string(GameStatus::XWins) == "X wins");
  CHECK(to_string(GameStatus::Draw) == "draw");
}

TEST_CASE("tictactoe_move tool plays both sides and injects a summary") {
  Fixture f;
  auto r = f.call("tictactoe_move", {{"cell", std::int64_t{4}}});
  CHECK_FALSE(r.is_error);
  CHECK(r.payload == "O|.|.\n.|X|.\n.|.|.\nyour move: 4\nmy move: 0\nstatus: ongoing");
  REQUIRE(f.injected.size() == 1);
  CHECK(f.injected[0].message == "[Tic-tac-toe: you played 4, I played 0; board O . . / . X . / . . .; status ongoing]");
  CHECK_FALSE(f.injected[0].request_response);

  auto occupied = f.call("tictactoe_move", {{"cell", std::int64_t{0}}});
  CHECK(occupied.is_error);
  CHECK(f.call("tictactoe_move", {{"cell", std::int64_t{9}}}).is_error);
  CHECK(f.call("tictactoe_move", {{"cell", "two"}}).is_error);

  // X wins on the diagonal 2-4-6 since O keeps taking the first empty cell.
  f.call("tictactoe_move", {{"cell", std::int64_t{2}}});
  auto win = f.call("tictactoe_move", {{"cell", std::int64_t{6}}});
  CHECK(win.payload.find("my move: none\nstatus: X wins") != std::string::npos);
  auto fresh = f.call("tictactoe_move", {{"cell", std::int64_t{8}}});
  CHECK(fresh.payload.rfind("O|.|.\n.|.|.\n.|.|X\n", 0) == 0);
  CHECK(fresh.payload.find("status: ongoing") != std::string::npos);
}

TEST_CASE("gaze, vision and movement tools") {
  Fixture f(load_world(testing::data_path("worlds/ceiling.json")));
  auto gaze = f.call("look_at_position", {{"x", 0.0}, {"y", 0.0}, {"z", std::int64_t{2}}});
  CHECK(gaze.payload == "gaze set");
  CHECK(f.robot->snapshot().gaze.target == Vec3{0, 0, 2});
  auto vision = f.call("analyze_vision", {{"prompt", "ceiling"}});
  CHECK(vision.payload.find("ceiling lamp with a round white shade") != std::string::npos);
  CHECK(f.call("look_at_position", {{"x", 1.0}, {"y", 0.0}}).is_error);

  Fixture g(load_world(testing::data_path("worlds/obstacle.json")));
  auto blocked = g.call("move_to", {{"location", "window"}});
  CHECK(blocked.is_error);
  CHECK(blocked.payload == "blocked by obstacle box at (1.50, 0.00)");
  auto sofa = g.call("move_to", {{"location", "sofa"}});
  CHECK_FALSE(sofa.is_error);
  CHECK(sofa.payload == "arrived at (0.00, 2.00), heading 90 degrees");
  auto unknown = g.call("move_to", {{"location", "kitchen"}});
  CHECK(unknown.is_error);
  CHECK(unknown.payload.find("kitchen") != std::string::npos);
  CHECK(g.call("move_to", {{"x", 1.0}}).is_error);
  CHECK_FALSE(g.call("move_to", {{"x", -1.0}, {"y", 2.0}}).is_error);
}

TEST_CASE("tools requiring a robot fail cleanly without one") {
  Fixture f;
  f.ctx.robot.reset();
  auto r = f.call("analyze_vision");
  CHECK(r.is_error);
  CHECK(r.payload.find("robot capability") != std::string::npos);
}

TEST_CASE("datetime") {
  using namespace std::chrono;
  const auto t = sys_days{year{2024} / 3 / 9} + hours{23} + minutes{30} + seconds{5};
  CHECK(format_datetime(t) == "2024-03-09T23:30:05Z");
  CHECK(format_datetime(t, 60) == "2024-03-10T00:30:05+01:00");
  CHECK(format_datetime(t, -330) == "2024-03-09T18:00:05-05:30");
  Fixture f;
  f.ctx.clock = [t] { return t; };
  CHECK(f.call("get_datetime").payload == "2024-03-09T23:30:05Z");
}

TEST_CASE("stub services read fixtures") {
  Fixture f;
  CHECK(f.call("get_weather", {{"location", "  zurich "}}).payload == "Zurich: 14 °C, light rain, wind 3.1 m/s");
  auto missing = f.call("get_weather", {{"location", "Atlantis"}});
  CHECK(missing.is_error);
  CHECK(missing.payload == "no weather data for 'Atlantis'");
  CHECK(f.call("web_search", {{"query", "Pepper robot"}}).payload.rfind("Pepper is", 0) == 0);
  CHECK(f.call("web_search", {{"query", " "}}).is_error);

  ExternalClientConfig nowhere;
  nowhere.fixtures_dir = "/nonexistent";
  CHECK(ExternalServices(nowhere).weather("Zurich").is_error);
}

TEST_CASE("live services without keys report the missing key") {
  const char* key = std::getenv("WEATHER_KEY");
  REQUIRE((key == nullptr || *key == '\0'));
  auto config = ExternalClientConfig::from_environment(ServiceMode::Live, ServiceMode::Live, "fixtures");
  CHECK_FALSE(config.weather.key);
  ExternalServices services(config);
  auto w = services.weather("Zurich");
  CHECK(w.is_error);
  CHECK(w.payload == "weather service unavailable: missing key (set WEATHER_KEY)");
  auto s = services.search("anything");
  CHECK(s.is_error);
  CHECK(s.payload == "search service unavailable: missing key (set SEARCH_KEY)");
}

TEST_CASE("live services talk HTTP to the configured endpoint") {
  httplib::Server server;
  std::string seen_key, seen_query;
  server.Get("/data/2.5/weather", [&](const httplib::Request& req, httplib::Response& res) {
    seen_key = req.get_param_value("appid");
    res.set_content(R"({"name":"Bern","main":{"temp":12.5},"weather":[{"description":"fog"}],"wind":{"speed":1.5}})",
                    "application/json");
  });
  server.Post("/search", [&](const httplib::Request& req, httplib::Response& res) {
    seen_query = nlohmann::json::parse(req.body).at("query");
    res.set_content(R"({"answer":"42","results":[{"title":"T","content":"C"}]})", "application/json");
  });
  server.Get("/broken/data/2.5/weather", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ExternalClientConfig config;
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  config.weather = {ServiceMode::Live, base, "wkey"};
  config.search = {ServiceMode::Live, base, "skey"};
  ExternalServices services(config);
  auto w = services.weather("Bern");
  CHECK_FALSE(w.is_error);
  CHECK(w.payload == "Bern: 12.5 °C, fog, wind 1.5 m/s");
  CHECK(seen_key == "wkey");
  auto s = services.search("meaning");
  CHECK(s.payload == "42\n- T: C");
  CHECK(seen_query == "meaning");

  config.weather.endpoint = base + "/broken";
  server.stop();
  thread.join();
  auto down = ExternalServices(config).weather("Bern");
  CHECK(down.is_error);
}
