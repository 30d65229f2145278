#include "s2s/robot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace s2s {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Liang-Barsky: parameter in [0,1] where p0 + t*d first enters the closed
// rectangle, or nullopt if the segment misses it.
std::optional<double> entry_param(Vec2 p0, Vec2 d, const Obstacle& r) {
  double t0 = 0.0;
  double t1 = 1.0;
  auto clip = [&](double p, double q) {
    if (p == 0.0) return q >= 0.0;
    const double t = q / p;
    if (p < 0.0) {
      if (t > t1) return false;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return false;
      t1 = std::min(t1, t);
    }
    return true;
  };
  if (clip(-d.x, p0.x - r.min.x) && clip(d.x, r.max.x - p0.x) && clip(-d.y, p0.y - r.min.y) &&
      clip(d.y, r.max.y - p0.y))
    return t0;
  return std::nullopt;
}

CommandOutcome move_to(const SimWorld& world, const cmd::MoveTo& move) {
  Vec2 target;
  std::optional<double> final_theta;
  if (const auto* name = std::get_if<std::string>(&move.target)) {
    auto it = world.named_locations.find(*name);
    if (it == world.named_locations.end())
      throw RobotError(RobotErrc::UnknownLocation, "unknown location '" + *name + "'");
    target = {it->second.x, it->second.y};
    final_theta = it->second.theta;
  } else if (const auto* point = std::get_if<Vec2>(&move.target)) {
    target = *point;
  } else {
    const auto& pose = std::get<Pose>(move.target);
    target = {pose.x, pose.y};
    final_theta = pose.theta;
  }
  if (!std::isfinite(target.x) || !std::isfinite(target.y))
    throw RobotError(RobotErrc::InvalidPose, "target is not finite");

  CommandOutcome out{world, {}};
  const Vec2 p0{world.robot.x, world.robot.y};
  const Vec2 d{target.x - p0.x, target.y - p0.y};
  const double length = std::hypot(d.x, d.y);
  const double heading = length > 0.0 ? std::atan2(d.y, d.x) : world.robot.theta;

  if (length == 0.0) {
    out.world.robot.theta = normalize_angle(final_theta.value_or(world.robot.theta));
    out.events.push_back(ev::MovementComplete{out.world.robot});
    return out;
  }

  std::optional<double> first_hit;
  const Obstacle* blocker = nullptr;
  for (const auto& obstacle : world.obstacles) {
    if (auto t = entry_param(p0, d, obstacle); t && (!first_hit || *t < *first_hit)) {
      first_hit = t;
      blocker = &obstacle;
    }
  }

  if (!first_hit) {
    out.world.robot = {target.x, target.y, normalize_angle(final_theta.value_or(heading))};
    out.events.push_back(ev::MovementComplete{out.world.robot});
    return out;
  }

  const double hit_distance = *first_hit * length;
  const double stop_distance = std::max(0.0, hit_distance - world.params.stop_margin_m);
  const Vec2 dir{d.x / length, d.y / length};
  out.world.robot = {p0.x + dir.x * stop_distance, p0.y + dir.y * stop_distance, normalize_angle(heading)};
  out.world.gaze.target = {hit_distance - stop_distance, 0.0, blocker->height / 2.0};
  const Vec2 at{p0.x + dir.x * hit_distance, p0.y + dir.y * hit_distance};
  out.events.push_back(ev::MovementBlocked{at, blocker->id});
  return out;
}

struct Sighting {
  double distance;
  std::string label;
};

Vec2 vec2_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw RobotError(RobotErrc::InvalidWorld, std::string(what) + " must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

double number_or(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw RobotError(RobotErrc::InvalidWorld, std::string("'") + key + "' must be a number");
  return it->get<double>();
}

Pose pose_from(const json& j) {
  if (!j.is_object()) throw RobotError(RobotErrc::InvalidWorld, "pose must be an object");
  return {number_or(j, "x", 0.0), number_or(j, "y", 0.0), normalize_angle(number_or(j, "theta", 0.0))};
}

json pose_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

}  // namespace

double normalize_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(radians, two_pi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

bool SimWorld::inside_obstacle(Vec2 p) const {
  return std::any_of(obstacles.begin(), obstacles.end(), [&](const Obstacle& o) { return o.contains(p); });
}

std::string_view to_string(TouchSensor sensor) {
  switch (sensor) {
    case TouchSensor::Head: return "head";
    case TouchSensor::LeftHand: return "left_hand";
    case TouchSensor::RightHand: return "right_hand";
    case TouchSensor::LeftBumper: return "left_bumper";
    case TouchSensor::RightBumper: return "right_bumper";
  }
  return "?";
}

std::string human_readable(TouchSensor sensor) {
  std::string s(to_string(sensor));
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

std::optional<TouchSensor> parse_touch_sensor(std::string_view text) {
  for (auto s : {TouchSensor::Head, TouchSensor::LeftHand, TouchSensor::RightHand, TouchSensor::LeftBumper,
                 TouchSensor::RightBumper})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

Vec3 to_robot_frame(const Pose& robot, Vec3 p) {
  const double dx = p.x - robot.x;
  const double dy = p.y - robot.y;
  const double c = std::cos(robot.theta);
  const double s = std::sin(robot.theta);
  return {c * dx + s * dy, -s * dx + c * dy, p.z};
}

CommandOutcome apply_command(const SimWorld& world, const RobotCommand& command) {
  if (const auto* move = std::get_if<cmd::MoveTo>(&command)) return move_to(world, *move);
  if (const auto* look = std::get_if<cmd::LookAt>(&command)) {
    const auto& t = look->gaze.target;
    if (!std::isfinite(t.x) || !std::isfinite(t.y) || !std::isfinite(t.z))
      throw RobotError(RobotErrc::InvalidPose, "gaze target is not finite");
    CommandOutcome out{world, {}};
    out.world.gaze = look->gaze;
    return out;
  }
  if (const auto* set = std::get_if<cmd::SetPose>(&command)) {
    if (!std::isfinite(set->pose.x) || !std::isfinite(set->pose.y) || !std::isfinite(set->pose.theta))
      throw RobotError(RobotErrc::InvalidPose, "pose is not finite");
    if (world.inside_obstacle({set->pose.x, set->pose.y}))
      throw RobotError(RobotErrc::InvalidPose, "pose lies inside an obstacle");
    CommandOutcome out{world, {}};
    out.world.robot = {set->pose.x, set->pose.y, normalize_angle(set->pose.theta)};
    return out;
  }
  return {world, {}};  // CaptureImage leaves the world untouched
}

SimImage capture_image(const SimWorld& world, std::int64_t timestamp_ms) {
  const Vec3 eye{0.0, 0.0, world.params.head_height_m};
  Vec3 dir{world.gaze.target.x - eye.x, world.gaze.target.y - eye.y, world.gaze.target.z - eye.z};
  double dir_len = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
  if (dir_len < 1e-9) {
    dir = {1.0, 0.0, 0.0};
    dir_len = 1.0;
  }
  const double half_cone = world.params.vision_cone_deg / 2.0 * std::numbers::pi / 180.0;
  const double cos_half = std::cos(half_cone);

  std::vector<Sighting> seen;
  auto consider = [&](Vec3 world_point, std::string label) {
    const Vec3 p = to_robot_frame(world.robot, world_point);
    const Vec3 v{p.x - eye.x, p.y - eye.y, p.z - eye.z};
    const double dist = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (dist < 1e-9) return;
    const double cos_angle = (v.x * dir.x + v.y * dir.y + v.z * dir.z) / (dist * dir_len);
    if (cos_angle + 1e-12 >= cos_half) seen.push_back({dist, std::move(label)});
  };

  for (const auto& person : world.persons) {
    std::string who = person.name ? "person " + *person.name : std::string("unknown person");
    consider({person.position.x, person.position.y, world.params.person_height_m}, std::move(who));
  }
  for (const auto& o : world.obstacles)
    consider({(o.min.x + o.max.x) / 2.0, (o.min.y + o.max.y) / 2.0, o.height / 2.0}, "obstacle " + o.id);
  for (const auto& l : world.landmarks) consider(l.position, l.name);

  std::stable_sort(seen.begin(), seen.end(), [](const Sighting& a, const Sighting& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.label < b.label;
  });

  SimImage image{std::string(kNothingNotable), world.gaze, timestamp_ms};
  if (!seen.empty()) {
    image.description = "I can see: ";
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (i) image.description += "; ";
      image.description += seen[i].label + " at " + fixed(seen[i].distance, 1) + " m";
    }
  }
  return image;
}

ContextInjection inject_touch(TouchSensor sensor) {
  return {"[User touched my " + human_readable(sensor) + "]", true};
}

ToolCall blocked_reflex(const ev::MovementBlocked&, std::string call_id) {
  return ToolCall{std::move(call_id), "analyze_vision", {{"prompt", std::string("What is blocking my path?")}}, true};
}

ContextInjection describe_blockage(const ev::MovementBlocked& event) {
  return {"[My movement was blocked by obstacle " + event.obstacle + " at (" + fixed(event.at.x, 2) + ", " +
              fixed(event.at.y, 2) + "); I automatically looked at it]",
          false};
}

void validate_world(const SimWorld& world) {
  auto fail = [](const std::string& what) { throw RobotError(RobotErrc::InvalidWorld, what); };
  if (world.inside_obstacle({world.robot.x, world.robot.y})) fail("robot starts inside an obstacle");
  if (world.hardware.battery_pct < 0 || world.hardware.battery_pct > 100) fail("battery_pct must be in 0..100");
  std::set<std::string> ids;
  for (const auto& o : world.obstacles) {
    if (o.min.x > o.max.x || o.min.y > o.max.y) fail("obstacle '" + o.id + "' has min > max");
    if (!ids.insert(o.id).second) fail("duplicate obstacle id '" + o.id + "'");
  }
  ids.clear();
  for (const auto& p : world.persons)
    if (!ids.insert(p.id).second) fail("duplicate person id '" + p.id + "'");
  const auto& g = world.gaze.target;
  if (!std::isfinite(g.x) || !std::isfinite(g.y) || !std::isfinite(g.z)) fail("gaze must be finite");
  if (world.params.stop_margin_m <= 0.0) fail("stop margin must be > 0");
  if (world.params.vision_cone_deg <= 0.0 || world.params.vision_cone_deg >= 360.0) fail("vision cone out of range");
}

SimWorld parse_world(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw RobotError(RobotErrc::InvalidWorld, "world file is not an object");
  SimWorld w;
  try {
    if (j.contains("robot")) w.robot = pose_from(j["robot"]);
    if (j.contains("gaze")) {
      const auto& g = j["gaze"];
      w.gaze.target = {number_or(g, "x", 1.0), number_or(g, "y", 0.0), number_or(g, "z", 1.2)};
    }
    for (const auto& o : j.value("obstacles", json::array())) {
      Obstacle ob;
      ob.id = o.at("id").get<std::string>();
      ob.min = vec2_from(o.at("min"), "obstacle min");
      ob.max = vec2_from(o.at("max"), "obstacle max");
      ob.height = number_or(o, "height", 1.0);
      w.obstacles.push_back(std::move(ob));
    }
    for (const auto& p : j.value("persons", json::array())) {
      Person person;
      person.id = p.at("id").get<std::string>();
      if (p.contains("name") && p["name"].is_string()) person.name = p["name"].get<std::string>();
      person.position = {number_or(p, "x", 0.0), number_or(p, "y", 0.0)};
      w.persons.push_back(std::move(person));
    }
    for (const auto& l : j.value("landmarks", json::array()))
      w.landmarks.push_back({l.at("name").get<std::string>(),
                             {number_or(l, "x", 0.0), number_or(l, "y", 0.0), number_or(l, "z", 0.0)}});
    const json locations = j.value("locations", json::object());
    for (const auto& [name, pose] : locations.items()) w.named_locations[name] = pose_from(pose);
    if (j.contains("hardware")) {
      const auto& h = j["hardware"];
      w.hardware.charging_flap_open = h.value("charging_flap_open", false);
      w.hardware.battery_pct = h.value("battery_pct", 100);
    }
    if (j.contains("params")) {
      const auto& p = j["params"];
      w.params.stop_margin_m = number_or(p, "stop_margin_m", w.params.stop_margin_m);
      w.params.vision_cone_deg = number_or(p, "vision_cone_deg", w.params.vision_cone_deg);
      w.params.head_height_m = number_or(p, "head_height_m", w.params.head_height_m);
      w.params.person_height_m = number_or(p, "person_height_m", w.params.person_height_m);
      w.params.perception_range_m = number_or(p, "perception_range_m", w.params.perception_range_m);
    }
  } catch (const json::exception& e) {
    throw RobotError(RobotErrc::InvalidWorld, std::string("world file: ") + e.what());
  }
  validate_world(w);
  return w;
}

SimWorld load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RobotError(RobotErrc::InvalidWorld, "cannot open world '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_world(buffer.str());
}

std::string world_to_json(const SimWorld& w) {
  json j;
  j["robot"] = pose_json(w.robot);
  j["gaze"] = {{"x", w.gaze.target.x}, {"y", w.gaze.target.y}, {"z", w.gaze.target.z}};
  j["obstacles"] = json::array();
  for (const auto& o : w.obstacles)
    j["obstacles"].push_back({{"id", o.id}, {"min", {o.min.x, o.min.y}}, {"max", {o.max.x, o.max.y}}, {"height", o.height}});
  j["persons"] = json::array();
  for (const auto& p : w.persons) {
    json jp = {{"id", p.id}, {"x", p.position.x}, {"y", p.position.y}};
    jp["name"] = p.name ? json(*p.name) : json(nullptr);
    j["persons"].push_back(std::move(jp));
  }
  j["landmarks"] = json::array();
  for (const auto& l : w.landmarks)
    j["landmarks"].push_back({{"name", l.name}, {"x", l.position.x}, {"y", l.position.y}, {"z", l.position.z}});
  j["locations"] = json::object();
  for (const auto& [name, pose] : w.named_locations) j["locations"][name] = pose_json(pose);
  j["hardware"] = {{"charging_flap_open", w.hardware.charging_flap_open}, {"battery_pct", w.hardware.battery_pct}};
  j["params"] = {{"stop_margin_m", w.params.stop_margin_m},
                 {"vision_cone_deg", w.params.vision_cone_deg},
                 {"head_height_m", w.params.head_height_m},
                 {"person_height_m", w.params.person_height_m},
                 {"perception_range_m", w.params.perception_range_m}};
  return j.dump();
}

SimRobotController::SimRobotController(SimWorld world, std::function<std::int64_t()> clock_ms)
    : world_(std::move(world)), clock_ms_(std::move(clock_ms)) {
  validate_world(world_);
}

RobotController::Reply SimRobotController::execute(const RobotCommand& command) {
  Reply reply;
  {
    std::lock_guard lock(mutex_);
    CommandOutcome out = apply_command(world_, command);
    world_ = std::move(out.world);
    reply.events = std::move(out.events);
    if (std::holds_alternative<cmd::CaptureImage>(command))
      reply.image = capture_image(world_, clock_ms_ ? clock_ms_() : 0);
  }
  publish(reply.events);
  return reply;
}

void SimRobotController::subscribe(std::function<void(const RobotEvent&)> listener) {
  std::lock_guard lock(listener_mutex_);
  listeners_.push_back(std::move(listener));
}

SimWorld SimRobotController::snapshot() const {
  std::lock_guard lock(mutex_);
  return world_;
}

void SimRobotController::touch(TouchSensor sensor) { publish({ev::Touch{sensor}}); }

void SimRobotController::move_person(const std::string& id, Vec2 position) {
  {
    std::lock_guard lock(mutex_);
    auto it = std::find_if(world_.persons.begin(), world_.persons.end(), [&](const Person& p) { return p.id == id; });
    if (it == world_.persons.end()) throw RobotError(RobotErrc::UnknownPerson, "unknown person '" + id + "'");
    it->position = position;
  }
}

void SimRobotController::set_hardware(const std::string& field, const std::string& value) {
  {
    std::lock_guard lock(mutex_);
    if (field == "charging_flap_open") {
      if (value != "true" && value != "false")
        throw RobotError(RobotErrc::Unsupported, "charging_flap_open takes true or false");
      world_.hardware.charging_flap_open = value == "true";
    } else if (field == "battery_pct") {
      int pct = -1;
      try {
        pct = std::stoi(value);
      } catch (const std::exception&) {
      }
      if (pct < 0 || pct > 100) throw RobotError(RobotErrc::Unsupported, "battery_pct takes 0..100");
      world_.hardware.battery_pct = pct;
    } else {
      throw RobotError(RobotErrc::Unsupported, "unknown hardware field '" + field + "'");
    }
  }
  publish({ev::HardwareChanged{field, value}});
}

void SimRobotController::publish(const std::vector<RobotEvent>& events) {
  std::vector<std::function<void(const RobotEvent&)>> listeners;
  {
    std::lock_guard lock(listener_mutex_);
    listeners = listeners_;
  }
  for (const auto& e : events)
    for (const auto& l : listeners) l(e);
}

}  // namespace s2s
