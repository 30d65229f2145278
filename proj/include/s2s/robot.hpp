#pragma once

// Hardware-agnostic robot controller contract and the simulated 2-D world
// behind it. World frame: x/y on the floor, z up. Robot frame: x forward,
// y left, z up, origin on the floor under the robot.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "s2s/protocol.hpp"
#include "s2s/tool_registry.hpp"

namespace s2s {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Vec3&) const = default;
};

/// Wraps into (-pi, pi].
double normalize_angle(double radians);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  bool operator==(const Pose&) const = default;
};

struct Gaze {
  Vec3 target{1.0, 0.0, 1.2};  // robot frame
  bool operator==(const Gaze&) const = default;
};

/// Axis-aligned obstacle footprint; `height` only matters for vision.
struct Obstacle {
  std::string id;
  Vec2 min;
  Vec2 max;
  double height = 1.0;

  bool contains(Vec2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
  bool operator==(const Obstacle&) const = default;
};

struct Person {
  std::string id;
  std::optional<std::string> name;  // nullopt = not recognized
  Vec2 position;
  bool operator==(const Person&) const = default;
};

/// Named point of interest in 3-D, e.g. something mounted on the ceiling.
struct Landmark {
  std::string name;
  Vec3 position;
  bool operator==(const Landmark&) const = default;
};

struct HardwareStatus {
  bool charging_flap_open = false;
  int battery_pct = 100;
  bool operator==(const HardwareStatus&) const = default;
};

struct SimParams {
  double stop_margin_m = 0.1;
  double vision_cone_deg = 60.0;  // full apex angle
  double head_height_m = 1.2;
  double person_height_m = 1.5;
  double perception_range_m = 4.0;
  bool operator==(const SimParams&) const = default;
};

struct SimWorld {
  Pose robot;
  Gaze gaze;
  std::vector<Obstacle> obstacles;
  std::vector<Person> persons;
  std::vector<Landmark> landmarks;
  std::map<std::string, Pose> named_locations;
  HardwareStatus hardware;
  SimParams params;

  bool inside_obstacle(Vec2 p) const;
  bool operator==(const SimWorld&) const = default;
};

enum class TouchSensor { Head, LeftHand, RightHand, LeftBumper, RightBumper };

/// Wire id, e.g. "right_hand".
std::string_view to_string(TouchSensor sensor);
/// Spoken form, e.g. "right hand".
std::string human_readable(TouchSensor sensor);
std::optional<TouchSensor> parse_touch_sensor(std::string_view text);

namespace cmd {
struct MoveTo {
  /// Named location, a floor point (heading follows the path) or a full pose.
  std::variant<std::string, Vec2, Pose> target;
};
struct LookAt {
  Gaze gaze;
};
struct CaptureImage {};
/// Teleport; simulation only.
struct SetPose {
  Pose pose;
};
}  // namespace cmd

using RobotCommand = std::variant<cmd::MoveTo, cmd::LookAt, cmd::CaptureImage, cmd::SetPose>;

namespace ev {
struct MovementComplete {
  Pose pose;
  bool operator==(const MovementComplete&) const = default;
};
struct MovementBlocked {
  Vec2 at;  // where the path first meets the obstacle
  std::string obstacle;
  bool operator==(const MovementBlocked&) const = default;
};
struct Touch {
  TouchSensor sensor;
  bool operator==(const Touch&) const = default;
};
struct HardwareChanged {
  std::string field;
  std::string value;
  bool operator==(const HardwareChanged&) const = default;
};
}  // namespace ev

using RobotEvent = std::variant<ev::MovementComplete, ev::MovementBlocked, ev::Touch, ev::HardwareChanged>;

struct SimImage {
  std::string description;
  Gaze gaze;
  std::int64_t timestamp_ms = 0;
};

enum class RobotErrc { UnknownLocation, InvalidPose, InvalidWorld, UnknownPerson, Unsupported };

class RobotError : public std::runtime_error {
 public:
  RobotError(RobotErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  RobotErrc code() const noexcept { return code_; }

 private:
  RobotErrc code_;
};

struct CommandOutcome {
  SimWorld world;
  std::vector<RobotEvent> events;
};

/// Pure. MoveTo follows the straight segment; if it meets an obstacle the
/// robot stops `stop_margin_m` short of the first contact, turns its gaze
/// toward the contact point and reports MovementBlocked. Throws
/// RobotError(UnknownLocation | InvalidPose).
CommandOutcome apply_command(const SimWorld& world, const RobotCommand& command);

/// Pure. Lists persons, obstacles and landmarks whose centers fall inside the
/// vision cone around the gaze ray, nearest first.
SimImage capture_image(const SimWorld& world, std::int64_t timestamp_ms = 0);

inline constexpr std::string_view kNothingNotable = "nothing notable";

ContextInjection inject_touch(TouchSensor sensor);

/// Self-initiated vision check after a blocked movement.
ToolCall blocked_reflex(const ev::MovementBlocked& event, std::string call_id);

/// Context message sent ahead of the reflex result.
ContextInjection describe_blockage(const ev::MovementBlocked& event);

/// Throws RobotError(InvalidWorld).
void validate_world(const SimWorld& world);
SimWorld parse_world(std::string_view text);
SimWorld load_world(const std::filesystem::path& path);
/// Compact structured-text snapshot for the console feed.
std::string world_to_json(const SimWorld& world);

/// Point expressed in the robot frame.
Vec3 to_robot_frame(const Pose& robot, Vec3 world_point);

struct ControllerCapabilities {
  bool can_move = true;
  bool has_camera = true;
  bool simulated = true;
};

/// Contract between the core runtime and a robot body (real or simulated).
class RobotController {
 public:
  virtual ~RobotController() = default;
  struct Reply {
    std::vector<RobotEvent> events;
    std::optional<SimImage> image;
  };
  /// Events are also delivered to the subscriber, in order, before returning.
  virtual Reply execute(const RobotCommand& command) = 0;
  virtual void subscribe(std::function<void(const RobotEvent&)> listener) = 0;
  virtual ControllerCapabilities capabilities() const = 0;
};

class SimRobotController final : public RobotController {
 public:
  explicit SimRobotController(SimWorld world, std::function<std::int64_t()> clock_ms = {});

  Reply execute(const RobotCommand& command) override;
  void subscribe(std::function<void(const RobotEvent&)> listener) override;
  ControllerCapabilities capabilities() const override { return {true, true, true}; }

  SimWorld snapshot() const;
  void touch(TouchSensor sensor);
  /// Throws RobotError(UnknownPerson).
  void move_person(const std::string& id, Vec2 position);
  /// field: charging_flap_open (true/false) or battery_pct (0..100).
  void set_hardware(const std::string& field, const std::string& value);

 private:
  void publish(const std::vector<RobotEvent>& events);

  mutable std::mutex mutex_;
  SimWorld world_;
  std::function<std::int64_t()> clock_ms_;
  std::mutex listener_mutex_;
  std::vector<std::function<void(const RobotEvent&)>> listeners_;
};

}  // namespace s2s
