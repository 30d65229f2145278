#pragma once

// Perception events and the rule engine reacting to them with either an
// immediate model response or a silent context update.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "s2s/protocol.hpp"
#include "s2s/robot.hpp"

namespace s2s {

class SessionHandle;

enum class PerceptionKind { PersonAppeared, PersonRecognized, PersonDistance, Touch };

std::string_view to_string(PerceptionKind kind);
std::optional<PerceptionKind> parse_perception_kind(std::string_view text);

struct PerceptionEvent {
  PerceptionKind kind = PerceptionKind::PersonAppeared;
  std::string person_id;
  std::optional<std::string> identity;
  double meters = 0.0;  // PersonDistance only
  std::optional<TouchSensor> sensor;  // Touch only
  std::int64_t timestamp_ms = 0;  // monotonic
  bool operator==(const PerceptionEvent&) const = default;
};

struct RuleCondition {
  PerceptionKind kind = PerceptionKind::PersonAppeared;
  std::optional<double> distance_below;  // strict: meters < value
  std::optional<std::string> identity_equals;
  bool operator==(const RuleCondition&) const = default;
};

enum class RuleAction { ImmediateResponse, ContextUpdate };

struct Rule {
  std::string id;
  RuleCondition condition;
  std::int64_t cooldown_ms = 0;
  RuleAction action = RuleAction::ContextUpdate;
  /// Placeholders: {identity} {distance} {person} {sensor}
  std::string message_template;
  bool operator==(const Rule&) const = default;
};

struct RuleFiring {
  std::string rule_id;
  PerceptionEvent event;
  std::string message;
  bool request_response = false;

  ContextInjection to_injection() const { return {message, request_response}; }
};

using LastFired = std::map<std::string, std::int64_t>;

struct Evaluation {
  std::vector<RuleFiring> firings;
  LastFired last_fired;
};

bool matches(const RuleCondition& condition, const PerceptionEvent& event);
std::string render(const std::string& message_template, const PerceptionEvent& event);

/// Pure. A rule fires when its condition holds and at least cooldown_ms have
/// passed since it last fired (boundary inclusive; a rule that never fired
/// always passes). Firings come out in rule-id order.
Evaluation evaluate(std::span<const Rule> rules, const PerceptionEvent& event, const LastFired& last_fired);

/// Sends the firing as a ContextInjection. Throws SessionFailure(SessionClosed).
void dispatch(const RuleFiring& firing, SessionHandle& session);

enum class RuleErrc { ParseError, DuplicateRuleId, ValidationError };

class RuleError : public std::runtime_error {
 public:
  RuleError(RuleErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  RuleErrc code() const noexcept { return code_; }

 private:
  RuleErrc code_;
};

std::vector<Rule> parse_rules(std::string_view text);
std::vector<Rule> load_rules(const std::filesystem::path& path);

/// Owns the last-fired bookkeeping for one rule set.
class RuleEngine {
 public:
  RuleEngine() = default;
  explicit RuleEngine(std::vector<Rule> rules);

  std::vector<RuleFiring> on_event(const PerceptionEvent& event);
  const std::vector<Rule>& rules() const { return rules_; }
  const LastFired& last_fired() const { return last_fired_; }

 private:
  std::vector<Rule> rules_;
  LastFired last_fired_;
};

/// Simulated person perception: turns world state into person events each
/// tick, standing in for an on-robot tracking stream.
class PerceptionTracker {
 public:
  std::vector<PerceptionEvent> tick(const SimWorld& world, std::int64_t now_ms);

 private:
  std::set<std::string> visible_;
};

}  // namespace s2s
