#include "s2s/perception.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "s2s/session.hpp"

namespace s2s {

using nlohmann::json;

std::string_view to_string(PerceptionKind kind) {
  switch (kind) {
    case PerceptionKind::PersonAppeared: return "person_appeared";
    case PerceptionKind::PersonRecognized: return "person_recognized";
    case PerceptionKind::PersonDistance: return "person_distance";
    case PerceptionKind::Touch: return "touch";
  }
  return "?";
}

std::optional<PerceptionKind> parse_perception_kind(std::string_view text) {
  for (auto k : {PerceptionKind::PersonAppeared, PerceptionKind::PersonRecognized, PerceptionKind::PersonDistance,
                 PerceptionKind::Touch})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

bool matches(const RuleCondition& condition, const PerceptionEvent& event) {
  if (condition.kind != event.kind) return false;
  if (condition.distance_below && !(event.meters < *condition.distance_below)) return false;
  if (condition.identity_equals && event.identity != condition.identity_equals) return false;
  return true;
}

std::string render(const std::string& message_template, const PerceptionEvent& event) {
  char distance[32];
  std::snprintf(distance, sizeof(distance), "%.1f", event.meters);
  const std::pair<std::string, std::string> subs[] = {
      {"{identity}", event.identity.value_or("someone")},
      {"{distance}", distance},
      {"{person}", event.person_id},
      {"{sensor}", event.sensor ? human_readable(*event.sensor) : std::string()},
  };
  std::string out = message_template;
  for (const auto& [key, value] : subs)
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
      out.replace(pos, key.size(), value);
  return out;
}

Evaluation evaluate(std::span<const Rule> rules, const PerceptionEvent& event, const LastFired& last_fired) {
  std::vector<const Rule*> ordered;
  for (const auto& r : rules) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const Rule* a, const Rule* b) { return a->id < b->id; });

  Evaluation out{{}, last_fired};
  for (const Rule* rule : ordered) {
    if (!matches(rule->condition, event)) continue;
    auto prev = out.last_fired.find(rule->id);
    if (prev != out.last_fired.end() && event.timestamp_ms - prev->second < rule->cooldown_ms) continue;
    out.last_fired[rule->id] = event.timestamp_ms;
    out.firings.push_back({rule->id, event, render(rule->message_template, event),
                           rule->action == RuleAction::ImmediateResponse});
  }
  return out;
}

void dispatch(const RuleFiring& firing, SessionHandle& session) { session.send(firing.to_injection()); }

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& why) {
  throw RuleError(RuleErrc::ParseError, "rules line " + std::to_string(line) + ": " + why);
}

Rule parse_rule(const json& j, std::size_t line) {
  if (!j.is_object()) parse_fail(line, "expected an object");
  Rule r;
  try {
    r.id = j.at("id").get<std::string>();
    auto on = parse_perception_kind(j.at("on").get<std::string>());
    if (!on) parse_fail(line, "unknown event kind '" + j.at("on").get<std::string>() + "'");
    r.condition.kind = *on;
    if (j.contains("distance_below")) r.condition.distance_below = j.at("distance_below").get<double>();
    if (j.contains("identity_equals")) r.condition.identity_equals = j.at("identity_equals").get<std::string>();
    r.cooldown_ms = j.value("cooldown_ms", std::int64_t{0});
    const std::string action = j.at("action").get<std::string>();
    if (action == "immediate" || action == "immediate_response") r.action = RuleAction::ImmediateResponse;
    else if (action == "context" || action == "context_update") r.action = RuleAction::ContextUpdate;
    else parse_fail(line, "unknown action '" + action + "'");
    r.message_template = j.at("template").get<std::string>();
  } catch (const json::exception& e) {
    parse_fail(line, e.what());
  }
  auto invalid = [&](const std::string& why) {
    throw RuleError(RuleErrc::ValidationError, "rule '" + r.id + "': " + why);
  };
  if (r.id.empty()) invalid("empty id");
  if (r.cooldown_ms < 0) invalid("negative cooldown");
  if (r.condition.distance_below && r.condition.kind != PerceptionKind::PersonDistance)
    invalid("distance_below only applies to person_distance");
  if (r.condition.identity_equals && r.condition.kind == PerceptionKind::Touch)
    invalid("identity_equals does not apply to touch");
  return r;
}

}  // namespace

std::vector<Rule> parse_rules(std::string_view text) {
  std::vector<Rule> rules;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    json j = json::parse(raw, nullptr, false);
    if (j.is_discarded()) parse_fail(line, "invalid JSON");
    Rule r = parse_rule(j, line);
    if (!ids.insert(r.id).second) throw RuleError(RuleErrc::DuplicateRuleId, "duplicate rule id '" + r.id + "'");
    rules.push_back(std::move(r));
  }
  return rules;
}

std::vector<Rule> load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuleError(RuleErrc::ParseError, "cannot open rules file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_rules(buffer.str());
}

RuleEngine::RuleEngine(std::vector<Rule> rules) : rules_(std::move(rules)) {
  std::set<std::string> ids;
  for (const auto& r : rules_)
    if (!ids.insert(r.id).second) throw RuleError(RuleErrc::DuplicateRuleId, "duplicate rule id '" + r.id + "'");
}

std::vector<RuleFiring> RuleEngine::on_event(const PerceptionEvent& event) {
  auto result = evaluate(rules_, event, last_fired_);
  last_fired_ = std::move(result.last_fired);
  return std::move(result.firings);
}

std::vector<PerceptionEvent> PerceptionTracker::tick(const SimWorld& world, std::int64_t now_ms) {
  std::vector<PerceptionEvent> out;
  std::set<std::string> now_visible;
  for (const auto& p : world.persons) {
    const double d = std::hypot(p.position.x - world.robot.x, p.position.y - world.robot.y);
    if (d > world.params.perception_range_m) continue;
    now_visible.insert(p.id);
    PerceptionEvent base;
    base.person_id = p.id;
    base.identity = p.name;
    base.meters = d;
    base.timestamp_ms = now_ms;
    if (!visible_.count(p.id)) {
      base.kind = PerceptionKind::PersonAppeared;
      out.push_back(base);
      if (p.name) {
        base.kind = PerceptionKind::PersonRecognized;
        out.push_back(base);
      }
    }
    base.kind = PerceptionKind::PersonDistance;
    out.push_back(base);
  }
  visible_ = std::move(now_visible);
  return out;
}

}  // namespace s2s
