#include "s2s/scenario.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace s2s {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw ScenarioError(ScenarioErrc::ParseError, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void invalid(const std::string& what) { throw ScenarioError(ScenarioErrc::ValidationError, what); }

std::string str_field(const json& j, const char* name, std::size_t line) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) parse_error(line, std::string("expected string field '") + name + "'");
  return it->get<std::string>();
}

std::int64_t int_field(const json& j, const char* name, std::size_t line, std::int64_t fallback) {
  auto it = j.find(name);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer()) parse_error(line, std::string("field '") + name + "' must be an integer");
  return it->get<std::int64_t>();
}

LatencyModel latency_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) parse_error(line, "latency must be an object");
  std::string mode = str_field(j, "mode", line);
  LatencyModel m;
  if (mode == "cascaded") {
    m.mode = LatencyModel::Mode::Cascaded;
    m.stt_ms = int_field(j, "stt_ms", line, 0);
    m.llm_ms = int_field(j, "llm_ms", line, 0);
    m.tts_ms = int_field(j, "tts_ms", line, 0);
  } else if (mode == "s2s") {
    m.mode = LatencyModel::Mode::S2S;
    m.first_token_ms = int_field(j, "first_token_ms", line, 0);
  } else {
    parse_error(line, "unknown latency mode '" + mode + "'");
  }
  return m;
}

Arguments arguments_from_json(const json& j, std::size_t line) {
  Arguments args;
  if (j.is_null()) return args;
  if (!j.is_object()) parse_error(line, "'arguments' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) args[k] = v.get<std::string>();
    else if (v.is_boolean()) args[k] = v.get<bool>();
    else if (v.is_number_integer()) args[k] = v.get<std::int64_t>();
    else if (v.is_number_float()) args[k] = v.get<double>();
    else parse_error(line, "argument '" + k + "' must be a scalar");
  }
  return args;
}

ScriptStep step_from_json(const json& j, std::size_t line) {
  std::string kind = str_field(j, "step", line);
  if (kind == "on_user_input") return step::OnUserInput{j.value("match", std::string("*"))};
  if (kind == "emit_turn") return step::EmitTurn{str_field(j, "text", line), int_field(j, "audio_ms", line, 0)};
  if (kind == "emit_tool_call")
    return step::EmitToolCall{str_field(j, "label", line), str_field(j, "name", line),
                              arguments_from_json(j.value("arguments", json()), line)};
  if (kind == "await_tool_result") return step::AwaitToolResult{str_field(j, "label", line)};
  if (kind == "emit_context_ack") return step::EmitContextAck{};
  parse_error(line, "unknown step '" + kind + "'");
}

// Labels referenced as {result:LABEL} inside a turn's text.
std::vector<std::string> referenced_results(const std::string& text) {
  std::vector<std::string> labels;
  const std::string open = "{result:";
  for (std::size_t pos = text.find(open); pos != std::string::npos; pos = text.find(open, pos + 1)) {
    auto close = text.find('}', pos);
    if (close == std::string::npos) break;
    labels.push_back(text.substr(pos + open.size(), close - pos - open.size()));
  }
  return labels;
}

}  // namespace

LatencyModel parse_latency(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) invalid("latency override needs MODE:VALUES");
  std::string_view mode = text.substr(0, colon);
  std::vector<std::int64_t> values;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) invalid("bad latency value '" + std::string(item) + "'");
    values.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  LatencyModel m;
  if (mode == "s2s" && values.size() == 1) m = LatencyModel::s2s(values[0]);
  else if (mode == "cascaded" && values.size() == 3) m = LatencyModel::cascaded(values[0], values[1], values[2]);
  else invalid("latency override must be s2s:FIRST or cascaded:STT,LLM,TTS");
  if (m.stt_ms < 0 || m.llm_ms < 0 || m.tts_ms < 0 || m.first_token_ms < 0) invalid("latencies must be >= 0");
  return m;
}

void validate(const Scenario& scenario) {
  const auto& l = scenario.latency;
  if (l.stt_ms < 0 || l.llm_ms < 0 || l.tts_ms < 0 || l.first_token_ms < 0) invalid("latencies must be >= 0");
  if (scenario.audio_chunk_ms <= 0) invalid("audio_chunk_ms must be positive");
  if (scenario.ack_audio_ms < 0) invalid("ack_audio_ms must be >= 0");
  std::set<std::string> emitted;
  std::set<std::string> awaited;
  for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
    const auto& s = scenario.steps[i];
    const std::string where = "step " + std::to_string(i + 1);
    if (const auto* call = std::get_if<step::EmitToolCall>(&s)) {
      if (call->label.empty()) invalid(where + ": empty label");
      if (!is_identifier(call->name)) invalid(where + ": tool name '" + call->name + "' is not an identifier");
      if (!emitted.insert(call->label).second) invalid(where + ": duplicate label '" + call->label + "'");
    } else if (const auto* await = std::get_if<step::AwaitToolResult>(&s)) {
      if (!emitted.count(await->label)) invalid(where + ": await of unknown label '" + await->label + "'");
      if (!awaited.insert(await->label).second) invalid(where + ": label '" + await->label + "' awaited twice");
    } else if (const auto* turn = std::get_if<step::EmitTurn>(&s)) {
      if (turn->audio_ms < 0) invalid(where + ": audio_ms must be >= 0");
      for (const auto& label : referenced_results(turn->text))
        if (!awaited.count(label)) invalid(where + ": {result:" + label + "} refers to a result not yet awaited");
    }
  }
}

Scenario parse_scenario(std::string_view text) {
  Scenario scenario;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    json j = json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) parse_error(line_no, "not a structured-text object");
    if (j.contains("step")) {
      scenario.steps.push_back(step_from_json(j, line_no));
    } else if (j.contains("latency")) {
      scenario.latency = latency_from_json(j["latency"], line_no);
    } else if (j.contains("options")) {
      const json& o = j["options"];
      if (!o.is_object()) parse_error(line_no, "options must be an object");
      if (o.contains("loop")) {
        if (!o["loop"].is_boolean()) parse_error(line_no, "'loop' must be a boolean");
        scenario.loop = o["loop"].get<bool>();
      }
      if (o.contains("pace_audio")) {
        if (!o["pace_audio"].is_boolean()) parse_error(line_no, "'pace_audio' must be a boolean");
        scenario.pace_audio = o["pace_audio"].get<bool>();
      }
      scenario.audio_chunk_ms = int_field(o, "audio_chunk_ms", line_no, scenario.audio_chunk_ms);
      scenario.ack_audio_ms = int_field(o, "ack_audio_ms", line_no, scenario.ack_audio_ms);
    } else {
      parse_error(line_no, "line is neither a step, latency nor options record");
    }
  }
  validate(scenario);
  return scenario;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(ScenarioErrc::ParseError, "cannot open scenario '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

std::vector<std::string> required_tools(const Scenario& scenario) {
  std::vector<std::string> names;
  for (const auto& s : scenario.steps)
    if (const auto* call = std::get_if<step::EmitToolCall>(&s)) names.push_back(call->name);
  return names;
}

}  // namespace s2s
