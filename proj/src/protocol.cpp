#include "s2s/protocol.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace s2s {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw ProtocolError(ProtocolErrc::MalformedFrame, what);
}

[[noreturn]] void violation(const std::string& what) {
  throw ProtocolError(ProtocolErrc::InvariantViolation, what);
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) malformed(std::string("missing field '") + name + "'");
  return *it;
}

std::string get_string(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) malformed(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_boolean()) malformed(std::string("field '") + name + "' must be a boolean");
  return v.get<bool>();
}

std::int64_t get_int(const json& j, const char* name) {
  const json& v = field(j, name);
  if (v.is_number_unsigned()) {
    if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      malformed(std::string("field '") + name + "' out of range");
    return static_cast<std::int64_t>(v.get<std::uint64_t>());
  }
  if (!v.is_number_integer()) malformed(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

json arg_to_json(const ArgValue& value) {
  return std::visit([](const auto& v) -> json { return json(v); }, value);
}

ArgValue arg_from_json(const std::string& key, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_unsigned()) {
    if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
      malformed("argument '" + key + "' out of range");
    return static_cast<std::int64_t>(v.get<std::uint64_t>());
  }
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) return v.get<double>();
  malformed("argument '" + key + "' must be a scalar");
}

json schema_to_json(const ToolSchema& schema) {
  json params = json::array();
  for (const auto& p : schema.parameters) {
    json jp = {{"name", p.name},
               {"type", std::string(to_string(p.type))},
               {"required", p.required},
               {"description", p.description}};
    if (!p.enum_values.empty()) jp["enum"] = p.enum_values;
    if (p.minimum) jp["min"] = *p.minimum;
    if (p.maximum) jp["max"] = *p.maximum;
    params.push_back(std::move(jp));
  }
  return {{"name", schema.name}, {"description", schema.description}, {"parameters", std::move(params)}};
}

std::optional<double> get_optional_number(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) malformed(std::string("field '") + name + "' must be a number");
  return it->get<double>();
}

ToolSchema schema_from_json(const json& j) {
  if (!j.is_object()) malformed("tool schema must be an object");
  ToolSchema schema;
  schema.name = get_string(j, "name");
  schema.description = get_string(j, "description");
  const json& params = field(j, "parameters");
  if (!params.is_array()) malformed("'parameters' must be an array");
  for (const auto& jp : params) {
    if (!jp.is_object()) malformed("parameter must be an object");
    ParamSpec p;
    p.name = get_string(jp, "name");
    auto type = parse_param_type(get_string(jp, "type"));
    if (!type) malformed("unknown parameter type in '" + p.name + "'");
    p.type = *type;
    p.required = get_bool(jp, "required");
    if (auto it = jp.find("description"); it != jp.end()) {
      if (!it->is_string()) malformed("parameter description must be a string");
      p.description = it->get<std::string>();
    }
    if (auto it = jp.find("enum"); it != jp.end()) {
      if (!it->is_array()) malformed("'enum' must be an array");
      for (const auto& e : *it) {
        if (!e.is_string()) malformed("enum values must be strings");
        p.enum_values.push_back(e.get<std::string>());
      }
    }
    p.minimum = get_optional_number(jp, "min");
    p.maximum = get_optional_number(jp, "max");
    schema.parameters.push_back(std::move(p));
  }
  return schema;
}

struct Encoder {
  json operator()(const AudioInputChunk& e) const {
    return {{"seq", e.seq}, {"duration_ms", e.duration_ms}, {"payload_ref", e.payload_ref}, {"final", e.final}};
  }
  json operator()(const TextInput& e) const {
    json j = {{"text", e.text}};
    if (e.confidence) j["confidence"] = *e.confidence;
    return j;
  }
  json operator()(const ContextInjection& e) const {
    return {{"message", e.message}, {"request_response", e.request_response}};
  }
  json operator()(const ToolResultEvent& e) const {
    return {{"call_id", e.call_id}, {"payload", e.payload}, {"is_error", e.is_error}};
  }
  json operator()(const InterruptRequest& e) const { return {{"turn_id", e.turn_id}}; }
  json operator()(const SessionConfig& e) const {
    json schemas = json::array();
    for (const auto& s : e.tool_schemas) schemas.push_back(schema_to_json(s));
    return {{"tool_schemas", std::move(schemas)},
            {"input_mode", std::string(to_string(e.input_mode))},
            {"system_prompt", e.system_prompt}};
  }
  json operator()(const ModelTurnStart& e) const { return {{"turn_id", e.turn_id}}; }
  json operator()(const ModelTurnEnd& e) const { return {{"turn_id", e.turn_id}}; }
  json operator()(const ModelTextDelta& e) const { return {{"turn_id", e.turn_id}, {"text", e.text}}; }
  json operator()(const ModelAudioDelta& e) const {
    return {{"turn_id", e.turn_id}, {"duration_ms", e.duration_ms}};
  }
  json operator()(const ToolCallRequest& e) const {
    json args = json::object();
    for (const auto& [k, v] : e.arguments) args[k] = arg_to_json(v);
    return {{"call_id", e.call_id}, {"name", e.name}, {"arguments", std::move(args)}};
  }
  json operator()(const SessionAck& e) const { return {{"session_id", e.session_id}}; }
  json operator()(const SessionError& e) const { return {{"reason", e.reason}}; }
};

SessionEvent decode_body(std::string_view kind, const json& j) {
  if (kind == "audio_input") {
    AudioInputChunk e;
    e.seq = get_int(j, "seq");
    e.duration_ms = get_int(j, "duration_ms");
    e.payload_ref = get_string(j, "payload_ref");
    if (j.contains("final")) e.final = get_bool(j, "final");
    return e;
  }
  if (kind == "text_input") {
    TextInput e;
    e.text = get_string(j, "text");
    e.confidence = get_optional_number(j, "confidence");
    return e;
  }
  if (kind == "context") return ContextInjection{get_string(j, "message"), get_bool(j, "request_response")};
  if (kind == "tool_result")
    return ToolResultEvent{get_string(j, "call_id"), get_string(j, "payload"), get_bool(j, "is_error")};
  if (kind == "interrupt") return InterruptRequest{get_string(j, "turn_id")};
  if (kind == "session_config") {
    SessionConfig e;
    const json& schemas = field(j, "tool_schemas");
    if (!schemas.is_array()) malformed("'tool_schemas' must be an array");
    for (const auto& s : schemas) e.tool_schemas.push_back(schema_from_json(s));
    auto mode = parse_input_mode(get_string(j, "input_mode"));
    if (!mode) malformed("unknown input_mode");
    e.input_mode = *mode;
    e.system_prompt = get_string(j, "system_prompt");
    return e;
  }
  if (kind == "model_turn_start") return ModelTurnStart{get_string(j, "turn_id")};
  if (kind == "model_turn_end") return ModelTurnEnd{get_string(j, "turn_id")};
  if (kind == "model_text_delta") return ModelTextDelta{get_string(j, "turn_id"), get_string(j, "text")};
  if (kind == "model_audio_delta") return ModelAudioDelta{get_string(j, "turn_id"), get_int(j, "duration_ms")};
  if (kind == "tool_call") {
    ToolCallRequest e;
    e.call_id = get_string(j, "call_id");
    e.name = get_string(j, "name");
    const json& args = field(j, "arguments");
    if (!args.is_object()) malformed("'arguments' must be an object");
    for (const auto& [k, v] : args.items()) e.arguments.emplace(k, arg_from_json(k, v));
    return e;
  }
  if (kind == "session_ack") return SessionAck{get_string(j, "session_id")};
  if (kind == "session_error") return SessionError{get_string(j, "reason")};
  throw ProtocolError(ProtocolErrc::UnknownKind, "unknown kind '" + std::string(kind) + "'");
}

}  // namespace

std::string to_string(const ArgValue& value) {
  struct V {
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(double d) const { return json(d).dump(); }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(V{}, value);
}

std::string_view to_string(InputMode mode) {
  return mode == InputMode::DirectAudio ? "direct_audio" : "stt";
}

std::optional<InputMode> parse_input_mode(std::string_view text) {
  if (text == "direct_audio" || text == "audio") return InputMode::DirectAudio;
  if (text == "stt") return InputMode::Stt;
  return std::nullopt;
}

std::string_view to_string(ParamType type) {
  switch (type) {
    case ParamType::String: return "string";
    case ParamType::Number: return "number";
    case ParamType::Integer: return "integer";
    case ParamType::Boolean: return "boolean";
    case ParamType::Enum: return "enum";
  }
  return "string";
}

std::optional<ParamType> parse_param_type(std::string_view text) {
  if (text == "string") return ParamType::String;
  if (text == "number") return ParamType::Number;
  if (text == "integer") return ParamType::Integer;
  if (text == "boolean") return ParamType::Boolean;
  if (text == "enum") return ParamType::Enum;
  return std::nullopt;
}

std::string_view to_string(ProtocolErrc code) {
  switch (code) {
    case ProtocolErrc::MalformedFrame: return "MalformedFrame";
    case ProtocolErrc::UnknownKind: return "UnknownKind";
    case ProtocolErrc::InvariantViolation: return "InvariantViolation";
  }
  return "?";
}

const ParamSpec* ToolSchema::find(std::string_view param) const {
  for (const auto& p : parameters)
    if (p.name == param) return &p;
  return nullptr;
}

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(name.front())) return false;
  for (char c : name)
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  return true;
}

void check_schema(const ToolSchema& schema) {
  if (!is_identifier(schema.name)) violation("tool name '" + schema.name + "' is not an identifier");
  std::set<std::string> seen;
  for (const auto& p : schema.parameters) {
    if (!is_identifier(p.name)) violation("parameter name '" + p.name + "' is not an identifier");
    if (!seen.insert(p.name).second) violation("duplicate parameter '" + p.name + "' in " + schema.name);
    if (p.type == ParamType::Enum && p.enum_values.empty())
      violation("enum parameter '" + p.name + "' has no values");
    if (p.minimum && p.maximum && *p.minimum > *p.maximum)
      violation("parameter '" + p.name + "' has min > max");
  }
}

std::string_view kind_of(const SessionEvent& event) {
  struct V {
    std::string_view operator()(const AudioInputChunk&) const { return "audio_input"; }
    std::string_view operator()(const TextInput&) const { return "text_input"; }
    std::string_view operator()(const ContextInjection&) const { return "context"; }
    std::string_view operator()(const ToolResultEvent&) const { return "tool_result"; }
    std::string_view operator()(const InterruptRequest&) const { return "interrupt"; }
    std::string_view operator()(const SessionConfig&) const { return "session_config"; }
    std::string_view operator()(const ModelTurnStart&) const { return "model_turn_start"; }
    std::string_view operator()(const ModelTurnEnd&) const { return "model_turn_end"; }
    std::string_view operator()(const ModelTextDelta&) const { return "model_text_delta"; }
    std::string_view operator()(const ModelAudioDelta&) const { return "model_audio_delta"; }
    std::string_view operator()(const ToolCallRequest&) const { return "tool_call"; }
    std::string_view operator()(const SessionAck&) const { return "session_ack"; }
    std::string_view operator()(const SessionError&) const { return "session_error"; }
  };
  return std::visit(V{}, event);
}

bool is_client_originated(const SessionEvent& event) {
  return std::holds_alternative<AudioInputChunk>(event) || std::holds_alternative<TextInput>(event) ||
         std::holds_alternative<ContextInjection>(event) || std::holds_alternative<ToolResultEvent>(event) ||
         std::holds_alternative<InterruptRequest>(event) || std::holds_alternative<SessionConfig>(event);
}

void check_event(const SessionEvent& event) {
  if (const auto* a = std::get_if<AudioInputChunk>(&event)) {
    if (a->seq < 0) violation("audio seq must be non-negative");
    if (a->duration_ms < 0) violation("audio duration_ms must be non-negative");
  } else if (const auto* t = std::get_if<TextInput>(&event)) {
    if (t->confidence && !(*t->confidence >= 0.0 && *t->confidence <= 1.0))
      violation("confidence must lie in [0,1]");
  } else if (const auto* d = std::get_if<ModelAudioDelta>(&event)) {
    if (d->duration_ms < 0) violation("audio delta duration_ms must be non-negative");
  } else if (const auto* c = std::get_if<ToolCallRequest>(&event)) {
    for (const auto& [k, v] : c->arguments)
      if (const auto* x = std::get_if<double>(&v); x && !std::isfinite(*x))
        violation("argument '" + k + "' is not finite");
  } else if (const auto* cfg = std::get_if<SessionConfig>(&event)) {
    std::set<std::string> names;
    for (const auto& s : cfg->tool_schemas) {
      check_schema(s);
      if (!names.insert(s.name).second) violation("duplicate tool schema '" + s.name + "'");
    }
  }
}

std::string encode_event(const SessionEvent& event) {
  json j = std::visit(Encoder{}, event);
  j["kind"] = std::string(kind_of(event));
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

SessionEvent decode_event(std::string_view frame) {
  if (frame.find('\n') != std::string_view::npos) malformed("frame contains a raw newline");
  json j = json::parse(frame.begin(), frame.end(), nullptr, false);
  if (j.is_discarded()) malformed("frame is not valid structured text");
  if (!j.is_object()) malformed("frame must be an object");
  auto kind = j.find("kind");
  if (kind == j.end()) malformed("missing field 'kind'");
  if (!kind->is_string()) malformed("field 'kind' must be a string");
  SessionEvent event = decode_body(kind->get<std::string>(), j);
  check_event(event);
  return event;
}

void SessionInvariants::on_client_event(const SessionEvent& event) {
  check_event(event);
  if (const auto* a = std::get_if<AudioInputChunk>(&event)) {
    if (last_seq_ && a->seq <= *last_seq_)
      violation("audio seq " + std::to_string(a->seq) + " not greater than " + std::to_string(*last_seq_));
    last_seq_ = a->seq;
  } else if (const auto* r = std::get_if<ToolResultEvent>(&event)) {
    if (!known_calls_.count(r->call_id)) violation("tool result for unknown call '" + r->call_id + "'");
  }
}

void SessionInvariants::on_server_event(const SessionEvent& event) {
  check_event(event);
  if (const auto* s = std::get_if<ModelTurnStart>(&event)) {
    open_turns_.insert(s->turn_id);
  } else if (const auto* e = std::get_if<ModelTurnEnd>(&event)) {
    if (!open_turns_.erase(e->turn_id)) violation("end of unopened turn '" + e->turn_id + "'");
  } else if (const auto* t = std::get_if<ModelTextDelta>(&event)) {
    if (!turn_open(t->turn_id)) violation("text delta outside open turn '" + t->turn_id + "'");
  } else if (const auto* a = std::get_if<ModelAudioDelta>(&event)) {
    if (!turn_open(a->turn_id)) violation("audio delta outside open turn '" + a->turn_id + "'");
  } else if (const auto* c = std::get_if<ToolCallRequest>(&event)) {
    known_calls_.insert(c->call_id);
  }
}

void SessionInvariants::declare_local_call(const std::string& call_id) { known_calls_.insert(call_id); }

}  // namespace s2s
