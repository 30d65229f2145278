#include "s2s/console_protocol.hpp"

#include <cmath>

#include "json.hpp"

namespace s2s {

using nlohmann::json;

namespace console {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

json arg_json(const ArgValue& value) {
  return std::visit([](const auto& v) { return json(v); }, value);
}

template <class T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw ConsoleError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ConsoleError(std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

std::string_view kind_of(const Command& command) {
  return std::visit(overloaded{
                        [](const SendText&) { return std::string_view("send_text"); },
                        [](const SimulateAudio&) { return std::string_view("simulate_audio"); },
                        [](const Tap&) { return std::string_view("tap"); },
                        [](const Touch&) { return std::string_view("touch"); },
                        [](const SetInputMode&) { return std::string_view("set_input_mode"); },
                        [](const MovePerson&) { return std::string_view("move_person"); },
                        [](const SetHardware&) { return std::string_view("set_hardware"); },
                    },
                    command);
}

std::string encode_command(const Command& command) {
  json j;
  j["kind"] = kind_of(command);
  std::visit(overloaded{
                 [&](const SendText& c) { j["text"] = c.text; },
                 [&](const SimulateAudio& c) {
                   j["duration_ms"] = c.duration_ms;
                   if (!c.label.empty()) j["label"] = c.label;
                 },
                 [&](const Tap&) {},
                 [&](const Touch& c) { j["sensor"] = to_string(c.sensor); },
                 [&](const SetInputMode& c) { j["mode"] = to_string(c.mode); },
                 [&](const MovePerson& c) {
                   j["id"] = c.id;
                   j["x"] = c.x;
                   j["y"] = c.y;
                 },
                 [&](const SetHardware& c) {
                   j["field"] = c.field;
                   j["value"] = c.value;
                 },
             },
             command);
  return dump(j);
}

Command decode_command(std::string_view frame) {
  json j = json::parse(frame, nullptr, false);
  if (j.is_discarded()) throw ConsoleError("command is not valid JSON");
  if (!j.is_object()) throw ConsoleError("command must be a JSON object");
  const auto kind = field<std::string>(j, "kind");
  if (kind == "send_text") {
    auto text = field<std::string>(j, "text");
    if (text.empty()) throw ConsoleError("send_text needs non-empty text");
    return SendText{text};
  }
  if (kind == "simulate_audio") {
    auto duration = field<std::int64_t>(j, "duration_ms");
    if (duration <= 0) throw ConsoleError("simulate_audio needs a positive duration_ms");
    return SimulateAudio{duration, j.contains("label") ? field<std::string>(j, "label") : std::string()};
  }
  if (kind == "tap") return Tap{};
  if (kind == "touch") {
    auto name = field<std::string>(j, "sensor");
    auto sensor = parse_touch_sensor(name);
    if (!sensor) throw ConsoleError("unknown touch sensor '" + name + "'");
    return Touch{*sensor};
  }
  if (kind == "set_input_mode") {
    auto name = field<std::string>(j, "mode");
    auto mode = parse_input_mode(name);
    if (!mode) throw ConsoleError("unknown input mode '" + name + "'");
    return SetInputMode{*mode};
  }
  if (kind == "move_person") {
    MovePerson c{field<std::string>(j, "id"), field<double>(j, "x"), field<double>(j, "y")};
    if (!std::isfinite(c.x) || !std::isfinite(c.y)) throw ConsoleError("move_person needs finite coordinates");
    return c;
  }
  if (kind == "set_hardware") {
    const json& value = j.contains("value") ? j.at("value") : json();
    std::string text;
    if (value.is_string()) text = value.get<std::string>();
    else if (value.is_boolean() || value.is_number()) text = value.dump();
    else throw ConsoleError("set_hardware needs a scalar value");
    return SetHardware{field<std::string>(j, "field"), text};
  }
  throw ConsoleError("unknown command kind '" + kind + "'");
}

std::string encode_state(turn::TurnState state) {
  return dump({{"kind", "console.state"}, {"state", turn::to_string(state)}});
}

std::string encode_transcript(const TranscriptRecord& r) {
  return dump({{"kind", "console.transcript"},
               {"seq", r.seq},
               {"t_ms", r.t_ms},
               {"direction", r.direction},
               {"entry", r.kind},
               {"body", r.body},
               {"note", r.note},
               {"wire", r.wire}});
}

TranscriptRecord decode_transcript(std::string_view frame) {
  json j = json::parse(frame, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("kind", "") != "console.transcript")
    throw ConsoleError("not a transcript record");
  TranscriptRecord r;
  r.seq = field<std::uint64_t>(j, "seq");
  r.t_ms = field<std::int64_t>(j, "t_ms");
  r.direction = field<std::string>(j, "direction");
  r.kind = field<std::string>(j, "entry");
  r.body = field<std::string>(j, "body");
  r.note = j.value("note", "");
  r.wire = j.value("wire", "");
  return r;
}

std::string encode_card(const FunctionCard& card) {
  json args = json::object();
  for (const auto& [k, v] : card.arguments) args[k] = arg_json(v);
  return dump({{"kind", "console.function_card"},
               {"call_id", card.call_id},
               {"name", card.name},
               {"arguments", args},
               {"payload", card.payload},
               {"is_error", card.is_error},
               {"elapsed_ms", card.elapsed_ms},
               {"self_initiated", card.self_initiated}});
}

std::string encode_world(const SimWorld& world) {
  return dump({{"kind", "console.world"}, {"world", json::parse(world_to_json(world))}});
}

std::string encode_latency(const TurnLatencySample& s) {
  return dump({{"kind", "console.latency"},
               {"turn", s.turn_index},
               {"turn_id", s.turn_id},
               {"t_user_end_ms", s.t_user_end_ms},
               {"t_first_delta_ms", s.t_first_delta_ms},
               {"latency_ms", s.latency_ms}});
}

std::string encode_error(std::string_view reason) {
  return dump({{"kind", "console.error"}, {"reason", std::string(reason)}});
}

std::string feed_kind(std::string_view frame) {
  json j = json::parse(frame, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("kind") || !j["kind"].is_string()) return {};
  return j["kind"].get<std::string>();
}

}  // namespace console

ConsoleClient::ConsoleClient(net::TcpStream stream) : stream_(std::move(stream)) {
  reader_ = std::thread([this] {
    try {
      while (auto line = stream_.read_line())
        if (!line->empty()) inbound_.push(std::move(*line));
    } catch (const net::NetError&) {
    }
    inbound_.close();
  });
}

ConsoleClient::~ConsoleClient() {
  close();
  if (reader_.joinable()) reader_.join();
}

std::unique_ptr<ConsoleClient> ConsoleClient::connect(const net::Endpoint& endpoint,
                                                      std::chrono::milliseconds timeout) {
  return std::unique_ptr<ConsoleClient>(new ConsoleClient(net::TcpStream::connect(endpoint, timeout)));
}

void ConsoleClient::send(const console::Command& command) { stream_.write_line(console::encode_command(command)); }

void ConsoleClient::send_raw(std::string_view line) { stream_.write_line(line); }

std::optional<std::string> ConsoleClient::next() { return inbound_.pop(); }

std::optional<std::string> ConsoleClient::next_for(std::chrono::milliseconds timeout) {
  return inbound_.pop_for(timeout);
}

std::optional<std::string> ConsoleClient::wait_for(const std::function<bool(const std::string&)>& pred,
                                                   std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (auto frame = inbound_.pop_until(deadline))
    if (pred(*frame)) return frame;
  return std::nullopt;
}

void ConsoleClient::close() { stream_.shutdown(); }

}  // namespace s2s
