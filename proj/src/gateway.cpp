#include "s2s/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace s2s {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string args_text(const Arguments& args) {
  std::string out;
  for (const auto& [k, v] : args) {
    if (!out.empty()) out += ", ";
    out += k + "=" + to_string(v);
  }
  return out;
}

// Direction, kind and body of the transcript line for one session event.
TranscriptRecord describe(const SessionEvent& event) {
  TranscriptRecord r;
  r.wire = std::string(kind_of(event));
  std::visit(overloaded{
                 [&](const AudioInputChunk& e) {
                   r.direction = "user";
                   r.kind = "audio-ms";
                   r.body = std::to_string(e.duration_ms) + " ms";
                   if (!e.payload_ref.empty()) r.body += " \"" + e.payload_ref + "\"";
                   if (e.final) r.body += " (final)";
                 },
                 [&](const TextInput& e) {
                   r.direction = "user";
                   r.kind = "text";
                   r.body = e.text;
                 },
                 [&](const ContextInjection& e) {
                   r.direction = "system";
                   r.kind = "context";
                   r.body = e.message;
                 },
                 [&](const ToolResultEvent& e) {
                   r.direction = "system";
                   r.kind = "tool-result";
                   r.body = e.call_id + (e.is_error ? " (error): " : ": ") + e.payload;
                 },
                 [&](const InterruptRequest& e) {
                   r.direction = "user";
                   r.kind = "control";
                   r.body = "interrupt " + e.turn_id;
                 },
                 [&](const SessionConfig& e) {
                   r.direction = "system";
                   r.kind = "control";
                   r.body = "session config: " + std::to_string(e.tool_schemas.size()) + " tools, input " +
                            std::string(to_string(e.input_mode));
                 },
                 [&](const ModelTurnStart& e) {
                   r.direction = "model";
                   r.kind = "control";
                   r.body = "turn start " + e.turn_id;
                 },
                 [&](const ModelTurnEnd& e) {
                   r.direction = "model";
                   r.kind = "control";
                   r.body = "turn end " + e.turn_id;
                 },
                 [&](const ModelTextDelta& e) {
                   r.direction = "model";
                   r.kind = "text";
                   r.body = e.text;
                 },
                 [&](const ModelAudioDelta& e) {
                   r.direction = "model";
                   r.kind = "audio-ms";
                   r.body = std::to_string(e.duration_ms) + " ms";
                 },
                 [&](const ToolCallRequest& e) {
                   r.direction = "model";
                   r.kind = "tool-call";
                   r.body = e.name + "(" + args_text(e.arguments) + ") [" + e.call_id + "]";
                 },
                 [&](const SessionAck& e) {
                   r.direction = "system";
                   r.kind = "control";
                   r.body = "session ack " + e.session_id;
                 },
                 [&](const SessionError& e) {
                   r.direction = "system";
                   r.kind = "control";
                   r.body = "session error: " + e.reason;
                 },
             },
             event);
  return r;
}

bool is_trigger(const SessionEvent& event) {
  if (std::holds_alternative<TextInput>(event) || std::holds_alternative<ToolResultEvent>(event)) return true;
  if (const auto* a = std::get_if<AudioInputChunk>(&event)) return a->final;
  if (const auto* c = std::get_if<ContextInjection>(&event)) return c->request_response;
  return false;
}

std::optional<std::string> turn_of(const SessionEvent& event) {
  if (const auto* e = std::get_if<ModelTextDelta>(&event)) return e->turn_id;
  if (const auto* e = std::get_if<ModelAudioDelta>(&event)) return e->turn_id;
  if (const auto* e = std::get_if<ModelTurnStart>(&event)) return e->turn_id;
  if (const auto* e = std::get_if<ModelTurnEnd>(&event)) return e->turn_id;
  return std::nullopt;
}

}  // namespace

void validate(const GatewayConfig& config) {
  for (const auto* path : {&config.world_path, &config.rules_path})
    if (*path && !std::filesystem::exists(**path)) throw ConfigError("file not found: " + (*path)->string());
  if (config.stt_confidence < 0.0 || config.stt_confidence > 1.0)
    throw ConfigError("stt confidence must lie in [0, 1]");
  if (config.audio_chunk_ms <= 0) throw ConfigError("audio chunk length must be positive");
  if (config.perception_period.count() <= 0 || config.world_snapshot_period.count() <= 0)
    throw ConfigError("tick periods must be positive");
}

std::int64_t estimate_speech_ms(std::string_view text) {
  std::int64_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return std::max<std::int64_t>(500, words * 400);
}

std::vector<SessionEvent> input_mode_transform(InputMode mode, const Utterance& utterance, std::int64_t& next_seq,
                                               std::int64_t chunk_ms, double confidence) {
  std::vector<SessionEvent> out;
  if (mode == InputMode::Stt) {
    out.push_back(TextInput{utterance.text.empty() ? "[unintelligible]" : utterance.text, confidence});
    return out;
  }
  std::int64_t remaining = std::max<std::int64_t>(0, utterance.duration_ms);
  do {
    AudioInputChunk chunk;
    chunk.seq = next_seq++;
    chunk.duration_ms = std::min(chunk_ms, remaining);
    remaining -= chunk.duration_ms;
    if (out.empty()) chunk.payload_ref = utterance.text;
    chunk.final = remaining == 0;
    out.push_back(std::move(chunk));
  } while (remaining > 0);
  return out;
}

std::string format_latency_table(const std::vector<TurnLatencySample>& samples) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-6s %-12s %12s %14s %11s\n", "turn", "turn_id", "t_user_end_ms",
                "t_first_delta", "latency_ms");
  out << line;
  for (const auto& s : samples) {
    std::snprintf(line, sizeof(line), "%-6d %-12s %12lld %14lld %11lld\n", s.turn_index, s.turn_id.c_str(),
                  static_cast<long long>(s.t_user_end_ms), static_cast<long long>(s.t_first_delta_ms),
                  static_cast<long long>(s.latency_ms));
    out << line;
  }
  return out.str();
}

Gateway::Gateway(GatewayConfig config)
    : config_(std::move(config)), turns_(config_.gate_during_thinking), mode_(config_.input_mode),
      mode_snapshot_(config_.input_mode) {
  validate(config_);
  SimWorld world = config_.world_path ? load_world(*config_.world_path) : config_.world;
  validate_world(world);
  std::vector<Rule> rules = config_.rules_path ? load_rules(*config_.rules_path) : std::vector<Rule>{};
  rules.insert(rules.end(), config_.rules.begin(), config_.rules.end());
  rule_engine_ = RuleEngine(std::move(rules));

  register_builtin_tools(registry_, config_.builtin);
  t0_ = std::chrono::steady_clock::now();
  robot_ = std::make_shared<SimRobotController>(std::move(world), [this] { return now_ms(); });
  services_ = std::make_shared<ExternalServices>(config_.services);
  session_data_ = std::make_shared<SessionData>();

  context_.robot = robot_;
  context_.network = services_;
  context_.session = session_data_;
  context_.inject = [this](const ContextInjection& c) { queue_.push(InjectItem{c}); };
  context_.card_sink = [this](const FunctionCard& card) { queue_.push(CardItem{card}); };
  context_.clock = config_.clock;

  robot_->subscribe([this](const RobotEvent& e) { queue_.push(RobotItem{e}); });
  if (config_.transcript_path) {
    transcript_out_ = std::make_unique<std::ofstream>(*config_.transcript_path, std::ios::app);
    if (!*transcript_out_) throw ConfigError("cannot open transcript file " + config_.transcript_path->string());
  }
}

Gateway::~Gateway() { stop(); }

std::int64_t Gateway::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0_).count();
}

void Gateway::start() {
  {
    std::lock_guard lock(state_mutex_);
    if (started_) return;
    started_ = true;
  }
  SessionConfig session_config{registry_.list_schemas(), mode_, config_.system_prompt};
  session_ = open_session(session_config, config_.backend, make_adapter(config_.adapter), config_.connect_timeout);
  record(describe(session_config));
  record(describe(SessionAck{session_->session_id()}));

  if (config_.console_bind) {
    console_listener_ = net::TcpListener::bind(*config_.console_bind);
    console_endpoint_ = console_listener_->local_endpoint();
    if (console_endpoint_->host == "0.0.0.0") console_endpoint_->host = "127.0.0.1";
    console_thread_ = std::thread([this] { accept_console(); });
  }

  apply(turns_.handle(turn::TurnEvent::SessionOpened));
  loop_thread_ = std::thread([this] { loop(); });
  pump_thread_ = std::thread([this] {
    while (auto event = session_->next()) queue_.push(Inbound{std::move(*event)});
    queue_.push(SessionEnded{});
  });
  ticker_thread_ = std::thread([this] { ticker(); });
}

void Gateway::stop() {
  {
    std::lock_guard lock(state_mutex_);
    if (stopped_) return;
    stopped_ = true;
  }
  {
    std::lock_guard lock(stop_mutex_);
    stopping_ = true;
  }
  stop_cv_.notify_all();
  if (session_) session_->close();
  if (pump_thread_.joinable()) pump_thread_.join();
  if (ticker_thread_.joinable()) ticker_thread_.join();
  if (console_thread_.joinable()) console_thread_.join();
  for (;;) {
    std::list<std::thread> workers;
    {
      std::lock_guard lock(workers_mutex_);
      workers.swap(workers_);
    }
    if (workers.empty()) break;
    for (auto& w : workers) w.join();
  }
  queue_.push(StopItem{});
  if (loop_thread_.joinable()) loop_thread_.join();
  queue_.close();
  {
    std::lock_guard lock(console_mutex_);
    for (auto& s : console_streams_) s->shutdown();
  }
  for (auto& r : console_readers_) r.join();
  if (console_listener_) console_listener_->close();

  if (config_.latency_report_path) {
    std::ofstream out(*config_.latency_report_path);
    out << format_latency_table(latency_samples());
  }
  std::lock_guard lock(state_mutex_);
  loop_done_ = true;
  state_cv_.notify_all();
}

void Gateway::wait() {
  std::unique_lock lock(state_mutex_);
  state_cv_.wait(lock, [&] { return loop_done_ || !started_; });
}

bool Gateway::running() const {
  std::lock_guard lock(state_mutex_);
  return started_ && !loop_done_;
}

void Gateway::submit(console::Command command) { queue_.push(CommandItem{std::move(command)}); }

std::optional<net::Endpoint> Gateway::console_endpoint() const { return console_endpoint_; }

std::string Gateway::session_id() const { return session_ ? session_->session_id() : std::string(); }

std::vector<TranscriptRecord> Gateway::transcript() const {
  std::lock_guard lock(state_mutex_);
  return transcript_;
}

std::vector<TurnLatencySample> Gateway::latency_samples() const {
  std::lock_guard lock(state_mutex_);
  return samples_;
}

std::vector<FunctionCard> Gateway::function_cards() const {
  std::lock_guard lock(state_mutex_);
  return cards_;
}

std::vector<turn::TurnAction> Gateway::action_log() const {
  std::lock_guard lock(state_mutex_);
  return actions_;
}

turn::TurnState Gateway::state() const {
  std::lock_guard lock(state_mutex_);
  return state_snapshot_;
}

InputMode Gateway::input_mode() const {
  std::lock_guard lock(state_mutex_);
  return mode_snapshot_;
}

SimWorld Gateway::world() const { return robot_->snapshot(); }

bool Gateway::wait_for_transcript(const std::function<bool(const std::vector<TranscriptRecord>&)>& pred,
                                  std::chrono::milliseconds timeout) const {
  std::unique_lock lock(state_mutex_);
  return state_cv_.wait_for(lock, timeout, [&] { return pred(transcript_); });
}

// ---- loop thread ----

void Gateway::loop() {
  while (auto item = queue_.pop()) {
    if (std::holds_alternative<StopItem>(*item)) break;
    std::visit([this](auto& i) { handle(i); }, *item);
  }
}

void Gateway::record(TranscriptRecord r) {
  r.t_ms = now_ms();
  {
    std::lock_guard lock(state_mutex_);
    r.seq = transcript_.size() + 1;
    transcript_.push_back(r);
  }
  state_cv_.notify_all();
  const std::string frame = console::encode_transcript(r);
  if (transcript_out_) *transcript_out_ << frame << '\n' << std::flush;
  feed(frame);
}

void Gateway::feed(const std::string& frame) {
  if (!console_stream_) return;
  try {
    console_stream_->write_line(frame);
  } catch (const net::NetError&) {
    console_stream_.reset();
  }
}

void Gateway::apply(const std::vector<turn::TurnAction>& actions) {
  {
    std::lock_guard lock(state_mutex_);
    actions_.insert(actions_.end(), actions.begin(), actions.end());
  }
  for (const auto& a : actions) {
    std::visit(overloaded{
                   [&](const turn::action::OpenMic&) { mic_open_ = true; },
                   [&](const turn::action::CloseMic&) { mic_open_ = false; },
                   [&](const turn::action::ForwardToSession& f) { send_event(f.event); },
                   [&](const turn::action::CancelModelTurn&) {
                     if (!current_turn_) return;
                     cancelled_turns_.insert(*current_turn_);
                     send_event(InterruptRequest{*current_turn_});
                   },
                   [&](const turn::action::DropBufferedAudio&) {},
                   [&](const turn::action::EmitStateChange& s) {
                     {
                       std::lock_guard lock(state_mutex_);
                       state_snapshot_ = s.state;
                     }
                     record({0, 0, "system", "state-change", std::string(turn::to_string(s.state)), "", ""});
                     feed(console::encode_state(s.state));
                   },
               },
               a);
  }
}

void Gateway::send_event(const SessionEvent& event) {
  try {
    session_->send(event);
  } catch (const std::exception& e) {
    TranscriptRecord r = describe(event);
    r.wire.clear();
    r.note = "send failed";
    record(r);
    feed(console::encode_error(std::string("send failed: ") + e.what()));
    return;
  }
  record(describe(event));
  if (is_trigger(event)) pending_trigger_ms_ = now_ms();
}

void Gateway::offer_user_input(const Utterance& utterance) {
  auto events = input_mode_transform(mode_, utterance, next_seq_, config_.audio_chunk_ms, config_.stt_confidence);
  if (turns_.gate(events.front()) == turn::Gate::Block) {
    for (const auto& e : events) {
      TranscriptRecord r = describe(e);
      r.wire.clear();
      r.note = "gated";
      record(r);
    }
    return;
  }
  apply(turns_.handle(turn::TurnEvent::UserInputStart));
  for (const auto& e : events) apply(turns_.offer(e));
  apply(turns_.handle(turn::TurnEvent::UserInputEnd));
}

void Gateway::handle(Inbound& item) {
  const SessionEvent& event = item.event;
  const auto turn_id = turn_of(event);
  const bool is_delta =
      std::holds_alternative<ModelTextDelta>(event) || std::holds_alternative<ModelAudioDelta>(event);
  if (is_delta && turn_id && cancelled_turns_.count(*turn_id)) {
    TranscriptRecord r = describe(event);
    r.note = "dropped";
    record(r);
    return;
  }
  record(describe(event));
  const std::int64_t t = now_ms();

  if (const auto* start = std::get_if<ModelTurnStart>(&event)) {
    current_turn_ = start->turn_id;
    open_turn_ = OpenTurn{start->turn_id, pending_trigger_ms_, std::nullopt, false};
    pending_trigger_ms_.reset();
  } else if (is_delta && open_turn_ && open_turn_->turn_id == *turn_id && !open_turn_->sampled) {
    if (std::holds_alternative<ModelTextDelta>(event)) {
      if (!open_turn_->first_text_ms) open_turn_->first_text_ms = t;
    } else if (open_turn_->trigger_ms) {
      open_turn_->sampled = true;
      TurnLatencySample s{++turn_index_, *turn_id, *open_turn_->trigger_ms, t, t - *open_turn_->trigger_ms};
      {
        std::lock_guard lock(state_mutex_);
        samples_.push_back(s);
      }
      feed(console::encode_latency(s));
    }
  } else if (std::holds_alternative<ModelTurnEnd>(event)) {
    if (open_turn_ && open_turn_->turn_id == *turn_id && !open_turn_->sampled && open_turn_->trigger_ms &&
        open_turn_->first_text_ms) {
      TurnLatencySample s{++turn_index_, *turn_id, *open_turn_->trigger_ms, *open_turn_->first_text_ms,
                          *open_turn_->first_text_ms - *open_turn_->trigger_ms};
      {
        std::lock_guard lock(state_mutex_);
        samples_.push_back(s);
      }
      feed(console::encode_latency(s));
    }
    if (open_turn_ && open_turn_->turn_id == *turn_id) open_turn_.reset();
    if (current_turn_ == turn_id) current_turn_.reset();
  }

  // A cancelled turn's closing frame must not reopen the mic a second time.
  if (!(std::holds_alternative<ModelTurnEnd>(event) && turn_id && cancelled_turns_.count(*turn_id)))
    apply(turns_.on_session_event(event));

  if (const auto* call = std::get_if<ToolCallRequest>(&event)) {
    start_tool(ToolCall{call->call_id, call->name, call->arguments, false});
  } else if (const auto* err = std::get_if<SessionError>(&event)) {
    feed(console::encode_error("backend: " + err->reason));
  }
}

void Gateway::handle(SessionEnded&) {
  apply(turns_.handle(turn::TurnEvent::SessionClosed));
  {
    std::lock_guard lock(state_mutex_);
    loop_done_ = true;
  }
  state_cv_.notify_all();
}

void Gateway::handle(CommandItem& item) {
  std::visit(overloaded{
                 [&](const console::SendText& c) { offer_user_input({c.text, estimate_speech_ms(c.text)}); },
                 [&](const console::SimulateAudio& c) { offer_user_input({c.label, c.duration_ms}); },
                 [&](const console::Tap&) { apply(turns_.handle(turn::TurnEvent::InterruptTapped)); },
                 [&](const console::Touch& c) { robot_->touch(c.sensor); },
                 [&](const console::SetInputMode& c) {
                   mode_ = c.mode;
                   {
                     std::lock_guard lock(state_mutex_);
                     mode_snapshot_ = c.mode;
                   }
                   record({0, 0, "system", "control", "input mode " + std::string(to_string(c.mode)), "", ""});
                 },
                 [&](const console::MovePerson& c) {
                   try {
                     robot_->move_person(c.id, {c.x, c.y});
                   } catch (const RobotError& e) {
                     feed(console::encode_error(e.what()));
                   }
                 },
                 [&](const console::SetHardware& c) {
                   try {
                     robot_->set_hardware(c.field, c.value);
                   } catch (const RobotError& e) {
                     feed(console::encode_error(e.what()));
                   }
                 },
             },
             item.command);
}

void Gateway::handle(ConsoleProblem& item) { feed(console::encode_error(item.reason)); }

void Gateway::handle(ConsoleJoined& item) {
  if (console_stream_) console_stream_->shutdown();
  console_stream_ = item.stream;
  // Replay so a reconnecting console rebuilds its view.
  for (const auto& r : transcript()) feed(console::encode_transcript(r));
  for (const auto& c : function_cards()) feed(console::encode_card(c));
  for (const auto& s : latency_samples()) feed(console::encode_latency(s));
  feed(console::encode_state(turns_.state()));
  feed(console::encode_world(robot_->snapshot()));
}

void Gateway::handle(RobotItem& item) {
  std::visit(overloaded{
                 [&](const ev::MovementComplete&) {},
                 [&](const ev::MovementBlocked& e) {
                   const std::string call_id = "self-" + std::to_string(++self_calls_);
                   session_->declare_local_call(call_id);
                   apply(turns_.offer(describe_blockage(e)));
                   start_tool(blocked_reflex(e, call_id));
                 },
                 [&](const ev::Touch& e) {
                   apply(turns_.offer(inject_touch(e.sensor)));
                   on_perception({PerceptionKind::Touch, "", std::nullopt, 0.0, e.sensor, now_ms()});
                 },
                 [&](const ev::HardwareChanged& e) {
                   apply(turns_.offer(ContextInjection{"[Hardware status: " + e.field + " is now " + e.value + "]",
                                                       false}));
                 },
             },
             item.event);
}

void Gateway::on_perception(const PerceptionEvent& event) {
  for (const auto& firing : rule_engine_.on_event(event)) apply(turns_.offer(firing.to_injection()));
}

void Gateway::handle(PerceptionTick&) {
  for (const auto& e : tracker_.tick(robot_->snapshot(), now_ms())) on_perception(e);
}

void Gateway::handle(WorldTick&) { feed(console::encode_world(robot_->snapshot())); }

void Gateway::handle(CardItem& item) {
  {
    std::lock_guard lock(state_mutex_);
    cards_.push_back(item.card);
  }
  const auto& c = item.card;
  record({0, 0, "system", "function-card",
          c.name + "(" + args_text(c.arguments) + ") -> " + c.payload + " [" + c.call_id + ", " +
              std::to_string(c.elapsed_ms) + " ms" + (c.is_error ? ", error" : "") + "]",
          "", ""});
  feed(console::encode_card(c));
}

void Gateway::handle(InjectItem& item) { apply(turns_.offer(item.injection)); }

void Gateway::handle(ToolFinished& item) {
  apply(turns_.handle(turn::TurnEvent::ToolExecutionEnded));
  apply(turns_.offer(item.result.to_event()));
}

void Gateway::start_tool(ToolCall call) {
  apply(turns_.handle(turn::TurnEvent::ToolExecutionStarted));
  std::lock_guard lock(workers_mutex_);
  if (stopping_) return;
  workers_.emplace_back([this, call = std::move(call)] {
    ToolResult result = registry_.execute(call, context_);
    queue_.push(ToolFinished{call, std::move(result)});
  });
}

// ---- producer threads ----

void Gateway::ticker() {
  using Clock = std::chrono::steady_clock;
  auto next_perception = Clock::now() + config_.perception_period;
  auto next_world = Clock::now() + config_.world_snapshot_period;
  std::unique_lock lock(stop_mutex_);
  while (!stopping_) {
    stop_cv_.wait_until(lock, std::min(next_perception, next_world), [&] { return stopping_.load(); });
    if (stopping_) break;
    const auto now = Clock::now();
    if (now >= next_perception) {
      queue_.push(PerceptionTick{});
      next_perception += config_.perception_period;
    }
    if (now >= next_world) {
      queue_.push(WorldTick{});
      next_world += config_.world_snapshot_period;
    }
  }
}

void Gateway::accept_console() {
  while (!stopping_) {
    auto stream = console_listener_->accept(std::chrono::milliseconds(50));
    if (!stream) continue;
    auto shared = std::make_shared<net::TcpStream>(std::move(*stream));
    {
      std::lock_guard lock(console_mutex_);
      console_streams_.push_back(shared);
    }
    queue_.push(ConsoleJoined{shared});
    console_readers_.emplace_back([this, shared] {
      try {
        while (auto line = shared->read_line()) {
          if (line->empty()) continue;
          try {
            queue_.push(CommandItem{console::decode_command(*line)});
          } catch (const console::ConsoleError& e) {
            queue_.push(ConsoleProblem{std::string("malformed command: ") + e.what()});
          }
        }
      } catch (const net::NetError& e) {
        queue_.push(ConsoleProblem{e.what()});
      }
    });
  }
}

}  // namespace s2s
