#include "s2s/tool_registry.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <mutex>


namespace s2s {

namespace {

[[noreturn]] void mismatch(const ParamSpec& p, const ArgValue& got) {
  throw ToolError(ToolErrc::TypeMismatch, p.name,
                  "parameter '" + p.name + "' expects " + std::string(to_string(p.type)) + ", got '" + to_string(got) +
                      "'");
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

void check_range(const ParamSpec& p, double v, const ArgValue& got) {
  if ((p.minimum && v < *p.minimum) || (p.maximum && v > *p.maximum)) {
    throw ToolError(ToolErrc::TypeMismatch, p.name,
                    "parameter '" + p.name + "' value " + to_string(got) + " is outside [" +
                        (p.minimum ? to_string(ArgValue(*p.minimum)) : std::string("-inf")) + ", " +
                        (p.maximum ? to_string(ArgValue(*p.maximum)) : std::string("inf")) + "]");
  }
}

ArgValue normalize(const ParamSpec& p, const ArgValue& value) {
  switch (p.type) {
    case ParamType::String:
      if (!std::holds_alternative<std::string>(value)) mismatch(p, value);
      return value;
    case ParamType::Number: {
      std::optional<double> v;
      if (const auto* d = std::get_if<double>(&value)) v = *d;
      else if (const auto* i = std::get_if<std::int64_t>(&value)) v = static_cast<double>(*i);
      else if (const auto* s = std::get_if<std::string>(&value)) v = parse_real(*s);
      if (!v || !std::isfinite(*v)) mismatch(p, value);
      check_range(p, *v, value);
      return *v;
    }
    case ParamType::Integer: {
      std::optional<std::int64_t> v;
      if (const auto* i = std::get_if<std::int64_t>(&value)) {
        v = *i;
      } else if (const auto* d = std::get_if<double>(&value)) {
        if (std::isfinite(*d) && std::floor(*d) == *d && std::fabs(*d) < 9.0e15) v = static_cast<std::int64_t>(*d);
      } else if (const auto* s = std::get_if<std::string>(&value)) {
        if (auto r = parse_real(*s); r && std::floor(*r) == *r && std::fabs(*r) < 9.0e15)
          v = static_cast<std::int64_t>(*r);
      }
      if (!v) mismatch(p, value);
      check_range(p, static_cast<double>(*v), value);
      return *v;
    }
    case ParamType::Boolean:
      if (std::holds_alternative<bool>(value)) return value;
      if (const auto* s = std::get_if<std::string>(&value)) {
        if (*s == "true") return true;
        if (*s == "false") return false;
      }
      mismatch(p, value);
    case ParamType::Enum: {
      const auto* s = std::get_if<std::string>(&value);
      if (!s) mismatch(p, value);
      for (const auto& allowed : p.enum_values)
        if (allowed == *s) return value;
      mismatch(p, value);
    }
  }
  mismatch(p, value);
}

bool is_blank(const ArgValue& v) {
  const auto* s = std::get_if<std::string>(&v);
  return s && s->find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::string_view to_string(Capability capability) {
  switch (capability) {
    case Capability::None: return "none";
    case Capability::Robot: return "robot";
    case Capability::Network: return "network";
  }
  return "?";
}

std::string_view to_string(ToolErrc code) {
  switch (code) {
    case ToolErrc::UnknownTool: return "UnknownTool";
    case ToolErrc::MissingParam: return "MissingParam";
    case ToolErrc::TypeMismatch: return "TypeMismatch";
    case ToolErrc::DuplicateName: return "DuplicateName";
  }
  return "?";
}

void ToolRegistry::register_tool(ToolDescriptor descriptor) {
  check_schema(descriptor.schema);
  if (!descriptor.handler) throw std::invalid_argument("tool '" + descriptor.schema.name + "' has no handler");
  std::unique_lock lock(mutex_);
  for (const auto& t : tools_)
    if (t.schema.name == descriptor.schema.name)
      throw ToolError(ToolErrc::DuplicateName, t.schema.name, "tool '" + t.schema.name + "' is already registered");
  tools_.push_back(std::move(descriptor));
}

const ToolDescriptor* ToolRegistry::find(const std::string& name) const {
  for (const auto& t : tools_)
    if (t.schema.name == name) return &t;
  return nullptr;
}

bool ToolRegistry::contains(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return find(name) != nullptr;
}

std::size_t ToolRegistry::size() const {
  std::shared_lock lock(mutex_);
  return tools_.size();
}

std::vector<ToolSchema> ToolRegistry::list_schemas() const {
  std::shared_lock lock(mutex_);
  std::vector<ToolSchema> out;
  out.reserve(tools_.size());
  for (const auto& t : tools_) out.push_back(t.schema);
  return out;
}

ValidatedCall ToolRegistry::validate_call(const ToolCall& call) const {
  std::shared_lock lock(mutex_);
  const ToolDescriptor* tool = find(call.name);
  if (!tool) throw ToolError(ToolErrc::UnknownTool, call.name, "unknown tool '" + call.name + "'");
  ValidatedCall out{call.call_id, call.name, {}};
  for (const auto& p : tool->schema.parameters) {
    auto it = call.arguments.find(p.name);
    if (it == call.arguments.end() || (p.required && is_blank(it->second))) {
      if (p.required)
        throw ToolError(ToolErrc::MissingParam, p.name,
                        "missing required parameter '" + p.name + "' for " + call.name);
      continue;
    }
    out.arguments.emplace(p.name, normalize(p, it->second));
  }
  return out;
}

ToolResult ToolRegistry::execute(const ToolCall& call, const ExecutionContext& context) const {
  const auto started = std::chrono::steady_clock::now();
  ToolOutput output;
  try {
    ValidatedCall valid = validate_call(call);
    const ToolDescriptor* tool = nullptr;
    {
      std::shared_lock lock(mutex_);
      tool = find(call.name);
    }
    const bool missing_robot = tool->required_capability == Capability::Robot && !context.robot;
    const bool missing_network = tool->required_capability == Capability::Network && !context.network;
    if (missing_robot || missing_network) {
      output = ToolOutput::error("tool '" + call.name + "' requires the " +
                                 std::string(to_string(tool->required_capability)) +
                                 " capability, which is not available on this deployment");
    } else {
      output = tool->handler(valid, context);
    }
  } catch (const ToolError& e) {
    output = ToolOutput::error(std::string(to_string(e.code())) + ": " + e.what());
  } catch (const std::exception& e) {
    output = ToolOutput::error("tool '" + call.name + "' failed: " + e.what());
  } catch (...) {
    output = ToolOutput::error("tool '" + call.name + "' failed with an unknown error");
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
  ToolResult result{call.call_id, std::move(output.payload), output.is_error, std::max<std::int64_t>(0, elapsed.count())};
  if (context.card_sink) {
    try {
      context.card_sink(FunctionCard{call.call_id, call.name, call.arguments, result.payload, result.is_error,
                                     result.elapsed_ms, call.self_initiated});
    } catch (...) {
    }
  }
  return result;
}

}  // namespace s2s
