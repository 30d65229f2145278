#pragma once

// Function-calling core: tool descriptors, argument validation against the
// declared schema, and execution that always yields exactly one result.

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2s/protocol.hpp"

namespace s2s {

class RobotController;
class ExternalServices;
struct SessionData;

enum class Capability { None, Robot, Network };

std::string_view to_string(Capability capability);

struct ToolCall {
  std::string call_id;
  std::string name;
  Arguments arguments;
  bool self_initiated = false;  // started by the runtime, not requested by the model
};

/// Arguments normalized to their declared types; undeclared keys removed.
struct ValidatedCall {
  std::string call_id;
  std::string name;
  Arguments arguments;

  bool has(const std::string& key) const { return arguments.count(key) > 0; }
  const std::string& text(const std::string& key) const { return std::get<std::string>(arguments.at(key)); }
  double number(const std::string& key) const { return std::get<double>(arguments.at(key)); }
  std::int64_t integer(const std::string& key) const { return std::get<std::int64_t>(arguments.at(key)); }
  bool flag(const std::string& key) const { return std::get<bool>(arguments.at(key)); }
};

struct ToolOutput {
  std::string payload;
  bool is_error = false;

  static ToolOutput ok(std::string payload) { return {std::move(payload), false}; }
  static ToolOutput error(std::string payload) { return {std::move(payload), true}; }
};

struct ToolResult {
  std::string call_id;
  std::string payload;
  bool is_error = false;
  std::int64_t elapsed_ms = 0;

  ToolResultEvent to_event() const { return {call_id, payload, is_error}; }
};

/// UI record of one tool execution.
struct FunctionCard {
  std::string call_id;
  std::string name;
  Arguments arguments;
  std::string payload;
  bool is_error = false;
  std::int64_t elapsed_ms = 0;
  bool self_initiated = false;
};

/// What a handler may reach. Null members are unavailable capabilities.
struct ExecutionContext {
  std::shared_ptr<RobotController> robot;
  std::shared_ptr<ExternalServices> network;
  std::shared_ptr<SessionData> session;
  std::function<void(const ContextInjection&)> inject;
  std::function<void(const FunctionCard&)> card_sink;
  std::function<std::chrono::system_clock::time_point()> clock;

  std::chrono::system_clock::time_point now() const {
    return clock ? clock() : std::chrono::system_clock::now();
  }
};

using ToolHandler = std::function<ToolOutput(const ValidatedCall&, const ExecutionContext&)>;

struct ToolDescriptor {
  ToolSchema schema;
  ToolHandler handler;
  Capability required_capability = Capability::None;
};

enum class ToolErrc { UnknownTool, MissingParam, TypeMismatch, DuplicateName };

std::string_view to_string(ToolErrc code);

class ToolError : public std::runtime_error {
 public:
  ToolError(ToolErrc code, std::string subject, const std::string& what)
      : std::runtime_error(what), code_(code), subject_(std::move(subject)) {}
  ToolErrc code() const noexcept { return code_; }
  /// Tool or parameter name the error is about.
  const std::string& subject() const noexcept { return subject_; }

 private:
  ToolErrc code_;
  std::string subject_;
};

/// Populate during setup, then share freely: lookups take a shared lock.
class ToolRegistry {
 public:
  /// Throws ToolError(DuplicateName) or ProtocolError for an ill-formed schema.
  void register_tool(ToolDescriptor descriptor);

  /// Throws ToolError(UnknownTool | MissingParam | TypeMismatch).
  ValidatedCall validate_call(const ToolCall& call) const;

  /// Never throws for tool failures; every outcome is a ToolResult.
  ToolResult execute(const ToolCall& call, const ExecutionContext& context) const;

  /// Registration order.
  std::vector<ToolSchema> list_schemas() const;

  bool contains(const std::string& name) const;
  std::size_t size() const;

 private:
  const ToolDescriptor* find(const std::string& name) const;

  mutable std::shared_mutex mutex_;
  std::vector<ToolDescriptor> tools_;
};

}  // namespace s2s
