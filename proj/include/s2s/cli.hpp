#pragma once

// Command-line front ends for the gateway, the mock backend and the console
// control tool. Each returns a process exit code.

#include <string>
#include <vector>

#include "s2s/gateway.hpp"

namespace s2s::cli {

/// Parsed gateway flags plus process-level settings.
struct GatewayOptions {
  GatewayConfig config;
  double run_seconds = 0.0;  // 0: until the session ends or a signal arrives
  std::string log_level = "info";
};

class UsageError : public std::runtime_error {
 public:
  UsageError(int exit_code, const std::string& message) : std::runtime_error(message), exit_code_(exit_code) {}
  /// 0 for --help.
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

/// Throws UsageError (with the help or error text) or ConfigError.
GatewayOptions parse_gateway_args(const std::vector<std::string>& args);

int gateway_main(int argc, char** argv);
int mock_main(int argc, char** argv);
int ctl_main(int argc, char** argv);

}  // namespace s2s::cli
