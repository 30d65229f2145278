#pragma once

// Thin RAII wrappers over POSIX TCP sockets carrying newline-delimited frames.

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace s2s::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  bool operator==(const Endpoint&) const = default;
};

/// Accepts "host:port", "tcp://host:port" and "ws://host:port". Throws NetError.
Endpoint parse_endpoint(std::string_view text);

class TcpStream {
 public:
  TcpStream() = default;
  explicit TcpStream(int fd) : fd_(fd) {}
  TcpStream(TcpStream&& other) noexcept;
  TcpStream& operator=(TcpStream&& other) noexcept;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;
  ~TcpStream();

  static TcpStream connect(const Endpoint& endpoint,
                           std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

  bool valid() const { return fd_ >= 0; }

  /// Writes `line` followed by '\n'. Thread-safe; throws NetError on failure.
  void write_line(std::string_view line);

  /// Next line without its terminator; nullopt on EOF or shutdown.
  /// Single reader only.
  std::optional<std::string> read_line();

  /// Unblocks a pending read_line from another thread.
  void shutdown();
  void close();

 private:
  int fd_ = -1;
  std::string buffer_;
  std::mutex write_mutex_;
};

class TcpListener {
 public:
  TcpListener() = default;
  TcpListener(TcpListener&& other) noexcept;
  TcpListener& operator=(TcpListener&& other) noexcept;
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener();

  /// Port 0 picks an ephemeral port. Throws NetError (BindFailed).
  static TcpListener bind(const Endpoint& endpoint);

  /// Waits up to `timeout`; nullopt on timeout or after close().
  std::optional<TcpStream> accept(std::chrono::milliseconds timeout);

  Endpoint local_endpoint() const { return local_; }
  void close();

 private:
  int fd_ = -1;
  Endpoint local_;
};

}  // namespace s2s::net
