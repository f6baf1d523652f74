#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ruleflow::net {

/// Move-only owner of a connected or listening TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();

  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect_tcp(const std::string& host, std::uint16_t port,
                            std::chrono::milliseconds timeout);  // ConnectionFailed
  /// `port` 0 binds an ephemeral port; read it back via local_port().
  static Socket listen_tcp(const std::string& bind_addr, std::uint16_t port,
                           int backlog = 64);  // kIo on bind failure

  std::optional<Socket> accept();  // nullopt once the socket is closed

  /// Reads at most `len` bytes; 0 on orderly shutdown, -1 on error/timeout.
  long read_some(void* buf, std::size_t len);
  bool write_all(const void* buf, std::size_t len);
  bool write_all(std::string_view data) { return write_all(data.data(), data.size()); }
  bool read_exact(void* buf, std::size_t len);

  void set_recv_timeout(std::chrono::milliseconds timeout);
  void set_nodelay(bool on);

  std::uint16_t local_port() const;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  /// Wakes any blocked reader/writer; safe to call from another thread.
  void shutdown_both();
  void close();

 private:
  int fd_ = -1;
};

/// Incremental newline-delimited reader over a socket.
class LineReader {
 public:
  explicit LineReader(Socket& socket, std::size_t max_line = 1 << 20)
      : socket_(socket), max_line_(max_line) {}

  /// Next line without the trailing '\n' (a trailing '\r' is stripped);
  /// nullopt on EOF or error. Oversized lines are discarded and reported
  /// as empty-with-error via `line_too_long`.
  std::optional<std::string> next_line();

  bool line_too_long() const { return line_too_long_; }

 private:
  Socket& socket_;
  std::string buffer_;
  std::size_t max_line_;
  bool line_too_long_ = false;
};

}  // namespace ruleflow::net
