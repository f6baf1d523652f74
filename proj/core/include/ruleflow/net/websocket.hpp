#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruleflow/net/socket.hpp"

namespace ruleflow::net::ws {

inline constexpr std::uint8_t kOpText = 0x1;
inline constexpr std::uint8_t kOpBinary = 0x2;
inline constexpr std::uint8_t kOpClose = 0x8;
inline constexpr std::uint8_t kOpPing = 0x9;
inline constexpr std::uint8_t kOpPong = 0xa;

/// Sec-WebSocket-Accept derivation (RFC 6455 §4.2.2).
std::string accept_key(std::string_view client_key);

/// Single unfragmented frame. Client-to-server frames must be masked.
std::vector<std::uint8_t> encode_frame(std::uint8_t opcode, std::string_view payload,
                                       bool mask, std::uint32_t masking_key = 0);

struct Frame {
  std::uint8_t opcode = 0;
  bool fin = true;
  std::string payload;
};

/// Reads one frame, unmasking if needed; false on EOF/error.
bool read_frame(Socket& socket, Frame& out);

/// Client side of the handshake plus text-frame IO; used by the test
/// subscribers and the command-line harness.
class ClientConnection {
 public:
  static ClientConnection connect(const std::string& host, std::uint16_t port,
                                  const std::string& path,
                                  std::chrono::milliseconds timeout =
                                      std::chrono::milliseconds(3000));

  void send_text(std::string_view text);
  /// Next text frame; PING is answered transparently; nullopt on
  /// timeout or when the server closes.
  std::optional<std::string> receive_text(std::chrono::milliseconds timeout);
  void close();

  bool open() const { return socket_.valid(); }

 private:
  explicit ClientConnection(Socket socket) : socket_(std::move(socket)) {}

  Socket socket_;
};

}  // namespace ruleflow::net::ws
