#include "ruleflow/net/websocket.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <random>

#include "ruleflow/error.hpp"

namespace ruleflow::net::ws {
namespace {

constexpr std::string_view kHandshakeGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string base64(const unsigned char* data, std::size_t len) {
  std::string out(4 * ((len + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data,
                          static_cast<int>(len));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

}  // namespace

std::string accept_key(std::string_view client_key) {
  std::string joined(client_key);
  joined += kHandshakeGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  unsigned int digest_len = 0;
  EVP_Digest(joined.data(), joined.size(), digest, &digest_len, EVP_sha1(), nullptr);
  return base64(digest, digest_len);
}

std::vector<std::uint8_t> encode_frame(std::uint8_t opcode, std::string_view payload,
                                       bool mask, std::uint32_t masking_key) {
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 14);
  out.push_back(static_cast<std::uint8_t>(0x80 | (opcode & 0x0f)));  // FIN set

  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  if (payload.size() < 126) {
    out.push_back(static_cast<std::uint8_t>(mask_bit | payload.size()));
  } else if (payload.size() <= 0xffff) {
    out.push_back(mask_bit | 126);
    out.push_back(static_cast<std::uint8_t>(payload.size() >> 8));
    out.push_back(static_cast<std::uint8_t>(payload.size() & 0xff));
  } else {
    out.push_back(mask_bit | 127);
    for (int shift = 56; shift >= 0; shift -= 8) {
      out.push_back(static_cast<std::uint8_t>(payload.size() >> shift & 0xff));
    }
  }

  if (mask) {
    std::uint8_t key[4] = {
        static_cast<std::uint8_t>(masking_key >> 24),
        static_cast<std::uint8_t>(masking_key >> 16),
        static_cast<std::uint8_t>(masking_key >> 8),
        static_cast<std::uint8_t>(masking_key),
    };
    out.insert(out.end(), key, key + 4);
    for (std::size_t i = 0; i < payload.size(); ++i) {
      out.push_back(static_cast<std::uint8_t>(payload[i]) ^ key[i % 4]);
    }
  } else {
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

bool read_frame(Socket& socket, Frame& out) {
  std::uint8_t header[2];
  if (!socket.read_exact(header, 2)) return false;
  out.fin = header[0] & 0x80;
  out.opcode = header[0] & 0x0f;
  const bool masked = header[1] & 0x80;
  std::uint64_t len = header[1] & 0x7f;
  if (len == 126) {
    std::uint8_t ext[2];
    if (!socket.read_exact(ext, 2)) return false;
    len = static_cast<std::uint64_t>(ext[0]) << 8 | ext[1];
  } else if (len == 127) {
    std::uint8_t ext[8];
    if (!socket.read_exact(ext, 8)) return false;
    len = 0;
    for (int i = 0; i < 8; ++i) len = len << 8 | ext[i];
  }
  if (len > (std::uint64_t{1} << 24)) return false;  // refuse absurd frames

  std::uint8_t key[4] = {0, 0, 0, 0};
  if (masked && !socket.read_exact(key, 4)) return false;

  out.payload.resize(static_cast<std::size_t>(len));
  if (len > 0 && !socket.read_exact(out.payload.data(), out.payload.size())) return false;
  if (masked) {
    for (std::size_t i = 0; i < out.payload.size(); ++i) {
      out.payload[i] = static_cast<char>(static_cast<std::uint8_t>(out.payload[i]) ^
                                         key[i % 4]);
    }
  }
  return true;
}

ClientConnection ClientConnection::connect(const std::string& host, std::uint16_t port,
                                           const std::string& path,
                                           std::chrono::milliseconds timeout) {
  Socket socket = Socket::connect_tcp(host, port, timeout);
  socket.set_nodelay(true);
  socket.set_recv_timeout(timeout);

  std::mt19937_64 rng(std::random_device{}());
  unsigned char nonce[16];
  for (auto& byte : nonce) byte = static_cast<unsigned char>(rng());
  std::string key = base64(nonce, sizeof(nonce));

  std::string request = "GET " + path + " HTTP/1.1\r\n" +
                        "Host: " + host + ":" + std::to_string(port) + "\r\n" +
                        "Upgrade: websocket\r\n"
                        "Connection: Upgrade\r\n"
                        "Sec-WebSocket-Key: " + key + "\r\n" +
                        "Sec-WebSocket-Version: 13\r\n\r\n";
  if (!socket.write_all(request)) {
    throw Error(ErrorCode::kConnectionFailed, "ws: handshake write failed");
  }

  std::string response;
  char c = 0;
  while (response.find("\r\n\r\n") == std::string::npos) {
    if (response.size() > 16384 || !socket.read_exact(&c, 1)) {
      throw Error(ErrorCode::kConnectionFailed, "ws: handshake read failed");
    }
    response += c;
  }
  if (response.find(" 101 ") == std::string::npos ||
      response.find(accept_key(key)) == std::string::npos) {
    throw Error(ErrorCode::kConnectionFailed, "ws: handshake rejected");
  }
  return ClientConnection(std::move(socket));
}

void ClientConnection::send_text(std::string_view text) {
  static std::mt19937 rng(std::random_device{}());
  auto frame = encode_frame(kOpText, text, /*mask=*/true, rng());
  if (!socket_.write_all(frame.data(), frame.size())) {
    throw Error(ErrorCode::kConnectionFailed, "ws: send failed");
  }
}

std::optional<std::string> ClientConnection::receive_text(std::chrono::milliseconds timeout) {
  socket_.set_recv_timeout(timeout);
  Frame frame;
  while (read_frame(socket_, frame)) {
    switch (frame.opcode) {
      case kOpText:
        return std::move(frame.payload);
      case kOpPing: {
        auto pong = encode_frame(kOpPong, frame.payload, /*mask=*/true, 0);
        socket_.write_all(pong.data(), pong.size());
        break;
      }
      case kOpClose:
        socket_.close();
        return std::nullopt;
      default:
        break;
    }
  }
  return std::nullopt;
}

void ClientConnection::close() {
  if (!socket_.valid()) return;
  auto frame = encode_frame(kOpClose, "", /*mask=*/true, 0);
  socket_.write_all(frame.data(), frame.size());
  socket_.close();
}

}  // namespace ruleflow::net::ws
