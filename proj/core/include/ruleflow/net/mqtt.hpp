#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ruleflow/net/socket.hpp"

namespace ruleflow::net::mqtt {

// MQTT 3.1.1 control packet types (high nibble of the fixed header).
enum class PacketType : std::uint8_t {
  kConnect = 1,
  kConnack = 2,
  kPublish = 3,
  kSubscribe = 8,
  kSuback = 9,
  kPingreq = 12,
  kPingresp = 13,
  kDisconnect = 14,
};

struct Packet {
  std::uint8_t first_byte = 0;  // type | flags
  std::vector<std::uint8_t> body;

  PacketType type() const { return static_cast<PacketType>(first_byte >> 4); }
  std::uint8_t flags() const { return first_byte & 0x0f; }
};

void append_varint(std::vector<std::uint8_t>& out, std::size_t value);
void append_string(std::vector<std::uint8_t>& out, std::string_view s);

std::vector<std::uint8_t> encode_connect(std::string_view client_id,
                                         std::string_view username,
                                         std::string_view password,
                                         std::uint16_t keepalive_s = 0,
                                         bool clean_session = true);
std::vector<std::uint8_t> encode_connack(bool session_present, std::uint8_t return_code);
std::vector<std::uint8_t> encode_publish(std::string_view topic, std::string_view payload);
std::vector<std::uint8_t> encode_subscribe(std::uint16_t packet_id, std::string_view topic);
std::vector<std::uint8_t> encode_suback(std::uint16_t packet_id, std::uint8_t granted_qos);
std::vector<std::uint8_t> encode_pingreq();
std::vector<std::uint8_t> encode_pingresp();
std::vector<std::uint8_t> encode_disconnect();

/// Reads one packet; false on EOF/error.
bool read_packet(Socket& socket, Packet& out);

struct ConnectView {
  std::string client_id;
  std::string username;
  std::string password;
  bool clean_session = false;
  std::uint16_t keepalive_s = 0;
};
std::optional<ConnectView> parse_connect(const Packet& packet);

struct PublishView {
  std::string topic;
  std::string payload;
};
std::optional<PublishView> parse_publish(const Packet& packet);

struct SubscribeView {
  std::uint16_t packet_id = 0;
  std::vector<std::string> topics;
};
std::optional<SubscribeView> parse_subscribe(const Packet& packet);

/// Blocking QoS-0 client: CONNECT on construction, then publish and/or
/// subscribe. Not thread-safe; callers serialize access.
class Client {
 public:
  static Client connect(const std::string& host, std::uint16_t port,
                        const std::string& username, const std::string& password,
                        const std::string& client_id,
                        std::chrono::milliseconds timeout = std::chrono::milliseconds(3000));

  void publish(std::string_view topic, std::string_view payload);  // PublishFailed
  void subscribe(const std::string& topic);                        // waits for SUBACK

  /// Next PUBLISH forwarded by the broker; nullopt on timeout/close.
  std::optional<PublishView> receive(std::chrono::milliseconds timeout);

  void disconnect();
  bool connected() const { return socket_.valid(); }

 private:
  explicit Client(Socket socket) : socket_(std::move(socket)) {}

  Socket socket_;
  std::uint16_t next_packet_id_ = 1;
};

}  // namespace ruleflow::net::mqtt
