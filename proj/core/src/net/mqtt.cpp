#include "ruleflow/net/mqtt.hpp"

#include "ruleflow/error.hpp"

namespace ruleflow::net::mqtt {
namespace {

std::vector<std::uint8_t> with_header(std::uint8_t first_byte,
                                      std::vector<std::uint8_t> body) {
  std::vector<std::uint8_t> out;
  out.reserve(body.size() + 5);
  out.push_back(first_byte);
  append_varint(out, body.size());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

class BodyReader {
 public:
  explicit BodyReader(const std::vector<std::uint8_t>& body) : body_(body) {}

  bool u8(std::uint8_t& v) {
    if (pos_ >= body_.size()) return false;
    v = body_[pos_++];
    return true;
  }
  bool u16(std::uint16_t& v) {
    if (pos_ + 2 > body_.size()) return false;
    v = static_cast<std::uint16_t>(body_[pos_] << 8 | body_[pos_ + 1]);
    pos_ += 2;
    return true;
  }
  bool str(std::string& v) {
    std::uint16_t len = 0;
    if (!u16(len) || pos_ + len > body_.size()) return false;
    v.assign(reinterpret_cast<const char*>(body_.data() + pos_), len);
    pos_ += len;
    return true;
  }
  std::string rest() {
    std::string v(reinterpret_cast<const char*>(body_.data() + pos_),
                  body_.size() - pos_);
    pos_ = body_.size();
    return v;
  }
  bool done() const { return pos_ == body_.size(); }

 private:
  const std::vector<std::uint8_t>& body_;
  std::size_t pos_ = 0;
};

}  // namespace

void append_varint(std::vector<std::uint8_t>& out, std::size_t value) {
  do {
    std::uint8_t byte = value % 128;
    value /= 128;
    if (value > 0) byte |= 0x80;
    out.push_back(byte);
  } while (value > 0);
}

void append_string(std::vector<std::uint8_t>& out, std::string_view s) {
  out.push_back(static_cast<std::uint8_t>(s.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(s.size() & 0xff));
  out.insert(out.end(), s.begin(), s.end());
}

std::vector<std::uint8_t> encode_connect(std::string_view client_id,
                                         std::string_view username,
                                         std::string_view password,
                                         std::uint16_t keepalive_s, bool clean_session) {
  std::vector<std::uint8_t> body;
  append_string(body, "MQTT");
  body.push_back(0x04);  // protocol level 3.1.1
  std::uint8_t flags = 0;
  if (clean_session) flags |= 0x02;
  if (!username.empty()) flags |= 0x80;
  if (!password.empty()) flags |= 0x40;
  body.push_back(flags);
  body.push_back(static_cast<std::uint8_t>(keepalive_s >> 8));
  body.push_back(static_cast<std::uint8_t>(keepalive_s & 0xff));
  append_string(body, client_id);
  if (!username.empty()) append_string(body, username);
  if (!password.empty()) append_string(body, password);
  return with_header(0x10, std::move(body));
}

std::vector<std::uint8_t> encode_connack(bool session_present, std::uint8_t return_code) {
  return with_header(0x20, {static_cast<std::uint8_t>(session_present ? 1 : 0), return_code});
}

std::vector<std::uint8_t> encode_publish(std::string_view topic, std::string_view payload) {
  std::vector<std::uint8_t> body;
  append_string(body, topic);
  body.insert(body.end(), payload.begin(), payload.end());
  return with_header(0x30, std::move(body));  // QoS 0, no packet id
}

std::vector<std::uint8_t> encode_subscribe(std::uint16_t packet_id, std::string_view topic) {
  std::vector<std::uint8_t> body;
  body.push_back(static_cast<std::uint8_t>(packet_id >> 8));
  body.push_back(static_cast<std::uint8_t>(packet_id & 0xff));
  append_string(body, topic);
  body.push_back(0x00);  // requested QoS 0
  return with_header(0x82, std::move(body));
}

std::vector<std::uint8_t> encode_suback(std::uint16_t packet_id, std::uint8_t granted_qos) {
  return with_header(0x90, {static_cast<std::uint8_t>(packet_id >> 8),
                            static_cast<std::uint8_t>(packet_id & 0xff), granted_qos});
}

std::vector<std::uint8_t> encode_pingreq() { return {0xc0, 0x00}; }
std::vector<std::uint8_t> encode_pingresp() { return {0xd0, 0x00}; }
std::vector<std::uint8_t> encode_disconnect() { return {0xe0, 0x00}; }

bool read_packet(Socket& socket, Packet& out) {
  std::uint8_t first = 0;
  if (!socket.read_exact(&first, 1)) return false;

  std::size_t remaining = 0;
  std::size_t multiplier = 1;
  for (int i = 0; i < 4; ++i) {
    std::uint8_t byte = 0;
    if (!socket.read_exact(&byte, 1)) return false;
    remaining += static_cast<std::size_t>(byte & 0x7f) * multiplier;
    if ((byte & 0x80) == 0) break;
    if (i == 3) return false;  // malformed varint
    multiplier *= 128;
  }

  out.first_byte = first;
  out.body.resize(remaining);
  if (remaining > 0 && !socket.read_exact(out.body.data(), remaining)) return false;
  return true;
}

std::optional<ConnectView> parse_connect(const Packet& packet) {
  if (packet.type() != PacketType::kConnect) return std::nullopt;
  BodyReader r(packet.body);
  std::string protocol;
  std::uint8_t level = 0, flags = 0;
  ConnectView view;
  if (!r.str(protocol) || !r.u8(level) || !r.u8(flags) || !r.u16(view.keepalive_s)) {
    return std::nullopt;
  }
  view.clean_session = flags & 0x02;
  if (!r.str(view.client_id)) return std::nullopt;
  if (flags & 0x04) {  // skip will topic/message
    std::string will_topic, will_message;
    if (!r.str(will_topic) || !r.str(will_message)) return std::nullopt;
  }
  if ((flags & 0x80) && !r.str(view.username)) return std::nullopt;
  if ((flags & 0x40) && !r.str(view.password)) return std::nullopt;
  return view;
}

std::optional<PublishView> parse_publish(const Packet& packet) {
  if (packet.type() != PacketType::kPublish) return std::nullopt;
  BodyReader r(packet.body);
  PublishView view;
  if (!r.str(view.topic)) return std::nullopt;
  const std::uint8_t qos = (packet.flags() >> 1) & 0x03;
  if (qos > 0) {
    std::uint16_t packet_id = 0;
    if (!r.u16(packet_id)) return std::nullopt;
  }
  view.payload = r.rest();
  return view;
}

std::optional<SubscribeView> parse_subscribe(const Packet& packet) {
  if (packet.type() != PacketType::kSubscribe) return std::nullopt;
  BodyReader r(packet.body);
  SubscribeView view;
  if (!r.u16(view.packet_id)) return std::nullopt;
  while (!r.done()) {
    std::string topic;
    std::uint8_t qos = 0;
    if (!r.str(topic) || !r.u8(qos)) return std::nullopt;
    view.topics.push_back(std::move(topic));
  }
  if (view.topics.empty()) return std::nullopt;
  return view;
}

Client Client::connect(const std::string& host, std::uint16_t port,
                       const std::string& username, const std::string& password,
                       const std::string& client_id, std::chrono::milliseconds timeout) {
  Socket socket = Socket::connect_tcp(host, port, timeout);
  socket.set_nodelay(true);
  socket.set_recv_timeout(timeout);
  auto connect_packet = encode_connect(client_id, username, password);
  if (!socket.write_all(connect_packet.data(), connect_packet.size())) {
    throw Error(ErrorCode::kConnectionFailed, "mqtt: CONNECT write failed");
  }
  Packet connack;
  if (!read_packet(socket, connack) || connack.type() != PacketType::kConnack ||
      connack.body.size() != 2) {
    throw Error(ErrorCode::kConnectionFailed, "mqtt: no CONNACK");
  }
  if (connack.body[1] != 0) {
    throw Error(ErrorCode::kConnectionFailed,
                "mqtt: connection refused, code " + std::to_string(connack.body[1]));
  }
  return Client(std::move(socket));
}

void Client::publish(std::string_view topic, std::string_view payload) {
  auto packet = encode_publish(topic, payload);
  if (!socket_.write_all(packet.data(), packet.size())) {
    socket_.close();
    throw Error(ErrorCode::kPublishFailed, "mqtt: PUBLISH write failed");
  }
}

void Client::subscribe(const std::string& topic) {
  auto packet = encode_subscribe(next_packet_id_++, topic);
  if (!socket_.write_all(packet.data(), packet.size())) {
    throw Error(ErrorCode::kConnectionFailed, "mqtt: SUBSCRIBE write failed");
  }
  Packet response;
  while (read_packet(socket_, response)) {
    if (response.type() == PacketType::kSuback) return;
    if (response.type() == PacketType::kPingreq) {
      auto pong = encode_pingresp();
      socket_.write_all(pong.data(), pong.size());
    }
  }
  throw Error(ErrorCode::kConnectionFailed, "mqtt: no SUBACK");
}

std::optional<PublishView> Client::receive(std::chrono::milliseconds timeout) {
  socket_.set_recv_timeout(timeout);
  Packet packet;
  while (read_packet(socket_, packet)) {
    switch (packet.type()) {
      case PacketType::kPublish:
        return parse_publish(packet);
      case PacketType::kPingreq: {
        auto pong = encode_pingresp();
        socket_.write_all(pong.data(), pong.size());
        break;
      }
      default:
        break;  // ignore everything else at QoS 0
    }
  }
  return std::nullopt;
}

void Client::disconnect() {
  if (!socket_.valid()) return;
  auto packet = encode_disconnect();
  socket_.write_all(packet.data(), packet.size());
  socket_.close();
}

}  // namespace ruleflow::net::mqtt
