#include "support/mini_mqtt_broker.hpp"

#include <algorithm>

namespace ruleflow::testing {

namespace mqtt = ruleflow::net::mqtt;

MiniMqttBroker::~MiniMqttBroker() { stop(); }

void MiniMqttBroker::start() {
  if (running_.exchange(true)) return;
  listener_ = net::Socket::listen_tcp("127.0.0.1", 0);
  port_ = listener_.local_port();
  acceptor_ = std::thread([this] { accept_loop(); });
}

void MiniMqttBroker::stop() {
  if (!running_.exchange(false)) return;
  listener_.shutdown_both();
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(mutex_);
    for (auto& session : sessions_) session->socket->shutdown_both();
  }
  std::unique_lock lock(mutex_);
  sessions_done_.wait_for(lock, std::chrono::seconds(5),
                          [&] { return open_sessions_ == 0; });
}

void MiniMqttBroker::accept_loop() {
  while (running_) {
    auto client = listener_.accept();
    if (!client) break;
    auto session = std::make_shared<Session>();
    session->socket = std::make_shared<net::Socket>(std::move(*client));
    {
      std::lock_guard lock(mutex_);
      sessions_.push_back(session);
      ++open_sessions_;
    }
    std::thread([this, session] {
      serve(session);
      {
        std::lock_guard lock(mutex_);
        std::erase(sessions_, session);
        --open_sessions_;
      }
      sessions_done_.notify_all();
    }).detach();
  }
}

void MiniMqttBroker::serve(std::shared_ptr<Session> session) {
  net::Socket& socket = *session->socket;
  mqtt::Packet packet;
  if (!mqtt::read_packet(socket, packet) ||
      packet.type() != mqtt::PacketType::kConnect || !mqtt::parse_connect(packet)) {
    return;
  }
  {
    auto connack = mqtt::encode_connack(false, 0);
    std::lock_guard lock(session->write_mutex);
    if (!socket.write_all(connack.data(), connack.size())) return;
  }

  while (running_ && mqtt::read_packet(socket, packet)) {
    switch (packet.type()) {
      case mqtt::PacketType::kSubscribe: {
        auto view = mqtt::parse_subscribe(packet);
        if (!view) return;
        {
          std::lock_guard lock(mutex_);
          for (const auto& topic : view->topics) session->topics.push_back(topic);
        }
        auto suback = mqtt::encode_suback(view->packet_id, 0);
        std::lock_guard lock(session->write_mutex);
        if (!socket.write_all(suback.data(), suback.size())) return;
        break;
      }
      case mqtt::PacketType::kPublish: {
        auto view = mqtt::parse_publish(packet);
        if (!view) return;
        std::vector<std::shared_ptr<Session>> targets;
        {
          std::lock_guard lock(mutex_);
          published_.push_back(Published{view->topic, view->payload});
          for (const auto& other : sessions_) {
            if (std::count(other->topics.begin(), other->topics.end(), view->topic)) {
              targets.push_back(other);
            }
          }
        }
        publishes_cv_.notify_all();
        auto forward = mqtt::encode_publish(view->topic, view->payload);
        for (const auto& target : targets) {
          std::lock_guard lock(target->write_mutex);
          target->socket->write_all(forward.data(), forward.size());
        }
        break;
      }
      case mqtt::PacketType::kPingreq: {
        auto pong = mqtt::encode_pingresp();
        std::lock_guard lock(session->write_mutex);
        if (!socket.write_all(pong.data(), pong.size())) return;
        break;
      }
      case mqtt::PacketType::kDisconnect:
        return;
      default:
        break;
    }
  }
}

std::vector<MiniMqttBroker::Published> MiniMqttBroker::published() const {
  std::lock_guard lock(mutex_);
  return published_;
}

std::size_t MiniMqttBroker::publish_count(const std::string& topic) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(published_.begin(), published_.end(),
                    [&](const Published& p) { return p.topic == topic; }));
}

bool MiniMqttBroker::wait_for_publishes(std::size_t count,
                                        std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return publishes_cv_.wait_for(lock, timeout,
                                [&] { return published_.size() >= count; });
}

}  // namespace ruleflow::testing
