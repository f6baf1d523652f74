#pragma once

#include <atomic>
#include <cstdio>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ruleflow/dsb.hpp"
#include "ruleflow/executor.hpp"
#include "ruleflow/net/mqtt.hpp"

namespace ruleflow {

/// Splits an action parameter string: `head_count` comma-separated fields
/// (whitespace-trimmed) followed by the remainder as the final element,
/// outer whitespace trimmed but interior commas and spaces preserved.
/// Throws kValueParse when fewer than head_count commas are present.
std::vector<std::string> split_params(std::string_view params, std::size_t head_count);

/// MQTT publisher with connection reuse per (host, port, username).
class MqttPublisher {
 public:
  void publish(const std::string& host, std::uint16_t port, const std::string& username,
               const std::string& password, const std::string& topic,
               const std::string& message);
  void close_all();

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, net::mqtt::Client> connections_;
};

/// Append-only sink for the Log action: one UTF-8 line per dispatch,
/// fields delimited by the ASCII unit separator.
class ActionLogSink {
 public:
  explicit ActionLogSink(std::string path);
  ~ActionLogSink();

  void append(std::uint64_t rule_id, const std::string& params);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::mutex mutex_;
  std::FILE* file_ = nullptr;
};

/// params: "host, port, username, password, topic, message"; the message
/// is everything after the fifth comma and may itself contain commas.
ExecuteFn make_mqtt_action(std::shared_ptr<MqttPublisher> publisher);

/// params: "client_id, message". Sends a text frame through the supplied
/// hook; a false return means the client is not connected (the hook's
/// owner counts the drop).
using WsSendFn = std::function<bool(const std::string& client_id, const std::string& text)>;
ExecuteFn make_websocket_action(WsSendFn send);

ExecuteFn make_log_action(std::shared_ptr<ActionLogSink> sink);

/// params: "device_id, device_type, attribute, value". Writes the value
/// into the DSB cell, driving any downstream (chained) rules.
ExecuteFn make_set_cell_action(Dsb& dsb);

}  // namespace ruleflow
