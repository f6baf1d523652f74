#include "ruleflow/actions.hpp"

#include <charconv>

#include <spdlog/spdlog.h>

#include "ruleflow/clock.hpp"

namespace ruleflow {
namespace {

constexpr char kUnitSeparator = '\x1f';

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, const char* what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kValueParse,
                std::string(what) + ": cannot parse '" + std::string(s) + "' as a number");
  }
  return value;
}

std::uint16_t parse_port(std::string_view s) {
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value == 0 || value > 65535) {
    throw Error(ErrorCode::kValueParse, "invalid port '" + std::string(s) + "'");
  }
  return static_cast<std::uint16_t>(value);
}

}  // namespace

std::vector<std::string> split_params(std::string_view params, std::size_t head_count) {
  std::vector<std::string> out;
  out.reserve(head_count + 1);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < head_count; ++i) {
    std::size_t comma = params.find(',', pos);
    if (comma == std::string_view::npos) {
      throw Error(ErrorCode::kValueParse,
                  "expected at least " + std::to_string(head_count + 1) +
                      " comma-separated parameters");
    }
    out.emplace_back(trim_view(params.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  out.emplace_back(trim_view(params.substr(pos)));
  return out;
}

void MqttPublisher::publish(const std::string& host, std::uint16_t port,
                            const std::string& username, const std::string& password,
                            const std::string& topic, const std::string& message) {
  const std::string key = host + '\x1f' + std::to_string(port) + '\x1f' + username;
  std::lock_guard lock(mutex_);
  auto it = connections_.find(key);
  if (it != connections_.end() && it->second.connected()) {
    try {
      it->second.publish(topic, message);
      return;
    } catch (const Error&) {
      connections_.erase(it);  // stale connection, fall through to reconnect
    }
  } else if (it != connections_.end()) {
    connections_.erase(it);
  }
  auto client = net::mqtt::Client::connect(host, port, username, password,
                                           "ruleflow-" + std::to_string(now_ms()));
  client.publish(topic, message);
  connections_.emplace(key, std::move(client));
}

void MqttPublisher::close_all() {
  std::lock_guard lock(mutex_);
  for (auto& [key, client] : connections_) client.disconnect();
  connections_.clear();
}

ActionLogSink::ActionLogSink(std::string path) : path_(std::move(path)) {
  file_ = std::fopen(path_.c_str(), "ae");
  if (!file_) {
    throw Error(ErrorCode::kIo, "cannot open action log sink '" + path_ + "'");
  }
}

ActionLogSink::~ActionLogSink() {
  if (file_) std::fclose(file_);
}

void ActionLogSink::append(std::uint64_t rule_id, const std::string& params) {
  std::string line = format_rfc3339_ms(SystemClock::now());
  line += kUnitSeparator;
  line += std::to_string(rule_id);
  line += kUnitSeparator;
  line += params;
  line += '\n';
  std::lock_guard lock(mutex_);
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size()) {
    spdlog::warn("action log sink: write to '{}' failed", path_);
  }
  std::fflush(file_);
}

ExecuteFn make_mqtt_action(std::shared_ptr<MqttPublisher> publisher) {
  return [publisher = std::move(publisher)](const ActionRequest& request) {
    auto fields = split_params(request.params, 5);
    publisher->publish(fields[0], parse_port(fields[1]), fields[2], fields[3],
                       fields[4], fields[5]);
  };
}

ExecuteFn make_websocket_action(WsSendFn send) {
  return [send = std::move(send)](const ActionRequest& request) {
    auto fields = split_params(request.params, 1);
    // A missing client is a counted drop, not a failure.
    send(fields[0], fields[1]);
  };
}

ExecuteFn make_log_action(std::shared_ptr<ActionLogSink> sink) {
  return [sink = std::move(sink)](const ActionRequest& request) {
    sink->append(request.rule_id, request.params);
  };
}

ExecuteFn make_set_cell_action(Dsb& dsb) {
  return [&dsb](const ActionRequest& request) {
    auto fields = split_params(request.params, 3);
    const double value = parse_double(fields[3], "SetCell");
    const Index target{fields[0], fields[1], fields[2]};
    UpdateOutcome outcome = dsb.update(target, value);
    if (!outcome.applied) {
      spdlog::warn("SetCell from rule {}: target {} not registered", request.rule_id,
                   filter_key(target));
    }
  };
}

}  // namespace ruleflow
