#include "harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <random>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ruleflow/clock.hpp"
#include "ruleflow/matcher.hpp"
#include "ruleflow/net/mqtt.hpp"
#include "ruleflow/net/socket.hpp"
#include "ruleflow/net/websocket.hpp"

namespace ruleflow::harness {

using nlohmann::json;

std::optional<LoadProfile> parse_profile(const std::string& text, std::string* error) {
  LoadProfile profile;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string pair = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    std::size_t eq = pair.find('=');
    if (eq == std::string::npos) {
      if (error) *error = "expected key=value in profile near '" + pair + "'";
      return std::nullopt;
    }
    const std::string key = pair.substr(0, eq);
    const std::string value = pair.substr(eq + 1);
    try {
      if (key == "rules") {
        profile.rule_count = std::stoull(value);
      } else if (key == "threads") {
        profile.threads = std::stoull(value);
      } else if (key == "period") {
        profile.period_seconds = static_cast<std::uint32_t>(std::stoul(value));
      } else if (key == "rate") {
        profile.message_rate = std::stod(value);
      } else if (key == "duration") {
        profile.duration_seconds = std::stod(value);
      } else {
        if (error) *error = "unknown profile key '" + key + "'";
        return std::nullopt;
      }
    } catch (const std::exception&) {
      if (error) *error = "bad value for profile key '" + key + "'";
      return std::nullopt;
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (profile.rule_count == 0 || profile.threads == 0 || profile.period_seconds == 0 ||
      profile.message_rate <= 0 || profile.duration_seconds <= 0) {
    if (error) *error = "profile values must be positive";
    return std::nullopt;
  }
  return profile;
}

std::vector<std::string> scenario_lines(const ScenarioConfig& scenario,
                                        const LoadProfile& profile) {
  std::vector<double> values;
  if (scenario.kind == "test1") {
    // Below, at, then above the Rule-1 threshold: exactly one trigger.
    values = {21.0, 22.1, 23.4};
  } else if (scenario.kind == "fixed") {
    values = scenario.values;
  } else {
    const auto count = static_cast<std::size_t>(
        std::max(1.0, profile.message_rate * profile.duration_seconds));
    values.reserve(count);
    if (scenario.kind == "ramp") {
      for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 1.0 : static_cast<double>(i) / (count - 1);
        values.push_back(scenario.ramp_from + (scenario.ramp_to - scenario.ramp_from) * t);
      }
    } else {  // walk
      std::mt19937_64 rng(scenario.seed);
      std::uniform_real_distribution<double> step(-scenario.walk_step, scenario.walk_step);
      double current = scenario.walk_start;
      for (std::size_t i = 0; i < count; ++i) {
        current += step(rng);
        values.push_back(current);
      }
    }
  }

  std::vector<std::string> lines;
  lines.reserve(values.size());
  for (double value : values) {
    json message{{"device_id", scenario.device_id},
                 {"device_type", scenario.device_type},
                 {scenario.attribute, value}};
    lines.push_back(message.dump());
  }
  return lines;
}

SimulateResult simulate_devices(const std::string& host, std::uint16_t port,
                                const ScenarioConfig& scenario,
                                const LoadProfile& profile) {
  SimulateResult result;
  net::Socket socket;
  try {
    socket = net::Socket::connect_tcp(host, port, std::chrono::seconds(3));
  } catch (const Error& e) {
    spdlog::error("simulate: {}", e.what());
    return result;
  }
  result.connected = true;

  const auto interval = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::duration<double>(1.0 / profile.message_rate));
  for (const std::string& line : scenario_lines(scenario, profile)) {
    if (!socket.write_all(line + "\n")) {
      spdlog::error("simulate: connection lost after {} messages", result.sent);
      return result;
    }
    ++result.sent;
    std::this_thread::sleep_for(interval);
  }
  return result;
}

SubscribeReport run_test_subscribers(const SubscribeOptions& options) {
  SubscribeReport report;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::duration<double>(options.timeout_seconds));

  std::optional<net::mqtt::Client> mqtt;
  std::optional<net::ws::ClientConnection> ws;
  if (!options.mqtt_host.empty()) {
    mqtt = net::mqtt::Client::connect(options.mqtt_host, options.mqtt_port,
                                      options.mqtt_username, options.mqtt_password,
                                      "harness-sub-" + std::to_string(now_ms()));
    mqtt->subscribe(options.mqtt_topic);
  }
  if (!options.ws_host.empty()) {
    ws = net::ws::ClientConnection::connect(options.ws_host, options.ws_port,
                                            "/ws?client_id=" + options.ws_client_id);
  }

  // Collect until both expected counts are met or the deadline passes.
  // Then drain a little longer to catch unexpected extras.
  auto want_more = [&] {
    return (mqtt && report.mqtt_received.size() < options.expect_mqtt.size()) ||
           (ws && report.ws_received.size() < options.expect_ws.size());
  };
  while (std::chrono::steady_clock::now() < deadline && want_more()) {
    if (mqtt && report.mqtt_received.size() < options.expect_mqtt.size()) {
      if (auto publish = mqtt->receive(std::chrono::milliseconds(200))) {
        report.mqtt_received.push_back(publish->payload);
      }
    }
    if (ws && report.ws_received.size() < options.expect_ws.size()) {
      if (auto text = ws->receive_text(std::chrono::milliseconds(200))) {
        report.ws_received.push_back(*text);
      }
    }
  }
  const auto settle = std::chrono::steady_clock::now() + std::chrono::milliseconds(500);
  while (std::chrono::steady_clock::now() < settle) {
    if (mqtt) {
      if (auto publish = mqtt->receive(std::chrono::milliseconds(100))) {
        report.mqtt_received.push_back(publish->payload);
      }
    }
    if (ws) {
      if (auto text = ws->receive_text(std::chrono::milliseconds(100))) {
        report.ws_received.push_back(*text);
      }
    }
  }
  if (mqtt) mqtt->disconnect();
  if (ws) ws->close();

  auto diff_one = [&](const char* label, const std::vector<std::string>& expected,
                      const std::vector<std::string>& received) {
    if (expected == received) return;
    report.diff += std::string(label) + ": expected [";
    for (const auto& e : expected) report.diff += "'" + e + "' ";
    report.diff += "] received [";
    for (const auto& r : received) report.diff += "'" + r + "' ";
    report.diff += "]\n";
  };
  diff_one("mqtt", options.expect_mqtt, report.mqtt_received);
  diff_one("websocket", options.expect_ws, report.ws_received);
  report.passed = report.diff.empty();
  return report;
}

std::string membench_rule_body(std::size_t index, std::uint32_t period_seconds) {
  // Same quadrilateral for every rule, mirroring the paper's setup of
  // identical geofencing rules; coordinates are a synthetic stand-in.
  json body{
      {"name", "membench-" + std::to_string(index)},
      {"datasource", "longitude{3, Portable, longitude}; latitude{3, Portable, latitude}"},
      {"condition",
       "PointSurface: longitude, latitude, 116.38, 39.89, 116.42, 39.89, 116.43, "
       "39.92, 116.39, 39.93"},
      {"action", "Log: membench rule matched at $longitude $latitude"},
      {"period_seconds", period_seconds},
  };
  return body.dump();
}

MembenchReport run_memory_benchmark(const MembenchOptions& options) {
  MembenchReport report;
  httplib::Client probe(options.target);
  probe.set_connection_timeout(5);
  probe.set_read_timeout(30);

  auto sample_stats = [&](std::uint64_t& rss, std::size_t& live) {
    auto response = probe.Get("/stats");
    if (!response || response->status != 200) return false;
    json body = json::parse(response->body, nullptr, false);
    if (body.is_discarded()) return false;
    rss = body.value("rss_bytes", std::uint64_t{0});
    live = body["rules"].value("active", std::size_t{0});
    return true;
  };

  std::uint64_t rss = 0;
  std::size_t live = 0;
  if (!sample_stats(rss, live)) {
    report.error = "cannot reach " + options.target + "/stats";
    return report;
  }
  report.baseline_rss = rss;
  report.peak_rss = rss;
  report.csv_rows.push_back(format_rfc3339_ms(SystemClock::now()) + "," +
                            std::to_string(rss) + "," + std::to_string(live));

  // Concurrent creators, each owning a contiguous slice of the id space.
  std::atomic<bool> failed{false};
  std::atomic<std::size_t> created{0};
  std::vector<std::thread> creators;
  const std::size_t per_thread =
      (options.profile.rule_count + options.profile.threads - 1) / options.profile.threads;
  for (std::size_t t = 0; t < options.profile.threads; ++t) {
    creators.emplace_back([&, t] {
      httplib::Client client(options.target);
      client.set_connection_timeout(5);
      client.set_read_timeout(30);
      const std::size_t begin = t * per_thread;
      const std::size_t end =
          std::min(options.profile.rule_count, begin + per_thread);
      for (std::size_t i = begin; i < end && !failed.load(); ++i) {
        auto create = client.Post(
            "/rules", membench_rule_body(i, options.profile.period_seconds),
            "application/json");
        if (!create || create->status != 201) {
          failed.store(true);
          return;
        }
        json body = json::parse(create->body, nullptr, false);
        const auto rid = body.value("rid", std::uint64_t{0});
        auto start = client.Post("/rules/" + std::to_string(rid) + "/start",
                                 std::string{}, "application/json");
        if (!start || start->status != 200) {
          failed.store(true);
          return;
        }
        created.fetch_add(1);
      }
    });
  }

  const auto sample_every = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::duration<double>(options.sample_interval_seconds));
  const auto sampling_end =
      std::chrono::steady_clock::now() +
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::duration<double>(options.profile.duration_seconds));

  auto take_sample = [&] {
    if (sample_stats(rss, live)) {
      report.peak_rss = std::max(report.peak_rss, rss);
      report.csv_rows.push_back(format_rfc3339_ms(SystemClock::now()) + "," +
                                std::to_string(rss) + "," + std::to_string(live));
    }
  };

  // Sample while the creators run, then through the steady-state window.
  while (std::chrono::steady_clock::now() < sampling_end && !failed.load()) {
    std::this_thread::sleep_for(sample_every);
    take_sample();
  }
  for (auto& creator : creators) creator.join();
  take_sample();

  report.rules_created = created.load();
  if (failed.load()) {
    report.error = "rule creation failed after " + std::to_string(report.rules_created) +
                   " rules (partial report)";
    return report;
  }
  report.bytes_per_rule =
      static_cast<double>(report.peak_rss - report.baseline_rss) /
      static_cast<double>(options.profile.rule_count);
  report.ok = true;
  return report;
}

}  // namespace ruleflow::harness
