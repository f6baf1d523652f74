#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "harness.hpp"
#include "ruleflow/engine.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

int run_serve(const ruleflow::EngineConfig& config) {
  ruleflow::Engine engine(config);
  engine.start();
  std::printf("ruleflow: http=%u ws=%u ingest=%u storage=%s\n", engine.http_port(),
              engine.ws_port(), engine.ingest_port(), config.storage_path.c_str());
  std::fflush(stdout);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  engine.stop();
  return 0;
}

bool split_host_port(const std::string& target, std::string& host, std::uint16_t& port) {
  std::size_t colon = target.rfind(':');
  if (colon == std::string::npos || colon + 1 >= target.size()) return false;
  host = target.substr(0, colon);
  try {
    port = static_cast<std::uint16_t>(std::stoul(target.substr(colon + 1)));
  } catch (const std::exception&) {
    return false;
  }
  return port != 0;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  if (path.empty()) return;
  std::ofstream out(path);
  for (const auto& line : lines) out << line << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ruleflow: IoT dataflow rule engine and experiment harness"};
  app.require_subcommand(1);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the rule engine");
  ruleflow::EngineConfig config;
  std::size_t bloom_bits = config.filter.bit_count;
  int bloom_hashes = config.filter.hash_count;
  serve->add_option("--bind", config.bind, "Bind address")->capture_default_str();
  serve->add_option("--http-port", config.http_port, "REST port")->capture_default_str();
  serve->add_option("--ws-port", config.ws_port, "WebSocket port")->capture_default_str();
  serve->add_option("--ingest-port", config.ingest_port, "TCP ingestion port")
      ->capture_default_str();
  serve->add_option("--storage", config.storage_path,
                    "Rule store path (':memory:' for non-persistent)")
      ->capture_default_str();
  serve->add_option("--workers", config.action_workers, "Action worker pool size")
      ->capture_default_str();
  serve->add_option("--matcher-workers", config.matcher_workers,
                    "Matcher worker pool size")
      ->capture_default_str();
  serve->add_option("--bloom-bits", bloom_bits, "Attribute filter size in bits")
      ->capture_default_str();
  serve->add_option("--bloom-hashes", bloom_hashes, "Attribute filter hash count")
      ->capture_default_str();
  serve->add_option("--log-sink", config.action_log_path, "Log action sink path")
      ->capture_default_str();
  serve->add_option("--max-conns", config.ingest_max_connections,
                    "Max concurrent ingestion connections")
      ->capture_default_str();

  // shared harness flags
  std::string target, profile_text, out_path;
  std::uint64_t seed = 1;

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Stream device messages at an engine");
  ruleflow::harness::ScenarioConfig scenario;
  std::string values_text;
  simulate->add_option("--target", target, "host:port of the ingestion listener")
      ->required();
  simulate->add_option("--profile", profile_text, "rate=...,duration=...");
  simulate->add_option("--seed", seed, "Random seed (walk scenario)");
  simulate->add_option("--out", out_path, "Also write the generated stream to a file");
  simulate->add_option("--scenario", scenario.kind, "test1 | fixed | ramp | walk")
      ->capture_default_str();
  simulate->add_option("--device-id", scenario.device_id)->capture_default_str();
  simulate->add_option("--device-type", scenario.device_type)->capture_default_str();
  simulate->add_option("--attribute", scenario.attribute)->capture_default_str();
  simulate->add_option("--values", values_text, "Comma-separated values (fixed)");
  simulate->add_option("--from", scenario.ramp_from, "Ramp start")->capture_default_str();
  simulate->add_option("--to", scenario.ramp_to, "Ramp end")->capture_default_str();

  // subscribe
  auto* subscribe = app.add_subcommand(
      "subscribe", "Run MQTT/WebSocket test subscribers against expectations");
  ruleflow::harness::SubscribeOptions sub;
  std::string mqtt_target, ws_target;
  subscribe->add_option("--target", target, "unused alias, see --mqtt/--ws");
  subscribe->add_option("--profile", profile_text, "duration=... (listen window)");
  subscribe->add_option("--seed", seed, "Unused; uniform flag surface");
  subscribe->add_option("--out", out_path, "Write the transcript to a file");
  subscribe->add_option("--mqtt", mqtt_target, "MQTT broker host:port");
  subscribe->add_option("--topic", sub.mqtt_topic)->capture_default_str();
  subscribe->add_option("--user", sub.mqtt_username);
  subscribe->add_option("--pass", sub.mqtt_password);
  subscribe->add_option("--ws", ws_target, "WebSocket endpoint host:port");
  subscribe->add_option("--client-id", sub.ws_client_id)->capture_default_str();
  subscribe->add_option("--expect-mqtt", sub.expect_mqtt, "Expected MQTT payloads");
  subscribe->add_option("--expect-ws", sub.expect_ws, "Expected WebSocket frames");
  subscribe->add_option("--timeout", sub.timeout_seconds, "Seconds to wait")
      ->capture_default_str();

  // membench
  auto* membench = app.add_subcommand(
      "membench", "Memory-per-rule benchmark against a running engine");
  membench->add_option("--target", target, "http://host:port of the REST API")
      ->required();
  membench->add_option("--profile", profile_text,
                       "rules=...,threads=...,period=...,duration=...");
  membench->add_option("--seed", seed, "Unused; uniform flag surface");
  membench->add_option("--out", out_path, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  ruleflow::harness::LoadProfile profile;
  if (!profile_text.empty()) {
    std::string error;
    auto parsed = ruleflow::harness::parse_profile(profile_text, &error);
    if (!parsed) {
      std::fprintf(stderr, "bad --profile: %s\n", error.c_str());
      return 2;
    }
    profile = *parsed;
  }

  if (serve->parsed()) {
    config.filter.bit_count = bloom_bits;
    config.filter.hash_count = bloom_hashes;
    return run_serve(config);
  }

  if (simulate->parsed()) {
    scenario.seed = seed;
    if (!values_text.empty()) {
      scenario.values.clear();
      std::size_t pos = 0;
      while (pos <= values_text.size()) {
        std::size_t comma = values_text.find(',', pos);
        std::string item =
            values_text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        if (!item.empty()) scenario.values.push_back(std::stod(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (scenario.kind == "test1") scenario.kind = "fixed";
    }
    std::string host;
    std::uint16_t port = 0;
    if (!split_host_port(target, host, port)) {
      std::fprintf(stderr, "bad --target '%s', expected host:port\n", target.c_str());
      return 2;
    }
    write_lines(out_path, ruleflow::harness::scenario_lines(scenario, profile));
    auto result = ruleflow::harness::simulate_devices(host, port, scenario, profile);
    std::printf("simulate: sent %zu messages (%s)\n", result.sent,
                result.connected ? "connected" : "connection failed");
    return result.connected ? 0 : 1;
  }

  if (subscribe->parsed()) {
    if (!mqtt_target.empty() &&
        !split_host_port(mqtt_target, sub.mqtt_host, sub.mqtt_port)) {
      std::fprintf(stderr, "bad --mqtt '%s'\n", mqtt_target.c_str());
      return 2;
    }
    if (!ws_target.empty() && !split_host_port(ws_target, sub.ws_host, sub.ws_port)) {
      std::fprintf(stderr, "bad --ws '%s'\n", ws_target.c_str());
      return 2;
    }
    if (!profile_text.empty()) sub.timeout_seconds = profile.duration_seconds;
    auto report = ruleflow::harness::run_test_subscribers(sub);
    std::vector<std::string> transcript;
    for (const auto& m : report.mqtt_received) transcript.push_back("mqtt: " + m);
    for (const auto& w : report.ws_received) transcript.push_back("ws: " + w);
    write_lines(out_path, transcript);
    for (const auto& line : transcript) std::printf("%s\n", line.c_str());
    if (report.passed) {
      std::printf("subscribe: PASS\n");
      return 0;
    }
    std::printf("subscribe: FAIL\n%s", report.diff.c_str());
    return 1;
  }

  if (membench->parsed()) {
    ruleflow::harness::MembenchOptions options;
    options.target = target;
    options.profile = profile;
    options.out_csv = out_path;
    options.seed = seed;
    auto report = ruleflow::harness::run_memory_benchmark(options);
    std::vector<std::string> csv{"timestamp,rss_bytes,live_rules"};
    csv.insert(csv.end(), report.csv_rows.begin(), report.csv_rows.end());
    write_lines(out_path, csv);
    std::printf("membench: rules=%zu baseline=%.2fMB peak=%.2fMB\n",
                report.rules_created, report.baseline_rss / 1048576.0,
                report.peak_rss / 1048576.0);
    if (!report.ok) {
      std::fprintf(stderr, "membench: %s\n", report.error.c_str());
      return 1;
    }
    std::printf("membench: %.1f bytes/rule (%.2f KB/rule)\n", report.bytes_per_rule,
                report.bytes_per_rule / 1024.0);
    return 0;
  }

  return 0;
}
