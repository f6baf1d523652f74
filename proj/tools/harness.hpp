#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ruleflow::harness {

/// Shared load-shape knobs, parsed from the --profile flag
/// ("rules=10000,threads=10,period=5,rate=10,duration=600").
struct LoadProfile {
  std::size_t rule_count = 10000;
  std::size_t threads = 10;
  std::uint32_t period_seconds = 5;
  double message_rate = 10.0;  // messages per second per device
  double duration_seconds = 60.0;
};

std::optional<LoadProfile> parse_profile(const std::string& text,
                                         std::string* error = nullptr);

struct ScenarioConfig {
  std::string kind = "test1";  // test1 | fixed | ramp | walk
  std::string device_id = "1";
  std::string device_type = "Portable";
  std::string attribute = "temperature";
  std::vector<double> values;  // fixed list (kind=fixed)
  double ramp_from = 20.0;
  double ramp_to = 30.0;
  double walk_start = 22.0;
  double walk_step = 0.5;
  std::uint64_t seed = 1;
};

/// Materializes the full wire-format message stream for a scenario.
/// Deterministic: a fixed (config, profile) pair yields byte-identical
/// lines.
std::vector<std::string> scenario_lines(const ScenarioConfig& scenario,
                                        const LoadProfile& profile);

struct SimulateResult {
  std::size_t sent = 0;
  bool connected = false;
};

/// Streams the scenario to host:port at profile.message_rate.
SimulateResult simulate_devices(const std::string& host, std::uint16_t port,
                                const ScenarioConfig& scenario,
                                const LoadProfile& profile);

struct SubscribeOptions {
  std::string mqtt_host;
  std::uint16_t mqtt_port = 0;
  std::string mqtt_topic = "test";
  std::string mqtt_username;
  std::string mqtt_password;
  std::string ws_host;
  std::uint16_t ws_port = 0;
  std::string ws_client_id = "1";
  std::vector<std::string> expect_mqtt;
  std::vector<std::string> expect_ws;
  double timeout_seconds = 10.0;
};

struct SubscribeReport {
  std::vector<std::string> mqtt_received;
  std::vector<std::string> ws_received;
  bool passed = false;
  std::string diff;  // human-readable mismatch description
};

/// Connects the test subscribers, records messages until the expected
/// counts arrive or the timeout lapses, then compares.
SubscribeReport run_test_subscribers(const SubscribeOptions& options);

struct MembenchOptions {
  std::string target;  // http://host:port
  LoadProfile profile;
  std::string out_csv;
  std::uint64_t seed = 1;
  double sample_interval_seconds = 5.0;
};

struct MembenchReport {
  bool ok = false;
  std::string error;
  std::uint64_t baseline_rss = 0;
  std::uint64_t peak_rss = 0;
  std::size_t rules_created = 0;
  double bytes_per_rule = 0.0;
  std::vector<std::string> csv_rows;  // timestamp,rss_bytes,live_rules
};

/// Creates and starts profile.rule_count PointSurface rules through the
/// REST API, samples the engine's resident memory, and reports
/// (peak - baseline) / rules.
MembenchReport run_memory_benchmark(const MembenchOptions& options);

/// The polygon rules used by membench (and Test-3 style experiments).
std::string membench_rule_body(std::size_t index, std::uint32_t period_seconds);

}  // namespace ruleflow::harness
