#pragma once

#include <memory>
#include <string>

#include "ruleflow/actions.hpp"
#include "ruleflow/api.hpp"
#include "ruleflow/dsb.hpp"
#include "ruleflow/executor.hpp"
#include "ruleflow/ingest.hpp"
#include "ruleflow/matcher.hpp"
#include "ruleflow/scheduler.hpp"
#include "ruleflow/storage.hpp"

namespace ruleflow {

struct EngineConfig {
  std::string bind = "0.0.0.0";
  std::uint16_t http_port = 8080;
  std::uint16_t ws_port = 8081;
  std::uint16_t ingest_port = 7070;  // any of these may be 0 for ephemeral

  /// ":memory:" keeps rules in process memory; any other value is the
  /// path of the single-file embedded store.
  std::string storage_path = ":memory:";

  std::size_t action_workers = 8;
  std::size_t matcher_workers = 4;
  std::size_t action_queue_capacity = 1024;
  std::size_t push_queue_capacity = 1024;
  std::uint32_t default_period_seconds = 5;
  std::chrono::milliseconds scheduler_tick{100};
  std::size_t ingest_max_connections = 256;
  BloomFilter::Config filter;
  std::string action_log_path = "actions.log";

  bool enable_http = true;
  bool enable_ws = true;
  bool enable_ingest = true;
};

/// Composition root: owns every component and wires the built-in matchers
/// (PointSurface) and execution functions (Mqtt, WebSocket, Log, SetCell).
/// Custom matchers and actions must be registered before start().
class Engine {
 public:
  explicit Engine(EngineConfig config);
  ~Engine();

  void start();
  void stop();

  MatcherMap& matchers() { return matchers_; }
  Executor& executor() { return executor_; }
  Scheduler& scheduler() { return *scheduler_; }
  Dsb& dsb() { return dsb_; }
  ClientRegistry& clients() { return registry_; }
  IngestServer& ingest() { return *ingest_; }
  RuleStore& store() { return *store_; }

  std::uint16_t http_port() const { return api_ ? api_->port() : 0; }
  std::uint16_t ws_port() const { return ws_ ? ws_->port() : 0; }
  std::uint16_t ingest_port() const { return ingest_ ? ingest_->port() : 0; }

  const EngineConfig& config() const { return config_; }

  /// Engine-wide introspection as a JSON string (feeds GET /stats).
  std::string stats_json() const;

 private:
  EngineConfig config_;
  Dsb dsb_;
  MatcherMap matchers_;
  Executor executor_;
  std::shared_ptr<MqttPublisher> mqtt_publisher_;
  std::shared_ptr<ActionLogSink> log_sink_;
  ClientRegistry registry_;
  std::unique_ptr<RuleStore> store_;
  std::unique_ptr<Scheduler> scheduler_;
  std::unique_ptr<IngestServer> ingest_;
  std::unique_ptr<WsServer> ws_;
  std::unique_ptr<ApiServer> api_;
  bool started_ = false;
};

}  // namespace ruleflow
