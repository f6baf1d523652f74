#include "ruleflow/engine.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace ruleflow {

Engine::Engine(EngineConfig config)
    : config_(std::move(config)),
      dsb_(Dsb::Config{config_.filter}),
      executor_(Executor::Config{config_.action_workers, config_.action_queue_capacity}),
      mqtt_publisher_(std::make_shared<MqttPublisher>()),
      log_sink_(std::make_shared<ActionLogSink>(config_.action_log_path)) {
  store_ = config_.storage_path == ":memory:"
               ? make_memory_rule_store()
               : make_sqlite_rule_store(config_.storage_path);

  Scheduler::Config scheduler_config;
  scheduler_config.default_period_seconds = config_.default_period_seconds;
  scheduler_config.periodic.tick = config_.scheduler_tick;
  scheduler_config.periodic.worker_count = config_.matcher_workers;
  scheduler_config.push_queue_capacity = config_.push_queue_capacity;
  scheduler_ = std::make_unique<Scheduler>(scheduler_config, *store_, dsb_, matchers_,
                                           executor_);

  matchers_.register_matcher("PointSurface", fm_point_surface, validate_point_surface);
  executor_.register_action("Mqtt", make_mqtt_action(mqtt_publisher_));
  executor_.register_action("WebSocket",
                            make_websocket_action([this](const std::string& id,
                                                         const std::string& text) {
                              return registry_.send_text(id, text);
                            }));
  executor_.register_action("Log", make_log_action(log_sink_));
  executor_.register_action("SetCell", make_set_cell_action(dsb_));

  if (config_.enable_ingest) {
    ingest_ = std::make_unique<IngestServer>(
        IngestServer::Config{config_.bind, config_.ingest_port,
                             config_.ingest_max_connections},
        dsb_);
  }
  if (config_.enable_ws) {
    ws_ = std::make_unique<WsServer>(WsServer::Config{config_.bind, config_.ws_port},
                                     registry_);
  }
  if (config_.enable_http) {
    api_ = std::make_unique<ApiServer>(ApiServer::Config{config_.bind, config_.http_port},
                                       *scheduler_, [this] { return stats_json(); });
  }
}

Engine::~Engine() { stop(); }

void Engine::start() {
  if (started_) return;
  started_ = true;
  executor_.start();
  scheduler_->start();  // includes restart recovery
  if (ingest_) ingest_->start();
  if (ws_) ws_->start();
  if (api_) api_->start();
  spdlog::info("engine started (storage={}, workers={})", config_.storage_path,
               config_.action_workers);
}

void Engine::stop() {
  if (!started_) return;
  started_ = false;
  if (api_) api_->stop();
  if (ws_) ws_->stop();
  if (ingest_) ingest_->stop();
  scheduler_->stop();
  executor_.shutdown();
  mqtt_publisher_->close_all();
  spdlog::info("engine stopped");
}

std::string Engine::stats_json() const {
  nlohmann::json j;
  Executor::Stats exec = executor_.stats();
  j["executor"] = {{"dispatched", exec.dispatched},
                   {"executed", exec.executed},
                   {"failed", exec.failed},
                   {"dropped", exec.dropped}};
  if (ingest_) {
    IngestStatsSnapshot in = ingest_->stats();
    j["ingest"] = {{"connections_accepted", in.connections_accepted},
                   {"connections_rejected", in.connections_rejected},
                   {"lines", in.lines},
                   {"malformed", in.malformed},
                   {"non_numeric_values", in.non_numeric_values},
                   {"probes", in.probes},
                   {"applied", in.applied}};
  }
  j["websocket"] = {{"clients", registry_.size()},
                    {"sent", registry_.sent_count()},
                    {"drops", registry_.drop_count()}};
  j["datasources"] = dsb_.entry_count();
  return j.dump();
}

}  // namespace ruleflow
