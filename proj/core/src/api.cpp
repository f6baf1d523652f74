#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ruleflow/api.hpp"
#include "ruleflow/clock.hpp"

namespace ruleflow {
namespace {

using nlohmann::json;

json record_json(const Scheduler& scheduler, const RuleRecord& record) {
  json j{
      {"rid", record.rid},
      {"name", record.name},
      {"datasource", record.datasource_field},
      {"condition", record.condition_field},
      {"action", record.action_field},
      {"state", to_string(record.state)},
      {"period_seconds", record.period_seconds},
      {"trigger_mode", to_string(record.trigger_mode)},
      {"created_at", format_rfc3339_ms(from_ms(record.created_at_ms))},
      {"updated_at", format_rfc3339_ms(from_ms(record.updated_at_ms))},
  };
  if (record.fire_at_ms) j["fire_at"] = format_rfc3339_ms(from_ms(*record.fire_at_ms));
  if (auto stats = scheduler.rule_stats(record.rid)) {
    RuleStatsSnapshot s = stats->snapshot();
    j["counters"] = json{
        {"invocations", s.invocations}, {"skipped_no_data", s.skipped_no_data},
        {"skipped_dedup", s.skipped_dedup}, {"evaluations", s.evaluations},
        {"matches", s.matches}, {"dispatches", s.dispatches},
        {"errors", s.errors}, {"overrun_skips", s.overrun_skips},
    };
  }
  return j;
}

int status_for(const Error& error) {
  switch (error.code()) {
    case ErrorCode::kUnknownRule:
      return 404;
    case ErrorCode::kInvalidStateTransition:
      return 409;
    case ErrorCode::kSyntax:
    case ErrorCode::kUndeclaredSymbol:
    case ErrorCode::kDuplicateSymbol:
    case ErrorCode::kUnknownConditionType:
    case ErrorCode::kUnknownActionType:
    case ErrorCode::kReservedConditionType:
    case ErrorCode::kArity:
    case ErrorCode::kPastTimestamp:
    case ErrorCode::kValueParse:
      return 400;
    default:
      return 500;
  }
}

}  // namespace

struct ApiServer::Impl {
  Impl(Config config, Scheduler& scheduler, StatsProvider stats_provider)
      : config(std::move(config)),
        scheduler(scheduler),
        stats_provider(std::move(stats_provider)) {
    wire_routes();
  }

  void wire_routes();
  void respond_error(httplib::Response& response, const std::exception& error);

  Config config;
  Scheduler& scheduler;
  StatsProvider stats_provider;
  httplib::Server server;
  std::thread thread;
  std::uint16_t bound_port = 0;
};

void ApiServer::Impl::respond_error(httplib::Response& response,
                                    const std::exception& error) {
  json body;
  int status = 500;
  if (const auto* typed = dynamic_cast<const Error*>(&error)) {
    status = status_for(*typed);
    body["error"] = error_code_name(typed->code());
  } else {
    body["error"] = "internal_error";
  }
  body["message"] = error.what();
  response.status = status;
  response.set_content(body.dump(), "application/json");
}

void ApiServer::Impl::wire_routes() {
  auto handle = [this](auto&& fn) {
    return [this, fn](const httplib::Request& request, httplib::Response& response) {
      try {
        fn(request, response);
      } catch (const std::exception& e) {
        respond_error(response, e);
      }
    };
  };

  server.Get("/health", [](const httplib::Request&, httplib::Response& response) {
    response.set_content(json{{"status", "ok"}}.dump(), "application/json");
  });

  server.Get("/stats", handle([this](const httplib::Request&, httplib::Response& response) {
               json body = json::parse(stats_provider ? stats_provider() : "{}");
               std::size_t active = 0, scheduled = 0, inactive = 0;
               for (const RuleRecord& record : scheduler.list_rules()) {
                 switch (record.state) {
                   case RuleState::kActive: ++active; break;
                   case RuleState::kScheduled: ++scheduled; break;
                   case RuleState::kInactive: ++inactive; break;
                 }
               }
               body["rules"] = json{{"active", active},
                                    {"scheduled", scheduled},
                                    {"inactive", inactive},
                                    {"total", active + scheduled + inactive}};
               body["rss_bytes"] = process_rss_bytes();
               response.set_content(body.dump(), "application/json");
             }));

  server.Post("/rules", handle([this](const httplib::Request& request,
                                      httplib::Response& response) {
                json body = json::parse(request.body, nullptr, false);
                if (body.is_discarded() || !body.is_object()) {
                  throw Error(ErrorCode::kValueParse, "request body is not a JSON object");
                }
                RuleText text;
                try {
                  text.datasource_field = body.at("datasource").get<std::string>();
                  text.condition_field = body.at("condition").get<std::string>();
                  text.action_field = body.at("action").get<std::string>();
                } catch (const json::exception&) {
                  throw Error(ErrorCode::kValueParse,
                              "body must contain datasource, condition and action strings");
                }
                const std::string name = body.value("name", std::string{});
                const auto period = body.value("period_seconds",
                                               scheduler.config().default_period_seconds);
                if (period == 0) {
                  throw Error(ErrorCode::kValueParse, "period_seconds must be positive");
                }
                TriggerMode mode = TriggerMode::kPeriodic;
                if (body.contains("trigger_mode")) {
                  auto parsed = parse_trigger_mode(body["trigger_mode"].get<std::string>());
                  if (!parsed) {
                    throw Error(ErrorCode::kValueParse,
                                "trigger_mode must be periodic, periodic_dedup or push");
                  }
                  mode = *parsed;
                }
                const std::uint64_t rid = scheduler.create_rule(text, name, period, mode);
                response.status = 201;
                response.set_content(json{{"rid", rid}, {"state", "inactive"}}.dump(),
                                     "application/json");
              }));

  server.Get("/rules", handle([this](const httplib::Request&, httplib::Response& response) {
               json rules = json::array();
               for (const RuleRecord& record : scheduler.list_rules()) {
                 rules.push_back(record_json(scheduler, record));
               }
               response.set_content(json{{"rules", rules}}.dump(), "application/json");
             }));

  server.Get(R"(/rules/(\d+))",
             handle([this](const httplib::Request& request, httplib::Response& response) {
               const std::uint64_t rid = std::stoull(request.matches[1]);
               auto record = scheduler.get_rule(rid);
               if (!record) {
                 throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
               }
               response.set_content(record_json(scheduler, *record).dump(),
                                    "application/json");
             }));

  auto lifecycle = [this](httplib::Response& response, std::uint64_t rid,
                          auto&& operation) {
    try {
      operation();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInvalidStateTransition) {
        json body{{"error", error_code_name(e.code())}, {"message", e.what()}};
        if (auto record = scheduler.get_rule(rid)) body["state"] = to_string(record->state);
        response.status = 409;
        response.set_content(body.dump(), "application/json");
        return;
      }
      throw;
    }
    auto record = scheduler.get_rule(rid);
    json body{{"rid", rid}};
    if (record) body["state"] = to_string(record->state);
    response.set_content(body.dump(), "application/json");
  };

  server.Post(R"(/rules/(\d+)/start)",
              handle([this, lifecycle](const httplib::Request& request,
                                       httplib::Response& response) {
                const std::uint64_t rid = std::stoull(request.matches[1]);
                lifecycle(response, rid, [&] { scheduler.start_rule(rid); });
              }));

  server.Post(R"(/rules/(\d+)/schedule)",
              handle([this, lifecycle](const httplib::Request& request,
                                       httplib::Response& response) {
                const std::uint64_t rid = std::stoull(request.matches[1]);
                json body = json::parse(request.body, nullptr, false);
                if (body.is_discarded() || !body.contains("fire_at")) {
                  throw Error(ErrorCode::kValueParse, "body must contain fire_at");
                }
                auto fire_at = parse_fire_at(body["fire_at"].get<std::string>(),
                                             SystemClock::now());
                if (!fire_at) {
                  throw Error(ErrorCode::kValueParse,
                              "fire_at must be RFC 3339 or relative '+Ns'");
                }
                lifecycle(response, rid, [&] { scheduler.schedule_rule(rid, *fire_at); });
              }));

  server.Post(R"(/rules/(\d+)/end)",
              handle([this, lifecycle](const httplib::Request& request,
                                       httplib::Response& response) {
                const std::uint64_t rid = std::stoull(request.matches[1]);
                lifecycle(response, rid, [&] { scheduler.end_rule(rid); });
              }));

  server.Put(R"(/rules/(\d+))",
             handle([this, lifecycle](const httplib::Request& request,
                                      httplib::Response& response) {
               const std::uint64_t rid = std::stoull(request.matches[1]);
               json body = json::parse(request.body, nullptr, false);
               if (body.is_discarded() || !body.is_object()) {
                 throw Error(ErrorCode::kValueParse, "request body is not a JSON object");
               }
               RuleUpdate update;
               if (body.contains("name")) update.name = body["name"].get<std::string>();
               const bool has_text = body.contains("datasource") ||
                                     body.contains("condition") || body.contains("action");
               if (has_text) {
                 auto current = scheduler.get_rule(rid);
                 if (!current) {
                   throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
                 }
                 RuleText text = current->text();
                 if (body.contains("datasource")) {
                   text.datasource_field = body["datasource"].get<std::string>();
                 }
                 if (body.contains("condition")) {
                   text.condition_field = body["condition"].get<std::string>();
                 }
                 if (body.contains("action")) {
                   text.action_field = body["action"].get<std::string>();
                 }
                 update.text = text;
               }
               if (body.contains("period_seconds")) {
                 update.period_seconds = body["period_seconds"].get<std::uint32_t>();
                 if (*update.period_seconds == 0) {
                   throw Error(ErrorCode::kValueParse, "period_seconds must be positive");
                 }
               }
               if (body.contains("trigger_mode")) {
                 auto parsed = parse_trigger_mode(body["trigger_mode"].get<std::string>());
                 if (!parsed) {
                   throw Error(ErrorCode::kValueParse, "invalid trigger_mode");
                 }
                 update.trigger_mode = parsed;
               }
               lifecycle(response, rid, [&] { scheduler.update_rule(rid, update); });
             }));

  server.Delete(R"(/rules/(\d+))",
                handle([this](const httplib::Request& request,
                              httplib::Response& response) {
                  const std::uint64_t rid = std::stoull(request.matches[1]);
                  try {
                    scheduler.delete_rule(rid);
                  } catch (const Error& e) {
                    if (e.code() == ErrorCode::kInvalidStateTransition) {
                      json body{{"error", error_code_name(e.code())},
                                {"message", e.what()}};
                      if (auto record = scheduler.get_rule(rid)) {
                        body["state"] = to_string(record->state);
                      }
                      response.status = 409;
                      response.set_content(body.dump(), "application/json");
                      return;
                    }
                    throw;
                  }
                  response.set_content(json{{"rid", rid}, {"deleted", true}}.dump(),
                                       "application/json");
                }));
}

ApiServer::ApiServer(Config config, Scheduler& scheduler, StatsProvider stats_provider)
    : impl_(std::make_unique<Impl>(std::move(config), scheduler,
                                   std::move(stats_provider))) {}

ApiServer::~ApiServer() { stop(); }

void ApiServer::start() {
  if (impl_->thread.joinable()) return;
  if (impl_->config.port == 0) {
    int port = impl_->server.bind_to_any_port(impl_->config.bind);
    if (port <= 0) throw Error(ErrorCode::kIo, "http: cannot bind ephemeral port");
    impl_->bound_port = static_cast<std::uint16_t>(port);
  } else {
    if (!impl_->server.bind_to_port(impl_->config.bind, impl_->config.port)) {
      throw Error(ErrorCode::kIo, "http: cannot bind " + impl_->config.bind + ":" +
                                      std::to_string(impl_->config.port));
    }
    impl_->bound_port = impl_->config.port;
  }
  port_ = impl_->bound_port;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  // listen_after_bind spins up asynchronously; wait until it answers.
  for (int i = 0; i < 100 && !impl_->server.is_running(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  spdlog::info("rest: listening on {}:{}", impl_->config.bind, port_);
}

void ApiServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  impl_->server.stop();
  impl_->thread.join();
}

}  // namespace ruleflow
