#include <gtest/gtest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ruleflow/clock.hpp"
#include "ruleflow/engine.hpp"
#include "ruleflow/net/websocket.hpp"
#include "support/test_util.hpp"

using namespace ruleflow;
using nlohmann::json;
using ruleflow::testing::temp_path;
using ruleflow::testing::wait_until;

namespace {

EngineConfig test_config() {
  EngineConfig config;
  config.bind = "127.0.0.1";
  config.http_port = 0;
  config.ws_port = 0;
  config.ingest_port = 0;
  config.storage_path = ":memory:";
  config.action_log_path = temp_path("actions") + ".log";
  config.scheduler_tick = std::chrono::milliseconds(50);
  return config;
}

json rule_body(const std::string& name = "rule-1") {
  return json{
      {"name", name},
      {"datasource", "tem{1, Portable, temperature}"},
      {"condition", "tem > 22.1"},
      {"action", "Log: matched $tem"},
      {"period_seconds", 1},
  };
}

struct ApiFixture {
  Engine engine{test_config()};
  std::unique_ptr<httplib::Client> client;

  ApiFixture() {
    engine.start();
    client = std::make_unique<httplib::Client>("127.0.0.1", engine.http_port());
    client->set_connection_timeout(5);
    client->set_read_timeout(10);
  }
  ~ApiFixture() {
    engine.stop();
    std::remove(engine.config().action_log_path.c_str());
  }

  std::uint64_t create_rule(const json& body = rule_body()) {
    auto response = client->Post("/rules", body.dump(), "application/json");
    EXPECT_TRUE(response);
    EXPECT_EQ(response->status, 201);
    return json::parse(response->body)["rid"].get<std::uint64_t>();
  }
};

}  // namespace

TEST(Api, HealthAndStats) {
  ApiFixture fx;
  auto health = fx.client->Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");

  auto stats = fx.client->Get("/stats");
  ASSERT_TRUE(stats);
  auto body = json::parse(stats->body);
  EXPECT_GT(body["rss_bytes"].get<std::uint64_t>(), 0u);
  EXPECT_EQ(body["rules"]["total"], 0);
}

TEST(Api, CreateReturns201Inactive) {
  ApiFixture fx;
  auto response = fx.client->Post("/rules", rule_body().dump(), "application/json");
  ASSERT_TRUE(response);
  EXPECT_EQ(response->status, 201);
  auto body = json::parse(response->body);
  EXPECT_EQ(body["state"], "inactive");
  EXPECT_GE(body["rid"].get<std::uint64_t>(), 1u);
}

TEST(Api, ValidationErrorsAre400) {
  ApiFixture fx;
  auto bad_syntax = rule_body();
  bad_syntax["condition"] = "tem >>";
  auto response = fx.client->Post("/rules", bad_syntax.dump(), "application/json");
  ASSERT_TRUE(response);
  EXPECT_EQ(response->status, 400);
  EXPECT_EQ(json::parse(response->body)["error"], "syntax_error");

  auto response2 = fx.client->Post("/rules", "{not json", "application/json");
  EXPECT_EQ(response2->status, 400);

  auto unknown_action = rule_body();
  unknown_action["action"] = "Nope: x";
  auto response3 = fx.client->Post("/rules", unknown_action.dump(), "application/json");
  EXPECT_EQ(response3->status, 400);
  EXPECT_EQ(json::parse(response3->body)["error"], "unknown_action_type");
}

TEST(Api, LifecycleRoutesAndConflicts) {
  ApiFixture fx;
  auto rid = fx.create_rule();
  const std::string base = "/rules/" + std::to_string(rid);

  auto start = fx.client->Post(base + "/start", "", "application/json");
  ASSERT_TRUE(start);
  EXPECT_EQ(start->status, 200);
  EXPECT_EQ(json::parse(start->body)["state"], "active");

  // Starting again conflicts and reports the current state.
  auto again = fx.client->Post(base + "/start", "", "application/json");
  EXPECT_EQ(again->status, 409);
  auto conflict = json::parse(again->body);
  EXPECT_EQ(conflict["error"], "invalid_state_transition");
  EXPECT_EQ(conflict["state"], "active");

  // DELETE while active conflicts.
  auto del = fx.client->Delete(base);
  EXPECT_EQ(del->status, 409);

  auto end = fx.client->Post(base + "/end", "", "application/json");
  EXPECT_EQ(end->status, 200);
  EXPECT_EQ(json::parse(end->body)["state"], "inactive");

  auto del2 = fx.client->Delete(base);
  EXPECT_EQ(del2->status, 200);
  auto get = fx.client->Get(base);
  EXPECT_EQ(get->status, 404);
}

TEST(Api, ReadYourWrite) {
  ApiFixture fx;
  auto rid = fx.create_rule();
  const std::string base = "/rules/" + std::to_string(rid);
  fx.client->Post(base + "/start", "", "application/json");
  auto get = fx.client->Get(base);
  ASSERT_TRUE(get);
  EXPECT_EQ(json::parse(get->body)["state"], "active");
  fx.client->Post(base + "/end", "", "application/json");
  auto get2 = fx.client->Get(base);
  EXPECT_EQ(json::parse(get2->body)["state"], "inactive");
}

TEST(Api, ScheduleAcceptsRelativeAndAbsolute) {
  ApiFixture fx;
  auto rid = fx.create_rule();
  const std::string base = "/rules/" + std::to_string(rid);

  auto relative = fx.client->Post(base + "/schedule", json{{"fire_at", "+0.3s"}}.dump(),
                                  "application/json");
  ASSERT_TRUE(relative);
  EXPECT_EQ(relative->status, 200);
  EXPECT_EQ(json::parse(relative->body)["state"], "scheduled");
  ASSERT_TRUE(wait_until(
      [&] {
        auto get = fx.client->Get(base);
        return get && json::parse(get->body)["state"] == "active";
      },
      std::chrono::seconds(3)));
  fx.client->Post(base + "/end", "", "application/json");

  auto absolute_time = format_rfc3339_ms(SystemClock::now() + std::chrono::seconds(3600));
  auto absolute = fx.client->Post(base + "/schedule",
                                  json{{"fire_at", absolute_time}}.dump(),
                                  "application/json");
  EXPECT_EQ(absolute->status, 200);
  auto end = fx.client->Post(base + "/end", "", "application/json");
  EXPECT_EQ(end->status, 200);

  auto past = fx.client->Post(base + "/schedule",
                              json{{"fire_at", "2001-01-01T00:00:00Z"}}.dump(),
                              "application/json");
  EXPECT_EQ(past->status, 400);
  auto garbage = fx.client->Post(base + "/schedule", json{{"fire_at", "soon"}}.dump(),
                                 "application/json");
  EXPECT_EQ(garbage->status, 400);
}

TEST(Api, UpdateRoute) {
  ApiFixture fx;
  auto rid = fx.create_rule();
  const std::string base = "/rules/" + std::to_string(rid);
  auto update = fx.client->Put(base, json{{"condition", "tem > 25"}}.dump(),
                               "application/json");
  ASSERT_TRUE(update);
  EXPECT_EQ(update->status, 200);
  auto get = fx.client->Get(base);
  EXPECT_EQ(json::parse(get->body)["condition"], "tem > 25");

  fx.client->Post(base + "/start", "", "application/json");
  auto while_active = fx.client->Put(base, json{{"period_seconds", 9}}.dump(),
                                     "application/json");
  EXPECT_EQ(while_active->status, 409);
}

TEST(Api, ListIncludesCounters) {
  ApiFixture fx;
  fx.create_rule(rule_body("one"));
  fx.create_rule(rule_body("two"));
  auto list = fx.client->Get("/rules");
  ASSERT_TRUE(list);
  auto body = json::parse(list->body);
  ASSERT_EQ(body["rules"].size(), 2u);
  EXPECT_TRUE(body["rules"][0].contains("counters"));
}

TEST(Api, UnknownRidIs404) {
  ApiFixture fx;
  EXPECT_EQ(fx.client->Get("/rules/9999")->status, 404);
  EXPECT_EQ(fx.client->Post("/rules/9999/start", "", "application/json")->status, 404);
  EXPECT_EQ(fx.client->Delete("/rules/9999")->status, 404);
}

// The HTTP layer contains no business logic: the same call sequence via
// HTTP and directly against the scheduler must land in the same state.
TEST(Api, HttpAndDirectDrivesConverge) {
  ApiFixture http_fx;
  Engine direct_engine(test_config());
  direct_engine.start();

  enum class Op { kCreate, kStart, kEnd, kUpdatePeriod, kSchedule, kDelete };
  const std::vector<Op> script{
      Op::kCreate, Op::kStart,  Op::kEnd,    Op::kUpdatePeriod, Op::kStart,
      Op::kEnd,    Op::kCreate, Op::kStart,  Op::kCreate,       Op::kSchedule,
      Op::kEnd,    Op::kDelete, Op::kCreate,
  };

  std::vector<std::uint64_t> http_rids, direct_rids;
  auto http_last = [&]() { return http_rids.empty() ? 0 : http_rids.back(); };
  auto direct_last = [&]() { return direct_rids.empty() ? 0 : direct_rids.back(); };

  for (Op op : script) {
    switch (op) {
      case Op::kCreate: {
        http_rids.push_back(http_fx.create_rule());
        direct_rids.push_back(direct_engine.scheduler().create_rule(
            {"tem{1, Portable, temperature}", "tem > 22.1", "Log: matched $tem"},
            "rule-1", 1, TriggerMode::kPeriodic));
        break;
      }
      case Op::kStart: {
        http_fx.client->Post("/rules/" + std::to_string(http_last()) + "/start", "",
                             "application/json");
        try {
          direct_engine.scheduler().start_rule(direct_last());
        } catch (const Error&) {
        }
        break;
      }
      case Op::kEnd: {
        http_fx.client->Post("/rules/" + std::to_string(http_last()) + "/end", "",
                             "application/json");
        try {
          direct_engine.scheduler().end_rule(direct_last());
        } catch (const Error&) {
        }
        break;
      }
      case Op::kUpdatePeriod: {
        http_fx.client->Put("/rules/" + std::to_string(http_last()),
                            json{{"period_seconds", 2}}.dump(), "application/json");
        RuleUpdate update;
        update.period_seconds = 2;
        try {
          direct_engine.scheduler().update_rule(direct_last(), update);
        } catch (const Error&) {
        }
        break;
      }
      case Op::kSchedule: {
        http_fx.client->Post("/rules/" + std::to_string(http_last()) + "/schedule",
                             json{{"fire_at", "+3600s"}}.dump(), "application/json");
        try {
          direct_engine.scheduler().schedule_rule(
              direct_last(), SystemClock::now() + std::chrono::hours(1));
        } catch (const Error&) {
        }
        break;
      }
      case Op::kDelete: {
        http_fx.client->Delete("/rules/" + std::to_string(http_last()));
        try {
          direct_engine.scheduler().delete_rule(direct_last());
        } catch (const Error&) {
        }
        break;
      }
    }
  }

  auto http_rules = http_fx.engine.scheduler().list_rules();
  auto direct_rules = direct_engine.scheduler().list_rules();
  ASSERT_EQ(http_rules.size(), direct_rules.size());
  for (std::size_t i = 0; i < http_rules.size(); ++i) {
    EXPECT_EQ(http_rules[i].state, direct_rules[i].state) << i;
    EXPECT_EQ(http_rules[i].period_seconds, direct_rules[i].period_seconds) << i;
  }
  direct_engine.stop();
  std::remove(direct_engine.config().action_log_path.c_str());
}

// --- WebSocket registry behavior through a live server ---

TEST(WsRegistry, ConnectReceiveSupersedeAndDrop) {
  ApiFixture fx;
  auto& registry = fx.engine.clients();

  auto client = net::ws::ClientConnection::connect("127.0.0.1", fx.engine.ws_port(),
                                                   "/ws?client_id=1");
  ASSERT_TRUE(wait_until([&] { return registry.connected("1"); }, std::chrono::seconds(2)));
  EXPECT_TRUE(registry.send_text("1", "hello"));
  auto text = client.receive_text(std::chrono::seconds(2));
  ASSERT_TRUE(text);
  EXPECT_EQ(*text, "hello");

  // A new connection under the same id supersedes the old one.
  auto replacement = net::ws::ClientConnection::connect(
      "127.0.0.1", fx.engine.ws_port(), "/ws?client_id=1");
  ASSERT_TRUE(wait_until([&] { return registry.size() == 1; }, std::chrono::seconds(2)));
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  EXPECT_TRUE(registry.send_text("1", "for the new one"));
  auto text2 = replacement.receive_text(std::chrono::seconds(2));
  ASSERT_TRUE(text2);
  EXPECT_EQ(*text2, "for the new one");

  // Disconnect, then send: counted drop, no crash.
  replacement.close();
  ASSERT_TRUE(wait_until([&] { return !registry.connected("1"); }, std::chrono::seconds(2)));
  const auto drops_before = registry.drop_count();
  EXPECT_FALSE(registry.send_text("1", "nobody home"));
  EXPECT_EQ(registry.drop_count(), drops_before + 1);
}

TEST(WsRegistry, MissingClientIdRejected) {
  ApiFixture fx;
  EXPECT_THROW(net::ws::ClientConnection::connect("127.0.0.1", fx.engine.ws_port(),
                                                  "/ws"),
               Error);
}
