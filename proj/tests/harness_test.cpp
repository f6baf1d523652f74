#include "harness.hpp"

#include <gtest/gtest.h>

#include <thread>

#include "ruleflow/engine.hpp"
#include "ruleflow/net/mqtt.hpp"
#include "support/mini_mqtt_broker.hpp"
#include "support/test_util.hpp"

using namespace ruleflow::harness;
using ruleflow::testing::MiniMqttBroker;
using ruleflow::testing::temp_path;
using ruleflow::testing::wait_until;

TEST(Profile, ParsesKeyValueList) {
  std::string error;
  auto profile = parse_profile("rules=100,threads=4,period=2,rate=50,duration=3", &error);
  ASSERT_TRUE(profile) << error;
  EXPECT_EQ(profile->rule_count, 100u);
  EXPECT_EQ(profile->threads, 4u);
  EXPECT_EQ(profile->period_seconds, 2u);
  EXPECT_DOUBLE_EQ(profile->message_rate, 50.0);
  EXPECT_DOUBLE_EQ(profile->duration_seconds, 3.0);
}

TEST(Profile, RejectsBadInput) {
  EXPECT_FALSE(parse_profile("rules"));
  EXPECT_FALSE(parse_profile("bogus=1"));
  EXPECT_FALSE(parse_profile("rules=0"));
  EXPECT_FALSE(parse_profile("rate=-1"));
}

TEST(Scenario, Test1StreamsThresholdCrossing) {
  ScenarioConfig scenario;
  scenario.kind = "test1";
  LoadProfile profile;
  auto lines = scenario_lines(scenario, profile);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_NE(lines[0].find("21.0"), std::string::npos);
  EXPECT_NE(lines[1].find("22.1"), std::string::npos);
  EXPECT_NE(lines[2].find("23.4"), std::string::npos);
  EXPECT_NE(lines[0].find("\"device_id\":\"1\""), std::string::npos);
}

TEST(Scenario, DeterministicForFixedSeed) {
  ScenarioConfig scenario;
  scenario.kind = "walk";
  scenario.seed = 99;
  LoadProfile profile;
  profile.message_rate = 100;
  profile.duration_seconds = 2;
  auto first = scenario_lines(scenario, profile);
  auto second = scenario_lines(scenario, profile);
  EXPECT_EQ(first, second);  // byte-identical

  scenario.seed = 100;
  EXPECT_NE(scenario_lines(scenario, profile), first);
}

TEST(Scenario, RampCoversRange) {
  ScenarioConfig scenario;
  scenario.kind = "ramp";
  scenario.ramp_from = 20.0;
  scenario.ramp_to = 30.0;
  LoadProfile profile;
  profile.message_rate = 10;
  profile.duration_seconds = 1;
  auto lines = scenario_lines(scenario, profile);
  ASSERT_EQ(lines.size(), 10u);
  EXPECT_NE(lines.front().find("20"), std::string::npos);
  EXPECT_NE(lines.back().find("30"), std::string::npos);
}

TEST(Simulate, ConnectionRefusedReported) {
  ScenarioConfig scenario;
  LoadProfile profile;
  auto result = simulate_devices("127.0.0.1", 9, scenario, profile);
  EXPECT_FALSE(result.connected);
  EXPECT_EQ(result.sent, 0u);
}

TEST(Membench, RuleBodyIsValidJson) {
  auto body = membench_rule_body(7, 5);
  EXPECT_NE(body.find("PointSurface"), std::string::npos);
  EXPECT_NE(body.find("membench-7"), std::string::npos);
}

namespace {

struct SubscriberRig {
  MiniMqttBroker broker;
  ruleflow::Engine engine;

  SubscriberRig() : engine(make_config()) {
    broker.start();
    engine.start();
  }
  ~SubscriberRig() {
    engine.stop();
    broker.stop();
    std::remove(engine.config().action_log_path.c_str());
  }

  static ruleflow::EngineConfig make_config() {
    ruleflow::EngineConfig config;
    config.bind = "127.0.0.1";
    config.http_port = 0;
    config.ws_port = 0;
    config.ingest_port = 0;
    config.action_log_path = temp_path("harness-actions") + ".log";
    return config;
  }

  SubscribeOptions options() {
    SubscribeOptions sub;
    sub.mqtt_host = "127.0.0.1";
    sub.mqtt_port = broker.port();
    sub.mqtt_topic = "test";
    sub.ws_host = "127.0.0.1";
    sub.ws_port = engine.ws_port();
    sub.ws_client_id = "sub-1";
    sub.timeout_seconds = 5.0;
    return sub;
  }
};

}  // namespace

TEST(Subscribe, ExpectedMessagesPass) {
  SubscriberRig rig;
  auto options = rig.options();
  options.expect_mqtt = {"control temperature"};
  options.expect_ws = {"rule Matched!"};

  std::thread producer([&] {
    ASSERT_TRUE(wait_until([&] { return rig.engine.clients().connected("sub-1"); },
                           std::chrono::seconds(4)));
    auto publisher = ruleflow::net::mqtt::Client::connect(
        "127.0.0.1", rig.broker.port(), "u", "p", "producer");
    publisher.publish("test", "control temperature");
    publisher.disconnect();
    rig.engine.clients().send_text("sub-1", "rule Matched!");
  });
  auto report = run_test_subscribers(options);
  producer.join();
  EXPECT_TRUE(report.passed) << report.diff;
  EXPECT_EQ(report.mqtt_received, options.expect_mqtt);
  EXPECT_EQ(report.ws_received, options.expect_ws);
}

TEST(Subscribe, NoTrafficWithEmptyExpectationsPasses) {
  SubscriberRig rig;
  auto options = rig.options();
  options.timeout_seconds = 1.0;
  auto report = run_test_subscribers(options);
  EXPECT_TRUE(report.passed) << report.diff;
}

TEST(Subscribe, UnexpectedExtraMessageFails) {
  SubscriberRig rig;
  auto options = rig.options();
  options.ws_host.clear();  // MQTT side only
  options.expect_mqtt = {"one"};

  std::thread producer([&] {
    auto publisher = ruleflow::net::mqtt::Client::connect(
        "127.0.0.1", rig.broker.port(), "u", "p", "producer");
    publisher.publish("test", "one");
    publisher.publish("test", "two");  // not expected
    publisher.disconnect();
  });
  auto report = run_test_subscribers(options);
  producer.join();
  EXPECT_FALSE(report.passed);
  EXPECT_NE(report.diff.find("mqtt"), std::string::npos);
}
