#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "ruleflow/dsb.hpp"
#include "ruleflow/executor.hpp"
#include "ruleflow/matcher.hpp"
#include "ruleflow/periodic.hpp"
#include "ruleflow/storage.hpp"

namespace ruleflow {

/// Partial update for an inactive rule; absent fields keep their value.
struct RuleUpdate {
  std::optional<std::string> name;
  std::optional<RuleText> text;
  std::optional<std::uint32_t> period_seconds;
  std::optional<TriggerMode> trigger_mode;
};

/// Owns the rule lifecycle (inactive <-> scheduled/active), the periodic
/// execution engine, delayed-start timers, and push-mode run loops.
/// Lifecycle calls are serialized per rid; calls on distinct rids run in
/// parallel.
class Scheduler {
 public:
  struct Config {
    std::uint32_t default_period_seconds = 5;
    PeriodicEngine::Config periodic;
    std::size_t push_queue_capacity = 1024;
  };

  Scheduler(Config config, RuleStore& store, Dsb& dsb, const MatcherMap& matchers,
            Executor& executor);
  ~Scheduler();

  /// Starts the runtime and recovers persisted rules: active rules are
  /// restarted, scheduled rules re-armed (or started at once when their
  /// fire time has already passed).
  void start();
  /// Halts timers, periodic entries, and push loops without touching
  /// persisted rule states.
  void stop();

  std::uint64_t create_rule(const RuleText& text, const std::string& name,
                            std::uint32_t period_seconds, TriggerMode mode);
  void start_rule(std::uint64_t rid);
  void schedule_rule(std::uint64_t rid, std::chrono::system_clock::time_point fire_at);
  void update_rule(std::uint64_t rid, const RuleUpdate& update);
  void end_rule(std::uint64_t rid);
  void delete_rule(std::uint64_t rid);

  std::optional<RuleRecord> get_rule(std::uint64_t rid) const;
  std::vector<RuleRecord> list_rules() const;
  std::shared_ptr<const RuleStats> rule_stats(std::uint64_t rid) const;

  std::vector<std::uint64_t> active_rids() const;
  std::vector<std::uint64_t> scheduled_rids() const;

  const Config& config() const { return config_; }

 private:
  /// Push-mode run loop: one sequential task per rule feeding from the
  /// rule's subscriber queue, firing once every symbol has fresh data.
  struct PushRunner {
    std::uint64_t rid = 0;
    std::shared_ptr<MatchFunction> mf;
    std::shared_ptr<PushQueue> queue;
    std::unordered_map<std::string, std::vector<std::string>> symbols_by_key;
    std::size_t symbol_count = 0;
    std::thread thread;

    void run();
  };

  struct Runtime {
    TriggerMode mode = TriggerMode::kPeriodic;
    std::vector<DatasourceDecl> ost;  // for symmetric unregistration
    std::shared_ptr<MatchFunction> mf;
    std::unique_ptr<PushRunner> push;
  };

  class RidLockGuard;
  std::shared_ptr<std::mutex> rid_lock(std::uint64_t rid);
  void release_rid_lock(std::uint64_t rid);

  CompiledRule validate_rule(const RuleText& text, std::uint32_t period_seconds) const;
  void start_locked(RuleRecord record);
  void stop_runtime_locked(std::uint64_t rid);
  void on_timer_fire(std::uint64_t rid);
  std::shared_ptr<RuleStats> stats_for(std::uint64_t rid);

  Config config_;
  RuleStore& store_;
  Dsb& dsb_;
  const MatcherMap& matchers_;
  Executor& executor_;

  PeriodicEngine periodic_;
  TimerService timers_;

  mutable std::mutex maps_mutex_;
  std::unordered_map<std::uint64_t, Runtime> runtime_;
  std::unordered_map<std::uint64_t, std::int64_t> scheduled_;  // rid -> fire_at_ms
  std::unordered_map<std::uint64_t, std::shared_ptr<RuleStats>> stats_;

  mutable std::mutex rid_locks_mutex_;
  std::unordered_map<std::uint64_t, std::pair<std::shared_ptr<std::mutex>, int>> rid_locks_;

  bool started_ = false;
};

}  // namespace ruleflow
