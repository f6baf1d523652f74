#include "ruleflow/scheduler.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "ruleflow/clock.hpp"

namespace ruleflow {

namespace {

[[noreturn]] void throw_transition(std::uint64_t rid, RuleState state, const char* verb) {
  throw Error(ErrorCode::kInvalidStateTransition,
              "cannot " + std::string(verb) + " rule " + std::to_string(rid) +
                  " in state '" + to_string(state) + "'");
}

}  // namespace

/// Scoped per-rid lock: serializes lifecycle calls on one rule while
/// letting unrelated rids proceed.
class Scheduler::RidLockGuard {
 public:
  RidLockGuard(Scheduler& scheduler, std::uint64_t rid)
      : scheduler_(scheduler), rid_(rid), mutex_(scheduler.rid_lock(rid)) {
    mutex_->lock();
  }
  ~RidLockGuard() {
    mutex_->unlock();
    scheduler_.release_rid_lock(rid_);
  }
  RidLockGuard(const RidLockGuard&) = delete;
  RidLockGuard& operator=(const RidLockGuard&) = delete;

 private:
  Scheduler& scheduler_;
  std::uint64_t rid_;
  std::shared_ptr<std::mutex> mutex_;
};

std::shared_ptr<std::mutex> Scheduler::rid_lock(std::uint64_t rid) {
  std::lock_guard lock(rid_locks_mutex_);
  auto& [mutex, refs] = rid_locks_[rid];
  if (!mutex) mutex = std::make_shared<std::mutex>();
  ++refs;
  return mutex;
}

void Scheduler::release_rid_lock(std::uint64_t rid) {
  std::lock_guard lock(rid_locks_mutex_);
  auto it = rid_locks_.find(rid);
  if (it != rid_locks_.end() && --it->second.second == 0) rid_locks_.erase(it);
}

void Scheduler::PushRunner::run() {
  std::unordered_map<std::string, Sample> pending;
  while (auto message = queue->pop()) {
    auto it = symbols_by_key.find(filter_key(message->index));
    if (it == symbols_by_key.end()) continue;
    for (const std::string& symbol : it->second) {
      pending[symbol] = Sample{message->value, message->session};
    }
    if (pending.size() == symbol_count) {
      mf->stats()->invocations.fetch_add(1);
      Ist ist(pending.begin(), pending.end());
      mf->evaluate_with(ist);
      pending.clear();
    }
  }
}

Scheduler::Scheduler(Config config, RuleStore& store, Dsb& dsb,
                     const MatcherMap& matchers, Executor& executor)
    : config_(config),
      store_(store),
      dsb_(dsb),
      matchers_(matchers),
      executor_(executor),
      periodic_(config.periodic) {}

Scheduler::~Scheduler() { stop(); }

void Scheduler::start() {
  if (started_) return;
  started_ = true;
  periodic_.start();
  timers_.start();

  // Restart recovery: bring the runtime back in line with the persisted
  // states. Past-due scheduled rules start immediately.
  for (RuleRecord& record : store_.list()) {
    stats_for(record.rid);
    try {
      if (record.state == RuleState::kActive) {
        start_locked(record);
      } else if (record.state == RuleState::kScheduled) {
        const auto now = SystemClock::now();
        if (!record.fire_at_ms || from_ms(*record.fire_at_ms) <= now) {
          start_locked(record);
        } else {
          {
            std::lock_guard lock(maps_mutex_);
            scheduled_[record.rid] = *record.fire_at_ms;
          }
          const std::uint64_t rid = record.rid;
          timers_.schedule(rid, from_ms(*record.fire_at_ms),
                           [this, rid] { on_timer_fire(rid); });
        }
      }
    } catch (const std::exception& e) {
      spdlog::error("recovery of rule {} failed: {}; marking inactive", record.rid,
                    e.what());
      record.state = RuleState::kInactive;
      record.fire_at_ms.reset();
      record.updated_at_ms = now_ms();
      store_.update(record);
    }
  }
}

void Scheduler::stop() {
  if (!started_) return;
  started_ = false;
  timers_.stop();
  periodic_.stop();

  std::unordered_map<std::uint64_t, Runtime> runtime;
  {
    std::lock_guard lock(maps_mutex_);
    runtime = std::move(runtime_);
    runtime_.clear();
    scheduled_.clear();
  }
  for (auto& [rid, rt] : runtime) {
    if (rt.push) {
      for (const DatasourceDecl& decl : rt.ost) {
        try {
          dsb_.unsubscribe(decl.index, rid);
        } catch (const Error&) {
        }
      }
      rt.push->queue->close();
      if (rt.push->thread.joinable()) rt.push->thread.join();
    }
  }
}

std::shared_ptr<RuleStats> Scheduler::stats_for(std::uint64_t rid) {
  std::lock_guard lock(maps_mutex_);
  auto& stats = stats_[rid];
  if (!stats) stats = std::make_shared<RuleStats>();
  return stats;
}

CompiledRule Scheduler::validate_rule(const RuleText& text,
                                      std::uint32_t period_seconds) const {
  CompiledRule compiled = parse_rule(text, period_seconds);
  matchers_.validate(compiled);
  for (const Action& action : compiled.actions) {
    if (!executor_.has_action(action.action_type)) {
      throw Error(ErrorCode::kUnknownActionType,
                  "action type '" + action.action_type + "' not registered");
    }
  }
  return compiled;
}

std::uint64_t Scheduler::create_rule(const RuleText& text, const std::string& name,
                                     std::uint32_t period_seconds, TriggerMode mode) {
  if (period_seconds == 0) period_seconds = config_.default_period_seconds;
  validate_rule(text, period_seconds);  // dry run, nothing persisted on failure

  RuleRecord record;
  record.name = name;
  record.datasource_field = text.datasource_field;
  record.condition_field = text.condition_field;
  record.action_field = text.action_field;
  record.state = RuleState::kInactive;
  record.period_seconds = period_seconds;
  record.trigger_mode = mode;
  record.created_at_ms = record.updated_at_ms = now_ms();

  const std::uint64_t rid = store_.insert(record);
  stats_for(rid);
  spdlog::debug("rule {} created ('{}')", rid, name);
  return rid;
}

void Scheduler::start_locked(RuleRecord record) {
  CompiledRule compiled = validate_rule(record.text(), record.period_seconds);

  // All-or-nothing: roll back cache registrations if anything later fails.
  std::vector<const DatasourceDecl*> registered;
  registered.reserve(compiled.ost.size());
  try {
    for (const DatasourceDecl& decl : compiled.ost) {
      dsb_.register_index(decl.index);
      registered.push_back(&decl);
    }

    const bool dedup = record.trigger_mode == TriggerMode::kPeriodicDedup;
    auto mf = generate_match_function(record.rid, compiled, matchers_, dsb_, executor_,
                                      dedup, stats_for(record.rid));

    Runtime runtime;
    runtime.mode = record.trigger_mode;
    runtime.ost = compiled.ost;
    runtime.mf = mf;

    if (record.trigger_mode == TriggerMode::kPush) {
      auto runner = std::make_unique<PushRunner>();
      runner->rid = record.rid;
      runner->mf = mf;
      runner->queue = std::make_shared<PushQueue>(config_.push_queue_capacity);
      for (const DatasourceDecl& decl : compiled.ost) {
        runner->symbols_by_key[filter_key(decl.index)].push_back(decl.symbol);
      }
      std::size_t symbols = 0;
      for (const auto& [key, syms] : runner->symbols_by_key) symbols += syms.size();
      runner->symbol_count = symbols;

      // Subscribe each distinct index once; symbols sharing an index
      // share the queue and fill together.
      std::vector<Index> unique_indices;
      for (const DatasourceDecl& decl : compiled.ost) {
        if (std::find(unique_indices.begin(), unique_indices.end(), decl.index) ==
            unique_indices.end()) {
          unique_indices.push_back(decl.index);
        }
      }
      for (const Index& index : unique_indices) {
        dsb_.subscribe(index, record.rid, runner->queue);
      }
      PushRunner* raw = runner.get();
      runner->thread = std::thread([raw] { raw->run(); });
      runtime.push = std::move(runner);
    } else {
      const auto period = std::chrono::milliseconds(
          static_cast<std::int64_t>(record.period_seconds) * 1000);
      auto stats = stats_for(record.rid);
      periodic_.add(
          record.rid, period, [mf] { (*mf)(); },
          [stats] { stats->overrun_skips.fetch_add(1); });
    }

    {
      std::lock_guard lock(maps_mutex_);
      runtime_.emplace(record.rid, std::move(runtime));
    }
  } catch (...) {
    for (const DatasourceDecl* decl : registered) {
      try {
        dsb_.unregister_index(decl->index);
      } catch (const Error&) {
      }
    }
    throw;
  }

  record.state = RuleState::kActive;
  record.fire_at_ms.reset();
  record.updated_at_ms = now_ms();
  store_.update(record);
  spdlog::debug("rule {} active ({} mode, {}s period)", record.rid,
                to_string(record.trigger_mode), record.period_seconds);
}

void Scheduler::start_rule(std::uint64_t rid) {
  RidLockGuard guard(*this, rid);
  auto record = store_.get(rid);
  if (!record) throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
  if (record->state != RuleState::kInactive) throw_transition(rid, record->state, "start");
  start_locked(*record);
}

void Scheduler::schedule_rule(std::uint64_t rid,
                              std::chrono::system_clock::time_point fire_at) {
  RidLockGuard guard(*this, rid);
  auto record = store_.get(rid);
  if (!record) throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
  if (record->state != RuleState::kInactive) {
    throw_transition(rid, record->state, "schedule");
  }
  if (fire_at <= SystemClock::now()) {
    throw Error(ErrorCode::kPastTimestamp, "fire_at must be in the future");
  }

  record->state = RuleState::kScheduled;
  record->fire_at_ms = to_ms(fire_at);
  record->updated_at_ms = now_ms();
  store_.update(*record);
  {
    std::lock_guard lock(maps_mutex_);
    scheduled_[rid] = *record->fire_at_ms;
  }
  timers_.schedule(rid, fire_at, [this, rid] { on_timer_fire(rid); });
}

void Scheduler::on_timer_fire(std::uint64_t rid) {
  RidLockGuard guard(*this, rid);
  auto record = store_.get(rid);
  if (!record || record->state != RuleState::kScheduled) return;  // raced with end/delete
  {
    std::lock_guard lock(maps_mutex_);
    if (!scheduled_.erase(rid)) return;  // cancelled
  }
  try {
    start_locked(*record);
  } catch (const std::exception& e) {
    spdlog::error("timed start of rule {} failed: {}; marking inactive", rid, e.what());
    record->state = RuleState::kInactive;
    record->fire_at_ms.reset();
    record->updated_at_ms = now_ms();
    store_.update(*record);
  }
}

void Scheduler::update_rule(std::uint64_t rid, const RuleUpdate& update) {
  RidLockGuard guard(*this, rid);
  auto record = store_.get(rid);
  if (!record) throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
  if (record->state != RuleState::kInactive) throw_transition(rid, record->state, "update");

  RuleRecord next = *record;
  if (update.name) next.name = *update.name;
  if (update.text) {
    next.datasource_field = update.text->datasource_field;
    next.condition_field = update.text->condition_field;
    next.action_field = update.text->action_field;
  }
  if (update.period_seconds) next.period_seconds = *update.period_seconds;
  if (update.trigger_mode) next.trigger_mode = *update.trigger_mode;

  validate_rule(next.text(), next.period_seconds);  // reject before persisting
  next.updated_at_ms = now_ms();
  store_.update(next);
}

void Scheduler::stop_runtime_locked(std::uint64_t rid) {
  Runtime runtime;
  {
    std::lock_guard lock(maps_mutex_);
    auto it = runtime_.find(rid);
    if (it == runtime_.end()) return;
    runtime = std::move(it->second);
    runtime_.erase(it);
  }

  if (runtime.push) {
    for (const DatasourceDecl& decl : runtime.ost) {
      try {
        dsb_.unsubscribe(decl.index, rid);
      } catch (const Error&) {
      }
    }
    runtime.push->queue->close();
    if (runtime.push->thread.joinable()) runtime.push->thread.join();
  } else {
    periodic_.remove(rid);  // waits out any in-flight invocation
  }

  for (const DatasourceDecl& decl : runtime.ost) {
    dsb_.unregister_index(decl.index);
  }
}

void Scheduler::end_rule(std::uint64_t rid) {
  RidLockGuard guard(*this, rid);
  auto record = store_.get(rid);
  if (!record) throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));

  switch (record->state) {
    case RuleState::kInactive:
      throw_transition(rid, record->state, "end");
    case RuleState::kScheduled: {
      timers_.cancel(rid);
      std::lock_guard lock(maps_mutex_);
      scheduled_.erase(rid);
      break;
    }
    case RuleState::kActive:
      stop_runtime_locked(rid);
      break;
  }

  record->state = RuleState::kInactive;
  record->fire_at_ms.reset();
  record->updated_at_ms = now_ms();
  store_.update(*record);
  spdlog::debug("rule {} ended", rid);
}

void Scheduler::delete_rule(std::uint64_t rid) {
  RidLockGuard guard(*this, rid);
  auto record = store_.get(rid);
  if (!record) throw Error(ErrorCode::kUnknownRule, "rule " + std::to_string(rid));
  if (record->state != RuleState::kInactive) throw_transition(rid, record->state, "delete");
  store_.remove(rid);
  std::lock_guard lock(maps_mutex_);
  stats_.erase(rid);
}

std::optional<RuleRecord> Scheduler::get_rule(std::uint64_t rid) const {
  return store_.get(rid);
}

std::vector<RuleRecord> Scheduler::list_rules() const { return store_.list(); }

std::shared_ptr<const RuleStats> Scheduler::rule_stats(std::uint64_t rid) const {
  std::lock_guard lock(maps_mutex_);
  auto it = stats_.find(rid);
  return it == stats_.end() ? nullptr : it->second;
}

std::vector<std::uint64_t> Scheduler::active_rids() const {
  std::lock_guard lock(maps_mutex_);
  std::vector<std::uint64_t> out;
  out.reserve(runtime_.size());
  for (const auto& [rid, runtime] : runtime_) out.push_back(rid);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint64_t> Scheduler::scheduled_rids() const {
  std::lock_guard lock(maps_mutex_);
  std::vector<std::uint64_t> out;
  out.reserve(scheduled_.size());
  for (const auto& [rid, fire_at] : scheduled_) out.push_back(rid);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ruleflow
