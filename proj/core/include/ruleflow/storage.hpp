#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ruleflow/dsl.hpp"

namespace ruleflow {

enum class RuleState { kInactive, kScheduled, kActive };
enum class TriggerMode { kPeriodic, kPeriodicDedup, kPush };

const char* to_string(RuleState state);
const char* to_string(TriggerMode mode);
std::optional<RuleState> parse_rule_state(std::string_view s);
std::optional<TriggerMode> parse_trigger_mode(std::string_view s);

/// Persisted representation of one rule: text, lifecycle state, trigger
/// configuration. The fire time is kept while a rule is scheduled so a
/// restarted engine can re-arm (or immediately start) it.
struct RuleRecord {
  std::uint64_t rid = 0;
  std::string name;
  std::string datasource_field;
  std::string condition_field;
  std::string action_field;
  RuleState state = RuleState::kInactive;
  std::uint32_t period_seconds = 5;
  TriggerMode trigger_mode = TriggerMode::kPeriodic;
  std::int64_t created_at_ms = 0;
  std::int64_t updated_at_ms = 0;
  std::optional<std::int64_t> fire_at_ms;

  RuleText text() const {
    return RuleText{datasource_field, condition_field, action_field};
  }
};

/// Rule database. Implementations must tolerate concurrent callers
/// operating on distinct rids.
class RuleStore {
 public:
  virtual ~RuleStore() = default;

  /// Assigns and returns a fresh rid (the record's own rid is ignored).
  virtual std::uint64_t insert(const RuleRecord& record) = 0;
  virtual std::optional<RuleRecord> get(std::uint64_t rid) const = 0;
  virtual void update(const RuleRecord& record) = 0;  // UnknownRule
  virtual void remove(std::uint64_t rid) = 0;         // UnknownRule
  virtual std::vector<RuleRecord> list() const = 0;
  virtual std::size_t size() const = 0;
};

std::unique_ptr<RuleStore> make_memory_rule_store();

/// Single-file embedded store; the path is created on first open.
std::unique_ptr<RuleStore> make_sqlite_rule_store(const std::string& path);

}  // namespace ruleflow
