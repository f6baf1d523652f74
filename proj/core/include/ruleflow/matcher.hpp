#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ruleflow/dsb.hpp"
#include "ruleflow/dsl.hpp"
#include "ruleflow/executor.hpp"

namespace ruleflow {

/// Inner symbol table: per-invocation snapshot of each symbol's latest
/// value and update session.
using Ist = std::unordered_map<std::string, Sample>;

struct IstBuild {
  bool complete = false;  // false: some datasource has no data yet
  Ist ist;
};

/// Queries the DSB for every OST symbol. Incomplete (not an error) while
/// any datasource is registered but has not received data.
IstBuild build_ist(const std::vector<DatasourceDecl>& ost, const Dsb& dsb);

using EvalValue = std::variant<double, bool>;

/// Stack evaluation of a postfix token program. Variables resolve through
/// the IST; arithmetic needs numbers, comparisons yield booleans, `&`/`|`
/// need booleans.
EvalValue eval_postfix(std::span<const Token> program, const Ist& ist);

bool fm_expression(const Ist& ist, std::span<const Token> program);

/// Built-in functional condition: point-in-polygon containment with the
/// boundary counted as inside. Args: lon, lat, then vertex coordinate
/// pairs in boundary order (at least three vertices).
bool fm_point_surface(const Ist& ist, std::span<const Token> args);

/// Start-time argument-shape check for fm_point_surface.
void validate_point_surface(const CompiledRule& rule);

using MatchFn = std::function<bool(const Ist&, std::span<const Token>)>;
/// Optional start-time validation hook (arity and argument shape checks).
using MatchValidator = std::function<void(const CompiledRule&)>;

/// condition_type -> matching function. Populated at startup, read-only
/// afterwards; the expression matcher is always present under "__expr".
class MatcherMap {
 public:
  MatcherMap();

  void register_matcher(const std::string& condition_type, MatchFn fn,
                        MatchValidator validator = nullptr);
  bool contains(const std::string& condition_type) const;

  /// Start-time checks: condition type known, arguments acceptable.
  void validate(const CompiledRule& rule) const;  // UnknownConditionType, ArityError

  bool invoke(const std::string& condition_type, const Ist& ist,
              std::span<const Token> program) const;

 private:
  struct Registration {
    MatchFn fn;
    MatchValidator validator;
  };
  std::unordered_map<std::string, Registration> entries_;
};

/// Replaces each $symbol in `params` with the canonical decimal rendering
/// of its IST value; all other text is kept verbatim.
std::string substitute_symbols(std::string_view params, const Ist& ist);

/// Shortest decimal rendering that round-trips; integral values have no
/// trailing ".0".
std::string render_number(double value);

struct RuleStatsSnapshot {
  std::uint64_t invocations = 0;
  std::uint64_t skipped_no_data = 0;
  std::uint64_t skipped_dedup = 0;
  std::uint64_t evaluations = 0;
  std::uint64_t matches = 0;
  std::uint64_t dispatches = 0;
  std::uint64_t errors = 0;
  std::uint64_t overrun_skips = 0;
};

struct RuleStats {
  std::atomic<std::uint64_t> invocations{0};
  std::atomic<std::uint64_t> skipped_no_data{0};
  std::atomic<std::uint64_t> skipped_dedup{0};
  std::atomic<std::uint64_t> evaluations{0};
  std::atomic<std::uint64_t> matches{0};
  std::atomic<std::uint64_t> dispatches{0};
  std::atomic<std::uint64_t> errors{0};
  std::atomic<std::uint64_t> overrun_skips{0};

  RuleStatsSnapshot snapshot() const {
    return RuleStatsSnapshot{invocations.load(), skipped_no_data.load(),
                             skipped_dedup.load(), evaluations.load(),
                             matches.load(),      dispatches.load(),
                             errors.load(),       overrun_skips.load()};
  }
};

/// The compiled, parameterless match function of one rule: read the DSB,
/// evaluate the condition, dispatch actions on a match. Runtime errors are
/// counted and logged, never propagated to the caller. One instance is
/// never invoked concurrently with itself (the scheduler guarantees it).
class MatchFunction {
 public:
  MatchFunction(std::uint64_t rule_id, CompiledRule rule, const MatcherMap& matchers,
                Dsb& dsb, Executor& executor, bool dedup_enabled,
                std::shared_ptr<RuleStats> stats);

  void operator()();

  /// Condition evaluation + action dispatch against a prebuilt IST (the
  /// push-mode path). Returns whether the condition matched.
  bool evaluate_with(const Ist& ist);

  const CompiledRule& rule() const { return rule_; }
  std::uint64_t rule_id() const { return rule_id_; }
  const std::shared_ptr<RuleStats>& stats() const { return stats_; }
  bool dedup_enabled() const { return dedup_enabled_; }

 private:
  std::uint64_t rule_id_;
  CompiledRule rule_;
  const MatcherMap& matchers_;
  Dsb& dsb_;
  Executor& executor_;
  bool dedup_enabled_;
  std::unordered_map<std::string, std::uint64_t> last_seen_sessions_;
  std::shared_ptr<RuleStats> stats_;
};

/// Builds the MF for a compiled rule. Construction-time errors
/// (UnknownConditionType, argument-shape problems) surface here; the
/// returned MF isolates its own runtime failures.
std::shared_ptr<MatchFunction> generate_match_function(
    std::uint64_t rule_id, CompiledRule rule, const MatcherMap& matchers, Dsb& dsb,
    Executor& executor, bool dedup_enabled, std::shared_ptr<RuleStats> stats = nullptr);

}  // namespace ruleflow
