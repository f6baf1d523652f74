#include "ruleflow/matcher.hpp"

#include <charconv>
#include <cmath>

#include <spdlog/spdlog.h>

namespace ruleflow {
namespace {

double require_number(const EvalValue& v, const char* op) {
  if (const double* num = std::get_if<double>(&v)) return *num;
  throw Error(ErrorCode::kTypeMismatch,
              std::string("operator '") + op + "' needs numeric operands");
}

bool require_bool(const EvalValue& v, const char* op) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw Error(ErrorCode::kTypeMismatch,
              std::string("operator '") + op + "' needs boolean operands");
}

double resolve_numeric(const Token& token, const Ist& ist) {
  switch (token.kind) {
    case TokenKind::kNumber:
      return *token.real_num;
    case TokenKind::kVariable: {
      auto it = ist.find(token.value);
      if (it == ist.end()) {
        throw Error(ErrorCode::kUnresolvedVariable,
                    "variable '" + token.value + "' not present in IST");
      }
      return it->second.value;
    }
    default:
      throw Error(ErrorCode::kTypeMismatch,
                  "token '" + token.value + "' is not numeric");
  }
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

bool on_segment(Point p, Point a, Point b) {
  const double abx = b.x - a.x;
  const double aby = b.y - a.y;
  const double apx = p.x - a.x;
  const double apy = p.y - a.y;
  const double cross = abx * apy - aby * apx;
  const double len = std::sqrt(abx * abx + aby * aby);
  if (len == 0.0) return apx == 0.0 && apy == 0.0;
  if (std::abs(cross) / len > 1e-9) return false;
  const double dot = apx * abx + apy * aby;
  return dot >= -1e-9 * len && dot <= len * len + 1e-9 * len;
}

bool point_in_polygon(Point p, const std::vector<Point>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point a = poly[j];
    const Point b = poly[i];
    if (on_segment(p, a, b)) return true;  // boundary counts as inside
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_at = (a.x - b.x) * (p.y - b.y) / (a.y - b.y) + b.x;
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

void validate_point_surface(const CompiledRule& rule) {
  const auto& args = rule.program;
  if (args.size() < 8 || (args.size() - 2) % 2 != 0) {
    throw Error(ErrorCode::kArity,
                "PointSurface needs a point and at least 3 vertex pairs, got " +
                    std::to_string(args.size()) + " arguments");
  }
  for (const Token& token : args) {
    if (token.kind != TokenKind::kNumber && token.kind != TokenKind::kVariable) {
      throw Error(ErrorCode::kTypeMismatch,
                  "PointSurface argument '" + token.value + "' is not numeric");
    }
  }
}

IstBuild build_ist(const std::vector<DatasourceDecl>& ost, const Dsb& dsb) {
  IstBuild out;
  out.ist.reserve(ost.size());
  for (const DatasourceDecl& decl : ost) {
    Lookup lookup = dsb.get(decl.index);
    switch (lookup.state) {
      case LookupState::kAbsent:
        throw Error(ErrorCode::kUnknownDatasource,
                    "datasource for symbol '" + decl.symbol + "' missing from DSB");
      case LookupState::kNoDataYet:
        return out;  // incomplete, skip this cycle
      case LookupState::kValue:
        out.ist.emplace(decl.symbol, lookup.sample);
        break;
    }
  }
  out.complete = true;
  return out;
}

EvalValue eval_postfix(std::span<const Token> program, const Ist& ist) {
  std::vector<EvalValue> stack;
  stack.reserve(program.size());

  for (const Token& token : program) {
    switch (token.kind) {
      case TokenKind::kNumber:
      case TokenKind::kVariable:
        stack.emplace_back(resolve_numeric(token, ist));
        break;
      case TokenKind::kOperator: {
        if (stack.size() < 2) {
          throw Error(ErrorCode::kTypeMismatch,
                      "malformed postfix program (operand underflow)");
        }
        EvalValue rhs = std::move(stack.back());
        stack.pop_back();
        EvalValue lhs = std::move(stack.back());
        stack.pop_back();
        const std::string& op = token.value;
        const char* name = op.c_str();
        if (op == "+") {
          stack.emplace_back(require_number(lhs, name) + require_number(rhs, name));
        } else if (op == "-") {
          stack.emplace_back(require_number(lhs, name) - require_number(rhs, name));
        } else if (op == "*") {
          stack.emplace_back(require_number(lhs, name) * require_number(rhs, name));
        } else if (op == "/") {
          double divisor = require_number(rhs, name);
          if (divisor == 0.0) {
            throw Error(ErrorCode::kDivisionByZero, "division by zero");
          }
          stack.emplace_back(require_number(lhs, name) / divisor);
        } else if (op == ">") {
          stack.emplace_back(require_number(lhs, name) > require_number(rhs, name));
        } else if (op == "<") {
          stack.emplace_back(require_number(lhs, name) < require_number(rhs, name));
        } else if (op == ">=") {
          stack.emplace_back(require_number(lhs, name) >= require_number(rhs, name));
        } else if (op == "<=") {
          stack.emplace_back(require_number(lhs, name) <= require_number(rhs, name));
        } else if (op == "==") {
          stack.emplace_back(require_number(lhs, name) == require_number(rhs, name));
        } else if (op == "!=") {
          stack.emplace_back(require_number(lhs, name) != require_number(rhs, name));
        } else if (op == "&") {
          bool l = require_bool(lhs, name);
          bool r = require_bool(rhs, name);
          stack.emplace_back(l && r);
        } else if (op == "|") {
          bool l = require_bool(lhs, name);
          bool r = require_bool(rhs, name);
          stack.emplace_back(l || r);
        } else {
          throw Error(ErrorCode::kTypeMismatch, "unknown operator '" + op + "'");
        }
        break;
      }
      default:
        throw Error(ErrorCode::kTypeMismatch,
                    "token '" + token.value + "' not allowed in postfix program");
    }
  }
  if (stack.size() != 1) {
    throw Error(ErrorCode::kTypeMismatch, "malformed postfix program (stack residue)");
  }
  return stack.front();
}

bool fm_expression(const Ist& ist, std::span<const Token> program) {
  EvalValue result = eval_postfix(program, ist);
  if (const bool* b = std::get_if<bool>(&result)) return *b;
  throw Error(ErrorCode::kNonBooleanCondition,
              "expression condition evaluated to a number, not a boolean");
}

bool fm_point_surface(const Ist& ist, std::span<const Token> args) {
  if (args.size() < 8 || (args.size() - 2) % 2 != 0) {
    throw Error(ErrorCode::kArity, "PointSurface argument count mismatch");
  }
  Point p{resolve_numeric(args[0], ist), resolve_numeric(args[1], ist)};
  std::vector<Point> polygon;
  polygon.reserve((args.size() - 2) / 2);
  for (std::size_t i = 2; i + 1 < args.size(); i += 2) {
    polygon.push_back(Point{resolve_numeric(args[i], ist), resolve_numeric(args[i + 1], ist)});
  }
  return point_in_polygon(p, polygon);
}

MatcherMap::MatcherMap() {
  entries_.emplace(std::string(kExpressionConditionType),
                   Registration{fm_expression, nullptr});
}

void MatcherMap::register_matcher(const std::string& condition_type, MatchFn fn,
                                  MatchValidator validator) {
  if (condition_type == kExpressionConditionType) {
    throw Error(ErrorCode::kReservedConditionType,
                "'__expr' is reserved for expression conditions");
  }
  auto [it, inserted] =
      entries_.emplace(condition_type, Registration{std::move(fn), std::move(validator)});
  if (!inserted) {
    throw Error(ErrorCode::kDuplicateConditionType,
                "condition type '" + condition_type + "' already registered");
  }
}

bool MatcherMap::contains(const std::string& condition_type) const {
  return entries_.count(condition_type) > 0;
}

void MatcherMap::validate(const CompiledRule& rule) const {
  auto it = entries_.find(rule.condition_type);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kUnknownConditionType,
                "condition type '" + rule.condition_type + "' not registered");
  }
  if (it->second.validator) it->second.validator(rule);
}

bool MatcherMap::invoke(const std::string& condition_type, const Ist& ist,
                        std::span<const Token> program) const {
  auto it = entries_.find(condition_type);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kUnknownConditionType,
                "condition type '" + condition_type + "' not registered");
  }
  return it->second.fn(ist, program);
}

std::string render_number(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string substitute_symbols(std::string_view params, const Ist& ist) {
  std::string out;
  out.reserve(params.size());
  std::size_t pos = 0;
  auto ident_start = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  };
  auto ident_char = [&](char c) { return ident_start(c) || (c >= '0' && c <= '9'); };

  while (pos < params.size()) {
    if (params[pos] == '$' && pos + 1 < params.size() && ident_start(params[pos + 1])) {
      std::size_t start = pos + 1;
      std::size_t end = start;
      while (end < params.size() && ident_char(params[end])) ++end;
      std::string name(params.substr(start, end - start));
      auto it = ist.find(name);
      if (it == ist.end()) {
        throw Error(ErrorCode::kUnresolvedVariable,
                    "'$" + name + "' not present in IST");
      }
      out += render_number(it->second.value);
      pos = end;
    } else {
      out += params[pos];
      ++pos;
    }
  }
  return out;
}

MatchFunction::MatchFunction(std::uint64_t rule_id, CompiledRule rule,
                             const MatcherMap& matchers, Dsb& dsb, Executor& executor,
                             bool dedup_enabled, std::shared_ptr<RuleStats> stats)
    : rule_id_(rule_id),
      rule_(std::move(rule)),
      matchers_(matchers),
      dsb_(dsb),
      executor_(executor),
      dedup_enabled_(dedup_enabled),
      stats_(std::move(stats)) {
  if (!stats_) stats_ = std::make_shared<RuleStats>();
  if (dedup_enabled_) {
    for (const DatasourceDecl& decl : rule_.ost) {
      last_seen_sessions_.emplace(decl.symbol, 0);
    }
  }
}

void MatchFunction::operator()() {
  stats_->invocations.fetch_add(1);
  IstBuild build;
  try {
    build = build_ist(rule_.ost, dsb_);
  } catch (const std::exception& e) {
    stats_->errors.fetch_add(1);
    spdlog::debug("rule {}: IST build failed: {}", rule_id_, e.what());
    return;
  }
  if (!build.complete) {
    stats_->skipped_no_data.fetch_add(1);
    return;
  }

  if (dedup_enabled_) {
    bool fresh = false;
    for (const auto& [symbol, sample] : build.ist) {
      if (sample.session > last_seen_sessions_[symbol]) {
        fresh = true;
        break;
      }
    }
    if (!fresh) {
      stats_->skipped_dedup.fetch_add(1);
      return;
    }
    for (const auto& [symbol, sample] : build.ist) {
      last_seen_sessions_[symbol] = sample.session;
    }
  }

  evaluate_with(build.ist);
}

bool MatchFunction::evaluate_with(const Ist& ist) {
  stats_->evaluations.fetch_add(1);
  bool matched = false;
  try {
    matched = matchers_.invoke(rule_.condition_type, ist, rule_.program);
  } catch (const std::exception& e) {
    stats_->errors.fetch_add(1);
    spdlog::debug("rule {}: condition evaluation failed: {}", rule_id_, e.what());
    return false;
  }
  if (!matched) return false;

  stats_->matches.fetch_add(1);
  for (const Action& action : rule_.actions) {
    try {
      ActionRequest request;
      request.action_type = action.action_type;
      request.params = substitute_symbols(action.params, ist);
      request.rule_id = rule_id_;
      request.enqueued_at = std::chrono::system_clock::now();
      executor_.dispatch(std::move(request));
      stats_->dispatches.fetch_add(1);
    } catch (const std::exception& e) {
      stats_->errors.fetch_add(1);
      spdlog::debug("rule {}: dispatch of '{}' failed: {}", rule_id_,
                    action.action_type, e.what());
    }
  }
  return true;
}

std::shared_ptr<MatchFunction> generate_match_function(
    std::uint64_t rule_id, CompiledRule rule, const MatcherMap& matchers, Dsb& dsb,
    Executor& executor, bool dedup_enabled, std::shared_ptr<RuleStats> stats) {
  matchers.validate(rule);
  return std::make_shared<MatchFunction>(rule_id, std::move(rule), matchers, dsb,
                                         executor, dedup_enabled, std::move(stats));
}

}  // namespace ruleflow
