#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ruleflow/error.hpp"

namespace ruleflow {

/// Identity of one datasource: which attribute of which device is watched.
/// Equality and hashing are over the full triple.
struct Index {
  std::string device_id;
  std::string device_type;
  std::string attribute;

  bool operator==(const Index&) const = default;
};

struct IndexHash {
  std::size_t operator()(const Index& index) const noexcept;
};

enum class TokenKind {
  kVariable,
  kNumber,
  kOperator,
  kLeftBracket,
  kRightBracket,
  kText,
};

/// Typed lexical unit of a condition. `real_num` is populated for Number
/// tokens at lex time and for Variable tokens once resolved against an IST.
struct Token {
  TokenKind kind;
  std::string value;
  std::optional<double> real_num;

  static Token variable(std::string name) {
    return Token{TokenKind::kVariable, std::move(name), std::nullopt};
  }
  static Token number(double v, std::string lexeme) {
    return Token{TokenKind::kNumber, std::move(lexeme), v};
  }
  static Token op(std::string symbol) {
    return Token{TokenKind::kOperator, std::move(symbol), std::nullopt};
  }
  static Token left_bracket() { return Token{TokenKind::kLeftBracket, "(", std::nullopt}; }
  static Token right_bracket() { return Token{TokenKind::kRightBracket, ")", std::nullopt}; }
  static Token text(std::string s) {
    return Token{TokenKind::kText, std::move(s), std::nullopt};
  }

  bool operator==(const Token&) const = default;
};

/// The three statements of one rule, as submitted through the API.
struct RuleText {
  std::string datasource_field;
  std::string condition_field;
  std::string action_field;
};

struct DatasourceDecl {
  std::string symbol;
  Index index;

  bool operator==(const DatasourceDecl&) const = default;
};

struct Action {
  std::string action_type;
  std::string params;  // raw parameter string, may contain $symbol references

  bool operator==(const Action&) const = default;
};

/// Reserved condition type auto-assigned to expression conditions.
/// Users cannot register a functional matcher under this name.
inline constexpr std::string_view kExpressionConditionType = "__expr";

/// Compiled, linkable representation of one rule; input to the match
/// function generator. `program` is in postfix order for expression
/// conditions and a flat argument list for functional conditions.
struct CompiledRule {
  std::vector<DatasourceDecl> ost;
  std::string condition_type;
  std::vector<Token> program;
  std::vector<Action> actions;
  std::uint32_t period_seconds = 5;

  bool operator==(const CompiledRule&) const = default;
};

enum class ConditionKind { kExpression, kFunctional };

struct ConditionClass {
  ConditionKind kind;
  std::string type_id;  // kExpressionConditionType for expressions
};

bool is_identifier(std::string_view s);

std::vector<DatasourceDecl> parse_datasource_field(std::string_view text);

/// Pure classification; never fails. Functional iff the field is
/// `Identifier ":" rest` with no operator characters before the colon.
ConditionClass classify_condition(std::string_view text);

/// Lexes an expression condition into an infix token list.
std::vector<Token> tokenize(std::string_view text);

/// Shunting-yard conversion. Precedence (high to low): `* /`, `+ -`,
/// comparisons, `&`, `|`; all operators are left-associative.
std::vector<Token> infix_to_postfix(const std::vector<Token>& tokens);

std::pair<std::string, std::vector<Token>> parse_functional_condition(
    std::string_view text, const std::vector<DatasourceDecl>& ost);

std::vector<Action> parse_action_field(std::string_view text);

/// Full compilation pipeline: datasource, condition, action, plus
/// cross-field symbol validation.
CompiledRule parse_rule(const RuleText& text, std::uint32_t period_seconds = 5);

/// Canonical re-rendering, the inverse of the field parsers up to
/// whitespace normalization.
std::string render_datasource_field(const std::vector<DatasourceDecl>& ost);
std::string render_action_field(const std::vector<Action>& actions);

/// All `$symbol` references appearing in an action parameter string.
std::vector<std::string> extract_symbol_refs(std::string_view params);

}  // namespace ruleflow
