#pragma once

#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>

namespace ruleflow::testing {

/// Independent expression model: a typed AST that is rendered to rule
/// text for the parser pipeline and evaluated directly (recursive
/// descent) as the oracle. Deliberately shares no code with the engine's
/// tokenizer/shunting-yard/stack evaluator.
struct ExprNode {
  enum class Kind { kNumber, kVariable, kBinary };
  Kind kind = Kind::kNumber;
  double number = 0.0;
  std::string variable;
  std::string op;
  std::unique_ptr<ExprNode> lhs;
  std::unique_ptr<ExprNode> rhs;
};

using ExprPtr = std::unique_ptr<ExprNode>;
using OracleValue = std::variant<double, bool>;

struct OracleDivByZero {};

/// Random boolean-typed expression (comparisons/logical over arithmetic
/// subtrees), depth-bounded, using at most `max_vars` variables x0..xk.
ExprPtr random_bool_expr(std::mt19937_64& rng, int max_depth, int max_vars);
/// Random numeric-typed expression.
ExprPtr random_numeric_expr(std::mt19937_64& rng, int max_depth, int max_vars);

/// Infix rendering with minimal parentheses under the engine's C-like
/// precedence, plus occasional redundant parentheses for variety.
std::string render_infix(const ExprNode& node, std::mt19937_64& rng);
std::string render_infix(const ExprNode& node);

/// Direct recursive evaluation; throws OracleDivByZero on x/0.
OracleValue oracle_eval(const ExprNode& node,
                        const std::unordered_map<std::string, double>& vars);

}  // namespace ruleflow::testing
