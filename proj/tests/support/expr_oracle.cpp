#include "support/expr_oracle.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ruleflow::testing {
namespace {

ExprPtr make_number(double v) {
  auto node = std::make_unique<ExprNode>();
  node->kind = ExprNode::Kind::kNumber;
  node->number = v;
  return node;
}

ExprPtr make_variable(std::string name) {
  auto node = std::make_unique<ExprNode>();
  node->kind = ExprNode::Kind::kVariable;
  node->variable = std::move(name);
  return node;
}

ExprPtr make_binary(std::string op, ExprPtr lhs, ExprPtr rhs) {
  auto node = std::make_unique<ExprNode>();
  node->kind = ExprNode::Kind::kBinary;
  node->op = std::move(op);
  node->lhs = std::move(lhs);
  node->rhs = std::move(rhs);
  return node;
}

int precedence_of(const std::string& op) {
  if (op == "*" || op == "/") return 5;
  if (op == "+" || op == "-") return 4;
  if (op == "&") return 2;
  if (op == "|") return 1;
  return 3;  // comparisons
}

// The grammar has no unary minus, so negative literals are written as
// (0 - x) by construction; stick to non-negative literals instead.
double random_literal(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 20.0);
  double v = dist(rng);
  // Round to 3 decimals so rendering "%.3f"-style lexemes stays exact.
  return std::round(v * 1000.0) / 1000.0;
}

void render(const ExprNode& node, std::string& out, int parent_prec, bool right_child,
            std::mt19937_64* rng);

void render_operand(const ExprNode& node, std::string& out, int parent_prec,
                    bool right_child, std::mt19937_64* rng) {
  render(node, out, parent_prec, right_child, rng);
}

void render(const ExprNode& node, std::string& out, int parent_prec, bool right_child,
            std::mt19937_64* rng) {
  switch (node.kind) {
    case ExprNode::Kind::kNumber: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f", node.number);
      out += buf;
      return;
    }
    case ExprNode::Kind::kVariable:
      out += node.variable;
      return;
    case ExprNode::Kind::kBinary: {
      const int prec = precedence_of(node.op);
      bool need_parens =
          prec < parent_prec || (prec == parent_prec && right_child);
      if (!need_parens && rng) {
        std::uniform_int_distribution<int> extra(0, 9);
        if (extra(*rng) == 0) need_parens = true;  // occasional redundant parens
      }
      if (need_parens) out += '(';
      render_operand(*node.lhs, out, prec, false, rng);
      out += ' ';
      out += node.op;
      out += ' ';
      render_operand(*node.rhs, out, prec, true, rng);
      if (need_parens) out += ')';
      return;
    }
  }
}

}  // namespace

ExprPtr random_numeric_expr(std::mt19937_64& rng, int max_depth, int max_vars) {
  std::uniform_int_distribution<int> pick(0, 2);
  if (max_depth <= 0 || pick(rng) == 0) {
    std::uniform_int_distribution<int> leaf(0, 1);
    if (leaf(rng) == 0 && max_vars > 0) {
      std::uniform_int_distribution<int> which(0, max_vars - 1);
      return make_variable("x" + std::to_string(which(rng)));
    }
    return make_number(random_literal(rng));
  }
  static const char* kArith[] = {"+", "-", "*", "/"};
  std::uniform_int_distribution<int> which(0, 3);
  return make_binary(kArith[which(rng)],
                     random_numeric_expr(rng, max_depth - 1, max_vars),
                     random_numeric_expr(rng, max_depth - 1, max_vars));
}

ExprPtr random_bool_expr(std::mt19937_64& rng, int max_depth, int max_vars) {
  std::uniform_int_distribution<int> pick(0, 2);
  if (max_depth <= 1 || pick(rng) != 0) {
    static const char* kCompare[] = {">", "<", ">=", "<=", "==", "!="};
    std::uniform_int_distribution<int> which(0, 5);
    return make_binary(kCompare[which(rng)],
                       random_numeric_expr(rng, max_depth - 1, max_vars),
                       random_numeric_expr(rng, max_depth - 1, max_vars));
  }
  std::uniform_int_distribution<int> which(0, 1);
  return make_binary(which(rng) == 0 ? "&" : "|",
                     random_bool_expr(rng, max_depth - 1, max_vars),
                     random_bool_expr(rng, max_depth - 1, max_vars));
}

std::string render_infix(const ExprNode& node, std::mt19937_64& rng) {
  std::string out;
  render(node, out, 0, false, &rng);
  return out;
}

std::string render_infix(const ExprNode& node) {
  std::string out;
  render(node, out, 0, false, nullptr);
  return out;
}

OracleValue oracle_eval(const ExprNode& node,
                        const std::unordered_map<std::string, double>& vars) {
  switch (node.kind) {
    case ExprNode::Kind::kNumber:
      return node.number;
    case ExprNode::Kind::kVariable:
      return vars.at(node.variable);
    case ExprNode::Kind::kBinary:
      break;
  }
  OracleValue lhs = oracle_eval(*node.lhs, vars);
  OracleValue rhs = oracle_eval(*node.rhs, vars);
  const std::string& op = node.op;
  if (op == "&" || op == "|") {
    bool l = std::get<bool>(lhs);
    bool r = std::get<bool>(rhs);
    return op == "&" ? (l && r) : (l || r);
  }
  double l = std::get<double>(lhs);
  double r = std::get<double>(rhs);
  if (op == "+") return l + r;
  if (op == "-") return l - r;
  if (op == "*") return l * r;
  if (op == "/") {
    if (r == 0.0) throw OracleDivByZero{};
    return l / r;
  }
  if (op == ">") return l > r;
  if (op == "<") return l < r;
  if (op == ">=") return l >= r;
  if (op == "<=") return l <= r;
  if (op == "==") return l == r;
  if (op == "!=") return l != r;
  throw std::logic_error("oracle: unknown operator " + op);
}

}  // namespace ruleflow::testing
