#include "ruleflow/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <unordered_map>
#include <unordered_set>

namespace ruleflow {
namespace {

constexpr const char* kDatasourceField = "datasource";
constexpr const char* kConditionField = "condition";
constexpr const char* kActionField = "action";

bool is_ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Larger value binds tighter.
int precedence(std::string_view op) {
  if (op == "*" || op == "/") return 5;
  if (op == "+" || op == "-") return 4;
  if (op == ">" || op == "<" || op == ">=" || op == "<=" || op == "==" || op == "!=") return 3;
  if (op == "&") return 2;
  return 1;  // "|"
}

std::unordered_set<std::string_view> symbol_set(const std::vector<DatasourceDecl>& ost) {
  std::unordered_set<std::string_view> out;
  for (const auto& decl : ost) out.insert(decl.symbol);
  return out;
}

}  // namespace

std::size_t IndexHash::operator()(const Index& index) const noexcept {
  std::hash<std::string> h;
  std::size_t seed = h(index.device_id);
  seed ^= h(index.device_type) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  seed ^= h(index.attribute) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  return seed;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front())) return false;
  return std::all_of(s.begin(), s.end(), is_ident_char);
}

std::vector<DatasourceDecl> parse_datasource_field(std::string_view text) {
  std::vector<DatasourceDecl> out;
  std::unordered_set<std::string> seen;
  std::size_t pos = 0;
  const std::size_t n = text.size();

  auto skip_space = [&] {
    while (pos < n && is_space(text[pos])) ++pos;
  };

  skip_space();
  if (pos >= n) throw_syntax(kDatasourceField, pos, "empty datasource field");

  while (pos < n) {
    skip_space();
    std::size_t sym_start = pos;
    while (pos < n && is_ident_char(text[pos])) ++pos;
    std::string symbol(text.substr(sym_start, pos - sym_start));
    if (!is_identifier(symbol)) {
      throw_syntax(kDatasourceField, sym_start, "expected datasource symbol");
    }
    skip_space();
    if (pos >= n || text[pos] != '{') {
      throw_syntax(kDatasourceField, pos, "expected '{' after symbol '" + symbol + "'");
    }
    ++pos;

    std::string components[3];
    for (int i = 0; i < 3; ++i) {
      const char closer = (i < 2) ? ',' : '}';
      std::size_t comp_start = pos;
      while (pos < n && text[pos] != ',' && text[pos] != '}') ++pos;
      if (pos >= n || text[pos] != closer) {
        throw_syntax(kDatasourceField, pos,
                     std::string("expected '") + closer + "' in datasource declaration");
      }
      components[i] = std::string(trim(text.substr(comp_start, pos - comp_start)));
      if (components[i].empty()) {
        throw_syntax(kDatasourceField, comp_start, "empty datasource component");
      }
      ++pos;
    }

    if (!seen.insert(symbol).second) {
      throw ParseError(ErrorCode::kDuplicateSymbol, kDatasourceField, sym_start,
                       "duplicate datasource symbol '" + symbol + "'");
    }
    out.push_back(DatasourceDecl{
        std::move(symbol), Index{components[0], components[1], components[2]}});

    skip_space();
    if (pos >= n) break;
    if (text[pos] != ';') {
      throw_syntax(kDatasourceField, pos, "expected ';' between datasource declarations");
    }
    ++pos;
    skip_space();
    if (pos >= n) throw_syntax(kDatasourceField, pos, "trailing ';' in datasource field");
  }
  return out;
}

ConditionClass classify_condition(std::string_view text) {
  std::size_t colon = text.find(':');
  if (colon != std::string_view::npos) {
    std::string_view prefix = trim(text.substr(0, colon));
    if (is_identifier(prefix)) {
      return ConditionClass{ConditionKind::kFunctional, std::string(prefix)};
    }
  }
  return ConditionClass{ConditionKind::kExpression, std::string(kExpressionConditionType)};
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t pos = 0;
  const std::size_t n = text.size();

  while (pos < n) {
    char c = text[pos];
    if (is_space(c)) {
      ++pos;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t start = pos;
      while (pos < n && is_ident_char(text[pos])) ++pos;
      out.push_back(Token::variable(std::string(text.substr(start, pos - start))));
      continue;
    }
    if (c >= '0' && c <= '9') {
      std::size_t start = pos;
      while (pos < n && text[pos] >= '0' && text[pos] <= '9') ++pos;
      if (pos < n && text[pos] == '.') {
        ++pos;
        if (pos >= n || text[pos] < '0' || text[pos] > '9') {
          throw_syntax(kConditionField, pos, "expected digit after decimal point");
        }
        while (pos < n && text[pos] >= '0' && text[pos] <= '9') ++pos;
      }
      std::string lexeme(text.substr(start, pos - start));
      double value = 0.0;
      std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), value);
      out.push_back(Token::number(value, std::move(lexeme)));
      continue;
    }
    if (c == '(') {
      out.push_back(Token::left_bracket());
      ++pos;
      continue;
    }
    if (c == ')') {
      out.push_back(Token::right_bracket());
      ++pos;
      continue;
    }
    if (c == '>' || c == '<') {
      if (pos + 1 < n && text[pos + 1] == '=') {
        out.push_back(Token::op(std::string(text.substr(pos, 2))));
        pos += 2;
      } else {
        out.push_back(Token::op(std::string(1, c)));
        ++pos;
      }
      continue;
    }
    if (c == '=' || c == '!') {
      if (pos + 1 < n && text[pos + 1] == '=') {
        out.push_back(Token::op(std::string(text.substr(pos, 2))));
        pos += 2;
        continue;
      }
      throw_syntax(kConditionField, pos, std::string("stray '") + c + "' (did you mean '" + c + "='?)");
    }
    if (c == '+' || c == '-' || c == '*' || c == '/' || c == '&' || c == '|') {
      out.push_back(Token::op(std::string(1, c)));
      ++pos;
      continue;
    }
    throw_syntax(kConditionField, pos, std::string("unexpected character '") + c + "'");
  }
  return out;
}

std::vector<Token> infix_to_postfix(const std::vector<Token>& tokens) {
  std::vector<Token> output;
  std::vector<Token> stack;
  bool expect_operand = true;

  if (tokens.empty()) throw_syntax(kConditionField, 0, "empty expression");

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& tok = tokens[i];
    switch (tok.kind) {
      case TokenKind::kVariable:
      case TokenKind::kNumber:
        if (!expect_operand) {
          throw_syntax(kConditionField, i, "operand '" + tok.value + "' where operator expected");
        }
        output.push_back(tok);
        expect_operand = false;
        break;
      case TokenKind::kLeftBracket:
        if (!expect_operand) {
          throw_syntax(kConditionField, i, "'(' where operator expected");
        }
        stack.push_back(tok);
        break;
      case TokenKind::kRightBracket: {
        if (expect_operand) {
          throw_syntax(kConditionField, i, "')' where operand expected");
        }
        bool matched = false;
        while (!stack.empty()) {
          if (stack.back().kind == TokenKind::kLeftBracket) {
            stack.pop_back();
            matched = true;
            break;
          }
          output.push_back(stack.back());
          stack.pop_back();
        }
        if (!matched) throw_syntax(kConditionField, i, "unbalanced ')'");
        break;
      }
      case TokenKind::kOperator: {
        if (expect_operand) {
          throw_syntax(kConditionField, i, "operator '" + tok.value + "' where operand expected");
        }
        int prec = precedence(tok.value);
        while (!stack.empty() && stack.back().kind == TokenKind::kOperator &&
               precedence(stack.back().value) >= prec) {
          output.push_back(stack.back());
          stack.pop_back();
        }
        stack.push_back(tok);
        expect_operand = true;
        break;
      }
      case TokenKind::kText:
        throw_syntax(kConditionField, i, "string token in expression");
    }
  }

  if (expect_operand) {
    throw_syntax(kConditionField, tokens.size(), "expression ends with an operator");
  }
  while (!stack.empty()) {
    if (stack.back().kind == TokenKind::kLeftBracket) {
      throw_syntax(kConditionField, tokens.size(), "unbalanced '('");
    }
    output.push_back(stack.back());
    stack.pop_back();
  }
  return output;
}

std::pair<std::string, std::vector<Token>> parse_functional_condition(
    std::string_view text, const std::vector<DatasourceDecl>& ost) {
  std::size_t colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw_syntax(kConditionField, 0, "functional condition requires ':'");
  }
  std::string type_id(trim(text.substr(0, colon)));
  if (!is_identifier(type_id)) {
    throw_syntax(kConditionField, 0, "invalid condition type identifier");
  }

  auto symbols = symbol_set(ost);
  std::vector<Token> args;
  std::string_view rest = text.substr(colon + 1);
  std::size_t start = 0;
  while (true) {
    std::size_t comma = rest.find(',', start);
    std::string_view raw = (comma == std::string_view::npos)
                               ? rest.substr(start)
                               : rest.substr(start, comma - start);
    std::string_view arg = trim(raw);
    if (arg.empty()) {
      throw_syntax(kConditionField, colon + 1 + start, "empty functional argument");
    }

    double value = 0.0;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), value);
    if (ec == std::errc{} && ptr == arg.data() + arg.size()) {
      args.push_back(Token::number(value, std::string(arg)));
    } else if (is_identifier(arg)) {
      if (!symbols.count(arg)) {
        throw ParseError(ErrorCode::kUndeclaredSymbol, kConditionField, colon + 1 + start,
                         "undeclared symbol '" + std::string(arg) + "'");
      }
      args.push_back(Token::variable(std::string(arg)));
    } else {
      args.push_back(Token::text(std::string(arg)));
    }

    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return {std::move(type_id), std::move(args)};
}

std::vector<Action> parse_action_field(std::string_view text) {
  if (trim(text).empty()) throw_syntax(kActionField, 0, "empty action field");

  std::vector<Action> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t semi = text.find(';', start);
    std::string_view clause = (semi == std::string_view::npos)
                                  ? text.substr(start)
                                  : text.substr(start, semi - start);
    if (!trim(clause).empty()) {
      std::size_t colon = clause.find(':');
      if (colon == std::string_view::npos) {
        throw_syntax(kActionField, start, "action clause missing ':'");
      }
      std::string type_id(trim(clause.substr(0, colon)));
      if (!is_identifier(type_id)) {
        throw_syntax(kActionField, start, "invalid action type identifier");
      }
      // Params are kept verbatim; substitution happens at dispatch time.
      out.push_back(Action{std::move(type_id), std::string(clause.substr(colon + 1))});
    }
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  if (out.empty()) throw_syntax(kActionField, 0, "no action clauses");
  return out;
}

std::vector<std::string> extract_symbol_refs(std::string_view params) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < params.size()) {
    if (params[pos] == '$' && pos + 1 < params.size() && is_ident_start(params[pos + 1])) {
      std::size_t start = pos + 1;
      std::size_t end = start;
      while (end < params.size() && is_ident_char(params[end])) ++end;
      out.emplace_back(params.substr(start, end - start));
      pos = end;
    } else {
      ++pos;
    }
  }
  return out;
}

CompiledRule parse_rule(const RuleText& text, std::uint32_t period_seconds) {
  if (trim(text.datasource_field).empty()) {
    throw_syntax(kDatasourceField, 0, "empty datasource field");
  }
  if (trim(text.condition_field).empty()) {
    throw_syntax(kConditionField, 0, "empty condition field");
  }
  if (trim(text.action_field).empty()) {
    throw_syntax(kActionField, 0, "empty action field");
  }
  if (period_seconds == 0) {
    throw Error(ErrorCode::kValueParse, "period_seconds must be positive");
  }

  CompiledRule rule;
  rule.period_seconds = period_seconds;
  rule.ost = parse_datasource_field(text.datasource_field);

  auto symbols = symbol_set(rule.ost);
  ConditionClass cls = classify_condition(text.condition_field);
  if (cls.kind == ConditionKind::kExpression) {
    rule.condition_type = std::string(kExpressionConditionType);
    auto infix = tokenize(text.condition_field);
    for (const Token& tok : infix) {
      if (tok.kind == TokenKind::kVariable && !symbols.count(tok.value)) {
        throw ParseError(ErrorCode::kUndeclaredSymbol, kConditionField, 0,
                         "undeclared symbol '" + tok.value + "'");
      }
    }
    rule.program = infix_to_postfix(infix);
  } else {
    if (cls.type_id == kExpressionConditionType) {
      throw_syntax(kConditionField, 0, "condition type '__expr' is reserved");
    }
    auto [type_id, args] = parse_functional_condition(text.condition_field, rule.ost);
    rule.condition_type = std::move(type_id);
    rule.program = std::move(args);
  }

  rule.actions = parse_action_field(text.action_field);
  for (const Action& action : rule.actions) {
    for (const std::string& ref : extract_symbol_refs(action.params)) {
      if (!symbols.count(ref)) {
        throw ParseError(ErrorCode::kUndeclaredSymbol, kActionField, 0,
                         "undeclared symbol '$" + ref + "'");
      }
    }
  }
  return rule;
}

std::string render_datasource_field(const std::vector<DatasourceDecl>& ost) {
  std::string out;
  for (const auto& decl : ost) {
    if (!out.empty()) out += "; ";
    out += decl.symbol;
    out += '{';
    out += decl.index.device_id;
    out += ", ";
    out += decl.index.device_type;
    out += ", ";
    out += decl.index.attribute;
    out += '}';
  }
  return out;
}

std::string render_action_field(const std::vector<Action>& actions) {
  std::string out;
  for (const auto& action : actions) {
    if (!out.empty()) out += ';';
    out += action.action_type;
    out += ':';
    out += action.params;
  }
  return out;
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSyntax: return "syntax_error";
    case ErrorCode::kUndeclaredSymbol: return "undeclared_symbol";
    case ErrorCode::kDuplicateSymbol: return "duplicate_symbol";
    case ErrorCode::kUnknownDatasource: return "unknown_datasource";
    case ErrorCode::kUnknownRule: return "unknown_rule";
    case ErrorCode::kInvalidStateTransition: return "invalid_state_transition";
    case ErrorCode::kPastTimestamp: return "past_timestamp";
    case ErrorCode::kDuplicateConditionType: return "duplicate_condition_type";
    case ErrorCode::kReservedConditionType: return "reserved_condition_type";
    case ErrorCode::kUnknownConditionType: return "unknown_condition_type";
    case ErrorCode::kDuplicateActionType: return "duplicate_action_type";
    case ErrorCode::kUnknownActionType: return "unknown_action_type";
    case ErrorCode::kTypeMismatch: return "type_mismatch";
    case ErrorCode::kDivisionByZero: return "division_by_zero";
    case ErrorCode::kUnresolvedVariable: return "unresolved_variable";
    case ErrorCode::kNonBooleanCondition: return "non_boolean_condition";
    case ErrorCode::kArity: return "arity_error";
    case ErrorCode::kValueParse: return "value_parse_error";
    case ErrorCode::kConnectionFailed: return "connection_failed";
    case ErrorCode::kPublishFailed: return "publish_failed";
    case ErrorCode::kShutdown: return "shutdown";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown_error";
}

}  // namespace ruleflow
