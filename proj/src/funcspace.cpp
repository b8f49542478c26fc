// Copyright 2026 The seqcons Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqcons/funcspace.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <sstream>

namespace seqcons {

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
  case TemplateKind::arithmetic:
    return "arithmetic";
  case TemplateKind::geometric:
    return "geometric";
  case TemplateKind::exponential:
    return "exponential";
  case TemplateKind::power:
    return "power";
  case TemplateKind::bit_or:
    return "bit_or";
  case TemplateKind::modular:
    return "modular";
  case TemplateKind::indexing_criteria:
    return "indexing_criteria";
  case TemplateKind::recursive:
    return "recursive";
  }
  return "unknown";
}

std::optional<TemplateKind> template_kind_from_string(std::string_view name) {
  for (TemplateKind kind : kTemplateKinds)
    if (to_string(kind) == name)
      return kind;
  return std::nullopt;
}

std::string_view template_pattern(TemplateKind kind) {
  switch (kind) {
  case TemplateKind::arithmetic:
    return "lambda x: ({} * x) + {}";
  case TemplateKind::geometric:
    return "lambda x: ({} * x) * {}";
  case TemplateKind::exponential:
    return "lambda x: ({} * x) ** {}";
  case TemplateKind::power:
    return "lambda x: {} ** ({} * x)";
  case TemplateKind::bit_or:
    return "lambda x: ({} * x) | {}";
  case TemplateKind::modular:
    return "lambda x: (x * {}) % ({}+1)";
  case TemplateKind::indexing_criteria:
    return "lambda x: [i for i in range(100) if i % ({} + 1) or i % ({} + 1)][x]";
  case TemplateKind::recursive:
    return "(lambda a: lambda v: a(a,v))(lambda fn,x: 1 if x==0 else {} * x * "
           "fn(fn,x-1) + {})";
  }
  return "";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
  case BinaryOp::add:
    return "+";
  case BinaryOp::sub:
    return "-";
  case BinaryOp::mul:
    return "*";
  case BinaryOp::floor_div:
    return "//";
  case BinaryOp::mod:
    return "%";
  case BinaryOp::pow:
    return "**";
  case BinaryOp::bit_or:
    return "|";
  case BinaryOp::bit_and:
    return "&";
  case BinaryOp::bit_xor:
    return "^";
  case BinaryOp::shift_left:
    return "<<";
  case BinaryOp::shift_right:
    return ">>";
  }
  return "?";
}

std::string_view to_string(ValidityRule rule) {
  return rule == ValidityRule::exact ? "exact" : "int64_range";
}

std::optional<ValidityRule> validity_rule_from_string(std::string_view name) {
  if (name == "exact")
    return ValidityRule::exact;
  if (name == "int64_range" || name == "int64")
    return ValidityRule::int64_range;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// AST construction and equality
// ---------------------------------------------------------------------------

ExprPtr make_literal(Integer value) {
  return std::make_shared<const Expr>(Expr{Literal{std::move(value)}});
}
ExprPtr make_variable() { return std::make_shared<const Expr>(Expr{Variable{}}); }
ExprPtr make_previous() {
  return std::make_shared<const Expr>(Expr{PreviousTerm{}});
}
ExprPtr make_negate(ExprPtr operand) {
  return std::make_shared<const Expr>(Expr{Negate{std::move(operand)}});
}
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(
      Expr{Binary{op, std::move(lhs), std::move(rhs)}});
}
ExprPtr make_filtered_index(ExprPtr limit, std::vector<ExprPtr> moduli,
                            ExprPtr index) {
  return std::make_shared<const Expr>(
      Expr{FilteredIndex{std::move(limit), std::move(moduli), std::move(index)}});
}
ExprPtr make_recursive(ExprPtr base, ExprPtr step) {
  return std::make_shared<const Expr>(
      Expr{Recursive{std::move(base), std::move(step)}});
}

bool same_expr(const ExprPtr &a, const ExprPtr &b) {
  if (a == b)
    return true;
  if (!a || !b)
    return false;
  return *a == *b;
}

namespace {

struct EqualVisitor {
  const Expr &other;

  bool operator()(const Literal &a) const {
    auto *b = std::get_if<Literal>(&other.node);
    return b && a.value == b->value;
  }
  bool operator()(const Variable &) const {
    return std::holds_alternative<Variable>(other.node);
  }
  bool operator()(const PreviousTerm &) const {
    return std::holds_alternative<PreviousTerm>(other.node);
  }
  bool operator()(const Negate &a) const {
    auto *b = std::get_if<Negate>(&other.node);
    return b && same_expr(a.operand, b->operand);
  }
  bool operator()(const Binary &a) const {
    auto *b = std::get_if<Binary>(&other.node);
    return b && a.op == b->op && same_expr(a.lhs, b->lhs) &&
           same_expr(a.rhs, b->rhs);
  }
  bool operator()(const FilteredIndex &a) const {
    auto *b = std::get_if<FilteredIndex>(&other.node);
    if (!b || a.moduli.size() != b->moduli.size())
      return false;
    for (std::size_t i = 0; i < a.moduli.size(); ++i)
      if (!same_expr(a.moduli[i], b->moduli[i]))
        return false;
    return same_expr(a.limit, b->limit) && same_expr(a.index, b->index);
  }
  bool operator()(const Recursive &a) const {
    auto *b = std::get_if<Recursive>(&other.node);
    return b && same_expr(a.base, b->base) && same_expr(a.step, b->step);
  }
};

} // namespace

bool operator==(const Expr &a, const Expr &b) {
  return std::visit(EqualVisitor{b}, a.node);
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

namespace {

ExprPtr lit(int v) { return make_literal(Integer(v)); }

ExprPtr template_body(TemplateKind kind, int c1, int c2) {
  auto x = make_variable();
  switch (kind) {
  case TemplateKind::arithmetic:
    return make_binary(BinaryOp::add, make_binary(BinaryOp::mul, lit(c1), x),
                       lit(c2));
  case TemplateKind::geometric:
    return make_binary(BinaryOp::mul, make_binary(BinaryOp::mul, lit(c1), x),
                       lit(c2));
  case TemplateKind::exponential:
    return make_binary(BinaryOp::pow, make_binary(BinaryOp::mul, lit(c1), x),
                       lit(c2));
  case TemplateKind::power:
    return make_binary(BinaryOp::pow, lit(c1),
                       make_binary(BinaryOp::mul, lit(c2), x));
  case TemplateKind::bit_or:
    return make_binary(BinaryOp::bit_or,
                       make_binary(BinaryOp::mul, lit(c1), x), lit(c2));
  case TemplateKind::modular:
    return make_binary(BinaryOp::mod, make_binary(BinaryOp::mul, x, lit(c1)),
                       make_binary(BinaryOp::add, lit(c2), lit(1)));
  case TemplateKind::indexing_criteria:
    return make_filtered_index(
        lit(100),
        {make_binary(BinaryOp::add, lit(c1), lit(1)),
         make_binary(BinaryOp::add, lit(c2), lit(1))},
        x);
  case TemplateKind::recursive:
    return make_recursive(
        lit(1),
        make_binary(
            BinaryOp::add,
            make_binary(BinaryOp::mul, make_binary(BinaryOp::mul, lit(c1), x),
                        make_previous()),
            lit(c2)));
  }
  throw std::logic_error("unknown template kind");
}

std::string fill_pattern(std::string_view pattern, int c1, int c2) {
  std::string out;
  int slot = 0;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '{' && i + 1 < pattern.size() && pattern[i + 1] == '}') {
      out += std::to_string(slot++ == 0 ? c1 : c2);
      ++i;
    } else {
      out += pattern[i];
    }
  }
  return out;
}

std::string wrap_binary_text(const std::string &text) {
  static constexpr std::string_view kLambda = "lambda x: ";
  static constexpr std::string_view kSelfApply = "a(a,v))";
  if (text.rfind(kLambda, 0) == 0)
    return std::string(kLambda) + "bin(" + text.substr(kLambda.size()) + ")";
  const auto pos = text.find(kSelfApply);
  if (pos != std::string::npos)
    return text.substr(0, pos) + "bin(a(a,v)))" +
           text.substr(pos + kSelfApply.size());
  return text;
}

// Literal value as int if it is one.
std::optional<int> small_literal(const ExprPtr &e) {
  auto *l = e ? std::get_if<Literal>(&e->node) : nullptr;
  if (!l || l->value > std::numeric_limits<int>::max())
    return std::nullopt;
  return static_cast<int>(l->value);
}

const Binary *as_binary(const ExprPtr &e, BinaryOp op) {
  auto *b = e ? std::get_if<Binary>(&e->node) : nullptr;
  return (b && b->op == op) ? b : nullptr;
}

// Constants of `c op 1` (used by modular and indexing forms).
std::optional<int> plus_one_constant(const ExprPtr &e) {
  auto *b = as_binary(e, BinaryOp::add);
  if (!b || small_literal(b->rhs) != 1)
    return std::nullopt;
  return small_literal(b->lhs);
}

// Candidate (kind, c1, c2) read off the AST shape; confirmed by the caller.
std::optional<std::tuple<TemplateKind, int, int>> read_shape(const ExprPtr &body) {
  using K = TemplateKind;
  if (auto *r = std::get_if<Recursive>(&body->node)) {
    auto *add = as_binary(r->step, BinaryOp::add);
    auto *outer = add ? as_binary(add->lhs, BinaryOp::mul) : nullptr;
    auto *inner = outer ? as_binary(outer->lhs, BinaryOp::mul) : nullptr;
    if (!inner)
      return std::nullopt;
    auto c1 = small_literal(inner->lhs);
    auto c2 = small_literal(add->rhs);
    if (c1 && c2)
      return std::tuple{K::recursive, *c1, *c2};
    return std::nullopt;
  }
  if (auto *f = std::get_if<FilteredIndex>(&body->node)) {
    if (f->moduli.size() != 2)
      return std::nullopt;
    auto c1 = plus_one_constant(f->moduli[0]);
    auto c2 = plus_one_constant(f->moduli[1]);
    if (c1 && c2)
      return std::tuple{K::indexing_criteria, *c1, *c2};
    return std::nullopt;
  }
  auto *top = std::get_if<Binary>(&body->node);
  if (!top)
    return std::nullopt;
  if (top->op == BinaryOp::pow) {
    if (auto *m = as_binary(top->lhs, BinaryOp::mul)) {
      auto c1 = small_literal(m->lhs), c2 = small_literal(top->rhs);
      if (c1 && c2)
        return std::tuple{K::exponential, *c1, *c2};
    }
    if (auto *m = as_binary(top->rhs, BinaryOp::mul)) {
      auto c1 = small_literal(top->lhs), c2 = small_literal(m->lhs);
      if (c1 && c2)
        return std::tuple{K::power, *c1, *c2};
    }
    return std::nullopt;
  }
  if (top->op == BinaryOp::mod) {
    auto *m = as_binary(top->lhs, BinaryOp::mul);
    auto c1 = m ? small_literal(m->rhs) : std::nullopt;
    auto c2 = plus_one_constant(top->rhs);
    if (c1 && c2)
      return std::tuple{K::modular, *c1, *c2};
    return std::nullopt;
  }
  auto *m = as_binary(top->lhs, BinaryOp::mul);
  auto c1 = m ? small_literal(m->lhs) : std::nullopt;
  auto c2 = small_literal(top->rhs);
  if (!c1 || !c2)
    return std::nullopt;
  switch (top->op) {
  case BinaryOp::add:
    return std::tuple{K::arithmetic, *c1, *c2};
  case BinaryOp::mul:
    return std::tuple{K::geometric, *c1, *c2};
  case BinaryOp::bit_or:
    return std::tuple{K::bit_or, *c1, *c2};
  default:
    return std::nullopt;
  }
}

ConcreteFunction build_concrete(TemplateKind kind, int c1, int c2) {
  ConcreteFunction f;
  f.kind = kind;
  f.c1 = c1;
  f.c2 = c2;
  f.function.body = template_body(kind, c1, c2);
  f.text = fill_pattern(template_pattern(kind), c1, c2);
  return f;
}

} // namespace

ConcreteFunction instantiate(TemplateKind kind, int c1, int c2,
                             ConstantRange range) {
  if (c1 < range.min || c1 > range.max || c2 < range.min || c2 > range.max) {
    std::ostringstream msg;
    msg << "constants (" << c1 << ", " << c2 << ") outside [" << range.min
        << ", " << range.max << "]";
    throw std::out_of_range(msg.str());
  }
  if (range.min < 0)
    throw std::out_of_range("template constants must be non-negative");
  return build_concrete(kind, c1, c2);
}

Function with_binary_output(Function f) {
  f.binary_output = true;
  return f;
}

std::optional<ConcreteFunction> match_template(const Function &f) {
  if (!f.body)
    return std::nullopt;
  auto shape = read_shape(f.body);
  if (!shape)
    return std::nullopt;
  auto [kind, c1, c2] = *shape;
  if (c1 < 0 || c2 < 0)
    return std::nullopt;
  ConcreteFunction candidate = build_concrete(kind, c1, c2);
  if (!same_expr(candidate.function.body, f.body))
    return std::nullopt;
  candidate.function.binary_output = f.binary_output;
  return candidate;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string render_expr(const ExprPtr &e);

std::string render_operand(const ExprPtr &e) {
  if (std::holds_alternative<Binary>(e->node) ||
      std::holds_alternative<Negate>(e->node))
    return "(" + render_expr(e) + ")";
  return render_expr(e);
}

std::string render_expr(const ExprPtr &e) {
  struct Visitor {
    std::string operator()(const Literal &l) const { return l.value.str(); }
    std::string operator()(const Variable &) const { return "x"; }
    std::string operator()(const PreviousTerm &) const { return "fn(fn,x-1)"; }
    std::string operator()(const Negate &n) const {
      return "-" + render_operand(n.operand);
    }
    std::string operator()(const Binary &b) const {
      return render_operand(b.lhs) + " " + std::string(to_string(b.op)) + " " +
             render_operand(b.rhs);
    }
    std::string operator()(const FilteredIndex &f) const {
      std::string out = "[i for i in range(" + render_expr(f.limit) + ") if ";
      for (std::size_t i = 0; i < f.moduli.size(); ++i) {
        if (i)
          out += " or ";
        out += "i % " + render_operand(f.moduli[i]);
      }
      return out + "][" + render_expr(f.index) + "]";
    }
    std::string operator()(const Recursive &) const {
      throw std::invalid_argument("recursive form is only valid as a function body");
    }
  };
  return std::visit(Visitor{}, e->node);
}

} // namespace

std::string render(const Function &f) {
  if (!f.body)
    throw std::invalid_argument("function without body");
  std::string text;
  if (auto t = match_template(Function{f.body, false})) {
    text = t->text;
  } else if (auto *r = std::get_if<Recursive>(&f.body->node)) {
    text = "(lambda a: lambda v: a(a,v))(lambda fn,x: " + render_expr(r->base) +
           " if x==0 else " + render_expr(r->step) + ")";
  } else {
    text = "lambda x: " + render_expr(f.body);
  }
  return f.binary_output ? wrap_binary_text(text) : text;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

struct Token {
  enum class Kind { integer, name, op, end } kind;
  std::string text;
};

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
        ++j;
      out.push_back({Token::Kind::integer, std::string(src.substr(i, j - i))});
      i = j;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      out.push_back({Token::Kind::name, std::string(src.substr(i, j - i))});
      i = j;
    } else {
      static constexpr std::string_view kTwoChar[] = {"**", "//", "<<", ">>",
                                                      "=="};
      bool matched = false;
      for (auto op : kTwoChar) {
        if (src.substr(i, 2) == op) {
          out.push_back({Token::Kind::op, std::string(op)});
          i += 2;
          matched = true;
          break;
        }
      }
      if (matched)
        continue;
      if (std::string_view("()[]:,+-*%|&^").find(c) == std::string_view::npos)
        throw ParseError(std::string("unexpected character '") + c + "'");
      out.push_back({Token::Kind::op, std::string(1, c)});
      ++i;
    }
  }
  out.push_back({Token::Kind::end, ""});
  return out;
}

class Parser {
public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Function parse() {
    Function f;
    if (is_op("(") && is_name_at(pos_ + 1, "lambda") && is_op_at(pos_ + 3, ":") &&
        is_name_at(pos_ + 4, "lambda")) {
      f = parse_recursive();
    } else if (is_op("(") && is_name_at(pos_ + 1, "lambda")) {
      advance();
      f = parse_lambda();
      expect_op(")");
    } else {
      f = parse_lambda();
    }
    if (peek().kind != Token::Kind::end)
      throw ParseError("trailing input after function: '" + peek().text + "'");
    return f;
  }

private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::string var_;       // bound lambda parameter
  std::string self_name_; // recursive self reference, when inside a step

  const Token &peek() const { return tokens_[pos_]; }
  const Token &advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  bool is_op(std::string_view op) const { return is_op_at(pos_, op); }
  bool is_op_at(std::size_t at, std::string_view op) const {
    return at < tokens_.size() && tokens_[at].kind == Token::Kind::op &&
           tokens_[at].text == op;
  }
  bool is_name(std::string_view name) const { return is_name_at(pos_, name); }
  bool is_name_at(std::size_t at, std::string_view name) const {
    return at < tokens_.size() && tokens_[at].kind == Token::Kind::name &&
           tokens_[at].text == name;
  }

  void expect_op(std::string_view op) {
    if (!is_op(op))
      throw ParseError("expected '" + std::string(op) + "' but found '" +
                       peek().text + "'");
    advance();
  }
  void expect_name(std::string_view name) {
    if (!is_name(name))
      throw ParseError("expected '" + std::string(name) + "' but found '" +
                       peek().text + "'");
    advance();
  }
  std::string take_name() {
    if (peek().kind != Token::Kind::name)
      throw ParseError("expected identifier but found '" + peek().text + "'");
    return advance().text;
  }

  static bool is_keyword(std::string_view s) {
    return s == "lambda" || s == "for" || s == "in" || s == "if" ||
           s == "else" || s == "or" || s == "range" || s == "bin";
  }

  Function parse_lambda() {
    expect_name("lambda");
    var_ = take_name();
    if (is_keyword(var_))
      throw ParseError("keyword used as parameter name");
    expect_op(":");
    Function f;
    if (is_name("bin") && is_op_at(pos_ + 1, "(")) {
      advance();
      advance();
      f.body = parse_expr();
      expect_op(")");
      f.binary_output = true;
    } else {
      f.body = parse_expr();
    }
    return f;
  }

  // (lambda a: lambda v: a(a,v))(lambda fn,x: BASE if x==0 else STEP)
  Function parse_recursive() {
    Function f;
    expect_op("(");
    expect_name("lambda");
    const std::string a = take_name();
    expect_op(":");
    expect_name("lambda");
    const std::string v = take_name();
    expect_op(":");
    if (is_name("bin")) {
      advance();
      expect_op("(");
      f.binary_output = true;
    }
    expect_name(a);
    expect_op("(");
    expect_name(a);
    expect_op(",");
    expect_name(v);
    expect_op(")");
    if (f.binary_output)
      expect_op(")");
    expect_op(")");
    expect_op("(");
    expect_name("lambda");
    const std::string self = take_name();
    expect_op(",");
    var_ = take_name();
    if (var_ == self || is_keyword(var_) || is_keyword(self))
      throw ParseError("malformed recursive parameters");
    expect_op(":");
    ExprPtr base = parse_expr();
    expect_name("if");
    expect_name(var_);
    expect_op("==");
    if (peek().kind != Token::Kind::integer || peek().text != "0")
      throw ParseError("recursive base case must test x==0");
    advance();
    expect_name("else");
    self_name_ = self;
    ExprPtr step = parse_expr();
    self_name_.clear();
    expect_op(")");
    f.body = make_recursive(std::move(base), std::move(step));
    return f;
  }

  ExprPtr parse_expr() { return parse_bitor(); }

  template <typename Next>
  ExprPtr parse_left_assoc(Next next,
                           std::initializer_list<std::pair<std::string_view, BinaryOp>> ops) {
    ExprPtr lhs = (this->*next)();
    for (;;) {
      bool matched = false;
      for (auto [text, op] : ops) {
        if (is_op(text)) {
          advance();
          lhs = make_binary(op, lhs, (this->*next)());
          matched = true;
          break;
        }
      }
      if (!matched)
        return lhs;
    }
  }

  ExprPtr parse_bitor() {
    return parse_left_assoc(&Parser::parse_bitxor, {{"|", BinaryOp::bit_or}});
  }
  ExprPtr parse_bitxor() {
    return parse_left_assoc(&Parser::parse_bitand, {{"^", BinaryOp::bit_xor}});
  }
  ExprPtr parse_bitand() {
    return parse_left_assoc(&Parser::parse_shift, {{"&", BinaryOp::bit_and}});
  }
  ExprPtr parse_shift() {
    return parse_left_assoc(&Parser::parse_arith, {{"<<", BinaryOp::shift_left},
                                                   {">>", BinaryOp::shift_right}});
  }
  ExprPtr parse_arith() {
    return parse_left_assoc(&Parser::parse_term,
                            {{"+", BinaryOp::add}, {"-", BinaryOp::sub}});
  }
  ExprPtr parse_term() {
    return parse_left_assoc(&Parser::parse_factor, {{"*", BinaryOp::mul},
                                                    {"//", BinaryOp::floor_div},
                                                    {"%", BinaryOp::mod}});
  }

  ExprPtr parse_factor() {
    if (is_op("-")) {
      advance();
      return make_negate(parse_factor());
    }
    if (is_op("+")) {
      advance();
      return parse_factor();
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_atom();
    if (is_op("**")) {
      advance();
      return make_binary(BinaryOp::pow, base, parse_factor());
    }
    return base;
  }

  ExprPtr parse_atom() {
    const Token &tok = peek();
    if (tok.kind == Token::Kind::integer) {
      if (tok.text.size() > 1 && tok.text[0] == '0')
        throw ParseError("leading zeros in integer literal");
      advance();
      return make_literal(Integer(tok.text));
    }
    if (tok.kind == Token::Kind::name) {
      if (!var_.empty() && tok.text == var_) {
        advance();
        return make_variable();
      }
      if (!self_name_.empty() && tok.text == self_name_)
        return parse_previous_call();
      throw ParseError("unknown name '" + tok.text + "'");
    }
    if (is_op("(")) {
      advance();
      ExprPtr inner = parse_expr();
      expect_op(")");
      return inner;
    }
    if (is_op("["))
      return parse_filtered_index();
    throw ParseError("unexpected token '" + tok.text + "'");
  }

  // fn(fn,x-1)
  ExprPtr parse_previous_call() {
    expect_name(self_name_);
    expect_op("(");
    expect_name(self_name_);
    expect_op(",");
    expect_name(var_);
    expect_op("-");
    if (peek().kind != Token::Kind::integer || peek().text != "1")
      throw ParseError("recursive call must use x-1");
    advance();
    expect_op(")");
    return make_previous();
  }

  // [i for i in range(LIMIT) if i % M or i % M ...][INDEX]
  ExprPtr parse_filtered_index() {
    expect_op("[");
    const std::string item = take_name();
    if (item == var_ || is_keyword(item))
      throw ParseError("comprehension variable shadows the parameter");
    expect_name("for");
    expect_name(item);
    expect_name("in");
    expect_name("range");
    expect_op("(");
    ExprPtr limit = parse_expr();
    expect_op(")");
    expect_name("if");
    std::vector<ExprPtr> moduli;
    for (;;) {
      expect_name(item);
      expect_op("%");
      moduli.push_back(parse_factor());
      if (!is_name("or"))
        break;
      advance();
    }
    expect_op("]");
    expect_op("[");
    ExprPtr index = parse_expr();
    expect_op("]");
    return make_filtered_index(std::move(limit), std::move(moduli),
                               std::move(index));
  }
};

} // namespace

Function parse_function(std::string_view text) {
  return Parser(tokenize(text)).parse();
}

std::optional<Function> try_parse_function(std::string_view text) {
  try {
    return parse_function(text);
  } catch (const ParseError &) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

std::size_t bit_length(const Integer &v) {
  if (v == 0)
    return 0;
  return boost::multiprecision::msb(v < 0 ? Integer(-v) : v) + 1;
}

class Evaluator {
public:
  explicit Evaluator(const EvalLimits &limits) : limits_(limits) {}

  Integer at(const ExprPtr &body, const Integer &x) {
    if (auto *r = std::get_if<Recursive>(&body->node))
      return recursive(*r, x);
    return eval(body, x, nullptr);
  }

private:
  const EvalLimits &limits_;

  Integer checked(Integer v) const {
    if (bit_length(v) > limits_.max_result_bits)
      throw EvalError("value exceeds size limit");
    return v;
  }

  Integer recursive(const Recursive &r, const Integer &x) {
    if (x < 0)
      throw EvalError("recursion does not terminate for negative index");
    if (x > limits_.max_recursion_depth)
      throw EvalError("recursion depth limit exceeded");
    const long n = static_cast<long>(x);
    Integer value = eval(r.base, Integer(0), nullptr);
    for (long k = 1; k <= n; ++k)
      value = eval(r.step, Integer(k), &value);
    return value;
  }

  Integer eval(const ExprPtr &e, const Integer &x, const Integer *prev) {
    if (auto *l = std::get_if<Literal>(&e->node))
      return l->value;
    if (std::holds_alternative<Variable>(e->node))
      return x;
    if (std::holds_alternative<PreviousTerm>(e->node)) {
      if (!prev)
        throw EvalError("recursive call outside a recursive form");
      return *prev;
    }
    if (auto *n = std::get_if<Negate>(&e->node))
      return -eval(n->operand, x, prev);
    if (auto *b = std::get_if<Binary>(&e->node))
      return binary(*b, x, prev);
    if (auto *f = std::get_if<FilteredIndex>(&e->node))
      return filtered(*f, x, prev);
    throw EvalError("recursive form is only valid as a function body");
  }

  Integer binary(const Binary &b, const Integer &x, const Integer *prev) {
    const Integer lhs = eval(b.lhs, x, prev);
    const Integer rhs = eval(b.rhs, x, prev);
    switch (b.op) {
    case BinaryOp::add:
      return checked(lhs + rhs);
    case BinaryOp::sub:
      return checked(lhs - rhs);
    case BinaryOp::mul:
      if (bit_length(lhs) + bit_length(rhs) > limits_.max_result_bits + 1)
        throw EvalError("value exceeds size limit");
      return checked(lhs * rhs);
    case BinaryOp::floor_div:
      if (rhs == 0)
        throw EvalError("integer division by zero");
      return floor_div(lhs, rhs);
    case BinaryOp::mod:
      if (rhs == 0)
        throw EvalError("integer modulo by zero");
      return floor_mod(lhs, rhs);
    case BinaryOp::pow: {
      if (rhs < 0)
        throw EvalError("negative exponent");
      if (lhs == 0 || lhs == 1)
        return rhs == 0 ? Integer(1) : lhs;
      if (lhs == -1)
        return (rhs % 2 == 0) ? Integer(1) : Integer(-1);
      if (rhs > static_cast<long>(limits_.max_result_bits))
        throw EvalError("value exceeds size limit");
      const auto exponent = static_cast<unsigned>(rhs);
      if ((bit_length(lhs) - 1) * exponent > limits_.max_result_bits)
        throw EvalError("value exceeds size limit");
      return checked(boost::multiprecision::pow(lhs, exponent));
    }
    case BinaryOp::bit_or:
      return lhs | rhs;
    case BinaryOp::bit_and:
      return lhs & rhs;
    case BinaryOp::bit_xor:
      return lhs ^ rhs;
    case BinaryOp::shift_left:
      if (rhs < 0)
        throw EvalError("negative shift count");
      if (rhs > static_cast<long>(limits_.max_result_bits))
        throw EvalError("value exceeds size limit");
      return checked(lhs << static_cast<unsigned>(rhs));
    case BinaryOp::shift_right:
      if (rhs < 0)
        throw EvalError("negative shift count");
      if (rhs > static_cast<long>(limits_.max_result_bits))
        return lhs < 0 ? Integer(-1) : Integer(0);
      return lhs >> static_cast<unsigned>(rhs);
    }
    throw EvalError("unknown operator");
  }

  Integer filtered(const FilteredIndex &f, const Integer &x, const Integer *prev) {
    const Integer limit = eval(f.limit, x, prev);
    if (limit > limits_.max_filter_range)
      throw EvalError("range limit exceeded");
    const long n = limit < 0 ? 0 : static_cast<long>(limit);
    std::vector<Integer> moduli;
    for (const auto &m : f.moduli)
      moduli.push_back(eval(m, x, prev));
    // Python's `or` short-circuits, but i = 0 reaches every modulus.
    if (n > 0)
      for (const auto &m : moduli)
        if (m == 0)
          throw EvalError("integer modulo by zero");
    std::vector<long> kept;
    for (long i = 0; i < n; ++i) {
      for (const auto &m : moduli) {
        if (Integer(i) % m != 0) {
          kept.push_back(i);
          break;
        }
      }
    }
    Integer index = eval(f.index, x, prev);
    if (index < 0)
      index += static_cast<long>(kept.size());
    if (index < 0 || index >= static_cast<long>(kept.size()))
      throw EvalError("list index out of range");
    return Integer(kept[static_cast<std::size_t>(index)]);
  }
};

} // namespace

Integer evaluate(const Function &f, const Integer &x, const EvalLimits &limits) {
  if (!f.body)
    throw EvalError("function without body");
  return Evaluator(limits).at(f.body, x);
}

Integer evaluate(const ConcreteFunction &f, const Integer &x) {
  return evaluate(f.function, x);
}

void validate(const IndexConvention &conv) {
  if (conv.start_index != 0 && conv.start_index != 1)
    throw std::invalid_argument("start_index must be 0 or 1");
  if (conv.max_offset < 0)
    throw std::invalid_argument("max_offset must be non-negative");
}

IntegerList generate_sequence(const Function &f, int offset, int length,
                              const IndexConvention &conv) {
  validate(conv);
  if (offset < 0 || offset > conv.max_offset)
    throw std::invalid_argument("offset outside [0, max_offset]");
  if (length < 1)
    throw std::invalid_argument("sequence length must be at least 1");
  IntegerList out;
  out.reserve(static_cast<std::size_t>(length));
  for (int j = 0; j < length; ++j)
    out.push_back(evaluate(f, Integer(conv.start_index + offset + j)));
  return out;
}

IntegerList generate_sequence(const ConcreteFunction &f, int offset, int length,
                              const IndexConvention &conv) {
  return generate_sequence(f.function, offset, length, conv);
}

bool generates_with_next(const Function &f, const IntegerList &prefix,
                         const Integer &next, const IndexConvention &conv) {
  validate(conv);
  for (int offset = 0; offset <= conv.max_offset; ++offset) {
    try {
      bool match = true;
      for (std::size_t j = 0; j <= prefix.size() && match; ++j) {
        const Integer v = evaluate(f, Integer(conv.start_index + offset + static_cast<long>(j)));
        match = v == (j < prefix.size() ? prefix[j] : next);
      }
      if (match)
        return true;
    } catch (const EvalError &) {
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

FunctionSpace enumerate_space(const SpaceOptions &options) {
  if (options.constants.min > options.constants.max || options.constants.min < 0)
    throw std::invalid_argument("invalid constant range");
  if (options.probe_first > options.probe_last || options.probe_first < 0)
    throw std::invalid_argument("invalid probe window");
  FunctionSpace space;
  for (TemplateKind kind : kTemplateKinds) {
    for (int c1 = options.constants.min; c1 <= options.constants.max; ++c1) {
      for (int c2 = options.constants.min; c2 <= options.constants.max; ++c2) {
        ConcreteFunction f = instantiate(kind, c1, c2, options.constants);
        std::string reason;
        for (int x = options.probe_first; x <= options.probe_last && reason.empty();
             ++x) {
          try {
            const Integer v = evaluate(f, Integer(x));
            if (options.rule == ValidityRule::int64_range && !fits_int64(v))
              reason = "value exceeds signed 64-bit range at x=" + std::to_string(x);
          } catch (const EvalError &e) {
            reason = std::string(e.what()) + " at x=" + std::to_string(x);
          }
        }
        if (reason.empty())
          space.functions.push_back(std::move(f));
        else
          space.excluded.push_back({kind, c1, c2, f.text, reason});
      }
    }
  }
  return space;
}

} // namespace seqcons
