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

#pragma once

/**
 * Function space for ambiguous integer sequences.
 *
 * Eight two-constant templates in lambda surface syntax, an AST for the
 * surface language (a superset: any one-variable integer lambda built from
 * + - * // % ** | & ^ << >>, plus the filtered-index comprehension and the
 * self-applied recursive form), a parser, an exact evaluator and the
 * enumeration of the valid space.
 *
 * Canonical text for template instances is byte-identical to the template
 * patterns, e.g. "lambda x: (4 * x) + 3" or "lambda x: (x * 2) % (3+1)".
 */

#include "seqcons/integer.hpp"

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace seqcons {

enum class TemplateKind {
  arithmetic,
  geometric,
  exponential,
  power,
  bit_or,
  modular,
  indexing_criteria,
  recursive,
};

inline constexpr std::array<TemplateKind, 8> kTemplateKinds = {
    TemplateKind::arithmetic, TemplateKind::geometric,
    TemplateKind::exponential, TemplateKind::power,
    TemplateKind::bit_or, TemplateKind::modular,
    TemplateKind::indexing_criteria, TemplateKind::recursive,
};

std::string_view to_string(TemplateKind kind);
std::optional<TemplateKind> template_kind_from_string(std::string_view name);

/// Pattern with two `{}` slots, exactly as the template is written.
std::string_view template_pattern(TemplateKind kind);

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

enum class BinaryOp {
  add,
  sub,
  mul,
  floor_div,
  mod,
  pow,
  bit_or,
  bit_and,
  bit_xor,
  shift_left,
  shift_right,
};

std::string_view to_string(BinaryOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Literal {
  Integer value; // non-negative; negation is a separate node
};
struct Variable {};
/// `fn(fn,x-1)` inside a recursive step.
struct PreviousTerm {};
struct Negate {
  ExprPtr operand;
};
struct Binary {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
/// `[i for i in range(limit) if i % m0 or i % m1 ...][index]`
struct FilteredIndex {
  ExprPtr limit;
  std::vector<ExprPtr> moduli;
  ExprPtr index;
};
/// `(lambda a: lambda v: a(a,v))(lambda fn,x: base if x==0 else step)`.
/// Only valid as the whole body of a function.
struct Recursive {
  ExprPtr base;
  ExprPtr step;
};

struct Expr {
  std::variant<Literal, Variable, PreviousTerm, Negate, Binary, FilteredIndex,
               Recursive>
      node;
};

bool operator==(const Expr &a, const Expr &b);
bool same_expr(const ExprPtr &a, const ExprPtr &b);

ExprPtr make_literal(Integer value);
ExprPtr make_variable();
ExprPtr make_previous();
ExprPtr make_negate(ExprPtr operand);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_filtered_index(ExprPtr limit, std::vector<ExprPtr> moduli,
                            ExprPtr index);
ExprPtr make_recursive(ExprPtr base, ExprPtr step);

/// A one-variable function. `binary_output` marks the `bin(...)` wrapper used
/// for base-2 tasks; it changes rendering only, never the value.
struct Function {
  ExprPtr body;
  bool binary_output = false;

  friend bool operator==(const Function &a, const Function &b) {
    return a.binary_output == b.binary_output && same_expr(a.body, b.body);
  }
};

/// Template instance. `text` is the base-10 canonical surface string.
struct ConcreteFunction {
  TemplateKind kind{};
  int c1 = 0;
  int c2 = 0;
  Function function;
  std::string text;

  friend bool operator==(const ConcreteFunction &a, const ConcreteFunction &b) {
    return a.kind == b.kind && a.c1 == b.c1 && a.c2 == b.c2;
  }
};

struct ConstantRange {
  int min = 0;
  int max = 4;
};

/// Throws std::out_of_range when a constant is outside `range`.
ConcreteFunction instantiate(TemplateKind kind, int c1, int c2,
                             ConstantRange range = {});

/// Same function with the `bin(...)` wrapper, for base-2 prompts.
Function with_binary_output(Function f);

// ---------------------------------------------------------------------------
// Parsing and rendering
// ---------------------------------------------------------------------------

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Whitespace-insensitive parse of lambda surface syntax. Throws ParseError.
Function parse_function(std::string_view text);

/// Non-throwing variant; nullopt means "unparseable".
std::optional<Function> try_parse_function(std::string_view text);

/// Recovers (kind, c1, c2) when the AST has exactly a template shape with
/// literal constants. Constants outside int range are rejected.
std::optional<ConcreteFunction> match_template(const Function &f);

/// Canonical text. Template-shaped ASTs render as their template pattern;
/// anything else renders with single spaces around operators and explicit
/// parentheses around nested binary operations.
std::string render(const Function &f);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Guards for executing model-written functions.
struct EvalLimits {
  std::size_t max_result_bits = 1u << 16;
  long max_recursion_depth = 100000;
  long max_filter_range = 1000000;
};

/// Exact value of `f` at `x` with Python integer semantics. Throws EvalError
/// (index out of range, division by zero, negative exponent, limits).
Integer evaluate(const Function &f, const Integer &x, const EvalLimits &limits = {});
Integer evaluate(const ConcreteFunction &f, const Integer &x);

struct IndexConvention {
  int start_index = 1;
  int max_offset = 4;
};

/// Throws std::invalid_argument for a malformed convention.
void validate(const IndexConvention &conv);

/// [f(start + offset + j) for j in 0..length-1]. Throws EvalError or
/// std::invalid_argument.
IntegerList generate_sequence(const Function &f, int offset, int length,
                              const IndexConvention &conv);
IntegerList generate_sequence(const ConcreteFunction &f, int offset, int length,
                              const IndexConvention &conv);

/// True iff some offset in [0, max_offset] makes `f` produce `prefix` followed
/// by `next`. Evaluation errors count as a mismatch at that offset.
bool generates_with_next(const Function &f, const IntegerList &prefix,
                         const Integer &next, const IndexConvention &conv);

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

enum class ValidityRule {
  /// Valid iff every probed index evaluates without error.
  exact,
  /// As `exact`, and every probed value also fits a signed 64-bit integer.
  int64_range,
};

std::string_view to_string(ValidityRule rule);
std::optional<ValidityRule> validity_rule_from_string(std::string_view name);

struct SpaceOptions {
  ConstantRange constants;
  int probe_first = 0;
  int probe_last = 10;
  ValidityRule rule = ValidityRule::int64_range;
};

struct ExcludedCandidate {
  TemplateKind kind{};
  int c1 = 0;
  int c2 = 0;
  std::string text;
  std::string reason;
};

struct FunctionSpace {
  std::vector<ConcreteFunction> functions; // template order, then c1, then c2
  std::vector<ExcludedCandidate> excluded;

  std::size_t candidate_count() const {
    return functions.size() + excluded.size();
  }
};

FunctionSpace enumerate_space(const SpaceOptions &options = {});

} // namespace seqcons
