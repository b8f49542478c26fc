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

#include "oracle/brute_force.hpp"
#include "seqcons/funcspace.hpp"

#include <doctest.h>

#include <chrono>
#include <random>

using namespace seqcons;

TEST_SUITE("funcspace") {

TEST_CASE("instantiate renders the template text") {
  CHECK(instantiate(TemplateKind::arithmetic, 4, 3).text == "lambda x: (4 * x) + 3");
  CHECK(instantiate(TemplateKind::bit_or, 3, 3).text == "lambda x: (3 * x) | 3");
  CHECK(instantiate(TemplateKind::modular, 2, 3).text == "lambda x: (x * 2) % (3+1)");
  CHECK(instantiate(TemplateKind::indexing_criteria, 1, 2).text ==
        "lambda x: [i for i in range(100) if i % (1 + 1) or i % (2 + 1)][x]");
  CHECK(instantiate(TemplateKind::recursive, 2, 1).text ==
        "(lambda a: lambda v: a(a,v))(lambda fn,x: 1 if x==0 else 2 * x * "
        "fn(fn,x-1) + 1)");

  auto zero = instantiate(TemplateKind::arithmetic, 0, 0);
  for (int x = 0; x < 6; ++x)
    CHECK(evaluate(zero, Integer(x)) == 0);

  CHECK_THROWS_AS(instantiate(TemplateKind::power, 5, 0), std::out_of_range);
  CHECK_THROWS_AS(instantiate(TemplateKind::power, 0, -1), std::out_of_range);
  CHECK_NOTHROW(instantiate(TemplateKind::power, 7, 0, {0, 9}));
}

TEST_CASE("parse accepts template text with or without spaces") {
  const auto expected = instantiate(TemplateKind::arithmetic, 4, 3);
  auto spaced = parse_function("lambda x: (4 * x) + 3");
  auto compact = parse_function("lambda x:(4*x)+3");
  CHECK(spaced == expected.function);
  CHECK(compact == expected.function);

  auto matched = match_template(compact);
  REQUIRE(matched);
  CHECK(matched->kind == TemplateKind::arithmetic);
  CHECK(matched->c1 == 4);
  CHECK(matched->c2 == 3);
  CHECK(render(compact) == "lambda x: (4 * x) + 3");

  // Any parameter name binds.
  CHECK(parse_function("lambda n: (4 * n) + 3") == expected.function);
}

TEST_CASE("parse rejects non-grammar input") {
  CHECK_FALSE(try_parse_function("the answer is 7"));
  CHECK_FALSE(try_parse_function(""));
  CHECK_FALSE(try_parse_function("lambda x: y + 1"));
  CHECK_FALSE(try_parse_function("lambda x: x + 2 extra"));
  CHECK_FALSE(try_parse_function("lambda x: 07"));
  CHECK_FALSE(try_parse_function("lambda x: x / 2"));
  CHECK_FALSE(try_parse_function("I think x+2"));
  CHECK_THROWS_AS(parse_function("lambda x: (x"), ParseError);
}

TEST_CASE("parse accepts general one-variable arithmetic") {
  auto f = parse_function("lambda x: x + 2");
  CHECK_FALSE(match_template(f));
  CHECK(render(f) == "lambda x: x + 2");
  CHECK(evaluate(f, Integer(2)) == 4);

  // Python precedence and floor semantics.
  CHECK(evaluate(parse_function("lambda x: -2 ** 2"), Integer(0)) == -4);
  CHECK(evaluate(parse_function("lambda x: 2 ** 3 ** 2"), Integer(0)) == 512);
  CHECK(evaluate(parse_function("lambda x: (x - 7) // 2"), Integer(0)) == -4);
  CHECK(evaluate(parse_function("lambda x: (x - 7) % 3"), Integer(0)) == 2);
  CHECK(evaluate(parse_function("lambda x: 1 + 2 * x | 8"), Integer(3)) == 15);
  CHECK(evaluate(parse_function("lambda x: x << 3 >> 1"), Integer(1)) == 4);
  CHECK(evaluate(parse_function("lambda x: 6 & x ^ 1"), Integer(3)) == 3);
  CHECK(evaluate(parse_function("lambda x: [i for i in range(10) if i % 2][x]"),
                 Integer(1)) == 3);
  CHECK(evaluate(parse_function("lambda x: [i for i in range(10) if i % 2][-1]"),
                 Integer(0)) == 9);
  CHECK(evaluate(parse_function("(lambda x: x * 3)"), Integer(2)) == 6);
}

TEST_CASE("evaluation errors") {
  CHECK_THROWS_AS(evaluate(parse_function("lambda x: x // 0"), Integer(1)), EvalError);
  CHECK_THROWS_AS(evaluate(parse_function("lambda x: x % 0"), Integer(1)), EvalError);
  CHECK_THROWS_AS(evaluate(parse_function("lambda x: 2 ** -1"), Integer(1)), EvalError);
  CHECK_THROWS_AS(evaluate(parse_function("lambda x: 9 ** 9 ** 9"), Integer(1)),
                  EvalError);
  CHECK_THROWS_AS(evaluate(parse_function("lambda x: 1 << 100000000"), Integer(1)),
                  EvalError);
  auto empty = instantiate(TemplateKind::indexing_criteria, 0, 0);
  CHECK_THROWS_AS(evaluate(empty, Integer(0)), EvalError);
  auto rec = instantiate(TemplateKind::recursive, 1, 0);
  CHECK_THROWS_AS(evaluate(rec, Integer(-1)), EvalError);
}

TEST_CASE("evaluate matches worked values") {
  CHECK(evaluate(instantiate(TemplateKind::arithmetic, 4, 3), Integer(1)) == 7);
  CHECK(evaluate(instantiate(TemplateKind::bit_or, 3, 3), Integer(2)) == 7);
  // f(3) = 3 * f(2) = 3 * 2 * f(1) = 6
  CHECK(evaluate(instantiate(TemplateKind::recursive, 1, 0), Integer(3)) == 6);
  // i % 2 or i % 3 nonzero: first kept index is 1
  CHECK(evaluate(instantiate(TemplateKind::indexing_criteria, 1, 2), Integer(0)) == 1);
  // 0 ** 0 is 1 in Python
  CHECK(evaluate(instantiate(TemplateKind::exponential, 0, 0), Integer(0)) == 1);
}

TEST_CASE("generate_sequence") {
  const IndexConvention conv;
  auto arith = instantiate(TemplateKind::arithmetic, 4, 3);
  CHECK(generate_sequence(arith, 0, 3, conv) == IntegerList{7, 11, 15});
  auto bitor_ = instantiate(TemplateKind::bit_or, 3, 3);
  CHECK(generate_sequence(bitor_, 1, 4, conv) == IntegerList{7, 11, 15, 15});
  auto zero = instantiate(TemplateKind::arithmetic, 0, 0);
  for (int offset = 0; offset <= conv.max_offset; ++offset)
    CHECK(generate_sequence(zero, offset, 3, conv) == IntegerList{0, 0, 0});

  CHECK_THROWS_AS(generate_sequence(arith, 5, 3, conv), std::invalid_argument);
  CHECK_THROWS_AS(generate_sequence(arith, -1, 3, conv), std::invalid_argument);
  CHECK_THROWS_AS(generate_sequence(arith, 0, 0, conv), std::invalid_argument);
  CHECK_THROWS_AS(generate_sequence(arith, 0, 3, IndexConvention{2, 4}),
                  std::invalid_argument);

  IndexConvention zero_based{0, 4};
  CHECK(generate_sequence(arith, 0, 3, zero_based) == IntegerList{3, 7, 11});
}

TEST_CASE("enumerate_space counts") {
  const auto start = std::chrono::steady_clock::now();
  const FunctionSpace space = enumerate_space();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed < std::chrono::seconds(1));

  CHECK(space.candidate_count() == 200);
  CHECK(space.functions.size() == 197);
  REQUIRE(space.excluded.size() == 3);
  CHECK(space.excluded[0].kind == TemplateKind::power);
  CHECK(space.excluded[0].c1 == 3);
  CHECK(space.excluded[0].c2 == 4);
  CHECK(space.excluded[1].kind == TemplateKind::power);
  CHECK(space.excluded[1].c1 == 4);
  CHECK(space.excluded[1].c2 == 4);
  CHECK(space.excluded[2].kind == TemplateKind::indexing_criteria);
  CHECK(space.excluded[2].c1 == 0);
  CHECK(space.excluded[2].c2 == 0);

  SpaceOptions exact;
  exact.rule = ValidityRule::exact;
  const FunctionSpace exact_space = enumerate_space(exact);
  CHECK(exact_space.functions.size() == 199);
  REQUIRE(exact_space.excluded.size() == 1);
  CHECK(exact_space.excluded[0].kind == TemplateKind::indexing_criteria);

  SpaceOptions single;
  single.constants = {0, 0};
  CHECK(enumerate_space(single).functions.size() <= 8);
  CHECK(enumerate_space(single).functions.size() == 7);
}

TEST_CASE("enumerate_space is deterministic and ordered") {
  const auto a = enumerate_space();
  const auto b = enumerate_space();
  REQUIRE(a.functions.size() == b.functions.size());
  for (std::size_t i = 0; i < a.functions.size(); ++i)
    CHECK(a.functions[i].text == b.functions[i].text);
  for (std::size_t i = 1; i < a.functions.size(); ++i) {
    const auto &p = a.functions[i - 1], &q = a.functions[i];
    CHECK(std::tuple(static_cast<int>(p.kind), p.c1, p.c2) <
          std::tuple(static_cast<int>(q.kind), q.c1, q.c2));
  }
}

TEST_CASE("round trip and oracle equivalence over the space") {
  const auto space = enumerate_space();
  for (const auto &f : space.functions) {
    CAPTURE(f.text);
    auto parsed = parse_function(f.text);
    CHECK(parsed == f.function);
    CHECK(render(parsed) == f.text);
    auto matched = match_template(parsed);
    REQUIRE(matched);
    CHECK(*matched == f);
    for (long x = 0; x <= 10; ++x)
      CHECK(evaluate(f, Integer(x)) == oracle::brute_force_value(f.kind, f.c1, f.c2, x));
  }
}

TEST_CASE("recursive values stay exact") {
  auto f = instantiate(TemplateKind::recursive, 2, 1);
  Integer previous = 0;
  for (long x = 0; x <= 10; ++x) {
    const Integer v = evaluate(f, Integer(x));
    CHECK(v == oracle::recursive_value(2, 1, x));
    CHECK(v > previous);
    previous = v;
  }
  CHECK_FALSE(fits_int64(evaluate(f, Integer(25))));
  CHECK(evaluate(f, Integer(25)) == oracle::recursive_value(2, 1, 25));
}

TEST_CASE("binary output wrapper") {
  auto f = instantiate(TemplateKind::arithmetic, 4, 3);
  auto wrapped = with_binary_output(f.function);
  CHECK(render(wrapped) == "lambda x: bin((4 * x) + 3)");
  CHECK(parse_function("lambda x: bin((4 * x) + 3)") == wrapped);
  CHECK(evaluate(wrapped, Integer(1)) == 7);

  auto rec = instantiate(TemplateKind::recursive, 1, 0);
  const std::string rec_text = render(with_binary_output(rec.function));
  CHECK(rec_text ==
        "(lambda a: lambda v: bin(a(a,v)))(lambda fn,x: 1 if x==0 else 1 * x * "
        "fn(fn,x-1) + 0)");
  CHECK(parse_function(rec_text) == with_binary_output(rec.function));
  CHECK_FALSE(try_parse_function("lambda x: bin(x) + 1"));
}

namespace {

ExprPtr random_expr(std::mt19937_64 &rng, int depth) {
  const int choice = static_cast<int>(rng() % (depth <= 0 ? 2 : 6));
  switch (choice) {
  case 0:
    return make_literal(Integer(static_cast<long>(rng() % 20)));
  case 1:
    return make_variable();
  case 2:
    return make_negate(random_expr(rng, depth - 1));
  case 3: {
    std::vector<ExprPtr> moduli;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i)
      moduli.push_back(make_literal(Integer(static_cast<long>(1 + rng() % 5))));
    return make_filtered_index(make_literal(Integer(100)), std::move(moduli),
                               random_expr(rng, depth - 1));
  }
  default: {
    const auto op = static_cast<BinaryOp>(rng() % 11);
    return make_binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
  }
  }
}

} // namespace

TEST_CASE("property: render then parse is the identity on random ASTs") {
  std::mt19937_64 rng(20260101);
  for (int trial = 0; trial < 2000; ++trial) {
    Function f{random_expr(rng, 4), (rng() % 4) == 0};
    const std::string text = render(f);
    CAPTURE(text);
    auto back = try_parse_function(text);
    REQUIRE(back);
    CHECK(*back == f);
    CHECK(render(*back) == text);
  }
}

TEST_CASE("property: recursive form round trips with general steps") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    auto step = make_binary(BinaryOp::add, random_expr(rng, 2), make_previous());
    Function f{make_recursive(random_expr(rng, 1), step), false};
    const std::string text = render(f);
    CAPTURE(text);
    auto back = try_parse_function(text);
    REQUIRE(back);
    CHECK(*back == f);
  }
}

} // TEST_SUITE
