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
#include "seqcons/mining.hpp"

#include <doctest.h>

#include <chrono>
#include <map>
#include <sstream>

using namespace seqcons;

namespace {

std::vector<ConcreteFunction> small_space() {
  return {instantiate(TemplateKind::arithmetic, 4, 3),
          instantiate(TemplateKind::bit_or, 3, 3),
          instantiate(TemplateKind::arithmetic, 2, 1),
          instantiate(TemplateKind::geometric, 1, 1),
          instantiate(TemplateKind::modular, 1, 1)};
}

const AmbiguityRecord *find_record(const std::vector<AmbiguityRecord> &records,
                                   const IntegerList &values) {
  for (const auto &r : records)
    if (r.sequence.values == values)
      return &r;
  return nullptr;
}

} // namespace

TEST_SUITE("mining") {

TEST_CASE("hand-enumerated five-function space") {
  // Windows of length 3 (start 1, offsets 0..4), enumerated by hand:
  //   4x+3   : 7,11,15|19  11,15,19|23  15,19,23|27  19,23,27|31  23,27,31|35
  //   3x|3   : 3,7,11|15   7,11,15|15   11,15,15|19  15,15,19|23  15,19,23|27
  //   2x+1   : 3,5,7|9 5,7,9|11 7,9,11|13 9,11,13|15 11,13,15|17
  //   x      : 1,2,3|4 2,3,4|5 3,4,5|6 4,5,6|7 5,6,7|8
  //   x%2    : 1,0,1|0 0,1,0|1 (each twice or more)
  const Dataset ds = mine(small_space(), 3, IndexConvention{});
  REQUIRE(ds.ambiguous.size() == 1);
  CHECK(ds.ambiguous[0].sequence.values == IntegerList{7, 11, 15});
  CHECK(ds.ambiguous[0].continuations() == std::vector<Integer>{15, 19});
  CHECK(ds.unambiguous.size() == 19);

  const auto *shared = find_record(ds.unambiguous, {15, 19, 23});
  REQUIRE(shared);
  CHECK(shared->generators.size() == 2);
  CHECK(shared->continuations() == std::vector<Integer>{27});

  const auto *periodic = find_record(ds.unambiguous, {1, 0, 1});
  REQUIRE(periodic);
  CHECK(periodic->generators.size() == 3);
  CHECK(periodic->explanations().size() == 1);
}

TEST_CASE("single function space has no ambiguity") {
  const Dataset ds = mine({instantiate(TemplateKind::arithmetic, 4, 3)}, 3,
                          IndexConvention{});
  CHECK(ds.ambiguous.empty());
  CHECK(ds.unambiguous.size() == 5);
}

TEST_CASE("default space contains the worked ambiguous example") {
  const auto space = enumerate_space();
  const Dataset ds = mine(space.functions, 3, IndexConvention{});
  const auto *rec = find_record(ds.ambiguous, {7, 11, 15});
  REQUIRE(rec);
  CHECK(rec->continuations() == std::vector<Integer>{15, 19});

  bool arith = false, bitor_ = false;
  for (const auto &g : rec->generators) {
    if (g.function.text == "lambda x: (4 * x) + 3" && g.offset == 0)
      arith = g.continuation == 19;
    if (g.function.text == "lambda x: (3 * x) | 3" && g.offset == 1)
      bitor_ = g.continuation == 15;
  }
  CHECK(arith);
  CHECK(bitor_);

  const SequenceRecord seq{{7, 11, 15}, 10};
  CHECK(valid_continuations(seq, space.functions, IndexConvention{}) ==
        std::set<Integer>{15, 19});
  const auto expl = valid_explanations(seq, space.functions, IndexConvention{});
  std::set<std::string> texts;
  for (const auto &f : expl)
    texts.insert(f.text);
  CHECK(texts.count("lambda x: (4 * x) + 3") == 1);
  CHECK(texts.count("lambda x: (3 * x) | 3") == 1);
}

TEST_CASE("no-match sequence has empty answer sets") {
  const auto space = enumerate_space();
  const SequenceRecord seq{{5, 1, 1234567}, 10};
  CHECK(valid_continuations(seq, space.functions, IndexConvention{}).empty());
  CHECK(valid_explanations(seq, space.functions, IndexConvention{}).empty());
}

TEST_CASE("valid_continuations agrees with exhaustive brute force") {
  const auto space = enumerate_space();
  const IndexConvention conv;
  for (const IntegerList &values :
       {IntegerList{4, 6, 8}, IntegerList{7, 11, 15}, IntegerList{0, 0, 0},
        IntegerList{1, 1, 1}, IntegerList{3, 7}, IntegerList{1, 0}}) {
    std::set<Integer> expected;
    for (TemplateKind kind : kTemplateKinds) {
      for (int c1 = 0; c1 <= 4; ++c1) {
        for (int c2 = 0; c2 <= 4; ++c2) {
          bool in_space = false;
          for (const auto &f : space.functions)
            in_space |= f.kind == kind && f.c1 == c1 && f.c2 == c2;
          if (!in_space)
            continue;
          for (int o = 0; o <= 4; ++o) {
            bool match = true;
            for (std::size_t j = 0; j < values.size() && match; ++j)
              match = oracle::brute_force_value(kind, c1, c2,
                                                1 + o + static_cast<long>(j)) == values[j];
            if (match)
              expected.insert(oracle::brute_force_value(
                  kind, c1, c2, 1 + o + static_cast<long>(values.size())));
          }
        }
      }
    }
    CAPTURE(format_sequence(values, 10));
    CHECK(valid_continuations(SequenceRecord{values, 10}, space.functions, conv) ==
          expected);
  }
  CHECK(valid_continuations(SequenceRecord{{4, 6, 8}, 10}, space.functions, conv) ==
        std::set<Integer>{10});
}

TEST_CASE("soundness, partition and explanation sets") {
  const auto space = enumerate_space();
  for (int length : {2, 3, 4}) {
    const IndexConvention conv;
    const Dataset ds = mine(space.functions, length, conv);
    std::set<IntegerList> ambiguous_values;
    for (const auto &r : ds.ambiguous) {
      CHECK(r.ambiguous());
      ambiguous_values.insert(r.sequence.values);
      // generators cross-checked against an independent scan
      std::vector<std::string> a, b;
      for (const auto &f : r.explanations())
        a.push_back(f.text);
      for (const auto &f : valid_explanations(r.sequence, space.functions, conv))
        b.push_back(f.text);
      CHECK(a == b);
    }
    for (const auto &list : {&ds.ambiguous, &ds.unambiguous}) {
      for (const auto &r : *list) {
        CHECK(r.sequence.length() == length);
        for (const auto &g : r.generators) {
          auto regenerated = generate_sequence(g.function, g.offset, length + 1, conv);
          CHECK(std::equal(r.sequence.values.begin(), r.sequence.values.end(),
                           regenerated.begin()));
          CHECK(regenerated.back() == g.continuation);
        }
      }
    }
    for (const auto &r : ds.unambiguous) {
      CHECK_FALSE(r.ambiguous());
      CHECK(ambiguous_values.count(r.sequence.values) == 0);
    }
    for (std::size_t i = 1; i < ds.ambiguous.size(); ++i)
      CHECK(ds.ambiguous[i - 1].sequence.values < ds.ambiguous[i].sequence.values);
  }
}

TEST_CASE("agreeing offset pairs shrink as the prefix grows") {
  // Per function pair, the (o1, o2) whose prefixes agree at length L + 1 are a
  // subset of those agreeing at length L; pairs that were ambiguous at L drop out.
  std::vector<ConcreteFunction> space;
  for (const auto &f : enumerate_space().functions)
    if (f.c1 <= 2)
      space.push_back(f);
  const IndexConvention conv;
  auto agreeing = [&](int length) {
    std::set<std::tuple<std::size_t, std::size_t, int, int>> out;
    for (std::size_t i = 0; i < space.size(); ++i)
      for (std::size_t j = 0; j < space.size(); ++j)
        for (int o1 = 0; o1 <= conv.max_offset; ++o1)
          for (int o2 = 0; o2 <= conv.max_offset; ++o2) {
            try {
              if (generate_sequence(space[i], o1, length, conv) ==
                  generate_sequence(space[j], o2, length, conv))
                out.insert({i, j, o1, o2});
            } catch (const EvalError &) {
            }
          }
    return out;
  };
  auto previous = agreeing(1);
  for (int length = 2; length <= 5; ++length) {
    auto current = agreeing(length);
    for (const auto &key : current)
      CHECK(previous.count(key) == 1);
    for (const auto &hit : mine_pairwise(space, length - 1, conv))
      CHECK(current.count({hit.first, hit.second, hit.offset_first,
                           hit.offset_second}) == 0);
    previous = std::move(current);
  }
}

TEST_CASE("mining counts at every counting unit") {
  const auto start = std::chrono::steady_clock::now();
  const auto space = enumerate_space();
  const Dataset ds4 = mine(space.functions, 4, IndexConvention{});
  const MiningStats s4 = mining_stats(space.functions, ds4);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));

  // Sequence and function-level counts were cross-checked against an
  // independent Python enumeration of the same rules.
  CHECK(s4.functions == 197);
  CHECK(s4.ambiguous_sequences == 9);
  CHECK(s4.unambiguous_sequences == 389);
  CHECK(s4.pairwise_hits == 107);
  CHECK(s4.ambiguous_function_pairs == 106);
  CHECK(s4.functions_in_ambiguous_pairs == 33);

  // Function-level classification at prefix 2 without offsets.
  const auto cls = classify_functions(space.functions, 2, IndexConvention{1, 0});
  CHECK(cls.ambiguous.size() == 57);
  CHECK(cls.unambiguous.size() == 140);
}

TEST_CASE("pairwise and grouped mining agree on ambiguous prefixes") {
  const auto space = enumerate_space();
  const IndexConvention conv;
  for (int length : {2, 3, 4}) {
    const Dataset ds = mine(space.functions, length, conv);
    std::set<IntegerList> from_pairs;
    for (const auto &h : mine_pairwise(space.functions, length, conv)) {
      auto seq = generate_sequence(space.functions[h.first], h.offset_first, length, conv);
      from_pairs.insert(seq);
    }
    std::set<IntegerList> grouped;
    for (const auto &r : ds.ambiguous)
      grouped.insert(r.sequence.values);
    CHECK(from_pairs == grouped);
  }
}

TEST_CASE("dataset file round trip is byte identical") {
  DatasetParameters params;
  params.length = 3;
  const Dataset ds = mine_dataset(params);
  std::ostringstream first;
  write_dataset(first, ds);

  std::istringstream in(first.str());
  const Dataset back = read_dataset(in);
  CHECK(back.ambiguous.size() == ds.ambiguous.size());
  CHECK(back.unambiguous.size() == ds.unambiguous.size());
  std::ostringstream second;
  write_dataset(second, back);
  CHECK(first.str() == second.str());

  std::ostringstream regenerated;
  write_dataset(regenerated, mine_dataset(params));
  CHECK(regenerated.str() == first.str());

  std::istringstream bad_version(
      R"({"format":"seqcons.dataset","version":99,"parameters":{}})");
  CHECK_THROWS_AS(read_dataset(bad_version), std::runtime_error);
}

TEST_CASE("big values serialize as strings") {
  DatasetParameters params;
  params.length = 4;
  params.space.rule = ValidityRule::exact;
  params.space.probe_last = 12;
  const Dataset ds = mine_dataset(params);
  std::ostringstream out;
  write_dataset(out, ds);
  std::istringstream in(out.str());
  const Dataset back = read_dataset(in);
  bool saw_big = false;
  for (const auto &r : back.unambiguous)
    for (const auto &v : r.sequence.values)
      saw_big |= !fits_int64(v);
  CHECK(saw_big);
}

} // TEST_SUITE
