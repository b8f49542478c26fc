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

// Mining ambiguous sequences from a function space.
//
// A prefix is ambiguous when the space generates it (at any allowed offset)
// with at least two distinct next values. Records are grouped by prefix
// values; the pairwise audit mode walks function pairs the way the original
// mining loop does and is only used for reporting.

#include "seqcons/funcspace.hpp"

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace seqcons {

struct SequenceRecord {
  IntegerList values;
  int base = 10;

  int length() const { return static_cast<int>(values.size()); }
  friend bool operator==(const SequenceRecord &, const SequenceRecord &) = default;
};

struct Generator {
  ConcreteFunction function;
  int offset = 0;
  Integer continuation;
};

struct AmbiguityRecord {
  SequenceRecord sequence;
  std::vector<Generator> generators; // space order, then offset

  /// Distinct continuations, ascending.
  std::vector<Integer> continuations() const;
  /// Distinct generating functions, space order.
  std::vector<ConcreteFunction> explanations() const;
  bool ambiguous() const { return continuations().size() >= 2; }
};

struct DatasetParameters {
  SpaceOptions space;
  int length = 4;
  IndexConvention conv;
  int base = 10;
};

struct Dataset {
  DatasetParameters parameters;
  std::vector<AmbiguityRecord> ambiguous;   // sorted by values
  std::vector<AmbiguityRecord> unambiguous; // sorted by values
};

/// Groups every (function, offset) prefix of `length` by its values.
/// Functions that fail to evaluate at an offset are skipped for that offset.
Dataset mine(const std::vector<ConcreteFunction> &space, int length,
             const IndexConvention &conv, int base = 10);

/// Enumerates the space described by `params` and mines it.
Dataset mine_dataset(const DatasetParameters &params);

/// Every (function, offset, continuation) in `space` that reproduces `values`.
std::vector<Generator> find_generators(const IntegerList &values,
                                       const std::vector<ConcreteFunction> &space,
                                       const IndexConvention &conv);

std::set<Integer> valid_continuations(const SequenceRecord &seq,
                                      const std::vector<ConcreteFunction> &space,
                                      const IndexConvention &conv);

std::vector<ConcreteFunction>
valid_explanations(const SequenceRecord &seq,
                   const std::vector<ConcreteFunction> &space,
                   const IndexConvention &conv);

/// One ambiguous (f1, o1, f2, o2) hit of the pairwise loop. Indices refer to
/// the space; first <= second, and offsets differ when first == second.
struct PairwiseHit {
  std::size_t first = 0;
  std::size_t second = 0;
  int offset_first = 0;
  int offset_second = 0;
};

std::vector<PairwiseHit> mine_pairwise(const std::vector<ConcreteFunction> &space,
                                       int length, const IndexConvention &conv);

/// Each function classified by its own offset-0 prefix: ambiguous when the
/// space generates that prefix with two or more distinct continuations.
struct FunctionClassification {
  std::vector<std::size_t> ambiguous;
  std::vector<std::size_t> unambiguous;
  std::vector<std::size_t> unevaluable;
};

FunctionClassification classify_functions(const std::vector<ConcreteFunction> &space,
                                          int length, const IndexConvention &conv);

/// All counting units side by side.
struct MiningStats {
  int length = 0;
  std::size_t functions = 0;
  std::size_t ambiguous_sequences = 0;
  std::size_t unambiguous_sequences = 0;
  std::size_t pairwise_hits = 0;
  std::size_t ambiguous_function_pairs = 0;
  std::size_t functions_in_ambiguous_pairs = 0;
  std::size_t ambiguous_functions = 0;
  std::size_t unambiguous_functions = 0;
};

MiningStats mining_stats(const std::vector<ConcreteFunction> &space,
                         const Dataset &dataset);

// Line-oriented dataset file: a header object followed by one JSON object per
// record, records sorted by values, ambiguous before unambiguous.
inline constexpr int kDatasetFormatVersion = 1;

void write_dataset(std::ostream &out, const Dataset &dataset);
Dataset read_dataset(std::istream &in);

} // namespace seqcons
