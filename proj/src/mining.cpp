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

#include "seqcons/mining.hpp"

#include "seqcons/jsonio.hpp"

#include <istream>
#include <map>
#include <optional>
#include <ostream>

namespace seqcons {

std::vector<Integer> AmbiguityRecord::continuations() const {
  std::set<Integer> distinct;
  for (const auto &g : generators)
    distinct.insert(g.continuation);
  return {distinct.begin(), distinct.end()};
}

std::vector<ConcreteFunction> AmbiguityRecord::explanations() const {
  std::vector<ConcreteFunction> out;
  for (const auto &g : generators)
    if (out.empty() || !(out.back() == g.function))
      out.push_back(g.function);
  return out;
}

namespace {

using ValueRow = std::vector<std::optional<Integer>>;

// values[i][t] = f_i(start + t) for t in [0, max_offset + length].
std::vector<ValueRow> value_table(const std::vector<ConcreteFunction> &space,
                                  int length, const IndexConvention &conv) {
  validate(conv);
  if (length < 1)
    throw std::invalid_argument("sequence length must be at least 1");
  const int width = conv.max_offset + length + 1;
  std::vector<ValueRow> table;
  table.reserve(space.size());
  for (const auto &f : space) {
    ValueRow row(static_cast<std::size_t>(width));
    for (int t = 0; t < width; ++t) {
      try {
        row[static_cast<std::size_t>(t)] = evaluate(f, Integer(conv.start_index + t));
      } catch (const EvalError &) {
      }
    }
    table.push_back(std::move(row));
  }
  return table;
}

// Prefix of `length` at `offset` plus its continuation, if all evaluable.
std::optional<IntegerList> window(const ValueRow &row, int offset, int length) {
  IntegerList out;
  out.reserve(static_cast<std::size_t>(length + 1));
  for (int t = offset; t <= offset + length; ++t) {
    const auto &v = row[static_cast<std::size_t>(t)];
    if (!v)
      return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

} // namespace

Dataset mine(const std::vector<ConcreteFunction> &space, int length,
             const IndexConvention &conv, int base) {
  const auto table = value_table(space, length, conv);
  std::map<IntegerList, std::vector<Generator>> groups;
  for (std::size_t i = 0; i < space.size(); ++i) {
    for (int o = 0; o <= conv.max_offset; ++o) {
      auto w = window(table[i], o, length);
      if (!w)
        continue;
      Integer next = w->back();
      w->pop_back();
      groups[*w].push_back(Generator{space[i], o, std::move(next)});
    }
  }
  Dataset dataset;
  dataset.parameters.length = length;
  dataset.parameters.conv = conv;
  dataset.parameters.base = base;
  for (auto &[values, generators] : groups) {
    AmbiguityRecord record{SequenceRecord{values, base}, std::move(generators)};
    if (record.ambiguous())
      dataset.ambiguous.push_back(std::move(record));
    else
      dataset.unambiguous.push_back(std::move(record));
  }
  return dataset;
}

Dataset mine_dataset(const DatasetParameters &params) {
  const FunctionSpace space = enumerate_space(params.space);
  Dataset dataset = mine(space.functions, params.length, params.conv, params.base);
  dataset.parameters = params;
  return dataset;
}

std::vector<Generator> find_generators(const IntegerList &values,
                                       const std::vector<ConcreteFunction> &space,
                                       const IndexConvention &conv) {
  validate(conv);
  std::vector<Generator> out;
  if (values.empty())
    return out;
  const std::size_t length = values.size();
  const std::size_t span = length + 1 + static_cast<std::size_t>(conv.max_offset);
  for (const auto &f : space) {
    // values at start_index + k, evaluated on demand; nullopt marks an error
    std::vector<std::optional<Integer>> cache(span);
    std::vector<bool> done(span, false);
    auto at = [&](std::size_t k) -> const std::optional<Integer> & {
      if (!done[k]) {
        done[k] = true;
        try {
          cache[k] = evaluate(f, Integer(conv.start_index + static_cast<long>(k)));
        } catch (const EvalError &) {
        }
      }
      return cache[k];
    };
    for (int o = 0; o <= conv.max_offset; ++o) {
      const auto base = static_cast<std::size_t>(o);
      bool match = true;
      for (std::size_t j = 0; j < length && match; ++j) {
        const auto &v = at(base + j);
        match = v && *v == values[j];
      }
      if (!match)
        continue;
      if (const auto &next = at(base + length))
        out.push_back(Generator{f, o, *next});
    }
  }
  return out;
}

std::set<Integer> valid_continuations(const SequenceRecord &seq,
                                      const std::vector<ConcreteFunction> &space,
                                      const IndexConvention &conv) {
  std::set<Integer> out;
  for (const auto &g : find_generators(seq.values, space, conv))
    out.insert(g.continuation);
  return out;
}

std::vector<ConcreteFunction>
valid_explanations(const SequenceRecord &seq,
                   const std::vector<ConcreteFunction> &space,
                   const IndexConvention &conv) {
  AmbiguityRecord record{seq, find_generators(seq.values, space, conv)};
  return record.explanations();
}

std::vector<PairwiseHit> mine_pairwise(const std::vector<ConcreteFunction> &space,
                                       int length, const IndexConvention &conv) {
  const auto table = value_table(space, length, conv);
  std::vector<PairwiseHit> hits;
  for (std::size_t i = 0; i < space.size(); ++i) {
    for (std::size_t j = i; j < space.size(); ++j) {
      for (int o1 = 0; o1 <= conv.max_offset; ++o1) {
        auto a = window(table[i], o1, length);
        if (!a)
          continue;
        for (int o2 = (i == j ? o1 + 1 : 0); o2 <= conv.max_offset; ++o2) {
          auto b = window(table[j], o2, length);
          if (!b)
            continue;
          if (std::equal(a->begin(), a->end() - 1, b->begin()) && a->back() != b->back())
            hits.push_back(PairwiseHit{i, j, o1, o2});
        }
      }
    }
  }
  return hits;
}

FunctionClassification classify_functions(const std::vector<ConcreteFunction> &space,
                                          int length, const IndexConvention &conv) {
  const auto table = value_table(space, length, conv);
  std::map<IntegerList, std::set<Integer>> next_values;
  for (std::size_t i = 0; i < space.size(); ++i) {
    for (int o = 0; o <= conv.max_offset; ++o) {
      auto w = window(table[i], o, length);
      if (!w)
        continue;
      Integer next = w->back();
      w->pop_back();
      next_values[*w].insert(std::move(next));
    }
  }
  FunctionClassification out;
  for (std::size_t i = 0; i < space.size(); ++i) {
    auto w = window(table[i], 0, length);
    if (!w) {
      out.unevaluable.push_back(i);
      continue;
    }
    w->pop_back();
    if (next_values[*w].size() >= 2)
      out.ambiguous.push_back(i);
    else
      out.unambiguous.push_back(i);
  }
  return out;
}

MiningStats mining_stats(const std::vector<ConcreteFunction> &space,
                         const Dataset &dataset) {
  MiningStats stats;
  stats.length = dataset.parameters.length;
  stats.functions = space.size();
  stats.ambiguous_sequences = dataset.ambiguous.size();
  stats.unambiguous_sequences = dataset.unambiguous.size();
  const auto hits = mine_pairwise(space, dataset.parameters.length, dataset.parameters.conv);
  stats.pairwise_hits = hits.size();
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  std::set<std::size_t> involved;
  for (const auto &h : hits) {
    pairs.insert({h.first, h.second});
    involved.insert(h.first);
    involved.insert(h.second);
  }
  stats.ambiguous_function_pairs = pairs.size();
  stats.functions_in_ambiguous_pairs = involved.size();
  const auto classes =
      classify_functions(space, dataset.parameters.length, dataset.parameters.conv);
  stats.ambiguous_functions = classes.ambiguous.size();
  stats.unambiguous_functions = classes.unambiguous.size();
  return stats;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

Json record_to_json(const AmbiguityRecord &record, std::string_view cls) {
  Json gens = Json::array();
  for (const auto &g : record.generators) {
    gens.push_back(Json{{"function", g.function.text},
                        {"kind", std::string(to_string(g.function.kind))},
                        {"c1", g.function.c1},
                        {"c2", g.function.c2},
                        {"offset", g.offset},
                        {"continuation", integer_to_json(g.continuation)}});
  }
  return Json{{"class", std::string(cls)},
              {"values", integers_to_json(record.sequence.values)},
              {"base", record.sequence.base},
              {"length", record.sequence.length()},
              {"generators", std::move(gens)}};
}

AmbiguityRecord record_from_json(const Json &j) {
  AmbiguityRecord record;
  record.sequence.values = integers_from_json(j.at("values"));
  record.sequence.base = j.at("base").get<int>();
  if (j.at("length").get<int>() != record.sequence.length())
    throw std::runtime_error("dataset record length mismatch");
  for (const auto &g : j.at("generators")) {
    auto fn = match_template(parse_function(g.at("function").get<std::string>()));
    if (!fn)
      throw std::runtime_error("dataset generator is not a template instance");
    if (to_string(fn->kind) != g.at("kind").get<std::string>() ||
        fn->c1 != g.at("c1").get<int>() || fn->c2 != g.at("c2").get<int>())
      throw std::runtime_error("dataset generator fields disagree with its text");
    record.generators.push_back(
        Generator{std::move(*fn), g.at("offset").get<int>(),
                  integer_from_json(g.at("continuation"))});
  }
  return record;
}

} // namespace

void write_dataset(std::ostream &out, const Dataset &dataset) {
  Json header{{"format", "seqcons.dataset"},
              {"version", kDatasetFormatVersion},
              {"parameters", to_json(dataset.parameters)},
              {"ambiguous", dataset.ambiguous.size()},
              {"unambiguous", dataset.unambiguous.size()}};
  out << header.dump() << '\n';
  for (const auto &r : dataset.ambiguous)
    out << record_to_json(r, "ambiguous").dump() << '\n';
  for (const auto &r : dataset.unambiguous)
    out << record_to_json(r, "unambiguous").dump() << '\n';
}

Dataset read_dataset(std::istream &in) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty dataset file");
  const Json header = Json::parse(line);
  if (header.value("format", "") != "seqcons.dataset")
    throw std::runtime_error("not a dataset file");
  if (header.value("version", 0) != kDatasetFormatVersion)
    throw std::runtime_error("unsupported dataset version " +
                             header.value("version", Json()).dump());
  Dataset dataset;
  dataset.parameters = dataset_parameters_from_json(header.at("parameters"));
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    const Json j = Json::parse(line);
    const auto cls = j.at("class").get<std::string>();
    if (cls == "ambiguous")
      dataset.ambiguous.push_back(record_from_json(j));
    else if (cls == "unambiguous")
      dataset.unambiguous.push_back(record_from_json(j));
    else
      throw std::runtime_error("unknown record class '" + cls + "'");
  }
  return dataset;
}

} // namespace seqcons
