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

#include "seqcons/evaluation.hpp"

#include "seqcons/backends.hpp"
#include "seqcons/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace seqcons {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char &c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view strip_punctuation(std::string_view s) {
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  return s;
}

bool generates_prefix(const Function &f, const IntegerList &values, const IndexConvention &conv) {
  for (int o = 0; o <= conv.max_offset; ++o) {
    try {
      if (generate_sequence(f, o, static_cast<int>(values.size()), conv) == values)
        return true;
    } catch (const EvalError &) {
    }
  }
  return false;
}

std::optional<bool> judged_truth(const EvalRecord &r, const IndexConvention &conv) {
  if (!r.judged)
    return std::nullopt;
  const auto f = parse_explanation_response(r.judged->explanation);
  const auto c = parse_completion_response(r.judged->completion, r.sequence.base);
  if (!f || !c)
    return std::nullopt;
  return check_cross_context_consistency(r.sequence, *c, *f, conv);
}

double percent(std::size_t num, std::size_t den) {
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

constexpr std::string_view kProbeNames[] = {"answer", "completion_tokens", "explanation_choice"};

} // namespace

// ---------------------------------------------------------------------------
// Parsing

std::optional<Integer> parse_completion_response(std::string_view text, int base) {
  return parse_integer(trim(text), base);
}

std::optional<Function> parse_explanation_response(std::string_view text) {
  text = trim(text);
  constexpr std::string_view marker = "explanation:";
  if (text.size() >= marker.size() && lower(text.substr(0, marker.size())) == marker)
    text = trim(text.substr(marker.size()));
  if (const auto nl = text.find('\n'); nl != std::string_view::npos)
    text = trim(text.substr(0, nl));
  if (text.empty())
    return std::nullopt;
  return try_parse_function(text);
}

std::optional<bool> parse_verdict(std::string_view text, std::string_view consistent_word,
                                  std::string_view inconsistent_word) {
  const std::string yes = lower(trim(consistent_word));
  const std::string no = lower(trim(inconsistent_word));
  const std::string whole = lower(strip_punctuation(trim(text)));
  auto match = [&](const std::string &s) -> std::optional<bool> {
    if (s == yes)
      return true;
    if (s == no)
      return false;
    return std::nullopt;
  };
  if (auto v = match(whole))
    return v;
  const std::string_view t = trim(text);
  const auto end = t.find_first_of(" \t\r\n");
  return match(lower(strip_punctuation(t.substr(0, end))));
}

std::optional<std::string> parse_choice_label(std::string_view text,
                                              const std::set<std::string> &labels) {
  std::string_view t = trim(text);
  const auto end = t.find_first_of(" \t\r\n");
  const std::string word(strip_punctuation(t.substr(0, end)));
  if (labels.count(word))
    return word;
  return std::nullopt;
}

std::vector<std::string> split_alternatives(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    const auto t = trim(current);
    if (!t.empty())
      out.emplace_back(t);
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size() && text[i + 1] == 'n') {
      flush();
      ++i;
    } else if (text[i] == '\n') {
      flush();
    } else {
      current += text[i];
    }
  }
  flush();
  return out;
}

std::vector<std::string> canonical_alternatives(const std::vector<std::string> &items,
                                                AlternativesOf kind, int base) {
  std::vector<std::string> out;
  for (const auto &item : items) {
    if (kind == AlternativesOf::continuations) {
      if (auto v = parse_completion_response(item, base)) {
        out.push_back(format_integer(*v, 10));
        continue;
      }
    } else if (auto f = parse_explanation_response(item)) {
      out.push_back(explanation_key(*f));
      continue;
    }
    out.push_back("invalid:" + item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grading

std::string explanation_key(const Function &f) {
  Function plain = f;
  plain.binary_output = false;
  if (auto m = match_template(plain))
    return m->text;
  return render(plain);
}

bool explanation_matches(const Function &answer, const std::vector<ConcreteFunction> &generators,
                         int base) {
  if (answer.binary_output != (base == 2))
    return false;
  const std::string key = explanation_key(answer);
  return std::any_of(generators.begin(), generators.end(),
                     [&](const ConcreteFunction &g) { return g.text == key; });
}

bool check_cross_context_consistency(const SequenceRecord &seq, const Integer &completion,
                                     const Function &explanation, const IndexConvention &conv) {
  return generates_with_next(explanation, seq.values, completion, conv);
}

std::optional<bool> model_judged_consistency(Backend &backend, const PromptSpec &spec,
                                             const SequenceRecord &seq, const JudgedPair &pair,
                                             const std::vector<ConcreteFunction> &space,
                                             const IndexConvention &conv) {
  if (spec.task != Task::consistency_judgment)
    throw std::invalid_argument("model-judged consistency needs a judgment prompt spec");
  CompletionRequest req;
  req.prompt = build_prompt(spec, seq, space, conv, nullptr, &pair);
  const auto response = backend.complete(req);
  return parse_verdict(response.text, spec.verdict_consistent, spec.verdict_inconsistent);
}

VerbalizationScore verbalization_scores(const std::vector<std::string> &answers,
                                        const std::set<std::string> &valid) {
  if (valid.empty())
    throw std::invalid_argument("valid answer set must be nonempty");
  std::vector<std::string> kept;
  for (const auto &a : answers)
    if (std::find(kept.begin(), kept.end(), a) == kept.end())
      kept.push_back(a);
  if (kept.size() > static_cast<std::size_t>(kMaxAlternatives))
    kept.resize(kMaxAlternatives);
  VerbalizationScore out;
  out.n_answers = kept.size();
  if (kept.empty())
    return out;
  const auto hits = static_cast<double>(
      std::count_if(kept.begin(), kept.end(), [&](const std::string &a) { return valid.count(a); }));
  out.precision = hits / static_cast<double>(kept.size());
  out.recall = hits / static_cast<double>(valid.size());
  return out;
}

VerbalizationScore verbalization_scores(const std::vector<Integer> &answers,
                                        const std::set<Integer> &valid) {
  std::vector<std::string> a;
  for (const auto &v : answers)
    a.push_back(format_integer(v, 10));
  std::set<std::string> s;
  for (const auto &v : valid)
    s.insert(format_integer(v, 10));
  return verbalization_scores(a, s);
}

// ---------------------------------------------------------------------------
// Expected random consistency

namespace {

struct Pools {
  std::vector<Integer> correct_c;
  std::vector<Integer> wrong_c;
  std::vector<ConcreteFunction> correct_e;
  std::vector<ConcreteFunction> wrong_e;
};

std::vector<Pools> build_pools(const std::vector<AmbiguityRecord> &sequences,
                               const Dataset &dataset,
                               const std::vector<ConcreteFunction> &space) {
  std::map<int, std::set<Integer>> seen;
  for (const auto *group : {&dataset.ambiguous, &dataset.unambiguous})
    for (const auto &r : *group)
      for (const auto &c : r.continuations())
        seen[r.sequence.length()].insert(c);
  std::vector<Pools> out;
  for (const auto &s : sequences) {
    Pools p;
    p.correct_c = s.continuations();
    p.correct_e = s.explanations();
    for (const auto &c : seen[s.sequence.length()])
      if (std::find(p.correct_c.begin(), p.correct_c.end(), c) == p.correct_c.end())
        p.wrong_c.push_back(c);
    for (const auto &f : space)
      if (std::find(p.correct_e.begin(), p.correct_e.end(), f) == p.correct_e.end())
        p.wrong_e.push_back(f);
    out.push_back(std::move(p));
  }
  return out;
}

// Mean consistency over every (explanation, completion) pair of two pools.
double pool_mean(const SequenceRecord &seq, const std::vector<ConcreteFunction> &es,
                 const std::vector<Integer> &cs, const IndexConvention &conv) {
  if (es.empty() || cs.empty())
    return 0.0;
  std::size_t hits = 0;
  for (const auto &e : es) {
    // an explanation that cannot produce the prefix matches no continuation
    if (!generates_prefix(e.function, seq.values, conv))
      continue;
    for (const auto &c : cs)
      hits += check_cross_context_consistency(seq, c, e.function, conv);
  }
  return static_cast<double>(hits) / static_cast<double>(es.size() * cs.size());
}

} // namespace

RandomConsistency expected_random_consistency(double p_expl, double p_compl,
                                              const std::vector<AmbiguityRecord> &sequences,
                                              const Dataset &dataset,
                                              const std::vector<ConcreteFunction> &space,
                                              const IndexConvention &conv, EstimatorMode mode,
                                              std::size_t n_samples, std::uint64_t rng_seed) {
  if (!(p_expl >= 0 && p_expl <= 100 && p_compl >= 0 && p_compl <= 100))
    throw std::invalid_argument("probabilities must be percentages in [0, 100]");
  if (sequences.empty())
    throw std::invalid_argument("no sequences to average over");
  const double pe = p_expl / 100.0;
  const double pc = p_compl / 100.0;
  const auto pools = build_pools(sequences, dataset, space);
  for (const auto &p : pools) {
    if (pc < 1 && p.wrong_c.empty())
      throw std::invalid_argument("no wrong continuation available for the random baseline");
    if (pe < 1 && p.wrong_e.empty())
      throw std::invalid_argument("no wrong explanation available for the random baseline");
  }

  RandomConsistency out;
  if (mode == EstimatorMode::closed_form) {
    double total = 0;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const auto &seq = sequences[i].sequence;
      const auto &p = pools[i];
      double v = 0;
      if (pe > 0 && pc > 0)
        v += pe * pc * pool_mean(seq, p.correct_e, p.correct_c, conv);
      if (pe > 0 && pc < 1)
        v += pe * (1 - pc) * pool_mean(seq, p.correct_e, p.wrong_c, conv);
      if (pe < 1 && pc > 0)
        v += (1 - pe) * pc * pool_mean(seq, p.wrong_e, p.correct_c, conv);
      if (pe < 1 && pc < 1)
        v += (1 - pe) * (1 - pc) * pool_mean(seq, p.wrong_e, p.wrong_c, conv);
      total += v;
    }
    out.percent = 100.0 * total / static_cast<double>(sequences.size());
    return out;
  }

  if (n_samples == 0)
    throw std::invalid_argument("Monte Carlo needs at least one sample");
  Rng rng(mix_seed(rng_seed, fnv1a("random-consistency")));
  std::map<std::tuple<std::size_t, bool, std::size_t, bool, std::size_t>, bool> memo;
  std::size_t hits = 0;
  for (std::size_t n = 0; n < n_samples; ++n) {
    const std::size_t i = n % sequences.size();
    const auto &p = pools[i];
    const bool good_e = uniform_unit(rng) < pe;
    const bool good_c = uniform_unit(rng) < pc;
    const auto &es = good_e ? p.correct_e : p.wrong_e;
    const auto &cs = good_c ? p.correct_c : p.wrong_c;
    const std::size_t ei = uniform_below(rng, es.size());
    const std::size_t ci = uniform_below(rng, cs.size());
    const auto key = std::make_tuple(i, good_e, ei, good_c, ci);
    auto it = memo.find(key);
    if (it == memo.end())
      it = memo.emplace(key, check_cross_context_consistency(sequences[i].sequence, cs[ci],
                                                             es[ei].function, conv))
               .first;
    hits += it->second;
  }
  const double phat = static_cast<double>(hits) / static_cast<double>(n_samples);
  out.percent = 100.0 * phat;
  out.sigma = 100.0 * std::sqrt(phat * (1 - phat) / static_cast<double>(n_samples));
  out.n_samples = n_samples;
  return out;
}

bool estimates_agree(const RandomConsistency &closed_form, const RandomConsistency &monte_carlo) {
  const double gap = std::abs(closed_form.percent - monte_carlo.percent);
  if (monte_carlo.sigma == 0.0)
    return gap <= 1e-9;
  return gap <= 3.0 * monte_carlo.sigma;
}

// ---------------------------------------------------------------------------
// Records

std::string_view to_string(Probe p) { return kProbeNames[static_cast<std::size_t>(p)]; }

std::optional<Probe> probe_from_string(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kProbeNames); ++i)
    if (kProbeNames[i] == name)
      return static_cast<Probe>(i);
  return std::nullopt;
}

Truth truth_for(const SequenceRecord &seq, const std::vector<ConcreteFunction> &space,
                const IndexConvention &conv) {
  return Truth{valid_continuations(seq, space, conv), valid_explanations(seq, space, conv)};
}

void grade(EvalRecord &r, const Truth &truth, const IndexConvention &conv,
           std::string_view consistent_word, std::string_view inconsistent_word) {
  r.parsed = std::monostate{};
  r.valid = false;
  r.correct.reset();
  const int base = r.sequence.base;

  if (r.probe == Probe::explanation_choice) {
    std::set<std::string> labels;
    for (const auto &[label, text] : r.choices)
      labels.insert(label);
    if (auto label = parse_choice_label(r.raw_response, labels)) {
      r.parsed = ChoiceLabel{*label};
      r.valid = true;
      bool ok = false;
      for (const auto &[l, text] : r.choices)
        if (l == *label)
          ok = std::any_of(truth.explanations.begin(), truth.explanations.end(),
                           [&](const ConcreteFunction &g) { return g.text == text; });
      r.correct = ok;
    }
    return;
  }

  switch (r.task) {
  case Task::completion:
    if (auto v = parse_completion_response(r.raw_response, base)) {
      r.correct = truth.continuations.count(*v) > 0;
      r.parsed = std::move(*v);
      r.valid = true;
    }
    break;
  case Task::explanation:
    if (auto f = parse_explanation_response(r.raw_response)) {
      r.correct = explanation_matches(*f, truth.explanations, base);
      r.parsed = std::move(*f);
      r.valid = true;
    }
    break;
  case Task::consistency_judgment:
    if (auto v = parse_verdict(r.raw_response, consistent_word, inconsistent_word)) {
      r.parsed = *v;
      r.valid = true;
      if (auto t = judged_truth(r, conv))
        r.correct = *v == *t;
    }
    break;
  case Task::verbalize_alternatives: {
    auto items = canonical_alternatives(split_alternatives(r.raw_response), r.alternatives, base);
    if (!items.empty()) {
      r.parsed = std::move(items);
      r.valid = true;
    }
    break;
  }
  }
}

namespace {

Json parsed_to_json(const ParsedAnswer &p) {
  return std::visit(
      [](const auto &v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>)
          return nullptr;
        else if constexpr (std::is_same_v<T, Integer>)
          return {{"integer", integer_to_json(v)}};
        else if constexpr (std::is_same_v<T, Function>)
          return {{"function", render(v)}};
        else if constexpr (std::is_same_v<T, bool>)
          return {{"verdict", v}};
        else if constexpr (std::is_same_v<T, std::vector<std::string>>)
          return {{"alternatives", v}};
        else
          return {{"label", v.label}};
      },
      p);
}

ParsedAnswer parsed_from_json(const Json &j) {
  if (j.is_null())
    return std::monostate{};
  if (j.contains("integer"))
    return integer_from_json(j["integer"]);
  if (j.contains("function"))
    return parse_function(j["function"].get<std::string>());
  if (j.contains("verdict"))
    return j["verdict"].get<bool>();
  if (j.contains("alternatives"))
    return j["alternatives"].get<std::vector<std::string>>();
  if (j.contains("label"))
    return ChoiceLabel{j["label"].get<std::string>()};
  throw std::invalid_argument("unknown parsed answer: " + j.dump());
}

} // namespace

Json record_to_json(const EvalRecord &r) {
  Json j = {{"run_id", r.run_id},
            {"condition", r.condition},
            {"task", to_string(r.task)},
            {"probe", to_string(r.probe)},
            {"values", integers_to_json(r.sequence.values)},
            {"base", r.sequence.base},
            {"ambiguous", r.ambiguous},
            {"raw_response", r.raw_response},
            {"parsed", parsed_to_json(r.parsed)},
            {"valid", r.valid}};
  j["correct"] = r.correct ? Json(*r.correct) : Json(nullptr);
  if (r.judged)
    j["judged"] = {{"explanation", r.judged->explanation}, {"completion", r.judged->completion}};
  if (r.task == Task::verbalize_alternatives)
    j["alternatives"] = to_string(r.alternatives);
  if (!r.choices.empty()) {
    Json c = Json::array();
    for (const auto &[label, text] : r.choices)
      c.push_back(Json::array({label, text}));
    j["choices"] = std::move(c);
  }
  if (r.logprobs) {
    Json lp = Json::array();
    for (const auto &e : r.logprobs->entries)
      lp.push_back(Json::array({e.token, e.logprob}));
    j["logprobs"] = std::move(lp);
  }
  if (r.timestamp)
    j["timestamp"] = *r.timestamp;
  return j;
}

EvalRecord record_from_json(const Json &j) {
  try {
    EvalRecord r;
    r.run_id = j.at("run_id").get<int>();
    r.condition = j.at("condition").get<std::string>();
    const auto task = task_from_string(j.at("task").get<std::string>());
    const auto probe = probe_from_string(j.at("probe").get<std::string>());
    if (!task || !probe)
      throw std::invalid_argument("unknown task or probe");
    r.task = *task;
    r.probe = *probe;
    r.sequence.values = integers_from_json(j.at("values"));
    r.sequence.base = j.at("base").get<int>();
    r.ambiguous = j.at("ambiguous").get<bool>();
    r.raw_response = j.at("raw_response").get<std::string>();
    r.parsed = parsed_from_json(j.at("parsed"));
    r.valid = j.at("valid").get<bool>();
    if (!j.at("correct").is_null())
      r.correct = j["correct"].get<bool>();
    if (j.contains("judged"))
      r.judged = JudgedPair{j["judged"].at("explanation").get<std::string>(),
                            j["judged"].at("completion").get<std::string>()};
    if (j.contains("alternatives")) {
      const auto a = alternatives_of_from_string(j["alternatives"].get<std::string>());
      if (!a)
        throw std::invalid_argument("unknown alternatives kind");
      r.alternatives = *a;
    }
    if (j.contains("choices"))
      for (const auto &c : j["choices"])
        r.choices.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    if (j.contains("logprobs")) {
      std::vector<TokenLogprob> entries;
      for (const auto &e : j["logprobs"])
        entries.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
      r.logprobs = TokenDistribution::from_entries(std::move(entries));
    }
    if (j.contains("timestamp"))
      r.timestamp = j["timestamp"].get<std::string>();
    return r;
  } catch (const Json::exception &e) {
    throw std::invalid_argument(std::string("malformed record: ") + e.what());
  } catch (const ParseError &e) {
    throw std::invalid_argument(std::string("malformed record function: ") + e.what());
  }
}

std::string record_key(const EvalRecord &r) {
  std::string key = std::to_string(r.run_id) + "|" + r.condition + "|" +
                    std::string(to_string(r.task)) + "|" + std::string(to_string(r.probe)) + "|" +
                    std::to_string(r.sequence.base) + "|" + format_sequence(r.sequence.values, 10);
  if (r.task == Task::verbalize_alternatives)
    key += "|" + std::string(to_string(r.alternatives));
  if (r.judged)
    key += "|" + r.judged->explanation + "|" + r.judged->completion;
  return key;
}

// ---------------------------------------------------------------------------
// Metrics

RunMetrics score_accuracy(const std::vector<EvalRecord> &records, const Dataset &dataset) {
  std::map<IntegerList, const AmbiguityRecord *> index;
  for (const auto &r : dataset.unambiguous)
    index[r.sequence.values] = &r;
  std::size_t total = 0, valid = 0;
  std::size_t n_c = 0, ok_c = 0, n_e = 0, ok_e = 0;
  for (const auto &r : records) {
    if (r.probe != Probe::answer || (r.task != Task::completion && r.task != Task::explanation))
      continue;
    const auto it = index.find(r.sequence.values);
    if (it == index.end())
      throw std::invalid_argument("record sequence is not an unambiguous dataset entry: " +
                                  format_sequence(r.sequence.values, 10));
    ++total;
    valid += r.valid;
    if (r.task == Task::completion) {
      ++n_c;
      const auto *v = std::get_if<Integer>(&r.parsed);
      ok_c += r.valid && v && *v == it->second->continuations().front();
    } else {
      ++n_e;
      const auto *f = std::get_if<Function>(&r.parsed);
      ok_e += r.valid && f && explanation_matches(*f, it->second->explanations(), r.sequence.base);
    }
  }
  RunMetrics m;
  if (n_c)
    m.completion_accuracy = percent(ok_c, n_c);
  if (n_e)
    m.explanation_accuracy = percent(ok_e, n_e);
  if (total)
    m.valid_fraction = percent(valid, total);
  return m;
}

std::optional<double> ConsistencyTally::percent() const {
  const std::size_t den = consistent + inconsistent;
  if (!den)
    return std::nullopt;
  return seqcons::percent(consistent, den);
}

ConsistencyTally cross_context_consistency(const std::vector<EvalRecord> &records,
                                           const IndexConvention &conv, bool ambiguous_only) {
  using Key = std::tuple<int, std::string, int, IntegerList>;
  std::map<Key, std::pair<const EvalRecord *, const EvalRecord *>> pairs;
  for (const auto &r : records) {
    if (r.probe != Probe::answer || (ambiguous_only && !r.ambiguous))
      continue;
    Key key{r.run_id, r.condition, r.sequence.base, r.sequence.values};
    if (r.task == Task::completion)
      pairs[key].first = &r;
    else if (r.task == Task::explanation)
      pairs[key].second = &r;
  }
  ConsistencyTally t;
  for (const auto &[key, pair] : pairs) {
    const auto [c, e] = pair;
    if (!c || !e)
      continue;
    const auto *v = std::get_if<Integer>(&c->parsed);
    const auto *f = std::get_if<Function>(&e->parsed);
    if (!c->valid || !e->valid || !v || !f) {
      ++t.invalid;
      continue;
    }
    if (check_cross_context_consistency(c->sequence, *v, *f, conv))
      ++t.consistent;
    else
      ++t.inconsistent;
  }
  return t;
}

ConsistencyTally model_judged_tally(const std::vector<EvalRecord> &records) {
  ConsistencyTally t;
  for (const auto &r : records) {
    if (r.probe != Probe::answer || r.task != Task::consistency_judgment)
      continue;
    const auto *v = std::get_if<bool>(&r.parsed);
    if (!r.valid || !v)
      ++t.invalid;
    else if (*v)
      ++t.consistent;
    else
      ++t.inconsistent;
  }
  return t;
}

RunMetrics aggregate_runs(const std::vector<RunMetrics> &per_run) {
  if (per_run.empty())
    throw std::invalid_argument("aggregate_runs needs at least one run");
  RunMetrics out;
  out.n_runs = static_cast<int>(per_run.size());
  auto mean = [&](std::optional<double> RunMetrics::*field) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto &m : per_run)
      if (m.*field) {
        sum += *(m.*field);
        ++n;
      }
    out.*field = n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
  };
  mean(&RunMetrics::explanation_accuracy);
  mean(&RunMetrics::completion_accuracy);
  mean(&RunMetrics::valid_fraction);
  mean(&RunMetrics::cross_context_consistency);
  mean(&RunMetrics::model_judged_consistency);
  mean(&RunMetrics::precision);
  mean(&RunMetrics::recall);
  return out;
}

} // namespace seqcons
