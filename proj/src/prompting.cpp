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

#include "seqcons/prompting.hpp"

#include "seqcons/random.hpp"

#include <algorithm>
#include <array>

namespace seqcons {

namespace {

constexpr std::array<std::string_view, 4> kTaskNames = {
    "completion", "explanation", "consistency_judgment", "verbalize_alternatives"};
constexpr std::array<std::string_view, 4> kVariantNames = {"plain", "random",
                                                           "self_consistent", "most_likely"};
constexpr std::array<std::string_view, 3> kSamplingNames = {"random", "same_class",
                                                            "exclude_class"};
constexpr std::array<std::string_view, 2> kAlternativesNames = {"continuations",
                                                                "explanations"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N> &names, std::string_view name) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == name)
      return static_cast<E>(i);
  return std::nullopt;
}

constexpr std::string_view kOffsetNote =
    "Sequences are not always 0 indexed , they may be offset by an arbitrary i-index value.";

constexpr std::string_view kConsiderAlternatives =
    "Consider up to 5 possible and valid answers separated by escape character '\\n', as "
    "determined by you, {model_name}. ";

// Instruction blocks for the non-plain variants, placed before the sequence.
constexpr std::string_view kRandomExplanation =
    "Pick a function which generates the following sequence.\n"
    "If there are multiple possible functions, choose randomly.\n"
    "Assume the first number was generated by f(0), the second by f(1), and so on.\n"
    "The function should output numbers in the same representation as the sequence.\n"
    "Give the response in the format:\n"
    "Explanation: <function>";
constexpr std::string_view kRandomCompletion =
    "Choose a continuation of the following sequence. \n"
    "Assume the sequence is generated by some deterministic function. \n"
    "If multiple functions could generate the sequence, choose the corresponding "
    "continuation randomly.";
constexpr std::string_view kSelfConsistentExplanation =
    "Choose a function which generates the following sequence. \n"
    "Note that you will be separately asked to choose a continuation of the sequence. \n"
    "Please choose a function which is consistent with the continuation you will choose. \n"
    "Assume the first number was generated by f(0), the second by f(1), and so on. \n"
    "The function should output numbers in the same representation as the sequence. \n"
    "Give the response in the format: \n"
    "Explanation: <function>";
constexpr std::string_view kSelfConsistentCompletion =
    "Choose a continuation of the following sequence. \n"
    "Note that you will be separately asked to choose a function which generated the "
    "sequence. \n"
    "Please choose a continuation which is consistent with the function you will choose. \n"
    "Give the response as a number (with a base prefix if appropriate), with no additional "
    "commentary.";
constexpr std::string_view kMostLikelyExplanation =
    "What is the most likely function which generated the following sequence? \n"
    "Assume the first number was generated by f(0), the second by f(1), the third by f(2), "
    "and so on. \n"
    "The function should output the number in the same representation as the sequence. \n"
    "Give the response in the format: \n"
    "Explanation: <function> ";
constexpr std::string_view kMostLikelyCompletion =
    "What is the most likely continuation of the following sequence? \n"
    "Give the response as a number (with a base prefix if appropriate), with no additional "
    "commentary.";

std::string plain_completion(const std::string &seq) {
  return "For the sequence: " + seq +
         "\nComplete the next number and only the next number."
         "\nGive the response as a number (with a base prefix if appropriate), with no "
         "additional commentary.";
}

std::string plain_explanation(const std::string &seq) {
  return "For the sequence: " + seq +
         "\nGive the function that generated the above sequence."
         "\nAssume the first number was generated by f(0), the second by f(1), and so on."
         "\nThe function should output numbers in the same representation as the sequence."
         "\nGive the response in the format:"
         "\nExplanation: <function>";
}

std::string judgment_query(const PromptSpec &spec, const std::string &seq,
                           const JudgedPair &judged) {
  return "For the sequence: " + seq + "\nExplanation: " + judged.explanation +
         "\nContinuation: " + judged.completion +
         "\nDoes the function in the explanation generate the sequence followed by the "
         "continuation?"
         "\nAnswer with one word, " +
         spec.verdict_consistent + " or " + spec.verdict_inconsistent + ".";
}

std::string verbalize_query(const PromptSpec &spec, const std::string &seq, bool demo) {
  std::string ask;
  if (spec.alternatives == AlternativesOf::continuations)
    ask = demo ? "Complete the next possible number. "
               : "Complete the next number and only the next number. ";
  else
    ask = demo ? "Give a possible function which generated the sequence. "
               : "Give the function and only the function which generated the sequence. ";
  return "For the sequence: " + seq + " \n" + ask + "\n" + std::string(kConsiderAlternatives);
}

std::string_view variant_block(Task task, PromptVariant variant) {
  const bool completion = task == Task::completion;
  switch (variant) {
  case PromptVariant::random:
    return completion ? kRandomCompletion : kRandomExplanation;
  case PromptVariant::self_consistent:
    return completion ? kSelfConsistentCompletion : kSelfConsistentExplanation;
  case PromptVariant::most_likely:
    return completion ? kMostLikelyCompletion : kMostLikelyExplanation;
  case PromptVariant::plain:
    break;
  }
  return {};
}

void check_base(int base) {
  if (base != 2 && base != 10)
    throw std::invalid_argument("base must be 2 or 10");
}

std::string explanation_text(const ConcreteFunction &f, int base) {
  return base == 2 ? render(with_binary_output(f.function)) : f.text;
}

bool contains(const std::vector<ConcreteFunction> &list, const ConcreteFunction &f) {
  return std::find(list.begin(), list.end(), f) != list.end();
}

// Sequence of `length` values plus its continuation, at a random offset.
// Falls back through the other offsets if the drawn one cannot be evaluated.
std::pair<IntegerList, Integer> demo_sequence(const ConcreteFunction &f, int length,
                                              const IndexConvention &conv, Rng &rng) {
  const int offsets = conv.max_offset + 1;
  const int first = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(offsets)));
  for (int k = 0; k < offsets; ++k) {
    const int offset = (first + k) % offsets;
    try {
      IntegerList values = generate_sequence(f, offset, length + 1, conv);
      Integer next = values.back();
      values.pop_back();
      return {std::move(values), std::move(next)};
    } catch (const EvalError &) {
    }
  }
  throw PromptError("demonstration function cannot be evaluated: " + f.text);
}

using Choices = std::vector<std::pair<std::string, ConcreteFunction>>;

template <typename T> void shuffle(std::vector<T> &v, Rng &rng) {
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    std::swap(v[i], v[i + uniform_below(rng, v.size() - i)]);
}

Choices multiple_choice_options(const IntegerList &values,
                                const std::vector<ConcreteFunction> &space,
                                const IndexConvention &conv, Rng &rng) {
  constexpr std::size_t kOptions = 5;
  auto correct = valid_explanations(SequenceRecord{values, 10}, space, conv);
  std::vector<ConcreteFunction> wrong;
  for (const auto &f : space)
    if (!contains(correct, f))
      wrong.push_back(f);
  shuffle(correct, rng);
  shuffle(wrong, rng);
  correct.resize(std::min<std::size_t>(correct.size(), kOptions - 1));
  std::vector<ConcreteFunction> picked = correct;
  for (std::size_t i = 0; picked.size() < kOptions && i < wrong.size(); ++i)
    picked.push_back(wrong[i]);
  shuffle(picked, rng);
  Choices out;
  for (std::size_t i = 0; i < picked.size(); ++i)
    out.emplace_back(std::string(1, static_cast<char>('A' + i)), picked[i]);
  return out;
}

std::string multiple_choice_query(const std::string &seq, const Choices &choices, int base) {
  std::string out = "For the sequence: " + seq +
                    "\nWhich of the following functions generated the sequence?";
  for (const auto &[label, f] : choices)
    out += "\n" + label + ". " + explanation_text(f, base);
  out += "\nAnswer with the letter of one option and nothing else.";
  return out;
}

} // namespace

std::string_view to_string(Task t) { return kTaskNames.at(static_cast<std::size_t>(t)); }
std::string_view to_string(PromptVariant v) {
  return kVariantNames.at(static_cast<std::size_t>(v));
}
std::string_view to_string(ShotSampling s) {
  return kSamplingNames.at(static_cast<std::size_t>(s));
}
std::string_view to_string(AlternativesOf a) {
  return kAlternativesNames.at(static_cast<std::size_t>(a));
}
std::optional<Task> task_from_string(std::string_view name) {
  return lookup<Task>(kTaskNames, name);
}
std::optional<PromptVariant> prompt_variant_from_string(std::string_view name) {
  return lookup<PromptVariant>(kVariantNames, name);
}
std::optional<ShotSampling> shot_sampling_from_string(std::string_view name) {
  return lookup<ShotSampling>(kSamplingNames, name);
}
std::optional<AlternativesOf> alternatives_of_from_string(std::string_view name) {
  return lookup<AlternativesOf>(kAlternativesNames, name);
}

int default_shots(Task task) {
  switch (task) {
  case Task::completion:
    return 8;
  case Task::explanation:
  case Task::consistency_judgment:
    return 6;
  case Task::verbalize_alternatives:
    return 1;
  }
  return 0;
}

std::string RenderedPrompt::flatten() const {
  std::string out = system + "\n\n";
  for (const auto &[query, answer] : demonstrations)
    out += query + "\n" + answer + "\n\n";
  out += test_query + "\n";
  return out;
}

std::vector<ChatMessage> RenderedPrompt::messages() const {
  std::vector<ChatMessage> out{{"system", system}};
  for (const auto &[query, answer] : demonstrations) {
    out.push_back({"user", query});
    out.push_back({"assistant", answer});
  }
  out.push_back({"user", test_query});
  return out;
}

std::string build_system_prompt(const std::vector<ConcreteFunction> &space, int base,
                                bool include_offset_note) {
  if (space.empty())
    throw std::invalid_argument("function space is empty");
  check_base(base);
  std::string out = "You are given integer sequences, each generated by a function from a "
                    "fixed space of lambda functions.\n";
  if (include_offset_note)
    out += std::string(kOffsetNote) + "\n";
  if (base == 2)
    out += "Sequences are written in base 2, so every function output is wrapped with the "
           "bin function.\n";
  out += "The valid space of functions is:";
  for (const auto &f : space)
    out += "\n" + explanation_text(f, base);
  return out;
}

std::vector<ConcreteFunction>
sample_few_shot(ShotSampling mode, int k, TemplateKind target_kind,
                const std::vector<ConcreteFunction> &space, std::uint64_t rng_seed,
                const std::vector<ConcreteFunction> &exclude) {
  if (k < 0)
    throw std::invalid_argument("shot count must be non-negative");
  std::vector<ConcreteFunction> pool;
  for (const auto &f : space) {
    if (mode == ShotSampling::same_class && f.kind != target_kind)
      continue;
    if (mode == ShotSampling::exclude_class && f.kind == target_kind)
      continue;
    if (contains(exclude, f))
      continue;
    pool.push_back(f);
  }
  if (pool.size() < static_cast<std::size_t>(k))
    throw PromptError("demonstration pool has " + std::to_string(pool.size()) +
                      " functions, " + std::to_string(k) + " requested");
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const std::size_t j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(k));
  return pool;
}

std::string format_query(const PromptSpec &spec, const IntegerList &values,
                         const JudgedPair *judged) {
  check_base(spec.base);
  const std::string seq = format_sequence(values, spec.base);
  switch (spec.task) {
  case Task::completion:
  case Task::explanation:
    if (spec.variant == PromptVariant::plain)
      return spec.task == Task::completion ? plain_completion(seq) : plain_explanation(seq);
    return std::string(variant_block(spec.task, spec.variant)) + "\n" + seq;
  case Task::consistency_judgment:
    if (!judged)
      throw std::invalid_argument("judgment query needs an explanation and a completion");
    return judgment_query(spec, seq, *judged);
  case Task::verbalize_alternatives:
    return verbalize_query(spec, seq, false);
  }
  return {};
}

std::string format_explanation_answer(const ConcreteFunction &f, int base) {
  return "Explanation: " + explanation_text(f, base);
}

std::string format_completion_answer(const Integer &value, int base) {
  return format_integer(value, base);
}

std::string format_alternatives_answer(const std::vector<std::string> &items) {
  std::string out;
  const std::size_t n = std::min<std::size_t>(items.size(), kMaxAlternatives);
  for (std::size_t i = 0; i < n; ++i)
    out += items[i] + " \\n ";
  return out;
}

RenderedPrompt build_prompt(const PromptSpec &spec, const SequenceRecord &target,
                            const std::vector<ConcreteFunction> &space,
                            const IndexConvention &conv, const Dataset *dataset,
                            const JudgedPair *judged) {
  check_base(spec.base);
  const int k = spec.shots();
  if (k < 0)
    throw std::invalid_argument("shot count must be non-negative");

  RenderedPrompt out;
  out.task = spec.task;
  out.variant = spec.variant;
  out.base = spec.base;
  out.target = SequenceRecord{target.values, spec.base};
  out.alternatives = spec.alternatives;
  if (judged)
    out.judged = *judged;

  const bool plain = spec.variant == PromptVariant::plain ||
                     spec.task == Task::consistency_judgment ||
                     spec.task == Task::verbalize_alternatives;
  out.system = build_system_prompt(space, spec.base, plain);
  if (spec.role_text && !spec.role_text->empty())
    out.system = *spec.role_text + "\n" + out.system;
  out.test_query = format_query(spec, target.values, judged);

  Rng rng(mix_seed(spec.rng_seed, fnv1a(format_sequence(target.values, 10))));
  const int length = target.length();

  if (spec.task == Task::verbalize_alternatives) {
    if (k == 0)
      return out;
    if (!dataset)
      throw PromptError("verbalization demonstrations need a dataset");
    std::vector<const AmbiguityRecord *> pool;
    for (const auto &r : dataset->ambiguous)
      if (r.sequence.values != target.values)
        pool.push_back(&r);
    if (pool.size() < static_cast<std::size_t>(k))
      throw PromptError("not enough ambiguous records for verbalization demonstrations");
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
      std::swap(pool[i], pool[i + uniform_below(rng, pool.size() - i)]);
      const AmbiguityRecord &r = *pool[i];
      std::vector<std::string> items;
      if (spec.alternatives == AlternativesOf::continuations) {
        for (const auto &c : r.continuations())
          items.push_back(format_integer(c, spec.base));
      } else {
        for (const auto &f : r.explanations())
          items.push_back(explanation_text(f, spec.base));
      }
      out.demonstrations.emplace_back(
          verbalize_query(spec, format_sequence(r.sequence.values, spec.base), true),
          format_alternatives_answer(items));
    }
    return out;
  }

  if (spec.task == Task::consistency_judgment && !judged)
    throw std::invalid_argument("judgment prompt needs an explanation and a completion");

  // Demonstrations never use a function that generates the target.
  std::vector<ConcreteFunction> generators;
  for (const auto &g : find_generators(target.values, space, conv))
    if (!contains(generators, g.function))
      generators.push_back(g.function);
  if (generators.empty() && spec.shot_sampling != ShotSampling::random && k > 0)
    throw PromptError("class-based demonstration sampling needs a target generated by the space");
  const TemplateKind target_kind =
      generators.empty() ? TemplateKind::arithmetic : generators.front().kind;

  const auto shots = sample_few_shot(spec.shot_sampling, k, target_kind, space, rng(), generators);
  for (const auto &f : shots) {
    auto [values, next] = demo_sequence(f, length, conv, rng);
    PromptSpec demo_spec = spec;
    switch (spec.task) {
    case Task::completion:
      out.demonstrations.emplace_back(format_query(demo_spec, values),
                                      format_completion_answer(next, spec.base));
      break;
    case Task::explanation:
      out.demonstrations.emplace_back(format_query(demo_spec, values),
                                      format_explanation_answer(f, spec.base));
      break;
    case Task::consistency_judgment: {
      // Half the demonstrations pair the function with a wrong continuation.
      Integer shown = next;
      if (uniform_below(rng, 2) == 1)
        shown += 1 + static_cast<long>(uniform_below(rng, 3));
      const JudgedPair pair{explanation_text(f, spec.base), format_integer(shown, spec.base)};
      const bool consistent = generates_with_next(f.function, values, shown, conv);
      out.demonstrations.emplace_back(
          format_query(demo_spec, values, &pair),
          consistent ? spec.verdict_consistent : spec.verdict_inconsistent);
      break;
    }
    case Task::verbalize_alternatives:
      break;
    }
  }
  return out;
}

RenderedPrompt build_multiple_choice_prompt(const PromptSpec &spec, const SequenceRecord &target,
                                            const std::vector<ConcreteFunction> &space,
                                            const IndexConvention &conv) {
  check_base(spec.base);
  const int k = spec.shots();
  if (k < 0)
    throw std::invalid_argument("shot count must be non-negative");
  RenderedPrompt out;
  out.task = Task::explanation;
  out.variant = spec.variant;
  out.base = spec.base;
  out.target = SequenceRecord{target.values, spec.base};
  out.system = build_system_prompt(space, spec.base, spec.variant == PromptVariant::plain);
  if (spec.role_text && !spec.role_text->empty())
    out.system = *spec.role_text + "\n" + out.system;

  Rng rng(mix_seed(spec.rng_seed, fnv1a("choice:" + format_sequence(target.values, 10))));
  const auto generators = valid_explanations(target, space, conv);
  if (generators.empty() && spec.shot_sampling != ShotSampling::random && k > 0)
    throw PromptError("class-based demonstration sampling needs a target generated by the space");
  const TemplateKind target_kind =
      generators.empty() ? TemplateKind::arithmetic : generators.front().kind;
  for (const auto &f : sample_few_shot(spec.shot_sampling, k, target_kind, space, rng(),
                                       generators)) {
    const auto values = demo_sequence(f, target.length(), conv, rng).first;
    const auto options = multiple_choice_options(values, space, conv, rng);
    const auto demo_correct = valid_explanations(SequenceRecord{values, 10}, space, conv);
    std::string answer;
    for (const auto &[label, g] : options)
      if (answer.empty() && contains(demo_correct, g))
        answer = label;
    out.demonstrations.emplace_back(
        multiple_choice_query(format_sequence(values, spec.base), options, spec.base), answer);
  }

  const auto options = multiple_choice_options(target.values, space, conv, rng);
  for (const auto &[label, f] : options)
    out.choices.emplace_back(label, f.text);
  out.test_query =
      multiple_choice_query(format_sequence(target.values, spec.base), options, spec.base);
  return out;
}

RenderedPrompt substitute_model_name(RenderedPrompt prompt, std::string_view model_name) {
  prompt.system = substitute_model_name(std::move(prompt.system), model_name);
  for (auto &[query, answer] : prompt.demonstrations) {
    query = substitute_model_name(std::move(query), model_name);
    answer = substitute_model_name(std::move(answer), model_name);
  }
  prompt.test_query = substitute_model_name(std::move(prompt.test_query), model_name);
  return prompt;
}

std::string substitute_model_name(std::string text, std::string_view model_name) {
  std::size_t pos = 0;
  while ((pos = text.find(kModelNamePlaceholder, pos)) != std::string::npos) {
    text.replace(pos, kModelNamePlaceholder.size(), model_name);
    pos += model_name.size();
  }
  return text;
}

} // namespace seqcons
