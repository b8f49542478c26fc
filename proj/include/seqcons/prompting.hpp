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

// Prompt rendering for the sequence tasks.
//
// A prompt is a system block (instructions plus the function space), a list
// of solved demonstrations and the test query. `flatten()` gives the single
// string sent to completion-style endpoints; `messages()` the chat form.
//
// Placeholders: `{model_name}` in verbalization prompts is substituted by
// substitute_model_name() and left literal otherwise.

#include "seqcons/mining.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seqcons {

enum class Task { completion, explanation, consistency_judgment, verbalize_alternatives };
enum class PromptVariant { plain, random, self_consistent, most_likely };
enum class ShotSampling { random, same_class, exclude_class };
/// What a verbalization prompt asks for.
enum class AlternativesOf { continuations, explanations };

std::string_view to_string(Task t);
std::string_view to_string(PromptVariant v);
std::string_view to_string(ShotSampling s);
std::string_view to_string(AlternativesOf a);
std::optional<Task> task_from_string(std::string_view name);
std::optional<PromptVariant> prompt_variant_from_string(std::string_view name);
std::optional<ShotSampling> shot_sampling_from_string(std::string_view name);
std::optional<AlternativesOf> alternatives_of_from_string(std::string_view name);

inline constexpr int kMaxAlternatives = 5;
inline constexpr std::string_view kModelNamePlaceholder = "{model_name}";

/// Shot count used when PromptSpec::n_shots is unset.
int default_shots(Task task);

struct PromptSpec {
  Task task = Task::completion;
  PromptVariant variant = PromptVariant::plain;
  int base = 10;
  std::optional<int> n_shots;
  ShotSampling shot_sampling = ShotSampling::random;
  std::optional<std::string> role_text;
  std::uint64_t rng_seed = 0;
  AlternativesOf alternatives = AlternativesOf::continuations;
  /// Verdict words for judgment prompts and their demonstrations.
  std::string verdict_consistent = "consistent";
  std::string verdict_inconsistent = "inconsistent";

  int shots() const { return n_shots ? *n_shots : default_shots(task); }
};

/// The (explanation, completion) pair a judgment prompt asks about.
struct JudgedPair {
  std::string explanation;
  std::string completion;
};

struct ChatMessage {
  std::string role; // "system", "user" or "assistant"
  std::string content;
};

struct RenderedPrompt {
  Task task = Task::completion;
  PromptVariant variant = PromptVariant::plain;
  int base = 10;
  std::string system;
  std::vector<std::pair<std::string, std::string>> demonstrations; // (query, answer)
  std::string test_query;
  SequenceRecord target;
  std::optional<JudgedPair> judged;
  AlternativesOf alternatives = AlternativesOf::continuations;
  /// Multiple-choice prompts only: (label, canonical base-10 function text).
  std::vector<std::pair<std::string, std::string>> choices;

  /// system, blank line, each demo as "query\nanswer\n\n", then "test_query\n".
  std::string flatten() const;
  std::vector<ChatMessage> messages() const;
};

class PromptError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Instruction text followed by one line per function. Base 2 wraps each
/// function in bin(...). Throws std::invalid_argument on an empty space.
std::string build_system_prompt(const std::vector<ConcreteFunction> &space, int base,
                                bool include_offset_note = true);

/// Samples k distinct functions. `exclude` removes further functions (the
/// target's generators) from the pool. Throws PromptError when the filtered
/// pool is smaller than k.
std::vector<ConcreteFunction>
sample_few_shot(ShotSampling mode, int k, TemplateKind target_kind,
                const std::vector<ConcreteFunction> &space, std::uint64_t rng_seed,
                const std::vector<ConcreteFunction> &exclude = {});

/// Test query for `values` (rendered in spec.base). Judgment queries need
/// `judged`.
std::string format_query(const PromptSpec &spec, const IntegerList &values,
                         const JudgedPair *judged = nullptr);

/// "Explanation: <function>" with the bin wrapper in base 2.
std::string format_explanation_answer(const ConcreteFunction &f, int base);
std::string format_completion_answer(const Integer &value, int base);
/// Items joined as "a \n b \n " with a literal backslash-n, at most five.
std::string format_alternatives_answer(const std::vector<std::string> &items);

/// Deterministic in spec.rng_seed and the target values. The dataset supplies
/// ambiguous records for verbalization demonstrations. Judgment prompts need
/// `judged`. Throws PromptError when demonstrations cannot be drawn.
RenderedPrompt build_prompt(const PromptSpec &spec, const SequenceRecord &target,
                            const std::vector<ConcreteFunction> &space,
                            const IndexConvention &conv, const Dataset *dataset = nullptr,
                            const JudgedPair *judged = nullptr);

/// Explanation as a multiple-choice question with labels A-E: up to four
/// generating functions plus distractors from the rest of the space, in
/// shuffled order. Demonstrations use the same form. The first listed token
/// of the answer is the label.
RenderedPrompt build_multiple_choice_prompt(const PromptSpec &spec, const SequenceRecord &target,
                                            const std::vector<ConcreteFunction> &space,
                                            const IndexConvention &conv);

std::string substitute_model_name(std::string text, std::string_view model_name);
/// Substitutes every text field of the prompt.
RenderedPrompt substitute_model_name(RenderedPrompt prompt, std::string_view model_name);

} // namespace seqcons
