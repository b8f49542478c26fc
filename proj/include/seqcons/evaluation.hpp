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

// Response parsing, grading and the consistency metrics.
//
// Percentages are in [0, 100]. A metric with an empty denominator is absent
// rather than zero.

#include "seqcons/distribution.hpp"
#include "seqcons/jsonio.hpp"
#include "seqcons/prompting.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace seqcons {

class Backend;

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// A bare numeral after trimming; base 2 needs the 0b prefix.
std::optional<Integer> parse_completion_response(std::string_view text, int base);

/// Strips a leading "Explanation:" marker, then parses the lambda.
std::optional<Function> parse_explanation_response(std::string_view text);

/// First word, case-folded, trailing punctuation dropped, compared with the
/// two verdict words.
std::optional<bool> parse_verdict(std::string_view text, std::string_view consistent_word = "consistent",
                                  std::string_view inconsistent_word = "inconsistent");

/// One option label from `labels`, e.g. "B" or "B." or "(B)".
std::optional<std::string> parse_choice_label(std::string_view text,
                                              const std::set<std::string> &labels);

/// Splits on the literal two-character "\n" separator and on real newlines;
/// items are trimmed and empty ones dropped.
std::vector<std::string> split_alternatives(std::string_view text);

/// Base-10 canonical text of each item: integers for continuations, template
/// text for explanations. Unparseable items keep their raw text behind an
/// "invalid:" tag so they count against precision.
std::vector<std::string> canonical_alternatives(const std::vector<std::string> &items,
                                                AlternativesOf kind, int base);

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

/// Canonical comparison text of an explanation: template text when the AST
/// is template-shaped, render() otherwise. The bin wrapper is not part of it.
std::string explanation_key(const Function &f);

/// Exact template-form match with some generating function. In base 2 the
/// answer must carry the bin wrapper.
bool explanation_matches(const Function &answer, const std::vector<ConcreteFunction> &generators,
                         int base);

/// True iff some offset makes `explanation` produce the prefix followed by
/// `completion`. Never consults a model.
bool check_cross_context_consistency(const SequenceRecord &seq, const Integer &completion,
                                     const Function &explanation, const IndexConvention &conv);

/// Asks `backend` for a verdict on (explanation, completion). nullopt when the
/// reply is not one of the verdict words.
std::optional<bool> model_judged_consistency(Backend &backend, const PromptSpec &spec,
                                             const SequenceRecord &seq, const JudgedPair &pair,
                                             const std::vector<ConcreteFunction> &space,
                                             const IndexConvention &conv);

struct VerbalizationScore {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t n_answers = 0; // after dedup and the five-item cap
};

/// Duplicates removed (first occurrence kept), then at most five retained.
/// An empty answer list scores (0, 0). Throws std::invalid_argument on an
/// empty valid set.
VerbalizationScore verbalization_scores(const std::vector<std::string> &answers,
                                        const std::set<std::string> &valid);
VerbalizationScore verbalization_scores(const std::vector<Integer> &answers,
                                        const std::set<Integer> &valid);

// ---------------------------------------------------------------------------
// Expected random consistency
// ---------------------------------------------------------------------------

enum class EstimatorMode { closed_form, monte_carlo };

struct RandomConsistency {
  double percent = 0.0;
  /// Standard error of the Monte Carlo estimate in percent; 0 for closed form.
  double sigma = 0.0;
  std::size_t n_samples = 0;
};

/// Per sequence: with probability p_compl a uniform valid continuation,
/// otherwise a uniform wrong one (continuations seen in the dataset at that
/// length, minus the valid set); with probability p_expl a uniform
/// generating function, otherwise a uniform non-generating one. The score is
/// check_cross_context_consistency averaged over sequences. Monte Carlo
/// visits the sequences round-robin. Throws std::invalid_argument on
/// probabilities outside [0, 100] or an empty sequence list.
RandomConsistency expected_random_consistency(double p_expl, double p_compl,
                                              const std::vector<AmbiguityRecord> &sequences,
                                              const Dataset &dataset,
                                              const std::vector<ConcreteFunction> &space,
                                              const IndexConvention &conv, EstimatorMode mode,
                                              std::size_t n_samples = 10000,
                                              std::uint64_t rng_seed = 0);

/// Monte Carlo and closed form agree when |mc - cf| <= 3 sigma (exactly, up
/// to 1e-9, when sigma is 0).
bool estimates_agree(const RandomConsistency &closed_form, const RandomConsistency &monte_carlo);

// ---------------------------------------------------------------------------
// Records and metrics
// ---------------------------------------------------------------------------

/// Multiple-choice answers are a label.
struct ChoiceLabel {
  std::string label;
  friend bool operator==(const ChoiceLabel &, const ChoiceLabel &) = default;
};

using ParsedAnswer =
    std::variant<std::monostate, Integer, Function, bool, std::vector<std::string>, ChoiceLabel>;

enum class Probe {
  answer,            // free-form answer
  completion_tokens, // first-position logprobs of a completion
  explanation_choice // multiple-choice explanation with label logprobs
};

std::string_view to_string(Probe p);
std::optional<Probe> probe_from_string(std::string_view name);

struct EvalRecord {
  SequenceRecord sequence;
  Task task = Task::completion;
  Probe probe = Probe::answer;
  /// Prompt settings other than the task, e.g. "len=4 base=10 variant=plain".
  std::string condition;
  bool ambiguous = false;
  std::string raw_response;
  ParsedAnswer parsed;
  bool valid = false;
  std::optional<bool> correct; // absent when !valid
  int run_id = 0;
  std::optional<JudgedPair> judged;
  /// Verbalization only.
  AlternativesOf alternatives = AlternativesOf::continuations;
  /// Multiple-choice only: (label, base-10 function text).
  std::vector<std::pair<std::string, std::string>> choices;
  std::optional<TokenDistribution> logprobs;
  std::optional<std::string> timestamp;
};

/// What the grader needs to know about one sequence.
struct Truth {
  std::set<Integer> continuations;
  std::vector<ConcreteFunction> explanations;
};

Truth truth_for(const SequenceRecord &seq, const std::vector<ConcreteFunction> &space,
                const IndexConvention &conv);

/// Fills parsed, valid and correct from raw_response. Completion answers are
/// correct when valid continuations; explanations when they match a
/// generator; verdicts when they equal the true judgment of `judged`;
/// verbalizations carry no single correctness; choices when the label names
/// a generator.
void grade(EvalRecord &record, const Truth &truth, const IndexConvention &conv,
           std::string_view consistent_word = "consistent",
           std::string_view inconsistent_word = "inconsistent");

Json record_to_json(const EvalRecord &r);
/// Throws std::invalid_argument on a malformed record.
EvalRecord record_from_json(const Json &j);

/// Identity of a record within a campaign (run, condition, task, probe,
/// sequence, judged pair). Used for resumption.
std::string record_key(const EvalRecord &r);

struct RunMetrics {
  std::optional<double> explanation_accuracy;
  std::optional<double> completion_accuracy;
  std::optional<double> valid_fraction;
  std::optional<double> cross_context_consistency;
  std::optional<double> model_judged_consistency;
  std::optional<double> precision;
  std::optional<double> recall;
  int n_runs = 1;
};

/// Accuracy on unambiguous sequences. Completion: equal to the unique
/// continuation. Explanation: exact template match. Invalid answers count as
/// incorrect; valid_fraction = valid / total over both tasks. Records of
/// other tasks or probes are skipped. Throws std::invalid_argument when a
/// graded record is not in dataset.unambiguous.
RunMetrics score_accuracy(const std::vector<EvalRecord> &records, const Dataset &dataset);

struct ConsistencyTally {
  std::size_t consistent = 0;
  std::size_t inconsistent = 0;
  std::size_t invalid = 0;

  /// consistent / (consistent + inconsistent); invalid pairs excluded.
  std::optional<double> percent() const;
};

/// Pairs completion and explanation answers by (run, condition, sequence).
/// A pair with an invalid side goes to the invalid bucket.
ConsistencyTally cross_context_consistency(const std::vector<EvalRecord> &records,
                                           const IndexConvention &conv,
                                           bool ambiguous_only = true);

/// Share of valid verdicts that call the model's own pair consistent.
ConsistencyTally model_judged_tally(const std::vector<EvalRecord> &records);

/// Arithmetic mean per field over the runs that define it. Throws
/// std::invalid_argument on an empty list.
RunMetrics aggregate_runs(const std::vector<RunMetrics> &per_run);

} // namespace seqcons
