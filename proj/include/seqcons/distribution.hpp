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

// Top-k token distributions: the alternative-consideration test, response
// quadrants and the smoothed-histogram KL comparison of log-probabilities.

#include "seqcons/integer.hpp"

#include <array>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seqcons {

inline constexpr std::size_t kMaxTopLogprobs = 5;

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;

  friend bool operator==(const TokenLogprob &, const TokenLogprob &) = default;
};

/// First-position top-k alternatives, sorted by descending logprob.
struct TokenDistribution {
  std::vector<TokenLogprob> entries;

  /// Sorts (stable) and validates: k <= 5, distinct tokens, finite logprob <= 0.
  /// Throws std::invalid_argument.
  static TokenDistribution from_entries(std::vector<TokenLogprob> entries);

  friend bool operator==(const TokenDistribution &, const TokenDistribution &) = default;
};

enum class TokenClass { correct, incorrect, ignored };

/// How one listed token reads against the correct set. `value` is the
/// numeral it stands for; `extended` marks a token taken as the first piece of
/// a longer correct numeral.
struct TokenReading {
  TokenClass cls = TokenClass::ignored;
  std::optional<Integer> value;
  bool extended = false;
};

/// Whitespace is stripped. A numeral in `correct` is correct. A numeral that
/// is a strict textual prefix of exactly one correct numeral, not itself
/// listed, counts as that numeral; with two or more candidates it is ignored.
/// Other numerals are incorrect, non-numerals ignored.
std::vector<TokenReading> read_tokens(const TokenDistribution &dist,
                                      const std::set<Integer> &correct, int base);

enum class AlternativeReason {
  all_correct_rank_higher,
  incorrect_outranks_correct,
  correct_missing_incorrect_present,
  no_incorrect_listed,
};

std::string_view to_string(AlternativeReason r);

struct AlternativeTestResult {
  bool passed = false;
  AlternativeReason reason = AlternativeReason::no_incorrect_listed;
  /// Some token was read as the start of a longer numeral.
  bool multi_token = false;
};

/// Every listed incorrect numeral must have a strictly lower logprob than
/// every listed correct one, and no correct value may be missing while an
/// incorrect numeral is listed. Throws std::invalid_argument on empty `correct`.
AlternativeTestResult alternative_consideration_test(const TokenDistribution &dist,
                                                     const std::set<Integer> &correct,
                                                     int base);

/// Multiple-choice form: tokens are option labels ("A".."E"). Labels in
/// `correct` are correct, other labels in `labels` incorrect, the rest ignored.
AlternativeTestResult alternative_consideration_test_labels(const TokenDistribution &dist,
                                                            const std::set<std::string> &correct,
                                                            const std::set<std::string> &labels);

enum class Quadrant { correct_and_pred, correct_not_pred, incorrect_and_pred, incorrect_not_pred };

std::string_view to_string(Quadrant q);
inline constexpr std::array<Quadrant, 4> kQuadrants = {
    Quadrant::correct_and_pred, Quadrant::correct_not_pred, Quadrant::incorrect_and_pred,
    Quadrant::incorrect_not_pred};

/// Non-numeral answers count as incorrect.
Quadrant classify_response_quadrant(std::string_view answer, bool predicted_top1,
                                    const std::set<Integer> &correct, int base);

/// Every listed token with its quadrant; the first entry is the prediction.
std::vector<std::pair<Quadrant, double>> quadrant_logprobs(const TokenDistribution &dist,
                                                           const std::set<Integer> &correct,
                                                           int base);

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

inline constexpr int kDefaultBins = 40;
inline constexpr double kDefaultSmoothingSigma = 1.0;

/// Equal-width bins on [lo, hi]; the last bin is closed. Densities satisfy
/// sum(density) * bin_width() == 1.
struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> density;

  double bin_width() const { return (hi - lo) / static_cast<double>(density.size()); }
  double mass() const;
};

/// [min, max] over all groups pooled; a degenerate range is widened to
/// [v - 0.5, v + 0.5]. Throws std::invalid_argument when every group is empty.
std::pair<double, double> pooled_range(const std::vector<std::vector<double>> &groups);

/// Throws std::invalid_argument for empty input, n_bins < 1, or a value
/// outside [lo, hi].
Histogram build_density_histogram(const std::vector<double> &values, double lo, double hi,
                                  int n_bins = kDefaultBins);
/// Edges from the values themselves.
Histogram build_density_histogram(const std::vector<double> &values, int n_bins = kDefaultBins);

/// Discrete Gaussian kernel in bin units, truncated at ceil(4 sigma) bins,
/// reflected at the edges (the edge bin is repeated), renormalized to unit
/// mass. Throws std::invalid_argument when sigma <= 0.
Histogram gaussian_smooth(const Histogram &hist, double sigma = kDefaultSmoothingSigma);

class SupportError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// sum p log2(p / q) over bins with p > 0, after normalizing both to unit
/// mass. Throws std::invalid_argument on length mismatch or negative entries,
/// SupportError when q = 0 where p > 0.
double kl_divergence_bits(const std::vector<double> &p, const std::vector<double> &q);

struct KlComparison {
  Quadrant reference{};
  Quadrant other{};
  std::size_t n_reference = 0;
  std::size_t n_other = 0;
  /// Absent when a group is empty or the smoothed support still differs.
  std::optional<double> bits;
};

/// Shared edges over all four groups, one histogram per group, smoothing,
/// then KL(correct_and_pred || other) for correct_not_pred and
/// incorrect_not_pred.
std::vector<KlComparison>
quadrant_kl(const std::array<std::vector<double>, 4> &groups, int n_bins = kDefaultBins,
            double sigma = kDefaultSmoothingSigma);

} // namespace seqcons
