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

#include "seqcons/distribution.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace seqcons {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

struct Ranked {
  bool any_correct = false;
  bool any_incorrect = false;
  double min_correct = 0.0;
  double max_incorrect = 0.0;
};

AlternativeTestResult decide(const Ranked &r, bool all_covered) {
  if (!r.any_incorrect)
    return {true, AlternativeReason::no_incorrect_listed};
  if (r.any_correct && r.max_incorrect >= r.min_correct)
    return {false, AlternativeReason::incorrect_outranks_correct};
  if (!all_covered)
    return {false, AlternativeReason::correct_missing_incorrect_present};
  return {true, AlternativeReason::all_correct_rank_higher};
}

void note(Ranked &r, bool correct, double lp) {
  if (correct) {
    r.min_correct = r.any_correct ? std::min(r.min_correct, lp) : lp;
    r.any_correct = true;
  } else {
    r.max_incorrect = r.any_incorrect ? std::max(r.max_incorrect, lp) : lp;
    r.any_incorrect = true;
  }
}

std::vector<double> normalized(const std::vector<double> &v) {
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::invalid_argument("histogram masses must be finite and non-negative");
    total += x;
  }
  if (total <= 0.0)
    throw std::invalid_argument("histogram has zero mass");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = v[i] / total;
  return out;
}

} // namespace

TokenDistribution TokenDistribution::from_entries(std::vector<TokenLogprob> entries) {
  if (entries.size() > kMaxTopLogprobs)
    throw std::invalid_argument("at most 5 top logprobs are kept");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!std::isfinite(entries[i].logprob) || entries[i].logprob > 0.0)
      throw std::invalid_argument("logprob must be finite and <= 0");
    for (std::size_t j = 0; j < i; ++j)
      if (entries[j].token == entries[i].token)
        throw std::invalid_argument("duplicate token in distribution: " + entries[i].token);
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const TokenLogprob &a, const TokenLogprob &b) {
                     return a.logprob > b.logprob;
                   });
  return TokenDistribution{std::move(entries)};
}

std::vector<TokenReading> read_tokens(const TokenDistribution &dist,
                                      const std::set<Integer> &correct, int base) {
  std::vector<std::optional<Integer>> numerals;
  for (const auto &e : dist.entries)
    numerals.push_back(parse_integer(trim(e.token), base));

  std::vector<TokenReading> out;
  for (std::size_t i = 0; i < dist.entries.size(); ++i) {
    TokenReading r;
    if (!numerals[i]) {
      out.push_back(r);
      continue;
    }
    r.value = numerals[i];
    if (correct.count(*numerals[i])) {
      r.cls = TokenClass::correct;
      out.push_back(r);
      continue;
    }
    const std::string text(trim(dist.entries[i].token));
    std::vector<Integer> extensions;
    for (const auto &c : correct) {
      const std::string full = format_integer(c, base);
      if (full.size() > text.size() && full.compare(0, text.size(), text) == 0)
        extensions.push_back(c);
    }
    if (extensions.empty()) {
      r.cls = TokenClass::incorrect;
    } else if (extensions.size() == 1 &&
               std::find(numerals.begin(), numerals.end(), extensions.front()) ==
                   numerals.end()) {
      r.cls = TokenClass::correct;
      r.value = extensions.front();
      r.extended = true;
    }
    out.push_back(r);
  }
  return out;
}

std::string_view to_string(AlternativeReason r) {
  switch (r) {
  case AlternativeReason::all_correct_rank_higher:
    return "all_correct_rank_higher";
  case AlternativeReason::incorrect_outranks_correct:
    return "incorrect_outranks_correct";
  case AlternativeReason::correct_missing_incorrect_present:
    return "correct_missing_incorrect_present";
  case AlternativeReason::no_incorrect_listed:
    return "no_incorrect_listed";
  }
  return "";
}

AlternativeTestResult alternative_consideration_test(const TokenDistribution &dist,
                                                     const std::set<Integer> &correct,
                                                     int base) {
  if (correct.empty())
    throw std::invalid_argument("correct set must be nonempty");
  const auto readings = read_tokens(dist, correct, base);
  Ranked ranked;
  std::set<Integer> covered;
  bool multi_token = false;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const auto &r = readings[i];
    multi_token |= r.extended;
    if (r.cls == TokenClass::ignored)
      continue;
    note(ranked, r.cls == TokenClass::correct, dist.entries[i].logprob);
    if (r.cls == TokenClass::correct)
      covered.insert(*r.value);
  }
  AlternativeTestResult result = decide(ranked, covered.size() == correct.size());
  result.multi_token = multi_token;
  return result;
}

AlternativeTestResult alternative_consideration_test_labels(const TokenDistribution &dist,
                                                            const std::set<std::string> &correct,
                                                            const std::set<std::string> &labels) {
  if (correct.empty())
    throw std::invalid_argument("correct set must be nonempty");
  Ranked ranked;
  std::set<std::string> covered;
  for (const auto &e : dist.entries) {
    const std::string label(trim(e.token));
    if (!labels.count(label) && !correct.count(label))
      continue;
    const bool ok = correct.count(label) > 0;
    note(ranked, ok, e.logprob);
    if (ok)
      covered.insert(label);
  }
  return decide(ranked, covered.size() == correct.size());
}

std::string_view to_string(Quadrant q) {
  switch (q) {
  case Quadrant::correct_and_pred:
    return "correct_and_pred";
  case Quadrant::correct_not_pred:
    return "correct_not_pred";
  case Quadrant::incorrect_and_pred:
    return "incorrect_and_pred";
  case Quadrant::incorrect_not_pred:
    return "incorrect_not_pred";
  }
  return "";
}

Quadrant classify_response_quadrant(std::string_view answer, bool predicted_top1,
                                    const std::set<Integer> &correct, int base) {
  const auto value = parse_integer(trim(answer), base);
  const bool ok = value && correct.count(*value);
  if (ok)
    return predicted_top1 ? Quadrant::correct_and_pred : Quadrant::correct_not_pred;
  return predicted_top1 ? Quadrant::incorrect_and_pred : Quadrant::incorrect_not_pred;
}

std::vector<std::pair<Quadrant, double>> quadrant_logprobs(const TokenDistribution &dist,
                                                           const std::set<Integer> &correct,
                                                           int base) {
  const auto readings = read_tokens(dist, correct, base);
  std::vector<std::pair<Quadrant, double>> out;
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const bool ok = readings[i].cls == TokenClass::correct;
    const bool top = i == 0;
    Quadrant q = ok ? (top ? Quadrant::correct_and_pred : Quadrant::correct_not_pred)
                    : (top ? Quadrant::incorrect_and_pred : Quadrant::incorrect_not_pred);
    out.emplace_back(q, dist.entries[i].logprob);
  }
  return out;
}

double Histogram::mass() const {
  double total = 0.0;
  for (double d : density)
    total += d;
  return total * bin_width();
}

std::pair<double, double> pooled_range(const std::vector<std::vector<double>> &groups) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto &g : groups)
    for (double v : g) {
      if (!std::isfinite(v))
        throw std::invalid_argument("histogram values must be finite");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (lo > hi)
    throw std::invalid_argument("no values to bin");
  if (lo == hi)
    return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

Histogram build_density_histogram(const std::vector<double> &values, double lo, double hi,
                                  int n_bins) {
  if (values.empty())
    throw std::invalid_argument("no values to bin");
  if (n_bins < 1)
    throw std::invalid_argument("need at least one bin");
  if (!(lo < hi))
    throw std::invalid_argument("histogram range must satisfy lo < hi");
  Histogram h{lo, hi, std::vector<double>(static_cast<std::size_t>(n_bins), 0.0)};
  const double width = h.bin_width();
  for (double v : values) {
    if (!(v >= lo && v <= hi))
      throw std::invalid_argument("value outside histogram range");
    auto bin = static_cast<std::size_t>((v - lo) / width);
    bin = std::min(bin, h.density.size() - 1);
    h.density[bin] += 1.0;
  }
  const double scale = 1.0 / (static_cast<double>(values.size()) * width);
  for (double &d : h.density)
    d *= scale;
  return h;
}

Histogram build_density_histogram(const std::vector<double> &values, int n_bins) {
  const auto [lo, hi] = pooled_range({values});
  return build_density_histogram(values, lo, hi, n_bins);
}

Histogram gaussian_smooth(const Histogram &hist, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("sigma must be positive");
  const long n = static_cast<long>(hist.density.size());
  const long radius = static_cast<long>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    ksum += w;
  }
  for (double &w : kernel)
    w /= ksum;

  auto reflect = [n](long i) {
    // half-sample symmetric: -1 -> 0, n -> n - 1
    const long period = 2 * n;
    i %= period;
    if (i < 0)
      i += period;
    return i < n ? i : period - 1 - i;
  };

  Histogram out{hist.lo, hist.hi, std::vector<double>(hist.density.size(), 0.0)};
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long k = -radius; k <= radius; ++k)
      acc += kernel[static_cast<std::size_t>(k + radius)] *
             hist.density[static_cast<std::size_t>(reflect(i + k))];
    out.density[static_cast<std::size_t>(i)] = acc;
  }
  const double m = out.mass();
  if (m > 0.0)
    for (double &d : out.density)
      d /= m;
  return out;
}

double kl_divergence_bits(const std::vector<double> &p, const std::vector<double> &q) {
  if (p.size() != q.size())
    throw std::invalid_argument("distributions differ in length");
  const auto pn = normalized(p);
  const auto qn = normalized(q);
  double total = 0.0;
  for (std::size_t i = 0; i < pn.size(); ++i) {
    if (pn[i] <= 0.0)
      continue;
    if (qn[i] <= 0.0)
      throw SupportError("q is zero where p is positive (bin " + std::to_string(i) + ")");
    total += pn[i] * std::log2(pn[i] / qn[i]);
  }
  return total;
}

std::vector<KlComparison> quadrant_kl(const std::array<std::vector<double>, 4> &groups,
                                      int n_bins, double sigma) {
  const auto idx = [](Quadrant q) { return static_cast<std::size_t>(q); };
  std::vector<KlComparison> out;
  for (Quadrant other : {Quadrant::correct_not_pred, Quadrant::incorrect_not_pred}) {
    KlComparison c;
    c.reference = Quadrant::correct_and_pred;
    c.other = other;
    c.n_reference = groups[idx(c.reference)].size();
    c.n_other = groups[idx(other)].size();
    out.push_back(c);
  }
  std::vector<std::vector<double>> pooled(groups.begin(), groups.end());
  bool any = false;
  for (const auto &g : pooled)
    any |= !g.empty();
  if (!any)
    return out;
  const auto [lo, hi] = pooled_range(pooled);
  for (auto &c : out) {
    if (c.n_reference == 0 || c.n_other == 0)
      continue;
    const auto p = gaussian_smooth(build_density_histogram(groups[idx(c.reference)], lo, hi, n_bins),
                                   sigma);
    const auto q =
        gaussian_smooth(build_density_histogram(groups[idx(c.other)], lo, hi, n_bins), sigma);
    try {
      c.bits = kl_divergence_bits(p.density, q.density);
    } catch (const SupportError &) {
    }
  }
  return out;
}

} // namespace seqcons
