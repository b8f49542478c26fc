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

#include "seqcons/backends.hpp"

#include "seqcons/digest.hpp"
#include "seqcons/evaluation.hpp"
#include "seqcons/random.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <thread>

namespace seqcons {

namespace {

std::string joined_alternatives(const std::vector<std::string> &items) {
  return format_alternatives_answer(items);
}

// Generators reordered by the tie-break rule. find_generators already lists
// them in space order, then offset.
std::vector<Generator> ranked_generators(const SequenceRecord &seq,
                                         const std::vector<ConcreteFunction> &space,
                                         const IndexConvention &conv, TieBreak tie_break) {
  auto gens = find_generators(seq.values, space, conv);
  if (tie_break == TieBreak::min_value)
    std::stable_sort(gens.begin(), gens.end(), [](const Generator &a, const Generator &b) {
      return a.continuation < b.continuation;
    });
  return gens;
}

std::vector<Integer> ranked_continuations(const std::vector<Generator> &gens) {
  std::vector<Integer> out;
  for (const auto &g : gens)
    if (std::find(out.begin(), out.end(), g.continuation) == out.end())
      out.push_back(g.continuation);
  return out;
}

std::vector<ConcreteFunction> ranked_functions(const std::vector<Generator> &gens) {
  std::vector<ConcreteFunction> out;
  for (const auto &g : gens)
    if (std::find(out.begin(), out.end(), g.function) == out.end())
      out.push_back(g.function);
  return out;
}

struct OraclePair {
  Integer completion;
  ConcreteFunction explanation;
};

std::optional<OraclePair> oracle_pair(const SequenceRecord &seq,
                                      const std::vector<ConcreteFunction> &space,
                                      const IndexConvention &conv, TieBreak tie_break,
                                      OracleMode mode) {
  const auto gens = ranked_generators(seq, space, conv, tie_break);
  if (gens.empty())
    return std::nullopt;
  if (mode == OracleMode::adversarial) {
    const auto functions = ranked_functions(gens);
    for (const auto &c : ranked_continuations(gens))
      for (const auto &f : functions)
        if (!generates_with_next(f.function, seq.values, c, conv))
          return OraclePair{c, f};
    // every generator reaches every continuation (one function at several
    // offsets); only a wrong explanation can disagree
    if (ranked_continuations(gens).size() >= 2) {
      const Integer c = ranked_continuations(gens).front();
      for (const auto &f : space)
        if (!generates_with_next(f.function, seq.values, c, conv))
          return OraclePair{c, f};
    }
  }
  return OraclePair{gens.front().continuation, gens.front().function};
}

std::string verbalized(const SequenceRecord &seq, AlternativesOf kind,
                       const std::vector<Generator> &gens) {
  std::vector<std::string> items;
  if (kind == AlternativesOf::continuations) {
    for (const auto &c : ranked_continuations(gens))
      items.push_back(format_integer(c, seq.base));
  } else {
    for (const auto &f : ranked_functions(gens))
      items.push_back(seq.base == 2 ? render(with_binary_output(f.function)) : f.text);
  }
  if (items.size() > static_cast<std::size_t>(kMaxAlternatives))
    items.resize(kMaxAlternatives);
  return joined_alternatives(items);
}

std::vector<std::string> correct_labels(const RenderedPrompt &prompt,
                                        const std::vector<ConcreteFunction> &generators) {
  std::vector<std::string> out;
  for (const auto &[label, text] : prompt.choices)
    for (const auto &g : generators)
      if (g.text == text) {
        out.push_back(label);
        break;
      }
  return out;
}

// Smallest non-negative integer outside `correct`.
Integer smallest_outside(const std::set<Integer> &correct) {
  Integer v = 0;
  while (correct.count(v))
    ++v;
  return v;
}

TokenDistribution ranked_tokens(const std::vector<std::string> &correct, const std::string &wrong,
                                int k) {
  std::vector<TokenLogprob> entries;
  for (std::size_t i = 0; i < correct.size() && static_cast<int>(entries.size()) < k; ++i)
    entries.push_back({correct[i], -0.1 * static_cast<double>(i + 1)});
  if (static_cast<int>(entries.size()) < k)
    entries.push_back({wrong, -10.0});
  return TokenDistribution::from_entries(std::move(entries));
}

std::string verdict_text(bool v, const OracleBackend::Options &o) {
  return v ? o.verdict_consistent : o.verdict_inconsistent;
}

std::optional<bool> true_verdict(const SequenceRecord &seq, const JudgedPair &pair,
                                 const IndexConvention &conv) {
  const auto f = parse_explanation_response(pair.explanation);
  const auto c = parse_completion_response(pair.completion, seq.base);
  if (!f || !c)
    return std::nullopt;
  return check_cross_context_consistency(seq, *c, *f, conv);
}

TokenDistribution single_token(const std::string &text) {
  return TokenDistribution::from_entries({{text, 0.0}});
}

} // namespace

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
  case BackendErrorKind::transport:
    return "transport";
  case BackendErrorKind::auth:
    return "auth";
  case BackendErrorKind::unsupported_logprobs:
    return "unsupported_logprobs";
  case BackendErrorKind::fixture_missing:
    return "fixture_missing";
  case BackendErrorKind::bad_response:
    return "bad_response";
  }
  return "";
}

void validate(const CompletionRequest &req) {
  if (req.want_top_logprobs < 0 || req.want_top_logprobs > static_cast<int>(kMaxTopLogprobs))
    throw std::invalid_argument("want_top_logprobs must be in [0, 5]");
  if (req.max_tokens < 1)
    throw std::invalid_argument("max_tokens must be positive");
}

// ---------------------------------------------------------------------------
// Scripted

ScriptedBackend::ScriptedBackend(Json fixture, std::string name)
    : responses_(std::move(fixture)), name_(std::move(name)) {
  if (!responses_.is_object() || !responses_.contains("responses") ||
      !responses_["responses"].is_object())
    throw std::invalid_argument("scripted fixture needs a \"responses\" object");
  responses_ = responses_["responses"];
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open fixture " + path.string());
  return ScriptedBackend(Json::parse(in), path.stem().string());
}

CompletionResponse ScriptedBackend::complete(const CompletionRequest &req) {
  validate(req);
  const Json *entry = nullptr;
  if (auto it = responses_.find(req.prompt.test_query); it != responses_.end())
    entry = &*it;
  else if (auto star = responses_.find("*"); star != responses_.end())
    entry = &*star;
  if (!entry)
    throw BackendError(BackendErrorKind::fixture_missing,
                       "no scripted response for query: " + req.prompt.test_query);
  CompletionResponse out;
  out.backend_id = name_;
  std::optional<TokenDistribution> logprobs;
  if (entry->is_string()) {
    out.text = entry->get<std::string>();
  } else {
    out.text = entry->at("text").get<std::string>();
    if (entry->contains("logprobs")) {
      std::vector<TokenLogprob> entries;
      for (const auto &pair : entry->at("logprobs"))
        entries.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
      logprobs = TokenDistribution::from_entries(std::move(entries));
    }
  }
  if (req.want_top_logprobs > 0) {
    if (!logprobs)
      throw BackendError(BackendErrorKind::unsupported_logprobs,
                         "fixture has no logprobs for query: " + req.prompt.test_query);
    if (logprobs->entries.size() > static_cast<std::size_t>(req.want_top_logprobs))
      logprobs->entries.resize(req.want_top_logprobs);
    out.first_position_top_logprobs = std::move(logprobs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle

std::string_view to_string(TieBreak t) {
  return t == TieBreak::min_value ? "min_value" : "enumeration_order";
}

std::string_view to_string(OracleMode m) {
  return m == OracleMode::consistent ? "consistent" : "adversarial";
}

std::optional<TieBreak> tie_break_from_string(std::string_view name) {
  if (name == "min_value")
    return TieBreak::min_value;
  if (name == "enumeration_order")
    return TieBreak::enumeration_order;
  return std::nullopt;
}

std::optional<OracleMode> oracle_mode_from_string(std::string_view name) {
  if (name == "consistent")
    return OracleMode::consistent;
  if (name == "adversarial")
    return OracleMode::adversarial;
  return std::nullopt;
}

std::string oracle_answer(const SequenceRecord &seq, Task task,
                          const std::vector<ConcreteFunction> &space, const IndexConvention &conv,
                          TieBreak tie_break, OracleMode mode) {
  switch (task) {
  case Task::completion:
  case Task::explanation: {
    const auto pair = oracle_pair(seq, space, conv, tie_break, mode);
    if (!pair)
      return std::string(kNoAnswer);
    return task == Task::completion ? format_completion_answer(pair->completion, seq.base)
                                    : format_explanation_answer(pair->explanation, seq.base);
  }
  case Task::verbalize_alternatives: {
    const auto gens = ranked_generators(seq, space, conv, tie_break);
    if (gens.empty())
      return std::string(kNoAnswer);
    return verbalized(seq, AlternativesOf::continuations, gens);
  }
  case Task::consistency_judgment:
    break;
  }
  return std::string(kNoAnswer);
}

OracleBackend::OracleBackend(std::vector<ConcreteFunction> space, IndexConvention conv,
                             Options options)
    : space_(std::move(space)), conv_(conv), options_(std::move(options)) {
  seqcons::validate(conv_);
}

std::string OracleBackend::id() const {
  return "oracle:" + std::string(to_string(options_.tie_break)) + ":" +
         std::string(to_string(options_.mode));
}

CompletionResponse OracleBackend::complete(const CompletionRequest &req) {
  validate(req);
  const RenderedPrompt &p = req.prompt;
  const SequenceRecord seq{p.target.values, p.base};
  CompletionResponse out;
  out.backend_id = id();
  const int k = req.want_top_logprobs;

  if (!p.choices.empty()) {
    const auto labels = correct_labels(p, valid_explanations(seq, space_, conv_));
    std::string wrong;
    for (const auto &[label, text] : p.choices)
      if (wrong.empty() && std::find(labels.begin(), labels.end(), label) == labels.end())
        wrong = label;
    out.text = labels.empty() ? std::string(kNoAnswer) : labels.front();
    if (k > 0)
      out.first_position_top_logprobs =
          wrong.empty() || labels.empty() ? single_token(out.text) : ranked_tokens(labels, wrong, k);
    return out;
  }

  switch (p.task) {
  case Task::completion: {
    out.text = oracle_answer(seq, p.task, space_, conv_, options_.tie_break, options_.mode);
    if (k > 0) {
      const auto gens = ranked_generators(seq, space_, conv_, options_.tie_break);
      const auto conts = ranked_continuations(gens);
      if (conts.empty()) {
        out.first_position_top_logprobs = single_token(out.text);
      } else {
        // the chosen answer first, then the rest in tie-break order
        std::vector<std::string> correct{out.text};
        for (const auto &c : conts)
          if (format_integer(c, seq.base) != out.text)
            correct.push_back(format_integer(c, seq.base));
        const std::set<Integer> cset(conts.begin(), conts.end());
        out.first_position_top_logprobs =
            ranked_tokens(correct, format_integer(smallest_outside(cset), seq.base), k);
      }
    }
    return out;
  }
  case Task::explanation:
    out.text = oracle_answer(seq, p.task, space_, conv_, options_.tie_break, options_.mode);
    break;
  case Task::verbalize_alternatives: {
    const auto gens = ranked_generators(seq, space_, conv_, options_.tie_break);
    out.text = gens.empty() ? std::string(kNoAnswer) : verbalized(seq, p.alternatives, gens);
    break;
  }
  case Task::consistency_judgment: {
    const auto v = p.judged ? true_verdict(seq, *p.judged, conv_) : std::nullopt;
    out.text = v ? verdict_text(*v, options_) : std::string(kNoAnswer);
    break;
  }
  }
  if (k > 0)
    out.first_position_top_logprobs = single_token(out.text);
  return out;
}

// ---------------------------------------------------------------------------
// Random valid

std::string random_valid_answer(const SequenceRecord &seq, Task task,
                                const std::vector<ConcreteFunction> &space,
                                const IndexConvention &conv, std::uint64_t seed) {
  Rng rng(mix_seed(seed, fnv1a(std::string(to_string(task)) + ":" +
                               format_sequence(seq.values, 10))));
  switch (task) {
  case Task::completion: {
    const auto c = valid_continuations(seq, space, conv);
    if (c.empty())
      return std::string(kNoAnswer);
    return format_completion_answer(*std::next(c.begin(), uniform_below(rng, c.size())), seq.base);
  }
  case Task::explanation: {
    const auto g = valid_explanations(seq, space, conv);
    if (g.empty())
      return std::string(kNoAnswer);
    return format_explanation_answer(g[uniform_below(rng, g.size())], seq.base);
  }
  case Task::verbalize_alternatives: {
    const auto c = valid_continuations(seq, space, conv);
    if (c.empty())
      return std::string(kNoAnswer);
    std::vector<std::string> items;
    for (const auto &v : c)
      items.push_back(format_integer(v, seq.base));
    for (std::size_t i = 0; i < items.size(); ++i)
      std::swap(items[i], items[i + uniform_below(rng, items.size() - i)]);
    items.resize(1 + uniform_below(rng, std::min<std::size_t>(items.size(), kMaxAlternatives)));
    return format_alternatives_answer(items);
  }
  case Task::consistency_judgment:
    return uniform_below(rng, 2) ? "consistent" : "inconsistent";
  }
  return std::string(kNoAnswer);
}

RandomValidBackend::RandomValidBackend(std::vector<ConcreteFunction> space, IndexConvention conv,
                                       std::uint64_t seed)
    : space_(std::move(space)), conv_(conv), seed_(seed) {
  seqcons::validate(conv_);
}

std::string RandomValidBackend::id() const { return "random_valid:" + std::to_string(seed_); }

CompletionResponse RandomValidBackend::complete(const CompletionRequest &req) {
  validate(req);
  const RenderedPrompt &p = req.prompt;
  const SequenceRecord seq{p.target.values, p.base};
  CompletionResponse out;
  out.backend_id = id();
  if (!p.choices.empty()) {
    const auto labels = correct_labels(p, valid_explanations(seq, space_, conv_));
    Rng rng(mix_seed(seed_, fnv1a("choice:" + format_sequence(seq.values, 10))));
    out.text = labels.empty() ? std::string(kNoAnswer) : labels[uniform_below(rng, labels.size())];
  } else if (p.task == Task::verbalize_alternatives &&
             p.alternatives == AlternativesOf::explanations) {
    auto g = valid_explanations(seq, space_, conv_);
    Rng rng(mix_seed(seed_, fnv1a("verbalize-explanations:" + format_sequence(seq.values, 10))));
    std::vector<std::string> items;
    for (const auto &f : g)
      items.push_back(seq.base == 2 ? render(with_binary_output(f.function)) : f.text);
    if (items.empty()) {
      out.text = std::string(kNoAnswer);
    } else {
      for (std::size_t i = 0; i < items.size(); ++i)
        std::swap(items[i], items[i + uniform_below(rng, items.size() - i)]);
      items.resize(1 + uniform_below(rng, std::min<std::size_t>(items.size(), kMaxAlternatives)));
      out.text = format_alternatives_answer(items);
    }
  } else {
    out.text = random_valid_answer(seq, p.task, space_, conv_, seed_);
  }
  if (req.want_top_logprobs > 0)
    out.first_position_top_logprobs = single_token(out.text);
  return out;
}

CompletionResponse InvalidBackend::complete(const CompletionRequest &req) {
  validate(req);
  CompletionResponse out;
  out.backend_id = id();
  out.text = "I cannot tell.";
  if (req.want_top_logprobs > 0)
    out.first_position_top_logprobs = single_token("I");
  return out;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

class SemaphoreGuard {
public:
  explicit SemaphoreGuard(std::counting_semaphore<1024> &s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard &) = delete;
  SemaphoreGuard &operator=(const SemaphoreGuard &) = delete;

private:
  std::counting_semaphore<1024> &s_;
};

TokenDistribution distribution_from(std::vector<TokenLogprob> entries, int k) {
  std::vector<TokenLogprob> kept;
  for (auto &e : entries) {
    if (static_cast<int>(kept.size()) >= k)
      break;
    if (!std::isfinite(e.logprob))
      continue;
    e.logprob = std::min(e.logprob, 0.0);
    if (std::none_of(kept.begin(), kept.end(),
                     [&](const TokenLogprob &x) { return x.token == e.token; }))
      kept.push_back(std::move(e));
  }
  return TokenDistribution::from_entries(std::move(kept));
}

} // namespace

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
  const auto scheme_end = config_.base_url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("base_url needs a scheme: " + config_.base_url);
  const auto path_start = config_.base_url.find('/', scheme_end + 3);
  scheme_host_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/')
    path_prefix_.pop_back();
  if (config_.model.empty())
    throw std::invalid_argument("http backend needs a model name");
  if (config_.max_retries < 0)
    throw std::invalid_argument("max_retries must be non-negative");
}

std::string HttpBackend::id() const {
  return std::string("http:") + (config_.style == ApiStyle::chat ? "chat:" : "completions:") +
         config_.model;
}

Json HttpBackend::request_body(const CompletionRequest &req) const {
  Json body = {{"model", config_.model},
               {"temperature", req.temperature},
               {"max_tokens", req.max_tokens}};
  if (config_.style == ApiStyle::chat) {
    Json messages = Json::array();
    for (const auto &m : req.prompt.messages())
      messages.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = std::move(messages);
    if (req.want_top_logprobs > 0) {
      body["logprobs"] = true;
      body["top_logprobs"] = req.want_top_logprobs;
    }
  } else {
    body["prompt"] = req.prompt.flatten();
    if (req.want_top_logprobs > 0)
      body["logprobs"] = req.want_top_logprobs;
  }
  return body;
}

CompletionResponse HttpBackend::parse_response(const Json &body, int want_top_logprobs) const {
  CompletionResponse out;
  out.backend_id = id();
  try {
    const Json &choice = body.at("choices").at(0);
    const Json *lp_root = choice.contains("logprobs") && !choice["logprobs"].is_null()
                              ? &choice["logprobs"]
                              : nullptr;
    std::vector<TokenLogprob> entries;
    bool have_logprobs = false;
    if (config_.style == ApiStyle::chat) {
      const Json &content = choice.at("message").at("content");
      out.text = content.is_null() ? "" : content.get<std::string>();
      if (lp_root && lp_root->contains("content") && (*lp_root)["content"].is_array() &&
          !(*lp_root)["content"].empty()) {
        const Json &first = (*lp_root)["content"][0];
        if (first.contains("top_logprobs")) {
          have_logprobs = true;
          for (const auto &t : first["top_logprobs"])
            entries.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
        }
      }
    } else {
      out.text = choice.at("text").get<std::string>();
      if (lp_root && lp_root->contains("top_logprobs") && (*lp_root)["top_logprobs"].is_array() &&
          !(*lp_root)["top_logprobs"].empty()) {
        have_logprobs = true;
        for (const auto &[token, lp] : (*lp_root)["top_logprobs"][0].items())
          entries.push_back({token, lp.get<double>()});
      }
    }
    if (want_top_logprobs > 0) {
      if (!have_logprobs)
        throw BackendError(BackendErrorKind::unsupported_logprobs,
                           "endpoint returned no top logprobs for model " + config_.model);
      std::stable_sort(entries.begin(), entries.end(),
                       [](const TokenLogprob &a, const TokenLogprob &b) {
                         return a.logprob > b.logprob;
                       });
      out.first_position_top_logprobs = distribution_from(std::move(entries), want_top_logprobs);
    }
  } catch (const Json::exception &e) {
    throw BackendError(BackendErrorKind::bad_response, std::string("malformed response: ") + e.what());
  }
  return out;
}

CompletionResponse HttpBackend::complete(const CompletionRequest &req) {
  validate(req);
  const std::string path =
      path_prefix_ + (config_.style == ApiStyle::chat ? "/chat/completions" : "/completions");
  const std::string payload = request_body(req).dump();
  httplib::Headers headers;
  if (!config_.api_key_env.empty())
    if (const char *key = std::getenv(config_.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);

  SemaphoreGuard guard(in_flight_);
  std::string last_error;
  auto backoff = config_.initial_backoff;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(scheme_host_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw BackendError(BackendErrorKind::auth,
                         "authentication failed (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw BackendError(BackendErrorKind::bad_response,
                         "HTTP " + std::to_string(res->status) + ": " + res->body);
    Json body;
    try {
      body = Json::parse(res->body);
    } catch (const Json::exception &e) {
      throw BackendError(BackendErrorKind::bad_response, std::string("invalid JSON: ") + e.what());
    }
    return parse_response(body, req.want_top_logprobs);
  }
  throw BackendError(BackendErrorKind::transport,
                     "giving up after " + std::to_string(config_.max_retries + 1) +
                         " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Decorators

Json response_to_json(const CompletionResponse &r) {
  Json j = {{"text", r.text}, {"backend_id", r.backend_id}};
  if (r.first_position_top_logprobs) {
    Json lp = Json::array();
    for (const auto &e : r.first_position_top_logprobs->entries)
      lp.push_back(Json::array({e.token, e.logprob}));
    j["logprobs"] = std::move(lp);
  } else {
    j["logprobs"] = nullptr;
  }
  return j;
}

CompletionResponse response_from_json(const Json &j) {
  CompletionResponse r;
  r.text = j.at("text").get<std::string>();
  r.backend_id = j.at("backend_id").get<std::string>();
  if (j.contains("logprobs") && !j["logprobs"].is_null()) {
    std::vector<TokenLogprob> entries;
    for (const auto &pair : j["logprobs"])
      entries.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
    r.first_position_top_logprobs = TokenDistribution::from_entries(std::move(entries));
  }
  return r;
}

std::string request_key(const std::string &backend_id, const CompletionRequest &req) {
  const Json key = {{"backend", backend_id},
                    {"prompt", req.prompt.flatten()},
                    {"temperature", req.temperature},
                    {"max_tokens", req.max_tokens},
                    {"top_logprobs", req.want_top_logprobs}};
  return sha256_hex(key.dump());
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  if (!inner_)
    throw std::invalid_argument("caching backend needs an inner backend");
  std::filesystem::create_directories(dir_);
}

CompletionResponse CachingBackend::complete(const CompletionRequest &req) {
  validate(req);
  const std::string key = request_key(inner_->id(), req);
  const auto path = dir_ / (key + ".json");
  if (std::ifstream in(path); in) {
    try {
      auto r = response_from_json(Json::parse(in));
      r.cached = true;
      return r;
    } catch (const std::exception &) {
      // unreadable entry: fall through and overwrite it
    }
  }
  auto r = inner_->complete(req);
  static std::atomic<std::uint64_t> counter{0};
  const auto tmp =
      dir_ / (key + ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
              "." + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary);
    out << response_to_json(r).dump();
    if (!out)
      throw std::runtime_error("cannot write cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  r.cached = false;
  return r;
}

AuditLogBackend::AuditLogBackend(std::shared_ptr<Backend> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (!inner_)
    throw std::invalid_argument("audit backend needs an inner backend");
  if (path_.has_parent_path())
    std::filesystem::create_directories(path_.parent_path());
}

CompletionResponse AuditLogBackend::complete(const CompletionRequest &req) {
  Json line = {{"backend", inner_->id()},
               {"key", request_key(inner_->id(), req)},
               {"task", to_string(req.prompt.task)},
               {"test_query", req.prompt.test_query}};
  auto write = [&] {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    out << line.dump() << '\n';
  };
  try {
    auto r = inner_->complete(req);
    line["response"] = response_to_json(r);
    line["cached"] = r.cached;
    write();
    return r;
  } catch (const BackendError &e) {
    line["error"] = {{"kind", to_string(e.kind())}, {"message", e.what()}};
    write();
    throw;
  }
}

} // namespace seqcons
