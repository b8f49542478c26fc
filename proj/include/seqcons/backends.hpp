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

// Answer-producing engines behind one interface. Synthetic backends (scripted
// fixtures, the oracle solver, uniform random valid answers, always-invalid)
// never touch the network; HttpBackend talks to a chat/completions server.
// Decorators add on-disk caching and an audit log. Every backend must accept
// concurrent complete() calls.

#include "seqcons/distribution.hpp"
#include "seqcons/jsonio.hpp"
#include "seqcons/prompting.hpp"

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>

namespace seqcons {

struct CompletionRequest {
  RenderedPrompt prompt;
  double temperature = 0.0;
  int max_tokens = 64;
  int want_top_logprobs = 0; // 0..5
};

struct CompletionResponse {
  std::string text;
  std::optional<TokenDistribution> first_position_top_logprobs;
  std::string backend_id;
  bool cached = false;
};

enum class BackendErrorKind { transport, auth, unsupported_logprobs, fixture_missing, bad_response };

std::string_view to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
public:
  BackendError(BackendErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  BackendErrorKind kind() const { return kind_; }

private:
  BackendErrorKind kind_;
};

/// Throws std::invalid_argument when want_top_logprobs is outside [0, 5].
void validate(const CompletionRequest &req);

class Backend {
public:
  virtual ~Backend() = default;
  virtual CompletionResponse complete(const CompletionRequest &req) = 0;
  virtual std::string id() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic backends
// ---------------------------------------------------------------------------

/// Plays back fixture answers keyed by the exact test query. Fixture JSON:
///   {"responses": {"<query>": "19", "<query>": {"text": "15",
///                  "logprobs": [["15", -0.2], ["19", -1.1]]}, "*": "fallback"}}
class ScriptedBackend : public Backend {
public:
  explicit ScriptedBackend(Json fixture, std::string name = "scripted");
  static ScriptedBackend from_file(const std::filesystem::path &path);

  CompletionResponse complete(const CompletionRequest &req) override;
  std::string id() const override { return name_; }

private:
  Json responses_;
  std::string name_;
};

enum class TieBreak { min_value, enumeration_order };
/// consistent: completion and explanation come from one generator.
/// adversarial: they come from generators that disagree, when any do; on an
/// ambiguous sequence where none do, the explanation is a non-generator.
enum class OracleMode { consistent, adversarial };

std::string_view to_string(TieBreak t);
std::string_view to_string(OracleMode m);
std::optional<TieBreak> tie_break_from_string(std::string_view name);
std::optional<OracleMode> oracle_mode_from_string(std::string_view name);

/// Text returned when the space has no valid answer.
inline constexpr std::string_view kNoAnswer = "no valid answer";

/// Perfect solver over a known space. Judgment answers are the true verdict;
/// verbalization lists every valid answer (up to five). With logprobs it
/// reports correct tokens above one incorrect token.
class OracleBackend : public Backend {
public:
  struct Options {
    TieBreak tie_break = TieBreak::min_value;
    OracleMode mode = OracleMode::consistent;
    std::string verdict_consistent = "consistent";
    std::string verdict_inconsistent = "inconsistent";
  };

  OracleBackend(std::vector<ConcreteFunction> space, IndexConvention conv, Options options);
  CompletionResponse complete(const CompletionRequest &req) override;
  std::string id() const override;

private:
  std::vector<ConcreteFunction> space_;
  IndexConvention conv_;
  Options options_;
};

/// Deterministic oracle answer for one task on `seq`.
std::string oracle_answer(const SequenceRecord &seq, Task task,
                          const std::vector<ConcreteFunction> &space, const IndexConvention &conv,
                          TieBreak tie_break, OracleMode mode = OracleMode::consistent);

/// Uniform over the valid answer set, seeded by (seed, task, sequence).
std::string random_valid_answer(const SequenceRecord &seq, Task task,
                                const std::vector<ConcreteFunction> &space,
                                const IndexConvention &conv, std::uint64_t seed);

class RandomValidBackend : public Backend {
public:
  RandomValidBackend(std::vector<ConcreteFunction> space, IndexConvention conv, std::uint64_t seed);
  CompletionResponse complete(const CompletionRequest &req) override;
  std::string id() const override;

private:
  std::vector<ConcreteFunction> space_;
  IndexConvention conv_;
  std::uint64_t seed_;
};

/// Never gives a parseable answer.
class InvalidBackend : public Backend {
public:
  CompletionResponse complete(const CompletionRequest &req) override;
  std::string id() const override { return "invalid"; }
};

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

enum class ApiStyle { chat, completions };

struct HttpBackendConfig {
  /// scheme://host[:port][/prefix], e.g. "https://api.openai.com/v1".
  std::string base_url = "http://127.0.0.1:8080/v1";
  ApiStyle style = ApiStyle::chat;
  std::string model;
  /// Name of the environment variable holding the API key; empty for none.
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 4;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
  int max_in_flight = 4;
};

class HttpBackend : public Backend {
public:
  explicit HttpBackend(HttpBackendConfig config);
  CompletionResponse complete(const CompletionRequest &req) override;
  std::string id() const override;

  /// Request body for `req`; exposed for tests.
  Json request_body(const CompletionRequest &req) const;
  /// Maps a response body onto text plus first-position logprobs.
  CompletionResponse parse_response(const Json &body, int want_top_logprobs) const;

private:
  HttpBackendConfig config_;
  std::string scheme_host_;
  std::string path_prefix_;
  std::counting_semaphore<1024> in_flight_;
};

// ---------------------------------------------------------------------------
// Decorators
// ---------------------------------------------------------------------------

/// Digest of (backend id, flattened prompt, temperature, max_tokens, top_logprobs).
std::string request_key(const std::string &backend_id, const CompletionRequest &req);

/// Serves repeated requests from `dir`; entries are written to a temporary
/// file and renamed into place.
class CachingBackend : public Backend {
public:
  CachingBackend(std::shared_ptr<Backend> inner, std::filesystem::path dir);
  CompletionResponse complete(const CompletionRequest &req) override;
  std::string id() const override { return inner_->id(); }

private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path dir_;
};

/// Appends one JSON line per request (prompt, response or error) to `path`.
class AuditLogBackend : public Backend {
public:
  AuditLogBackend(std::shared_ptr<Backend> inner, std::filesystem::path path);
  CompletionResponse complete(const CompletionRequest &req) override;
  std::string id() const override { return inner_->id(); }

private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

Json response_to_json(const CompletionResponse &r);
CompletionResponse response_from_json(const Json &j);

} // namespace seqcons
