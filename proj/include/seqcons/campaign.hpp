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

// Campaigns: a key=value config drives mining, the backend runs and the
// analysis tables.
//
// Config file format: one `key = value` per line, `#` starts a comment, lists
// are comma separated. Unknown keys are errors. See README for every key.

#include "seqcons/backends.hpp"
#include "seqcons/evaluation.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqcons {

inline constexpr int kResultsSchemaVersion = 1;

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// What a campaign asks the backend for.
enum class Job {
  completion,
  explanation,
  judgment,               // the model's own (explanation, completion) pair
  verbalize_continuations,
  verbalize_explanations,
  completion_tokens,      // completion prompt with top-5 logprobs
  explanation_choice,     // multiple-choice explanation with top-5 logprobs
};

std::string_view to_string(Job j);
std::optional<Job> job_from_string(std::string_view name);

enum class SequenceSelection { all, ambiguous, unambiguous };

struct CampaignConfig {
  // dataset
  int constant_min = 0;
  int constant_max = 4;
  ValidityRule validity = ValidityRule::int64_range;
  int probe_first = 0;
  int probe_last = 10;
  std::vector<int> lengths{4};
  IndexConvention conv;
  SequenceSelection sequences = SequenceSelection::all;
  /// Per class (ambiguous / unambiguous); 0 keeps every sequence.
  int max_sequences = 0;

  // prompts
  std::vector<int> bases{10};
  std::vector<PromptVariant> variants{PromptVariant::plain};
  /// Empty: the task default.
  std::vector<int> shots;
  ShotSampling shot_sampling = ShotSampling::random;
  std::string role_text;
  std::string verdict_consistent = "consistent";
  std::string verdict_inconsistent = "inconsistent";
  std::vector<Job> jobs{Job::completion,
                        Job::explanation,
                        Job::judgment,
                        Job::verbalize_continuations,
                        Job::verbalize_explanations,
                        Job::completion_tokens,
                        Job::explanation_choice};
  int max_tokens = 64;
  double temperature = 0.0;

  // backend
  std::string backend = "oracle"; // oracle | random_valid | invalid | scripted | http
  TieBreak tie_break = TieBreak::min_value;
  OracleMode oracle_mode = OracleMode::consistent;
  std::string fixture;            // scripted
  std::string base_url = "http://127.0.0.1:8080/v1";
  ApiStyle api_style = ApiStyle::chat;
  std::string model;
  /// Name of the environment variable holding the key, never the key.
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model_name;         // substituted for {model_name}; defaults to `model`
  int max_retries = 4;
  int max_in_flight = 4;
  std::string cache_dir;          // empty: no cache
  std::string audit_log;          // empty: no audit log

  // campaign
  int n_runs = 3;
  std::uint64_t rng_seed = 0;
  int parallelism = 4;
  std::string output_dir = "seqcons-out";
  std::string timestamps = "auto"; // auto | on | off; auto is on for http only
  int random_baseline_samples = 10000;
};

/// Throws ConfigError on unknown keys or bad values.
CampaignConfig parse_config(std::string_view text);
CampaignConfig load_config(const std::filesystem::path &path);
void apply_setting(CampaignConfig &config, std::string_view key, std::string_view value);
/// `key=value` form of apply_setting.
void apply_override(CampaignConfig &config, std::string_view assignment);

/// Every key, sorted, as `key = value` lines; parse_config reads it back.
std::string canonical_config(const CampaignConfig &config);
/// SHA-256 of the settings that can change a record: canonical_config without
/// output_dir, parallelism, timestamps, audit_log, cache_dir, api_key_env and
/// n_runs. A campaign can be extended with more runs under the same digest.
std::string config_digest(const CampaignConfig &config);

SpaceOptions space_options(const CampaignConfig &config);
DatasetParameters dataset_parameters(const CampaignConfig &config, int length, int base);

/// Backend named by the config, wrapped in cache and audit decorators when set.
std::shared_ptr<Backend> make_backend(const CampaignConfig &config,
                                      const std::vector<ConcreteFunction> &space);

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

struct MineSummary {
  std::size_t functions = 0;
  std::vector<MiningStats> per_length;
};

/// Writes dataset_len<L>.jsonl and mining.tsv into output_dir.
MineSummary cmd_mine(const CampaignConfig &config, std::ostream &log);

class CampaignError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RunSummary {
  std::size_t planned = 0;
  std::size_t skipped = 0; // already in the results file
  std::size_t executed = 0;
};

/// Executes every job and appends records to `results` as they finish. An
/// existing file with the same digest is resumed; records already present
/// are skipped. On success the file is rewritten in canonical order. A
/// backend failure stops the campaign, keeps the partial file and throws
/// CampaignError. A different digest also throws CampaignError.
RunSummary cmd_run(const CampaignConfig &config, const std::filesystem::path &results,
                   std::ostream &log);

struct ResultsFile {
  CampaignConfig config;
  std::string digest;
  std::vector<EvalRecord> records;
};

/// Throws CampaignError on a schema-version mismatch or a malformed file.
ResultsFile read_results(const std::filesystem::path &path);

/// Writes metrics.tsv, random_baseline.tsv, alternatives.tsv, kl.tsv and
/// logprobs.tsv into `out_dir`. A pure function of the results file.
void cmd_analyze(const std::filesystem::path &results, const std::filesystem::path &out_dir,
                 std::ostream &log);

/// Human-readable summary of the analysis tables.
void cmd_report(const std::filesystem::path &analysis_dir, std::ostream &out);

} // namespace seqcons
