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

#include "seqcons/campaign.hpp"

#include "seqcons/digest.hpp"
#include "seqcons/random.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace seqcons {

namespace {

constexpr std::string_view kJobNames[] = {
    "completion",        "explanation",       "judgment",          "verbalize_continuations",
    "verbalize_explanations", "completion_tokens", "explanation_choice"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto item = trim(value.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (!item.empty())
      out.emplace_back(item);
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

template <class T> T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("bad number for " + std::string(key) + ": " + std::string(value));
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  const std::string v(trim(value));
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d))
      return d;
  } catch (const std::exception &) {
  }
  throw ConfigError("bad number for " + std::string(key) + ": " + v);
}

template <class T, class F>
T parse_enum(std::string_view key, std::string_view value, F from_string) {
  if (auto v = from_string(trim(value)))
    return *v;
  throw ConfigError("bad value for " + std::string(key) + ": " + std::string(value));
}

std::string format_real(double d) {
  if (d == std::floor(d) && std::abs(d) < 1e15)
    return std::to_string(static_cast<long long>(d));
  std::ostringstream ss;
  ss << std::setprecision(17) << d;
  return ss.str();
}

template <class T> std::string join(const std::vector<T> &items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i)
      out += ",";
    if constexpr (std::is_arithmetic_v<T>)
      out += std::to_string(items[i]);
    else
      out += std::string(to_string(items[i]));
  }
  return out;
}

std::string_view to_string(SequenceSelection s) {
  switch (s) {
  case SequenceSelection::all:
    return "all";
  case SequenceSelection::ambiguous:
    return "ambiguous";
  case SequenceSelection::unambiguous:
    return "unambiguous";
  }
  return "";
}

std::optional<SequenceSelection> selection_from_string(std::string_view s) {
  if (s == "all")
    return SequenceSelection::all;
  if (s == "ambiguous")
    return SequenceSelection::ambiguous;
  if (s == "unambiguous")
    return SequenceSelection::unambiguous;
  return std::nullopt;
}

std::string_view to_string(ApiStyle s) { return s == ApiStyle::chat ? "chat" : "completions"; }

std::optional<ApiStyle> api_style_from_string(std::string_view s) {
  if (s == "chat")
    return ApiStyle::chat;
  if (s == "completions")
    return ApiStyle::completions;
  return std::nullopt;
}

struct Setting {
  std::string_view key;
  std::function<std::string(const CampaignConfig &)> get;
  std::function<void(CampaignConfig &, std::string_view)> set;
  bool affects_results = true;
};

#define SEQCONS_INT(name)                                                                          \
  Setting{#name, [](const CampaignConfig &c) { return std::to_string(c.name); },                   \
          [](CampaignConfig &c, std::string_view v) { c.name = parse_number<int>(#name, v); }}
#define SEQCONS_STRING(name, affects)                                                              \
  Setting{#name, [](const CampaignConfig &c) { return c.name; },                                   \
          [](CampaignConfig &c, std::string_view v) { c.name = std::string(trim(v)); }, affects}

const std::vector<Setting> &settings() {
  static const std::vector<Setting> table = {
      SEQCONS_INT(constant_min),
      SEQCONS_INT(constant_max),
      Setting{"validity", [](const CampaignConfig &c) { return std::string(to_string(c.validity)); },
              [](CampaignConfig &c, std::string_view v) {
                c.validity = parse_enum<ValidityRule>("validity", v, validity_rule_from_string);
              }},
      SEQCONS_INT(probe_first),
      SEQCONS_INT(probe_last),
      Setting{"lengths", [](const CampaignConfig &c) { return join(c.lengths); },
              [](CampaignConfig &c, std::string_view v) {
                c.lengths.clear();
                for (const auto &item : split_list(v))
                  c.lengths.push_back(parse_number<int>("lengths", item));
              }},
      Setting{"start_index", [](const CampaignConfig &c) { return std::to_string(c.conv.start_index); },
              [](CampaignConfig &c, std::string_view v) {
                c.conv.start_index = parse_number<int>("start_index", v);
              }},
      Setting{"max_offset", [](const CampaignConfig &c) { return std::to_string(c.conv.max_offset); },
              [](CampaignConfig &c, std::string_view v) {
                c.conv.max_offset = parse_number<int>("max_offset", v);
              }},
      Setting{"sequences", [](const CampaignConfig &c) { return std::string(to_string(c.sequences)); },
              [](CampaignConfig &c, std::string_view v) {
                c.sequences = parse_enum<SequenceSelection>("sequences", v, selection_from_string);
              }},
      SEQCONS_INT(max_sequences),
      Setting{"bases", [](const CampaignConfig &c) { return join(c.bases); },
              [](CampaignConfig &c, std::string_view v) {
                c.bases.clear();
                for (const auto &item : split_list(v))
                  c.bases.push_back(parse_number<int>("bases", item));
              }},
      Setting{"variants", [](const CampaignConfig &c) { return join(c.variants); },
              [](CampaignConfig &c, std::string_view v) {
                c.variants.clear();
                for (const auto &item : split_list(v))
                  c.variants.push_back(
                      parse_enum<PromptVariant>("variants", item, prompt_variant_from_string));
              }},
      Setting{"shots",
              [](const CampaignConfig &c) { return c.shots.empty() ? std::string("default") : join(c.shots); },
              [](CampaignConfig &c, std::string_view v) {
                c.shots.clear();
                if (trim(v) == "default")
                  return;
                for (const auto &item : split_list(v))
                  c.shots.push_back(parse_number<int>("shots", item));
              }},
      Setting{"shot_sampling",
              [](const CampaignConfig &c) { return std::string(to_string(c.shot_sampling)); },
              [](CampaignConfig &c, std::string_view v) {
                c.shot_sampling = parse_enum<ShotSampling>("shot_sampling", v, shot_sampling_from_string);
              }},
      SEQCONS_STRING(role_text, true),
      SEQCONS_STRING(verdict_consistent, true),
      SEQCONS_STRING(verdict_inconsistent, true),
      Setting{"jobs", [](const CampaignConfig &c) { return join(c.jobs); },
              [](CampaignConfig &c, std::string_view v) {
                c.jobs.clear();
                for (const auto &item : split_list(v))
                  c.jobs.push_back(parse_enum<Job>("jobs", item, job_from_string));
              }},
      SEQCONS_INT(max_tokens),
      Setting{"temperature", [](const CampaignConfig &c) { return format_real(c.temperature); },
              [](CampaignConfig &c, std::string_view v) { c.temperature = parse_real("temperature", v); }},
      SEQCONS_STRING(backend, true),
      Setting{"tie_break", [](const CampaignConfig &c) { return std::string(to_string(c.tie_break)); },
              [](CampaignConfig &c, std::string_view v) {
                c.tie_break = parse_enum<TieBreak>("tie_break", v, tie_break_from_string);
              }},
      Setting{"oracle_mode", [](const CampaignConfig &c) { return std::string(to_string(c.oracle_mode)); },
              [](CampaignConfig &c, std::string_view v) {
                c.oracle_mode = parse_enum<OracleMode>("oracle_mode", v, oracle_mode_from_string);
              }},
      SEQCONS_STRING(fixture, true),
      SEQCONS_STRING(base_url, true),
      Setting{"api_style", [](const CampaignConfig &c) { return std::string(to_string(c.api_style)); },
              [](CampaignConfig &c, std::string_view v) {
                c.api_style = parse_enum<ApiStyle>("api_style", v, api_style_from_string);
              }},
      SEQCONS_STRING(model, true),
      SEQCONS_STRING(api_key_env, false),
      SEQCONS_STRING(model_name, true),
      SEQCONS_INT(max_retries),
      SEQCONS_INT(max_in_flight),
      SEQCONS_STRING(cache_dir, false),
      SEQCONS_STRING(audit_log, false),
      SEQCONS_INT(n_runs),
      Setting{"rng_seed", [](const CampaignConfig &c) { return std::to_string(c.rng_seed); },
              [](CampaignConfig &c, std::string_view v) {
                c.rng_seed = parse_number<std::uint64_t>("rng_seed", v);
              }},
      Setting{"parallelism", [](const CampaignConfig &c) { return std::to_string(c.parallelism); },
              [](CampaignConfig &c, std::string_view v) {
                c.parallelism = parse_number<int>("parallelism", v);
              },
              false},
      SEQCONS_STRING(output_dir, false),
      SEQCONS_STRING(timestamps, false),
      SEQCONS_INT(random_baseline_samples),
  };
  return table;
}

#undef SEQCONS_INT
#undef SEQCONS_STRING

void check(const CampaignConfig &c) {
  auto fail = [](const std::string &m) { throw ConfigError(m); };
  if (c.lengths.empty())
    fail("lengths must list at least one length");
  for (int l : c.lengths)
    if (l < 1)
      fail("lengths must be positive");
  if (c.bases.empty() || c.variants.empty() || c.jobs.empty())
    fail("bases, variants and jobs must be nonempty");
  for (int b : c.bases)
    if (b != 10 && b != 2)
      fail("bases must be 10 or 2");
  for (int s : c.shots)
    if (s < 0)
      fail("shots must be non-negative");
  if (c.n_runs < 1 || c.parallelism < 1 || c.max_sequences < 0)
    fail("n_runs and parallelism must be positive, max_sequences non-negative");
  if (c.timestamps != "auto" && c.timestamps != "on" && c.timestamps != "off")
    fail("timestamps must be auto, on or off");
  if (c.random_baseline_samples < 1)
    fail("random_baseline_samples must be positive");
  static const std::set<std::string> backends{"oracle", "random_valid", "invalid", "scripted", "http"};
  if (!backends.count(c.backend))
    fail("unknown backend: " + c.backend);
}

} // namespace

std::string_view to_string(Job j) { return kJobNames[static_cast<std::size_t>(j)]; }

std::optional<Job> job_from_string(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kJobNames); ++i)
    if (kJobNames[i] == name)
      return static_cast<Job>(i);
  return std::nullopt;
}

void apply_setting(CampaignConfig &config, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto &s : settings())
    if (s.key == key) {
      s.set(config, value);
      return;
    }
  throw ConfigError("unknown config key: " + std::string(key));
}

void apply_override(CampaignConfig &config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override must look like key=value: " + std::string(assignment));
  apply_setting(config, assignment.substr(0, eq), assignment.substr(eq + 1));
  check(config);
}

CampaignConfig parse_config(std::string_view text) {
  CampaignConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    apply_setting(config, t.substr(0, eq), t.substr(eq + 1));
  }
  check(config);
  return config;
}

CampaignConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const CampaignConfig &config) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (const auto &s : settings())
    lines.emplace_back(s.key, s.get(config));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto &[k, v] : lines)
    out += k + " = " + v + "\n";
  return out;
}

namespace {

// Settings that can change a record, sorted.
std::string result_settings(const CampaignConfig &config) {
  std::vector<std::pair<std::string, std::string>> lines;
  for (const auto &s : settings())
    if (s.affects_results)
      lines.emplace_back(s.key, s.get(config));
  std::sort(lines.begin(), lines.end());
  std::string text;
  for (const auto &[k, v] : lines)
    text += k + " = " + v + "\n";
  return text;
}

} // namespace

std::string config_digest(const CampaignConfig &config) {
  // n_runs only extends the campaign, so it stays out of the digest
  CampaignConfig c = config;
  c.n_runs = 1;
  return sha256_hex(result_settings(c));
}

SpaceOptions space_options(const CampaignConfig &config) {
  SpaceOptions o;
  o.constants = ConstantRange{config.constant_min, config.constant_max};
  o.probe_first = config.probe_first;
  o.probe_last = config.probe_last;
  o.rule = config.validity;
  return o;
}

DatasetParameters dataset_parameters(const CampaignConfig &config, int length, int base) {
  DatasetParameters p;
  p.space = space_options(config);
  p.length = length;
  p.conv = config.conv;
  p.base = base;
  return p;
}

std::shared_ptr<Backend> make_backend(const CampaignConfig &config,
                                      const std::vector<ConcreteFunction> &space) {
  std::shared_ptr<Backend> b;
  if (config.backend == "oracle") {
    OracleBackend::Options o;
    o.tie_break = config.tie_break;
    o.mode = config.oracle_mode;
    o.verdict_consistent = config.verdict_consistent;
    o.verdict_inconsistent = config.verdict_inconsistent;
    b = std::make_shared<OracleBackend>(space, config.conv, o);
  } else if (config.backend == "random_valid") {
    b = std::make_shared<RandomValidBackend>(space, config.conv, config.rng_seed);
  } else if (config.backend == "invalid") {
    b = std::make_shared<InvalidBackend>();
  } else if (config.backend == "scripted") {
    if (config.fixture.empty())
      throw ConfigError("scripted backend needs fixture = <path>");
    b = std::make_shared<ScriptedBackend>(ScriptedBackend::from_file(config.fixture));
  } else if (config.backend == "http") {
    HttpBackendConfig h;
    h.base_url = config.base_url;
    h.style = config.api_style;
    h.model = config.model;
    h.api_key_env = config.api_key_env;
    h.max_retries = config.max_retries;
    h.max_in_flight = config.max_in_flight;
    b = std::make_shared<HttpBackend>(h);
  } else {
    throw ConfigError("unknown backend: " + config.backend);
  }
  if (!config.cache_dir.empty())
    b = std::make_shared<CachingBackend>(b, config.cache_dir);
  if (!config.audit_log.empty())
    b = std::make_shared<AuditLogBackend>(b, config.audit_log);
  return b;
}

// ---------------------------------------------------------------------------
// mine

MineSummary cmd_mine(const CampaignConfig &config, std::ostream &log) {
  check(config);
  const auto space = enumerate_space(space_options(config));
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  MineSummary summary;
  summary.functions = space.functions.size();
  std::ofstream tsv(dir / "mining.tsv");
  tsv << "# config_digest=" << config_digest(config) << "\n";
  tsv << "length\tfunctions\tambiguous\tunambiguous\tpairwise_hits\tambiguous_function_pairs\t"
         "functions_in_ambiguous_pairs\tambiguous_functions\tunambiguous_functions\n";
  for (int length : config.lengths) {
    auto params = dataset_parameters(config, length, config.bases.front());
    Dataset d = mine(space.functions, length, config.conv, params.base);
    d.parameters = params;
    const auto path = dir / ("dataset_len" + std::to_string(length) + ".jsonl");
    {
      std::ofstream out(path);
      if (!out)
        throw std::runtime_error("cannot write " + path.string());
      write_dataset(out, d);
      if (!out)
        throw std::runtime_error("cannot write " + path.string());
    }
    const auto s = mining_stats(space.functions, d);
    summary.per_length.push_back(s);
    log << s.functions << " functions, " << s.ambiguous_sequences << " ambiguous, "
        << s.unambiguous_sequences << " unambiguous (length " << length << ")\n";
    log << "  pairwise hits " << s.pairwise_hits << ", ambiguous function pairs "
        << s.ambiguous_function_pairs << ", functions in ambiguous pairs "
        << s.functions_in_ambiguous_pairs << ", functions by own prefix " << s.ambiguous_functions
        << " ambiguous / " << s.unambiguous_functions << " unambiguous\n";
    tsv << length << '\t' << s.functions << '\t' << s.ambiguous_sequences << '\t'
        << s.unambiguous_sequences << '\t' << s.pairwise_hits << '\t' << s.ambiguous_function_pairs
        << '\t' << s.functions_in_ambiguous_pairs << '\t' << s.ambiguous_functions << '\t'
        << s.unambiguous_functions << '\n';
  }
  if (!space.excluded.empty())
    log << space.excluded.size() << " candidates excluded by the " << to_string(config.validity)
        << " rule\n";
  return summary;
}

// ---------------------------------------------------------------------------
// run

namespace {

struct Item {
  int run = 0;
  int length = 0;
  int base = 10;
  PromptVariant variant{};
  std::optional<int> shots;
  Job job{};
  const AmbiguityRecord *record = nullptr;
  bool ambiguous = false;
  std::optional<JudgedPair> judged;
};

std::string condition_of(const CampaignConfig &c, int length, int base, PromptVariant v,
                         std::optional<int> shots) {
  return "len=" + std::to_string(length) + " base=" + std::to_string(base) +
         " variant=" + std::string(to_string(v)) +
         " shots=" + (shots ? std::to_string(*shots) : std::string("default")) +
         " sampling=" + std::string(to_string(c.shot_sampling));
}

bool wants_timestamps(const CampaignConfig &c) {
  return c.timestamps == "on" || (c.timestamps == "auto" && c.backend == "http");
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

EvalRecord skeleton(const CampaignConfig &c, const Item &it) {
  EvalRecord r;
  r.sequence = SequenceRecord{it.record->sequence.values, it.base};
  r.run_id = it.run;
  r.condition = condition_of(c, it.length, it.base, it.variant, it.shots);
  r.ambiguous = it.ambiguous;
  switch (it.job) {
  case Job::completion:
    r.task = Task::completion;
    break;
  case Job::explanation:
    r.task = Task::explanation;
    break;
  case Job::judgment:
    r.task = Task::consistency_judgment;
    r.judged = it.judged;
    break;
  case Job::verbalize_continuations:
    r.task = Task::verbalize_alternatives;
    r.alternatives = AlternativesOf::continuations;
    break;
  case Job::verbalize_explanations:
    r.task = Task::verbalize_alternatives;
    r.alternatives = AlternativesOf::explanations;
    break;
  case Job::completion_tokens:
    r.task = Task::completion;
    r.probe = Probe::completion_tokens;
    break;
  case Job::explanation_choice:
    r.task = Task::explanation;
    r.probe = Probe::explanation_choice;
    break;
  }
  return r;
}

struct Context {
  const CampaignConfig &config;
  std::vector<ConcreteFunction> space;
  std::map<int, Dataset> datasets; // by length
  std::shared_ptr<Backend> backend;
  std::string model_name;
};

EvalRecord execute(const Context &ctx, const Item &it) {
  const auto &c = ctx.config;
  EvalRecord r = skeleton(c, it);
  PromptSpec spec;
  spec.base = it.base;
  spec.variant = it.variant;
  spec.n_shots = it.shots;
  spec.shot_sampling = c.shot_sampling;
  if (!c.role_text.empty())
    spec.role_text = c.role_text;
  spec.rng_seed = mix_seed(c.rng_seed, static_cast<std::uint64_t>(it.run));
  spec.verdict_consistent = c.verdict_consistent;
  spec.verdict_inconsistent = c.verdict_inconsistent;
  spec.task = r.task;
  spec.alternatives = r.alternatives;

  CompletionRequest req;
  req.temperature = c.temperature;
  req.max_tokens = c.max_tokens;
  const SequenceRecord target{it.record->sequence.values, it.base};
  const Dataset &dataset = ctx.datasets.at(it.length);
  if (r.probe == Probe::explanation_choice) {
    req.prompt = build_multiple_choice_prompt(spec, target, ctx.space, c.conv);
    r.choices = req.prompt.choices;
  } else {
    req.prompt = build_prompt(spec, target, ctx.space, c.conv, &dataset,
                              r.judged ? &*r.judged : nullptr);
  }
  if (r.probe != Probe::answer)
    req.want_top_logprobs = static_cast<int>(kMaxTopLogprobs);
  if (!ctx.model_name.empty())
    req.prompt = substitute_model_name(std::move(req.prompt), ctx.model_name);

  const auto response = ctx.backend->complete(req);
  r.raw_response = response.text;
  r.logprobs = response.first_position_top_logprobs;
  if (wants_timestamps(c))
    r.timestamp = utc_now();
  Truth truth;
  truth.explanations = it.record->explanations();
  for (const auto &v : it.record->continuations())
    truth.continuations.insert(v);
  grade(r, truth, c.conv, c.verdict_consistent, c.verdict_inconsistent);
  return r;
}

bool record_less(const EvalRecord &a, const EvalRecord &b) {
  auto rank = [](const EvalRecord &r) {
    return std::make_tuple(r.run_id, r.condition, static_cast<int>(r.task),
                           static_cast<int>(r.probe), static_cast<int>(r.alternatives),
                           r.sequence.base);
  };
  const auto ra = rank(a), rb = rank(b);
  if (ra != rb)
    return ra < rb;
  if (a.sequence.values != b.sequence.values)
    return a.sequence.values < b.sequence.values;
  return record_key(a) < record_key(b);
}

Json results_header(const CampaignConfig &config) {
  return Json{{"format", "seqcons.results"},
              {"schema_version", kResultsSchemaVersion},
              {"config_digest", config_digest(config)},
              {"config", result_settings(config)}};
}

std::vector<const AmbiguityRecord *> selected(const CampaignConfig &c, const Dataset &d,
                                              bool ambiguous) {
  if (ambiguous && c.sequences == SequenceSelection::unambiguous)
    return {};
  if (!ambiguous && c.sequences == SequenceSelection::ambiguous)
    return {};
  const auto &group = ambiguous ? d.ambiguous : d.unambiguous;
  std::vector<const AmbiguityRecord *> out;
  for (const auto &r : group) {
    if (c.max_sequences > 0 && static_cast<int>(out.size()) >= c.max_sequences)
      break;
    out.push_back(&r);
  }
  return out;
}

struct Writer {
  std::mutex mutex;
  std::ofstream out;
  void append(const EvalRecord &r) {
    std::lock_guard lock(mutex);
    out << record_to_json(r).dump() << '\n';
    out.flush();
  }
};

// Runs `items` on `threads` workers; stops early on the first failure.
void run_items(const Context &ctx, const std::vector<Item> &items, Writer &writer,
               std::vector<EvalRecord> &done, std::size_t &executed) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mutex;
  std::string error;
  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= items.size())
        return;
      try {
        auto r = execute(ctx, items[i]);
        writer.append(r);
        std::lock_guard lock(mutex);
        done.push_back(std::move(r));
        ++executed;
      } catch (const std::exception &e) {
        std::lock_guard lock(mutex);
        if (!failed.exchange(true))
          error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(ctx.config.parallelism, static_cast<int>(items.size())));
  std::vector<std::thread> threads;
  for (int t = 0; t < n; ++t)
    threads.emplace_back(worker);
  for (auto &t : threads)
    t.join();
  if (failed)
    throw CampaignError("campaign stopped, partial results kept: " + error);
}

} // namespace

ResultsFile read_results(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw CampaignError("cannot read results " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw CampaignError("empty results file " + path.string());
  ResultsFile out;
  try {
    const Json header = Json::parse(line);
    if (header.value("format", "") != "seqcons.results")
      throw CampaignError("not a results file: " + path.string());
    const int version = header.at("schema_version").get<int>();
    if (version != kResultsSchemaVersion)
      throw CampaignError("results schema version " + std::to_string(version) + ", expected " +
                          std::to_string(kResultsSchemaVersion));
    out.digest = header.at("config_digest").get<std::string>();
    out.config = parse_config(header.at("config").get<std::string>());
  } catch (const Json::exception &e) {
    throw CampaignError(std::string("malformed results header: ") + e.what());
  }
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!trim(line).empty())
      lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.records.push_back(record_from_json(Json::parse(lines[i])));
    } catch (const std::exception &e) {
      // an interrupted write can only truncate the last line
      if (i + 1 == lines.size())
        break;
      throw CampaignError("malformed record on line " + std::to_string(i + 2) + ": " + e.what());
    }
  }
  return out;
}

RunSummary cmd_run(const CampaignConfig &config, const std::filesystem::path &results,
                   std::ostream &log) {
  check(config);
  Context ctx{config, enumerate_space(space_options(config)).functions, {}, nullptr, {}};
  for (int length : config.lengths) {
    Dataset d = mine(ctx.space, length, config.conv, 10);
    d.parameters = dataset_parameters(config, length, 10);
    ctx.datasets.emplace(length, std::move(d));
  }
  ctx.backend = make_backend(config, ctx.space);
  ctx.model_name = !config.model_name.empty() ? config.model_name
                                              : (config.backend == "http" ? config.model : "");

  const std::string digest = config_digest(config);
  std::vector<EvalRecord> done;
  std::set<std::string> have;
  if (std::filesystem::exists(results)) {
    auto existing = read_results(results);
    if (existing.digest != digest)
      throw CampaignError("results file " + results.string() +
                          " belongs to a different config (digest " + existing.digest + ")");
    for (auto &r : existing.records)
      if (have.insert(record_key(r)).second)
        done.push_back(std::move(r));
  }
  if (results.has_parent_path())
    std::filesystem::create_directories(results.parent_path());

  // rewrite the kept records so a truncated tail line is dropped
  {
    const auto tmp = std::filesystem::path(results.string() + ".tmp");
    std::ofstream out(tmp);
    out << results_header(config).dump() << '\n';
    for (const auto &r : done)
      out << record_to_json(r).dump() << '\n';
    out.close();
    std::filesystem::rename(tmp, results);
  }
  Writer writer;
  writer.out.open(results, std::ios::app);
  if (!writer.out)
    throw CampaignError("cannot append to " + results.string());

  auto wants = [&](Job j) {
    return std::find(config.jobs.begin(), config.jobs.end(), j) != config.jobs.end();
  };
  std::vector<std::optional<int>> shot_list;
  if (config.shots.empty())
    shot_list.push_back(std::nullopt);
  for (int s : config.shots)
    shot_list.push_back(s);

  RunSummary summary;
  std::vector<Item> phase1;
  auto plan = [&](const Item &it, std::vector<Item> &into) {
    ++summary.planned;
    if (have.count(record_key(skeleton(config, it))))
      ++summary.skipped;
    else
      into.push_back(it);
  };
  for (int run = 0; run < config.n_runs; ++run)
    for (int length : config.lengths)
      for (int base : config.bases)
        for (auto variant : config.variants)
          for (const auto &shots : shot_list)
            for (bool amb : {true, false})
              for (const auto *rec : selected(config, ctx.datasets.at(length), amb))
                for (Job job : config.jobs) {
                  if (job == Job::judgment)
                    continue;
                  if (!amb && job != Job::completion && job != Job::explanation)
                    continue;
                  plan(Item{run, length, base, variant, shots, job, rec, amb, std::nullopt}, phase1);
                }
  log << summary.planned << " first-stage requests, " << summary.skipped << " already done\n";
  run_items(ctx, phase1, writer, done, summary.executed);

  if (wants(Job::judgment)) {
    // the model's own pair, for every ambiguous sequence with two valid answers
    std::map<std::string, std::pair<const EvalRecord *, const EvalRecord *>> pairs;
    for (const auto &r : done) {
      if (r.probe != Probe::answer || !r.ambiguous)
        continue;
      const std::string key = std::to_string(r.run_id) + "|" + r.condition + "|" +
                              format_sequence(r.sequence.values, 10);
      if (r.task == Task::completion)
        pairs[key].first = &r;
      else if (r.task == Task::explanation)
        pairs[key].second = &r;
    }
    std::vector<Item> phase2;
    for (int run = 0; run < config.n_runs; ++run)
      for (int length : config.lengths)
        for (int base : config.bases)
          for (auto variant : config.variants)
            for (const auto &shots : shot_list)
              for (const auto *rec : selected(config, ctx.datasets.at(length), true)) {
                const std::string key = std::to_string(run) + "|" +
                                        condition_of(config, length, base, variant, shots) + "|" +
                                        format_sequence(rec->sequence.values, 10);
                const auto it = pairs.find(key);
                if (it == pairs.end() || !it->second.first || !it->second.second)
                  continue;
                const auto *c = it->second.first;
                const auto *e = it->second.second;
                const auto *cv = std::get_if<Integer>(&c->parsed);
                const auto *ef = std::get_if<Function>(&e->parsed);
                if (!c->valid || !e->valid || !cv || !ef)
                  continue;
                Item item{run, length, base, variant, shots, Job::judgment, rec, true,
                          JudgedPair{render(*ef), format_integer(*cv, base)}};
                plan(item, phase2);
              }
    log << phase2.size() << " judgment requests\n";
    run_items(ctx, phase2, writer, done, summary.executed);
  }
  writer.out.close();

  std::sort(done.begin(), done.end(), record_less);
  const auto tmp = std::filesystem::path(results.string() + ".tmp");
  {
    std::ofstream out(tmp);
    out << results_header(config).dump() << '\n';
    for (const auto &r : done)
      out << record_to_json(r).dump() << '\n';
    if (!out)
      throw CampaignError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, results);
  log << summary.executed << " requests executed, " << done.size() << " records in "
      << results.string() << "\n";
  return summary;
}

// ---------------------------------------------------------------------------
// analyze

namespace {

std::string fmt(std::optional<double> v) {
  if (!v)
    return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

struct Group {
  std::map<int, std::vector<const EvalRecord *>> by_run;
};

const AmbiguityRecord *lookup(const Dataset &d, const IntegerList &values) {
  for (const auto *group : {&d.ambiguous, &d.unambiguous}) {
    auto it = std::lower_bound(group->begin(), group->end(), values,
                               [](const AmbiguityRecord &r, const IntegerList &v) {
                                 return r.sequence.values < v;
                               });
    if (it != group->end() && it->sequence.values == values)
      return &*it;
  }
  return nullptr;
}

int condition_length(const std::string &condition) {
  return std::stoi(condition.substr(4, condition.find(' ') - 4));
}

struct Verbal {
  std::optional<double> precision, recall;
};

Verbal verbal_means(const std::vector<const EvalRecord *> &records, AlternativesOf kind,
                    const Dataset &d) {
  double p = 0, r = 0;
  std::size_t n = 0;
  for (const auto *rec : records) {
    if (rec->task != Task::verbalize_alternatives || rec->alternatives != kind)
      continue;
    const auto *truth = lookup(d, rec->sequence.values);
    if (!truth)
      continue;
    std::set<std::string> valid;
    if (kind == AlternativesOf::continuations)
      for (const auto &c : truth->continuations())
        valid.insert(format_integer(c, 10));
    else
      for (const auto &f : truth->explanations())
        valid.insert(f.text);
    const auto *items = std::get_if<std::vector<std::string>>(&rec->parsed);
    const auto s = verbalization_scores(items ? *items : std::vector<std::string>{}, valid);
    p += s.precision;
    r += s.recall;
    ++n;
  }
  if (!n)
    return {};
  return {p / static_cast<double>(n), r / static_cast<double>(n)};
}

} // namespace

void cmd_analyze(const std::filesystem::path &results, const std::filesystem::path &out_dir,
                 std::ostream &log) {
  const auto file = read_results(results);
  const auto &config = file.config;
  const auto space = enumerate_space(space_options(config)).functions;
  std::map<int, Dataset> datasets;
  for (int length : config.lengths)
    datasets.emplace(length, mine(space, length, config.conv, 10));

  std::map<std::string, Group> groups;
  for (const auto &r : file.records)
    groups[r.condition].by_run[r.run_id].push_back(&r);

  std::filesystem::create_directories(out_dir);
  const std::string stamp = "# config_digest=" + file.digest + "\n";
  std::ofstream metrics(out_dir / "metrics.tsv"), baseline(out_dir / "random_baseline.tsv"),
      alts(out_dir / "alternatives.tsv"), kl(out_dir / "kl.tsv"), lps(out_dir / "logprobs.tsv");
  metrics << stamp
          << "condition\trun\tcompletion_accuracy\texplanation_accuracy\tvalid_fraction\t"
             "cross_context_consistency\tconsistent\tinconsistent\tinvalid_pairs\t"
             "model_judged_consistency\tjudged_consistent\tjudged_inconsistent\tjudged_invalid\t"
             "verbalize_continuations_precision\tverbalize_continuations_recall\t"
             "verbalize_explanations_precision\tverbalize_explanations_recall\n";
  baseline << stamp
           << "condition\tp_explanation\tp_completion\tactual_consistency\tclosed_form\t"
              "monte_carlo\tmonte_carlo_sigma\tsamples\tagree\n";
  alts << stamp
       << "condition\trun\tprobe\tn\tpassed\tpass_rate\tall_correct_rank_higher\t"
          "incorrect_outranks_correct\tcorrect_missing_incorrect_present\tno_incorrect_listed\t"
          "multi_token\n";
  kl << stamp << "condition\treference\tother\tn_reference\tn_other\tkl_bits\n";
  lps << stamp << "condition\trun\tsequence\tquadrant\ttoken\tlogprob\n";

  for (const auto &[condition, group] : groups) {
    const int length = condition_length(condition);
    const Dataset &d = datasets.at(length);
    std::vector<RunMetrics> per_run;
    ConsistencyTally total_cc, total_mj;
    std::array<std::vector<double>, 4> quadrants;
    std::vector<RunMetrics> explanation_verbal; // precision/recall of verbalized explanations

    for (const auto &[run, recs] : group.by_run) {
      std::vector<EvalRecord> unamb, all;
      for (const auto *r : recs) {
        all.push_back(*r);
        if (!r->ambiguous)
          unamb.push_back(*r);
      }
      RunMetrics m = score_accuracy(unamb, d);
      const auto cc = cross_context_consistency(all, config.conv);
      const auto mj = model_judged_tally(all);
      m.cross_context_consistency = cc.percent();
      m.model_judged_consistency = mj.percent();
      const auto vc = verbal_means(recs, AlternativesOf::continuations, d);
      const auto ve = verbal_means(recs, AlternativesOf::explanations, d);
      m.precision = vc.precision;
      m.recall = vc.recall;
      per_run.push_back(m);
      RunMetrics ev;
      ev.precision = ve.precision;
      ev.recall = ve.recall;
      explanation_verbal.push_back(ev);
      total_cc.consistent += cc.consistent;
      total_cc.inconsistent += cc.inconsistent;
      total_cc.invalid += cc.invalid;
      total_mj.consistent += mj.consistent;
      total_mj.inconsistent += mj.inconsistent;
      total_mj.invalid += mj.invalid;
      metrics << condition << '\t' << run << '\t' << fmt(m.completion_accuracy) << '\t'
              << fmt(m.explanation_accuracy) << '\t' << fmt(m.valid_fraction) << '\t'
              << fmt(m.cross_context_consistency) << '\t' << cc.consistent << '\t'
              << cc.inconsistent << '\t' << cc.invalid << '\t' << fmt(m.model_judged_consistency)
              << '\t' << mj.consistent << '\t' << mj.inconsistent << '\t' << mj.invalid << '\t'
              << fmt(vc.precision) << '\t' << fmt(vc.recall) << '\t' << fmt(ve.precision) << '\t'
              << fmt(ve.recall) << '\n';

      // alternative-consideration test
      for (const Probe probe : {Probe::completion_tokens, Probe::explanation_choice}) {
        std::size_t n = 0, passed = 0, multi = 0;
        std::map<AlternativeReason, std::size_t> reasons;
        for (const auto *r : recs) {
          if (r->probe != probe || !r->logprobs || r->logprobs->entries.empty())
            continue;
          const auto *truth = lookup(d, r->sequence.values);
          if (!truth)
            continue;
          AlternativeTestResult t;
          if (probe == Probe::completion_tokens) {
            const auto cs = truth->continuations();
            const std::set<Integer> c(cs.begin(), cs.end());
            t = alternative_consideration_test(*r->logprobs, c, r->sequence.base);
            const auto ql = quadrant_logprobs(*r->logprobs, c, r->sequence.base);
            for (std::size_t k = 0; k < ql.size(); ++k) {
              const auto &[q, lp] = ql[k];
              quadrants[static_cast<std::size_t>(q)].push_back(lp);
              lps << condition << '\t' << run << '\t' << format_sequence(r->sequence.values, 10)
                  << '\t' << to_string(q) << '\t' << Json(r->logprobs->entries[k].token).dump()
                  << '\t' << lp << '\n';
            }
          } else {
            std::set<std::string> correct, labels;
            const auto gs = truth->explanations();
            for (const auto &[label, text] : r->choices) {
              labels.insert(label);
              for (const auto &g : gs)
                if (g.text == text)
                  correct.insert(label);
            }
            if (correct.empty())
              continue;
            t = alternative_consideration_test_labels(*r->logprobs, correct, labels);
          }
          ++n;
          passed += t.passed;
          multi += t.multi_token;
          ++reasons[t.reason];
        }
        if (!n)
          continue;
        alts << condition << '\t' << run << '\t' << to_string(probe) << '\t' << n << '\t' << passed
             << '\t' << fmt(100.0 * static_cast<double>(passed) / static_cast<double>(n)) << '\t'
             << reasons[AlternativeReason::all_correct_rank_higher] << '\t'
             << reasons[AlternativeReason::incorrect_outranks_correct] << '\t'
             << reasons[AlternativeReason::correct_missing_incorrect_present] << '\t'
             << reasons[AlternativeReason::no_incorrect_listed] << '\t' << multi << '\n';
      }
    }

    const RunMetrics mean = aggregate_runs(per_run);
    const RunMetrics mean_ev = aggregate_runs(explanation_verbal);
    metrics << condition << "\tmean\t" << fmt(mean.completion_accuracy) << '\t'
            << fmt(mean.explanation_accuracy) << '\t' << fmt(mean.valid_fraction) << '\t'
            << fmt(mean.cross_context_consistency) << '\t' << total_cc.consistent << '\t'
            << total_cc.inconsistent << '\t' << total_cc.invalid << '\t'
            << fmt(mean.model_judged_consistency) << '\t' << total_mj.consistent << '\t'
            << total_mj.inconsistent << '\t' << total_mj.invalid << '\t' << fmt(mean.precision)
            << '\t' << fmt(mean.recall) << '\t' << fmt(mean_ev.precision) << '\t'
            << fmt(mean_ev.recall) << '\n';

    // random baseline at this condition's accuracies, over its ambiguous sequences
    if (mean.explanation_accuracy && mean.completion_accuracy) {
      std::vector<AmbiguityRecord> seqs;
      std::set<IntegerList> seen;
      for (const auto &[run, recs] : group.by_run)
        for (const auto *r : recs)
          if (r->ambiguous && seen.insert(r->sequence.values).second)
            if (const auto *a = lookup(d, r->sequence.values))
              seqs.push_back(*a);
      std::sort(seqs.begin(), seqs.end(), [](const auto &a, const auto &b) {
        return a.sequence.values < b.sequence.values;
      });
      if (!seqs.empty()) {
        const double pe = *mean.explanation_accuracy, pc = *mean.completion_accuracy;
        const auto cf = expected_random_consistency(pe, pc, seqs, d, space, config.conv,
                                                    EstimatorMode::closed_form);
        const auto mc = expected_random_consistency(
            pe, pc, seqs, d, space, config.conv, EstimatorMode::monte_carlo,
            static_cast<std::size_t>(config.random_baseline_samples), config.rng_seed);
        baseline << condition << '\t' << fmt(pe) << '\t' << fmt(pc) << '\t'
                 << fmt(mean.cross_context_consistency) << '\t' << fmt(cf.percent) << '\t'
                 << fmt(mc.percent) << '\t' << fmt(mc.sigma) << '\t' << mc.n_samples << '\t'
                 << (estimates_agree(cf, mc) ? "yes" : "no") << '\n';
      }
    }

    bool any_quadrant = false;
    for (const auto &q : quadrants)
      any_quadrant |= !q.empty();
    if (any_quadrant)
      for (const auto &k : quadrant_kl(quadrants))
        kl << condition << '\t' << to_string(k.reference) << '\t' << to_string(k.other) << '\t'
           << k.n_reference << '\t' << k.n_other << '\t' << fmt(k.bits) << '\n';
  }
  log << "analysis of " << file.records.size() << " records written to " << out_dir.string()
      << "\n";
}

// ---------------------------------------------------------------------------
// report

void cmd_report(const std::filesystem::path &analysis_dir, std::ostream &out) {
  const std::vector<std::pair<std::string, std::string>> tables = {
      {"metrics.tsv", "Accuracy, consistency and verbalization (mean over runs)"},
      {"random_baseline.tsv", "Expected random consistency"},
      {"alternatives.tsv", "Alternative-consideration test"},
      {"kl.tsv", "KL divergence between log-probability groups (bits)"},
  };
  bool any = false;
  for (const auto &[name, title] : tables) {
    std::ifstream in(analysis_dir / name);
    if (!in)
      continue;
    any = true;
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.front() == '#') {
        if (!line.empty() && rows.empty() && name == "metrics.tsv")
          out << line << "\n\n";
        continue;
      }
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, '\t'))
        cells.push_back(cell);
      if (name == "metrics.tsv" && !rows.empty() && cells.size() > 1 && cells[1] != "mean")
        continue;
      rows.push_back(std::move(cells));
    }
    out << "## " << title << "\n\n";
    if (rows.size() <= 1) {
      out << "(no rows)\n\n";
      continue;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out << "|";
      for (const auto &c : rows[i])
        out << ' ' << c << " |";
      out << "\n";
      if (i == 0) {
        out << "|";
        for (std::size_t j = 0; j < rows[i].size(); ++j)
          out << "---|";
        out << "\n";
      }
    }
    out << "\n";
  }
  if (!any)
    throw CampaignError("no analysis tables in " + analysis_dir.string());
}

} // namespace seqcons
