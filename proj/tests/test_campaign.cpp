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
#include "fake_server.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

using namespace seqcons;

TEST_SUITE_BEGIN("campaign");

namespace {

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    out.push_back(item);
  return out;
}

// Rows of a TSV keyed by column name; comment lines skipped.
std::vector<std::map<std::string, std::string>> read_tsv(const std::filesystem::path &p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    const auto cells = split(line, '\t');
    if (header.empty()) {
      header = cells;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size() && i < header.size(); ++i)
      row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

std::map<std::string, std::string> mean_row(const std::filesystem::path &dir) {
  for (const auto &r : read_tsv(dir / "metrics.tsv"))
    if (r.at("run") == "mean")
      return r;
  FAIL("no mean row");
  return {};
}

CampaignConfig small_config(const std::filesystem::path &dir) {
  CampaignConfig c;
  c.output_dir = dir.string();
  c.n_runs = 1;
  c.max_sequences = 6;
  return c;
}

} // namespace

TEST_CASE("config text round trips through the canonical form") {
  const auto c = parse_config(R"(
# a comment
lengths = 3, 4
bases = 10,2
variants = plain, most_likely
shots = 0, 4
temperature = 0.7
backend = random_valid
jobs = completion, explanation
rng_seed = 18446744073709551615
)");
  CHECK(c.lengths == std::vector<int>{3, 4});
  CHECK(c.bases == std::vector<int>{10, 2});
  CHECK(c.shots == std::vector<int>{0, 4});
  CHECK(c.temperature == doctest::Approx(0.7));
  CHECK(c.rng_seed == 18446744073709551615ULL);
  const auto text = canonical_config(c);
  CHECK(canonical_config(parse_config(text)) == text);
  CHECK(config_digest(parse_config(text)) == config_digest(c));
  CHECK(canonical_config(CampaignConfig{}).find("shots = default") != std::string::npos);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("no_such_key = 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("lengths = four"), ConfigError);
  CHECK_THROWS_AS(parse_config("bases = 16"), ConfigError);
  CHECK_THROWS_AS(parse_config("backend = telepathy"), ConfigError);
  CHECK_THROWS_AS(parse_config("jobs = completion, dreaming"), ConfigError);
  CHECK_THROWS_AS(parse_config("temperature = warm"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words"), ConfigError);
  CampaignConfig c;
  CHECK_THROWS_AS(apply_override(c, "n_runs"), ConfigError);
  apply_override(c, "n_runs=7");
  CHECK(c.n_runs == 7);
}

TEST_CASE("digest covers result settings only") {
  const CampaignConfig base;
  const auto d = config_digest(base);
  for (const char *o : {"output_dir=elsewhere", "parallelism=9", "timestamps=on", "audit_log=a.jsonl",
                        "cache_dir=cache", "api_key_env=OTHER_KEY", "n_runs=10"}) {
    CampaignConfig c;
    apply_override(c, o);
    CHECK_MESSAGE(config_digest(c) == d, o);
  }
  for (const char *o : {"temperature=0.5", "lengths=3", "bases=2", "backend=invalid", "rng_seed=1",
                        "model=m", "shots=2", "oracle_mode=adversarial"}) {
    CampaignConfig c;
    apply_override(c, o);
    CHECK_MESSAGE(config_digest(c) != d, o);
  }
}

TEST_CASE("api key never reaches config text or digest input") {
  CampaignConfig c;
  c.api_key_env = "SEQCONS_TEST_KEY";
  ::setenv("SEQCONS_TEST_KEY", "sk-very-secret", 1);
  CHECK(canonical_config(c).find("sk-very-secret") == std::string::npos);
  ::unsetenv("SEQCONS_TEST_KEY");
}

TEST_CASE("mine writes datasets that read back") {
  const auto dir = test::scratch_dir("mine");
  CampaignConfig c;
  c.output_dir = dir.string();
  c.lengths = {3, 4};
  std::ostringstream log;
  const auto summary = cmd_mine(c, log);
  CHECK(summary.functions == 197);
  REQUIRE(summary.per_length.size() == 2);
  CHECK(summary.per_length[1].ambiguous_sequences == 9);
  CHECK(summary.per_length[1].unambiguous_sequences == 389);
  std::ifstream in(dir / "dataset_len4.jsonl");
  const auto d = read_dataset(in);
  CHECK(d.ambiguous.size() == 9);
  CHECK(d.unambiguous.size() == 389);
  CHECK(d.parameters.length == 4);
  CHECK(log.str().find("197 functions, 9 ambiguous, 389 unambiguous (length 4)") != std::string::npos);
  CHECK(read_tsv(dir / "mining.tsv").size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("oracle campaign scores 100 everywhere") {
  const auto dir = test::scratch_dir("oracle");
  auto c = small_config(dir);
  c.n_runs = 2;
  std::ostringstream log;
  const auto results = dir / "results.jsonl";
  const auto summary = cmd_run(c, results, log);
  CHECK(summary.skipped == 0);
  CHECK(summary.executed > 0);
  cmd_analyze(results, dir / "analysis", log);
  const auto m = mean_row(dir / "analysis");
  CHECK(m.at("completion_accuracy") == "100.0000");
  CHECK(m.at("explanation_accuracy") == "100.0000");
  CHECK(m.at("valid_fraction") == "100.0000");
  CHECK(m.at("cross_context_consistency") == "100.0000");
  CHECK(m.at("model_judged_consistency") == "100.0000");
  CHECK(m.at("verbalize_continuations_precision") == "1.0000");
  for (const auto &row : read_tsv(dir / "analysis" / "alternatives.tsv"))
    CHECK(row.at("pass_rate") == "100.0000");
  const auto baseline = read_tsv(dir / "analysis" / "random_baseline.tsv");
  REQUIRE(baseline.size() == 1);
  CHECK(baseline[0].at("agree") == "yes");

  std::ostringstream report;
  cmd_report(dir / "analysis", report);
  CHECK(report.str().find("| len=4 base=10 variant=plain") != std::string::npos);

  c.oracle_mode = OracleMode::adversarial;
  const auto adv = dir / "adversarial.jsonl";
  cmd_run(c, adv, log);
  cmd_analyze(adv, dir / "adv", log);
  CHECK(mean_row(dir / "adv").at("cross_context_consistency") == "0.0000");
  std::filesystem::remove_all(dir);
}

TEST_CASE("results are byte-identical across parallelism and resumes") {
  const auto dir = test::scratch_dir("determinism");
  auto c = small_config(dir);
  c.backend = "random_valid";
  std::ostringstream log;
  c.parallelism = 1;
  cmd_run(c, dir / "a.jsonl", log);
  c.parallelism = 8;
  cmd_run(c, dir / "b.jsonl", log);
  const auto a = slurp(dir / "a.jsonl");
  CHECK(a == slurp(dir / "b.jsonl"));

  // interrupted mid-line
  {
    std::ofstream out(dir / "c.jsonl", std::ios::binary);
    out << a.substr(0, a.size() * 2 / 3);
  }
  const auto resumed = cmd_run(c, dir / "c.jsonl", log);
  CHECK(resumed.skipped > 0);
  CHECK(resumed.executed > 0);
  CHECK(resumed.skipped + resumed.executed >= resumed.planned);
  CHECK(slurp(dir / "c.jsonl") == a);

  const auto again = cmd_run(c, dir / "c.jsonl", log);
  CHECK(again.executed == 0);
  CHECK(slurp(dir / "c.jsonl") == a);

  const auto file = read_results(dir / "c.jsonl");
  std::set<std::string> keys;
  for (const auto &r : file.records)
    CHECK(keys.insert(record_key(r)).second);

  // analysis is a pure function of the results file
  cmd_analyze(dir / "a.jsonl", dir / "x", log);
  cmd_analyze(dir / "c.jsonl", dir / "y", log);
  for (const char *t : {"metrics.tsv", "random_baseline.tsv", "alternatives.tsv", "kl.tsv", "logprobs.tsv"})
    CHECK_MESSAGE(slurp(dir / "x" / t) == slurp(dir / "y" / t), t);
  std::filesystem::remove_all(dir);
}

TEST_CASE("more runs extend an existing campaign") {
  const auto dir = test::scratch_dir("extend");
  auto c = small_config(dir);
  c.jobs = {Job::completion, Job::explanation};
  std::ostringstream log;
  const auto first = cmd_run(c, dir / "r.jsonl", log);
  c.n_runs = 2;
  const auto second = cmd_run(c, dir / "r.jsonl", log);
  CHECK(second.skipped == first.executed);
  CHECK(second.executed == first.executed);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mismatched results files are refused") {
  const auto dir = test::scratch_dir("mismatch");
  auto c = small_config(dir);
  c.jobs = {Job::completion};
  std::ostringstream log;
  cmd_run(c, dir / "r.jsonl", log);
  c.temperature = 1.0;
  CHECK_THROWS_AS(cmd_run(c, dir / "r.jsonl", log), CampaignError);

  auto text = slurp(dir / "r.jsonl");
  const auto pos = text.find("\"schema_version\":1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 18, "\"schema_version\":99");
  {
    std::ofstream out(dir / "r.jsonl", std::ios::binary);
    out << text;
  }
  CHECK_THROWS_AS(read_results(dir / "r.jsonl"), CampaignError);
  CHECK_THROWS_AS(cmd_analyze(dir / "r.jsonl", dir / "a", log), CampaignError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scripted fixture gives known metrics") {
  const auto dir = test::scratch_dir("scripted");
  const auto &d = test::default_dataset();
  REQUIRE(d.ambiguous.size() >= 2);

  // first sequence answered consistently, second inconsistently
  Json responses = Json::object();
  PromptSpec spec;
  for (int i = 0; i < 2; ++i) {
    const auto &rec = d.ambiguous[i];
    const auto cs = rec.continuations();
    const Integer said = cs[0];
    const Integer explained = i == 0 ? cs[0] : cs[1];
    const ConcreteFunction *f = nullptr;
    for (const auto &g : rec.generators)
      if (g.continuation == explained) {
        f = &g.function;
        break;
      }
    REQUIRE(f);
    spec.task = Task::completion;
    responses[format_query(spec, rec.sequence.values)] = format_completion_answer(said, 10);
    spec.task = Task::explanation;
    responses[format_query(spec, rec.sequence.values)] = format_explanation_answer(*f, 10);
  }
  responses["*"] = "consistent";
  {
    std::ofstream out(dir / "fixture.json");
    out << Json{{"responses", responses}}.dump(2);
  }

  auto c = small_config(dir);
  c.backend = "scripted";
  c.fixture = (dir / "fixture.json").string();
  c.sequences = SequenceSelection::ambiguous;
  c.max_sequences = 2;
  c.jobs = {Job::completion, Job::explanation, Job::judgment};
  std::ostringstream log;
  cmd_run(c, dir / "r.jsonl", log);
  cmd_analyze(dir / "r.jsonl", dir / "a", log);
  const auto m = mean_row(dir / "a");
  CHECK(m.at("completion_accuracy") == "NA");
  CHECK(m.at("cross_context_consistency") == "50.0000");
  CHECK(m.at("consistent") == "1");
  CHECK(m.at("inconsistent") == "1");
  CHECK(m.at("model_judged_consistency") == "100.0000");
  CHECK(m.at("judged_consistent") == "2");
  std::filesystem::remove_all(dir);
}

TEST_CASE("backend failure keeps the partial results") {
  const auto dir = test::scratch_dir("failure");
  {
    std::ofstream out(dir / "fixture.json");
    out << R"({"responses": {}})";
  }
  auto c = small_config(dir);
  c.backend = "scripted";
  c.fixture = (dir / "fixture.json").string();
  c.jobs = {Job::completion};
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_run(c, dir / "r.jsonl", log), CampaignError);
  const auto file = read_results(dir / "r.jsonl");
  CHECK(file.records.empty());
  CHECK(file.digest == config_digest(c));
  std::filesystem::remove_all(dir);
}

TEST_CASE("http campaign against a local endpoint") {
  test::FakeServer fake;
  std::mutex mutex;
  std::vector<Json> bodies;
  std::set<std::string> auth;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request &req, httplib::Response &res) {
    {
      std::lock_guard lock(mutex);
      bodies.push_back(Json::parse(req.body));
      auth.insert(req.get_header_value("Authorization"));
    }
    const Json reply = {
        {"choices",
         {{{"message", {{"role", "assistant"}, {"content", "19"}}},
           {"logprobs",
            {{"content",
              {{{"token", "19"},
                {"logprob", -0.1},
                {"top_logprobs", {{{"token", "19"}, {"logprob", -0.1}}, {{"token", "15"}, {"logprob", -2.0}}}}}}}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  ::setenv("SEQCONS_CAMPAIGN_KEY", "sk-campaign-secret", 1);

  const auto dir = test::scratch_dir("http");
  auto c = small_config(dir);
  c.backend = "http";
  c.base_url = fake.base_url();
  c.model = "test-model";
  c.api_key_env = "SEQCONS_CAMPAIGN_KEY";
  c.max_sequences = 2;
  c.jobs = {Job::completion, Job::verbalize_continuations, Job::completion_tokens};
  c.cache_dir = (dir / "cache").string();
  c.audit_log = (dir / "audit.jsonl").string();
  std::ostringstream log;
  const auto summary = cmd_run(c, dir / "r.jsonl", log);
  CHECK(summary.executed == 2 + 2 + 2 + 2);
  CHECK(bodies.size() == summary.executed);
  CHECK(auth == std::set<std::string>{"Bearer sk-campaign-secret"});
  bool substituted = false;
  for (const auto &b : bodies) {
    CHECK(b.at("model") == "test-model");
    for (const auto &m : b.at("messages"))
      substituted |= m.at("content").get<std::string>().find("determined by you, test-model.") !=
                     std::string::npos;
  }
  CHECK(substituted);

  const auto file = read_results(dir / "r.jsonl");
  for (const auto &r : file.records)
    CHECK(r.timestamp.has_value());
  for (const auto &p : {dir / "r.jsonl", dir / "audit.jsonl"})
    CHECK(slurp(p).find("sk-campaign-secret") == std::string::npos);

  // a second campaign in a fresh file is served from the cache
  const auto before = bodies.size();
  cmd_run(c, dir / "again.jsonl", log);
  CHECK(bodies.size() == before);
  ::unsetenv("SEQCONS_CAMPAIGN_KEY");
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
