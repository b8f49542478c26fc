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
#include "seqcons/evaluation.hpp"
#include "fake_server.hpp"
#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

using namespace seqcons;
using seqcons::test::default_dataset;
using seqcons::test::default_space;
using seqcons::test::FakeServer;

namespace {

CompletionRequest request_for(std::string query) {
  CompletionRequest req;
  req.prompt.test_query = std::move(query);
  return req;
}

CompletionRequest task_request(Task task, const IntegerList &values, int base = 10) {
  CompletionRequest req;
  req.prompt.task = task;
  req.prompt.base = base;
  req.prompt.target = SequenceRecord{values, base};
  req.prompt.test_query = format_sequence(values, base);
  return req;
}

class CountingBackend : public Backend {
public:
  CompletionResponse complete(const CompletionRequest &req) override {
    ++calls;
    CompletionResponse r;
    r.text = "echo:" + req.prompt.test_query;
    r.backend_id = id();
    if (req.want_top_logprobs)
      r.first_position_top_logprobs = TokenDistribution::from_entries({{"7", -0.25}, {"8", -2.5}});
    return r;
  }
  std::string id() const override { return "counting"; }
  std::atomic<int> calls{0};
};

const Json kChatReply = Json::parse(R"({
  "choices": [{"message": {"role": "assistant", "content": "19"},
               "logprobs": {"content": [{"token": "19", "logprob": -0.1,
                 "top_logprobs": [{"token": "15", "logprob": -2.5},
                                  {"token": "19", "logprob": -0.1},
                                  {"token": "21", "logprob": -6.0}]}]}}]})");

const Json kCompletionsReply = Json::parse(R"({
  "choices": [{"text": "15",
               "logprobs": {"tokens": ["15"],
                            "top_logprobs": [{"15": -0.3, "19": -1.5}]}}]})");

} // namespace

TEST_SUITE("backends") {

TEST_CASE("scripted playback") {
  ScriptedBackend b(Json::parse(R"({"responses": {"q1": "19",
      "q2": {"text": "15", "logprobs": [["15", -0.2], ["19", -1.1], ["3", -4.0]]}}})"));
  CHECK(b.complete(request_for("q1")).text == "19");

  auto req = request_for("q2");
  req.want_top_logprobs = 2;
  const auto r = b.complete(req);
  CHECK(r.text == "15");
  REQUIRE(r.first_position_top_logprobs);
  CHECK(r.first_position_top_logprobs->entries.size() == 2);
  CHECK(r.first_position_top_logprobs->entries[1].token == "19");
  CHECK_FALSE(b.complete(request_for("q2")).first_position_top_logprobs);

  try {
    b.complete(request_for("q3"));
    FAIL("expected a missing-fixture error");
  } catch (const BackendError &e) {
    CHECK(e.kind() == BackendErrorKind::fixture_missing);
  }
  auto lp = request_for("q1");
  lp.want_top_logprobs = 5;
  try {
    b.complete(lp);
    FAIL("expected an unsupported-logprobs error");
  } catch (const BackendError &e) {
    CHECK(e.kind() == BackendErrorKind::unsupported_logprobs);
  }
  auto bad = request_for("q1");
  bad.want_top_logprobs = 6;
  CHECK_THROWS_AS(b.complete(bad), std::invalid_argument);

  ScriptedBackend fallback(Json::parse(R"({"responses": {"*": "consistent"}})"));
  CHECK(fallback.complete(request_for("anything")).text == "consistent");
}

TEST_CASE("cache serves repeated requests") {
  const auto dir = seqcons::test::scratch_dir("cache");
  auto inner = std::make_shared<CountingBackend>();
  CachingBackend cache(inner, dir);
  auto req = request_for("q1");
  req.want_top_logprobs = 2;
  const auto first = cache.complete(req);
  const auto second = cache.complete(req);
  CHECK_FALSE(first.cached);
  CHECK(second.cached);
  CHECK(inner->calls == 1);
  CHECK(response_to_json(first).dump() == response_to_json(second).dump());

  // a different knob is a different entry
  auto other = req;
  other.temperature = 0.7;
  CHECK_FALSE(cache.complete(other).cached);
  CHECK(inner->calls == 2);
  CHECK(request_key("counting", req) != request_key("counting", other));
  CHECK(request_key("counting", req) != request_key("other", req));

  // a second decorator over the same directory sees the entries
  CachingBackend again(inner, dir);
  CHECK(again.complete(req).cached);

  // no temporary files are left behind
  for (const auto &entry : std::filesystem::directory_iterator(dir))
    CHECK(entry.path().extension() == ".json");
  std::filesystem::remove_all(dir);
}

TEST_CASE("cache tolerates concurrent callers") {
  const auto dir = seqcons::test::scratch_dir("cache-mt");
  auto inner = std::make_shared<CountingBackend>();
  CachingBackend cache(inner, dir);
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        const auto q = "q" + std::to_string((i + t) % 10);
        if (cache.complete(request_for(q)).text != "echo:" + q)
          ++mismatches;
      }
    });
  for (auto &t : threads)
    t.join();
  CHECK(mismatches == 0);
  int files = 0;
  for (const auto &entry : std::filesystem::directory_iterator(dir)) {
    CHECK(entry.path().extension() == ".json");
    ++files;
  }
  CHECK(files == 10);
  std::filesystem::remove_all(dir);
}

TEST_CASE("audit log records requests and errors") {
  const auto dir = seqcons::test::scratch_dir("audit");
  auto scripted = std::make_shared<ScriptedBackend>(Json::parse(R"({"responses": {"q1": "19"}})"));
  AuditLogBackend audit(scripted, dir / "audit.jsonl");
  CHECK(audit.complete(request_for("q1")).text == "19");
  CHECK_THROWS_AS(audit.complete(request_for("q2")), BackendError);
  std::ifstream in(dir / "audit.jsonl");
  std::string line;
  std::vector<Json> lines;
  while (std::getline(in, line))
    lines.push_back(Json::parse(line));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0]["response"]["text"] == "19");
  CHECK(lines[1]["error"]["kind"] == "fixture_missing");
  std::filesystem::remove_all(dir);
}

TEST_CASE("oracle answers on the worked example") {
  const auto &space = default_space().functions;
  const IndexConvention conv;
  const SequenceRecord seq{{7, 11, 15}, 10};
  CHECK(oracle_answer(seq, Task::completion, space, conv, TieBreak::min_value) == "15");
  CHECK(oracle_answer(seq, Task::completion, space, conv, TieBreak::enumeration_order) == "19");
  CHECK(oracle_answer(seq, Task::explanation, space, conv, TieBreak::enumeration_order) ==
        "Explanation: " + instantiate(TemplateKind::arithmetic, 4, 3).text);
  CHECK(oracle_answer(seq, Task::explanation, space, conv, TieBreak::min_value) ==
        "Explanation: " + instantiate(TemplateKind::bit_or, 3, 3).text);
  CHECK(oracle_answer(SequenceRecord{{7, 11, 15}, 2}, Task::completion, space, conv,
                      TieBreak::min_value) == "0b1111");
  CHECK(oracle_answer(SequenceRecord{{-5, 1000, 3}, 10}, Task::completion, space, conv,
                      TieBreak::min_value) == kNoAnswer);
}

TEST_CASE("oracle completion on unambiguous sequences is the unique continuation") {
  const auto &space = default_space().functions;
  const IndexConvention conv;
  for (const auto &r : default_dataset().unambiguous) {
    const auto c = valid_continuations(r.sequence, space, conv);
    REQUIRE(c.size() == 1);
    const auto a = oracle_answer(r.sequence, Task::completion, space, conv, TieBreak::min_value);
    const auto b =
        oracle_answer(r.sequence, Task::completion, space, conv, TieBreak::enumeration_order);
    CHECK(a == b);
    CHECK(a == format_integer(*c.begin(), 10));
  }
}

TEST_CASE("consistent and adversarial oracle modes") {
  const auto &space = default_space().functions;
  const IndexConvention conv;
  for (const auto tie : {TieBreak::min_value, TieBreak::enumeration_order}) {
    for (const auto &r : default_dataset().ambiguous) {
      for (const auto mode : {OracleMode::consistent, OracleMode::adversarial}) {
        const auto c = parse_completion_response(
            oracle_answer(r.sequence, Task::completion, space, conv, tie, mode), 10);
        const auto e = parse_explanation_response(
            oracle_answer(r.sequence, Task::explanation, space, conv, tie, mode));
        REQUIRE(c);
        REQUIRE(e);
        CHECK(check_cross_context_consistency(r.sequence, *c, *e, conv) ==
              (mode == OracleMode::consistent));
      }
    }
  }
}

TEST_CASE("adversarial oracle when every generator reaches every continuation") {
  // (1 * x) | 3 gives 7, 7, 7 at x = 4..6 and x = 5..7, then 7 or 11
  const auto &space = default_space().functions;
  const IndexConvention conv;
  const SequenceRecord seq{{7, 7, 7}, 10};
  const auto gens = find_generators(seq.values, space, conv);
  for (const auto &g : gens)
    for (const Integer next : {7, 11})
      REQUIRE(generates_with_next(g.function.function, seq.values, next, conv));
  const auto c = parse_completion_response(
      oracle_answer(seq, Task::completion, space, conv, TieBreak::min_value, OracleMode::adversarial), 10);
  const auto e = parse_explanation_response(
      oracle_answer(seq, Task::explanation, space, conv, TieBreak::min_value, OracleMode::adversarial));
  REQUIRE(c);
  REQUIRE(e);
  CHECK_FALSE(check_cross_context_consistency(seq, *c, *e, conv));
}

TEST_CASE("oracle backend covers every task") {
  const auto &space = default_space().functions;
  const IndexConvention conv;
  OracleBackend oracle(space, conv, {});
  CHECK(oracle.id() == "oracle:min_value:consistent");

  auto req = task_request(Task::completion, {7, 11, 15});
  req.want_top_logprobs = 5;
  const auto r = oracle.complete(req);
  CHECK(r.text == "15");
  REQUIRE(r.first_position_top_logprobs);
  CHECK(alternative_consideration_test(*r.first_position_top_logprobs, {15, 19}, 10).reason ==
        AlternativeReason::all_correct_rank_higher);

  auto verbal = task_request(Task::verbalize_alternatives, {7, 11, 15});
  CHECK(oracle.complete(verbal).text == "15 \\n 19 \\n ");
  verbal.prompt.alternatives = AlternativesOf::explanations;
  const auto items = split_alternatives(oracle.complete(verbal).text);
  // (3x)|3 continues with 15; (4x)+3 and (4x)|3 with 19
  REQUIRE(items.size() == 3);
  CHECK(items[0] == instantiate(TemplateKind::bit_or, 3, 3).text);
  CHECK(items[1] == instantiate(TemplateKind::arithmetic, 4, 3).text);
  CHECK(items[2] == instantiate(TemplateKind::bit_or, 4, 3).text);

  auto judge = task_request(Task::consistency_judgment, {7, 11, 15});
  judge.prompt.judged = JudgedPair{"Explanation: " + instantiate(TemplateKind::arithmetic, 4, 3).text, "19"};
  CHECK(oracle.complete(judge).text == "consistent");
  judge.prompt.judged->completion = "15";
  CHECK(oracle.complete(judge).text == "inconsistent");
  judge.prompt.judged->completion = "fifteen";
  CHECK(oracle.complete(judge).text == kNoAnswer);
}

TEST_CASE("multiple-choice prompts and answers") {
  const auto &space = default_space().functions;
  const IndexConvention conv;
  PromptSpec spec;
  spec.task = Task::explanation;
  spec.n_shots = 3;
  spec.rng_seed = 11;
  const SequenceRecord seq{{7, 11, 15}, 10};
  const auto p = build_multiple_choice_prompt(spec, seq, space, conv);
  REQUIRE(p.choices.size() == 5);
  std::set<std::string> texts;
  std::set<std::string> labels;
  for (const auto &[label, text] : p.choices) {
    labels.insert(label);
    texts.insert(text);
    CHECK(p.test_query.find(label + ". " + text) != std::string::npos);
  }
  CHECK(labels == std::set<std::string>{"A", "B", "C", "D", "E"});
  CHECK(texts.size() == 5);
  // every generator is offered
  CHECK(texts.count(instantiate(TemplateKind::arithmetic, 4, 3).text));
  CHECK(texts.count(instantiate(TemplateKind::bit_or, 3, 3).text));
  CHECK(texts.count(instantiate(TemplateKind::bit_or, 4, 3).text));
  CHECK(p.demonstrations.size() == 3);
  for (const auto &[q, a] : p.demonstrations) {
    CHECK(a.size() == 1);
    CHECK(q.find("\n" + a + ". ") != std::string::npos);
  }
  const auto again = build_multiple_choice_prompt(spec, seq, space, conv);
  CHECK(again.flatten() == p.flatten());

  OracleBackend oracle(space, conv, {});
  CompletionRequest req;
  req.prompt = p;
  req.want_top_logprobs = 5;
  const auto r = oracle.complete(req);
  std::set<std::string> correct;
  for (const auto &[label, text] : p.choices)
    if (text == instantiate(TemplateKind::arithmetic, 4, 3).text ||
        text == instantiate(TemplateKind::bit_or, 3, 3).text ||
        text == instantiate(TemplateKind::bit_or, 4, 3).text)
      correct.insert(label);
  CHECK(correct.count(r.text));
  REQUIRE(r.first_position_top_logprobs);
  CHECK(alternative_consideration_test_labels(*r.first_position_top_logprobs, correct, labels)
            .passed);
}

TEST_CASE("random valid answers split evenly over the valid set") {
  const auto &space = default_space().functions;
  const IndexConvention conv;
  const SequenceRecord seq{{7, 11, 15}, 10};
  const int n = 4000;
  int nineteen = 0;
  for (int s = 0; s < n; ++s) {
    const auto a = random_valid_answer(seq, Task::completion, space, conv, s);
    REQUIRE((a == "19" || a == "15"));
    nineteen += a == "19";
  }
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(nineteen - n / 2.0) <= 3 * sigma);

  CHECK(random_valid_answer(seq, Task::completion, space, conv, 5) ==
        random_valid_answer(seq, Task::completion, space, conv, 5));
  const auto &unambiguous = default_dataset().unambiguous.front().sequence;
  const auto only = format_integer(*valid_continuations(unambiguous, space, conv).begin(), 10);
  for (int s = 0; s < 50; ++s)
    CHECK(random_valid_answer(unambiguous, Task::completion, space, conv, s) == only);
}

TEST_CASE("invalid backend never parses") {
  InvalidBackend b;
  const auto text = b.complete(task_request(Task::completion, {1, 2, 3})).text;
  CHECK_FALSE(parse_completion_response(text, 10));
  CHECK_FALSE(parse_explanation_response(text));
  CHECK_FALSE(parse_verdict(text));
  CHECK_FALSE(parse_choice_label(text, {"A", "B", "C", "D", "E"}));
}

TEST_CASE("http chat style with logprobs") {
  FakeServer fake;
  Json seen;
  std::string auth;
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request &req, httplib::Response &res) {
    seen = Json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(kChatReply.dump(), "application/json");
  });
  ::setenv("SEQCONS_TEST_KEY", "sk-test", 1);
  HttpBackendConfig cfg;
  cfg.base_url = fake.base_url();
  cfg.model = "local-model";
  cfg.api_key_env = "SEQCONS_TEST_KEY";
  HttpBackend http(cfg);
  auto req = task_request(Task::completion, {7, 11, 15});
  req.prompt.system = "sys";
  req.prompt.demonstrations = {{"q", "a"}};
  req.want_top_logprobs = 3;
  const auto r = http.complete(req);
  CHECK(r.text == "19");
  REQUIRE(r.first_position_top_logprobs);
  const auto &e = r.first_position_top_logprobs->entries;
  REQUIRE(e.size() == 3);
  CHECK(e[0].token == "19");
  CHECK(e[2].token == "21");
  CHECK(auth == "Bearer sk-test");
  CHECK(seen["model"] == "local-model");
  CHECK(seen["temperature"] == 0.0);
  CHECK(seen["top_logprobs"] == 3);
  CHECK(seen["messages"].size() == 4);
  CHECK(seen["messages"][0]["role"] == "system");
  ::unsetenv("SEQCONS_TEST_KEY");
}

TEST_CASE("http completions style") {
  FakeServer fake;
  Json seen;
  fake.server().Post("/v1/completions", [&](const httplib::Request &req, httplib::Response &res) {
    seen = Json::parse(req.body);
    res.set_content(kCompletionsReply.dump(), "application/json");
  });
  HttpBackendConfig cfg;
  cfg.base_url = fake.base_url();
  cfg.style = ApiStyle::completions;
  cfg.model = "legacy";
  HttpBackend http(cfg);
  auto req = task_request(Task::completion, {7, 11, 15});
  req.want_top_logprobs = 5;
  const auto r = http.complete(req);
  CHECK(r.text == "15");
  REQUIRE(r.first_position_top_logprobs);
  CHECK(r.first_position_top_logprobs->entries.front().token == "15");
  CHECK(seen["prompt"] == req.prompt.flatten());
  CHECK(seen["logprobs"] == 5);
}

TEST_CASE("http retries transient failures and reports the rest") {
  FakeServer fake;
  std::atomic<int> calls{0};
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request &, httplib::Response &res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(kChatReply.dump(), "application/json");
  });
  fake.server().Post("/denied/chat/completions", [&](const httplib::Request &, httplib::Response &res) {
    res.status = 401;
  });
  fake.server().Post("/nolp/chat/completions", [&](const httplib::Request &, httplib::Response &res) {
    res.set_content(R"({"choices":[{"message":{"content":"19"}}]})", "application/json");
  });

  HttpBackendConfig cfg;
  cfg.base_url = fake.base_url();
  cfg.model = "m";
  cfg.api_key_env.clear();
  cfg.initial_backoff = std::chrono::milliseconds(1);
  HttpBackend http(cfg);
  CHECK(http.complete(task_request(Task::completion, {1})).text == "19");
  CHECK(calls == 3);

  auto denied_cfg = cfg;
  denied_cfg.base_url = fake.base_url().substr(0, fake.base_url().size() - 3) + "/denied";
  try {
    HttpBackend(denied_cfg).complete(task_request(Task::completion, {1}));
    FAIL("expected auth failure");
  } catch (const BackendError &e) {
    CHECK(e.kind() == BackendErrorKind::auth);
  }

  auto nolp_cfg = cfg;
  nolp_cfg.base_url = fake.base_url().substr(0, fake.base_url().size() - 3) + "/nolp";
  auto req = task_request(Task::completion, {1});
  CHECK(HttpBackend(nolp_cfg).complete(req).text == "19");
  req.want_top_logprobs = 2;
  try {
    HttpBackend(nolp_cfg).complete(req);
    FAIL("expected unsupported logprobs");
  } catch (const BackendError &e) {
    CHECK(e.kind() == BackendErrorKind::unsupported_logprobs);
  }

  auto dead = cfg;
  dead.base_url = "http://127.0.0.1:1/v1";
  dead.max_retries = 1;
  try {
    HttpBackend(dead).complete(task_request(Task::completion, {1}));
    FAIL("expected transport failure");
  } catch (const BackendError &e) {
    CHECK(e.kind() == BackendErrorKind::transport);
  }
}

TEST_CASE("http in-flight limit") {
  FakeServer fake;
  std::atomic<int> active{0}, peak{0};
  fake.server().Post("/v1/chat/completions", [&](const httplib::Request &, httplib::Response &res) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --active;
    res.set_content(kChatReply.dump(), "application/json");
  });
  HttpBackendConfig cfg;
  cfg.base_url = fake.base_url();
  cfg.model = "m";
  cfg.max_in_flight = 2;
  HttpBackend http(cfg);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i)
    threads.emplace_back([&] { http.complete(task_request(Task::completion, {1})); });
  for (auto &t : threads)
    t.join();
  CHECK(peak <= 2);
  CHECK(peak >= 1);
}

} // TEST_SUITE
