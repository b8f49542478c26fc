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

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv) {
  CLI::App app{"seqcons: ambiguous integer sequences and self-consistency campaigns"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key = value config file");
  app.add_option("-s,--set", overrides, "override one setting, key=value (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.fallthrough();

  auto *mine = app.add_subcommand("mine", "enumerate the space and write the datasets");
  auto *run = app.add_subcommand("run", "query the backend; resumes an existing results file");
  auto *analyze = app.add_subcommand("analyze", "metrics tables from a results file");
  auto *report = app.add_subcommand("report", "print the analysis tables as markdown");

  std::string results, analysis;
  run->add_option("--results", results, "results file (default <output_dir>/results.jsonl)");
  analyze->add_option("--results", results, "results file (default <output_dir>/results.jsonl)");
  analyze->add_option("--out", analysis, "analysis directory (default <output_dir>/analysis)");
  report->add_option("--dir", analysis, "analysis directory (default <output_dir>/analysis)");

  CLI11_PARSE(app, argc, argv);

  try {
    seqcons::CampaignConfig config;
    if (!config_path.empty())
      config = seqcons::load_config(config_path);
    for (const auto &o : overrides)
      seqcons::apply_override(config, o);
    const std::filesystem::path out = config.output_dir;
    if (results.empty())
      results = (out / "results.jsonl").string();
    if (analysis.empty())
      analysis = (out / "analysis").string();

    if (*mine) {
      seqcons::cmd_mine(config, std::cout);
    } else if (*run) {
      seqcons::cmd_run(config, results, std::cerr);
    } else if (*analyze) {
      seqcons::cmd_analyze(results, analysis, std::cerr);
    } else if (*report) {
      seqcons::cmd_report(analysis, std::cout);
    }
  } catch (const seqcons::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
