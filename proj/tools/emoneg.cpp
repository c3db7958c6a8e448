// Copyright 2026 The emoneg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "emoneg/pipeline.hpp"

namespace {

// Flags left unset keep the value from the config file (or the default).
struct Overrides {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> domain;
  std::optional<double> kappa;
  std::optional<double> clip_eps;
  std::optional<double> lambda_kl;
  std::optional<std::string> reward_variant;
  std::optional<double> filter_fraction;
  bool emotion_free = false;
  bool no_sft = false;
  std::optional<std::string> counterparty;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::string> method;
  bool print_config = false;
};

emoneg::PipelineConfig Resolve(const Overrides& o) {
  emoneg::PipelineConfig cfg =
      o.config.empty() ? emoneg::PipelineConfig{} : emoneg::LoadConfig(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.domain) cfg.domain = *o.domain;
  if (o.kappa) cfg.jpo.kappa = *o.kappa;
  if (o.clip_eps) cfg.jpo.clip_eps = *o.clip_eps;
  if (o.lambda_kl) cfg.jpo.lambda_kl = *o.lambda_kl;
  if (o.reward_variant) cfg.reward_variant = *o.reward_variant;
  if (o.filter_fraction) cfg.sft.filter_fraction = *o.filter_fraction;
  if (o.emotion_free) cfg.emotion_free = true;
  if (o.no_sft) cfg.jpo.no_sft = true;
  if (o.counterparty) cfg.counterparty = *o.counterparty;
  if (o.out) cfg.out = *o.out;
  if (o.workers) cfg.workers = *o.workers;
  if (o.method) cfg.eval.method = *o.method;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emoneg: offline emotion selection and expression pipeline"};
  app.require_subcommand(0, 1);

  Overrides o;
  std::string stage;
  app.add_option("stage", stage, "Pipeline stage")
      ->check(CLI::IsMember(emoneg::StageNames()));
  app.add_option("--config", o.config, "JSON config file; flags override its values");
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("--domain", o.domain, "Scenario domain");
  app.add_option("--kappa", o.kappa, "Negative-advantage weight for JPO, in [0, 1]");
  app.add_option("--clip-eps", o.clip_eps, "JPO ratio clip epsilon");
  app.add_option("--lambda-kl", o.lambda_kl, "Weight of the K3 anchor");
  app.add_option("--reward-variant", o.reward_variant, "Reward placement for training")
      ->check(CLI::IsMember({"outcome", "episode", "turn"}));
  app.add_option("--filter-fraction", o.filter_fraction, "Top fraction kept for SFT demos");
  app.add_flag("--emotion-free", o.emotion_free, "Train and evaluate without emotions");
  app.add_flag("--no-sft", o.no_sft, "Start JPO from the untrained reference");
  app.add_option("--counterparty", o.counterparty, "Counterparty profile name");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--method", o.method, "Method evaluated by the eval stage");
  app.add_flag("--print-config", o.print_config, "Print the resolved config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : emoneg::ExitCodeFor(emoneg::ErrorKind::kUsage);
  }

  try {
    const emoneg::PipelineConfig cfg = Resolve(o);
    if (o.print_config) {
      std::cout << emoneg::ConfigToJson(cfg) << "\n";
      return 0;
    }
    if (stage.empty()) {
      std::cerr << "error: a stage is required\n" << app.help();
      return emoneg::ExitCodeFor(emoneg::ErrorKind::kUsage);
    }
    const emoneg::StageOutcome outcome = emoneg::RunStage(stage, cfg);
    std::cout << outcome.summary << "\n";
    return 0;
  } catch (const emoneg::Error& e) {
    std::cerr << "error [" << emoneg::ErrorKindName(e.kind()) << "]: " << e.what() << "\n";
    return emoneg::ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
