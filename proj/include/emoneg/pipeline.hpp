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

#ifndef EMONEG_PIPELINE_HPP_
#define EMONEG_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emoneg/evalstats.hpp"
#include "emoneg/expresser.hpp"
#include "emoneg/policies.hpp"
#include "emoneg/selector.hpp"
#include "emoneg/sweep.hpp"

namespace emoneg {

struct PipelineConfig {
  std::string domain = "crad";
  uint64_t seed = 0;
  std::filesystem::path out = "run";
  int workers = 1;
  std::string counterparty = "default";
  bool emotion_free = false;
  // Reward or advantage variant for the stage being run; empty keeps the
  // per-stage defaults (outcome for IQL, turn for JPO).
  std::string reward_variant;

  struct Gen {
    std::size_t n_scenarios = 100;
    std::string scenario_file;  // import instead of generating
  } gen;

  struct Sweep {
    std::size_t m_rollouts = 100;
    std::string behavior = "random";
    double kappa = 1.0;  // shaping kappa recorded with the advantages
  } sweep;

  struct Iql {
    double tau_exp = 0.7;
    double beta_awr = 3.0;
    double gamma = 0.99;
    int steps = 2000;
    double learning_rate = 0.5;
    std::string variant = "outcome";
  } iql;

  struct Sft {
    double filter_fraction = 0.25;
    int steps = 400;
    double learning_rate = 1.0;
    int batch = 0;
  } sft;

  struct Jpo {
    double clip_eps = 0.2;
    double lambda_kl = 0.04;
    double kappa = 1.0;
    int steps = 2000;
    double learning_rate = 3.0;
    int batch = 0;
    std::string variant = "turn";
    bool no_sft = false;
  } jpo;

  struct Alol {
    int steps = 2000;
    double learning_rate = 3.0;
  } alol;

  struct Eval {
    std::string method = "iql+sft+jpo";
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    std::string selector_mode = "greedy";
    std::string action_mode = "sample";
    std::string scenario_file;   // defaults to <out>/scenarios.jsonl
    std::string checkpoint_dir;  // defaults to <out>
    std::size_t bootstrap_resamples = 10000;
  } eval;

  struct Study {
    std::size_t scenarios = 20;
    std::size_t runs = 20;
    std::string metric = "utility";  // utility | judge
  } study;

  struct Tournament {
    std::vector<std::string> focal{"iql+sft+jpo", "iql+sft", "vanilla"};
    std::vector<std::string> counterparties{"default", "policy:iql+sft+jpo",
                                            "policy:vanilla"};
  } tournament;

  struct Backend {
    std::vector<std::string> agent_command;
    std::vector<std::string> judge_command;
    int timeout_ms = 30000;
  } backend;
};

// Nested JSON object mirroring the struct; unknown keys are usage errors.
std::string ConfigToJson(const PipelineConfig& cfg);
PipelineConfig ConfigFromJson(const std::string& text);
PipelineConfig LoadConfig(const std::filesystem::path& path);
std::string ConfigHash(const PipelineConfig& cfg);

struct StageOutcome {
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string summary;  // JSON object, stage specific
};

const std::vector<std::string>& StageNames();

// Runs one stage and writes <out>/manifests/<stage>.json.
StageOutcome RunStage(const std::string& stage, const PipelineConfig& cfg);

// CLI exit status for an error category.
int ExitCodeFor(ErrorKind kind);

// Artifact locations under cfg.out.
std::filesystem::path ScenarioPath(const PipelineConfig& cfg);
std::filesystem::path SweepPath(const PipelineConfig& cfg);
std::filesystem::path SelectorPath(const PipelineConfig& cfg);
std::filesystem::path ExpressionPath(const PipelineConfig& cfg, const std::string& stage,
                                     bool no_sft = false);
std::filesystem::path ManifestPath(const PipelineConfig& cfg, const std::string& stage);

// Builds an evaluation policy factory for a named method using the
// checkpoints under `checkpoint_dir`.
PolicyFactory MakeMethodFactory(const std::string& method, const PipelineConfig& cfg,
                                const std::filesystem::path& checkpoint_dir);

// Validation metrics recorded by training stages and reproduced by eval.
MetricsReport ValidateMethod(const std::string& method, const PipelineConfig& cfg);

}  // namespace emoneg

#endif  // EMONEG_PIPELINE_HPP_
