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

#include "emoneg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "emoneg/external.hpp"
#include "emoneg/scenario.hpp"

namespace emoneg {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson ToJson(const PipelineConfig& c) {
  ojson j;
  j["domain"] = c.domain;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  j["workers"] = c.workers;
  j["counterparty"] = c.counterparty;
  j["emotion_free"] = c.emotion_free;
  j["reward_variant"] = c.reward_variant;
  j["gen"] = {{"n_scenarios", c.gen.n_scenarios}, {"scenario_file", c.gen.scenario_file}};
  j["sweep"] = {{"m_rollouts", c.sweep.m_rollouts},
                {"behavior", c.sweep.behavior},
                {"kappa", c.sweep.kappa}};
  j["iql"] = {{"tau_exp", c.iql.tau_exp},   {"beta_awr", c.iql.beta_awr},
              {"gamma", c.iql.gamma},       {"steps", c.iql.steps},
              {"learning_rate", c.iql.learning_rate}, {"variant", c.iql.variant}};
  j["sft"] = {{"filter_fraction", c.sft.filter_fraction},
              {"steps", c.sft.steps},
              {"learning_rate", c.sft.learning_rate},
              {"batch", c.sft.batch}};
  j["jpo"] = {{"clip_eps", c.jpo.clip_eps}, {"lambda_kl", c.jpo.lambda_kl},
              {"kappa", c.jpo.kappa},       {"steps", c.jpo.steps},
              {"learning_rate", c.jpo.learning_rate}, {"batch", c.jpo.batch},
              {"variant", c.jpo.variant},   {"no_sft", c.jpo.no_sft}};
  j["alol"] = {{"steps", c.alol.steps}, {"learning_rate", c.alol.learning_rate}};
  j["eval"] = {{"method", c.eval.method},
               {"seeds", c.eval.seeds},
               {"selector_mode", c.eval.selector_mode},
               {"action_mode", c.eval.action_mode},
               {"scenario_file", c.eval.scenario_file},
               {"checkpoint_dir", c.eval.checkpoint_dir},
               {"bootstrap_resamples", c.eval.bootstrap_resamples}};
  j["study"] = {{"scenarios", c.study.scenarios},
                {"runs", c.study.runs},
                {"metric", c.study.metric}};
  j["tournament"] = {{"focal", c.tournament.focal},
                     {"counterparties", c.tournament.counterparties}};
  j["backend"] = {{"agent_command", c.backend.agent_command},
                  {"judge_command", c.backend.judge_command},
                  {"timeout_ms", c.backend.timeout_ms}};
  return j;
}

void CheckKeys(const ojson& given, const ojson& known, const std::string& prefix) {
  for (const auto& [key, value] : given.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!known.contains(key)) Fail(ErrorKind::kUsage, "unknown config key '" + name + "'");
    if (known[key].is_object() != value.is_object()) {
      Fail(ErrorKind::kUsage, "config key '" + name + "' has the wrong shape");
    }
    if (value.is_object()) CheckKeys(value, known[key], name);
  }
}

template <typename T>
void Get(const ojson& j, const char* key, T& dst) {
  dst = j.at(key).get<T>();
}

PipelineConfig FromJson(const ojson& j) {
  PipelineConfig c;
  Get(j, "domain", c.domain);
  Get(j, "seed", c.seed);
  c.out = j.at("out").get<std::string>();
  Get(j, "workers", c.workers);
  Get(j, "counterparty", c.counterparty);
  Get(j, "emotion_free", c.emotion_free);
  Get(j, "reward_variant", c.reward_variant);
  const auto& g = j.at("gen");
  Get(g, "n_scenarios", c.gen.n_scenarios);
  Get(g, "scenario_file", c.gen.scenario_file);
  const auto& s = j.at("sweep");
  Get(s, "m_rollouts", c.sweep.m_rollouts);
  Get(s, "behavior", c.sweep.behavior);
  Get(s, "kappa", c.sweep.kappa);
  const auto& q = j.at("iql");
  Get(q, "tau_exp", c.iql.tau_exp);
  Get(q, "beta_awr", c.iql.beta_awr);
  Get(q, "gamma", c.iql.gamma);
  Get(q, "steps", c.iql.steps);
  Get(q, "learning_rate", c.iql.learning_rate);
  Get(q, "variant", c.iql.variant);
  const auto& f = j.at("sft");
  Get(f, "filter_fraction", c.sft.filter_fraction);
  Get(f, "steps", c.sft.steps);
  Get(f, "learning_rate", c.sft.learning_rate);
  Get(f, "batch", c.sft.batch);
  const auto& p = j.at("jpo");
  Get(p, "clip_eps", c.jpo.clip_eps);
  Get(p, "lambda_kl", c.jpo.lambda_kl);
  Get(p, "kappa", c.jpo.kappa);
  Get(p, "steps", c.jpo.steps);
  Get(p, "learning_rate", c.jpo.learning_rate);
  Get(p, "batch", c.jpo.batch);
  Get(p, "variant", c.jpo.variant);
  Get(p, "no_sft", c.jpo.no_sft);
  const auto& a = j.at("alol");
  Get(a, "steps", c.alol.steps);
  Get(a, "learning_rate", c.alol.learning_rate);
  const auto& e = j.at("eval");
  Get(e, "method", c.eval.method);
  Get(e, "seeds", c.eval.seeds);
  Get(e, "selector_mode", c.eval.selector_mode);
  Get(e, "action_mode", c.eval.action_mode);
  Get(e, "scenario_file", c.eval.scenario_file);
  Get(e, "checkpoint_dir", c.eval.checkpoint_dir);
  Get(e, "bootstrap_resamples", c.eval.bootstrap_resamples);
  const auto& st = j.at("study");
  Get(st, "scenarios", c.study.scenarios);
  Get(st, "runs", c.study.runs);
  Get(st, "metric", c.study.metric);
  const auto& t = j.at("tournament");
  Get(t, "focal", c.tournament.focal);
  Get(t, "counterparties", c.tournament.counterparties);
  const auto& b = j.at("backend");
  Get(b, "agent_command", c.backend.agent_command);
  Get(b, "judge_command", c.backend.judge_command);
  Get(b, "timeout_ms", c.backend.timeout_ms);
  return c;
}

std::string Suffix(const PipelineConfig& cfg) { return cfg.emotion_free ? "_ef" : ""; }

fs::path CheckpointDir(const PipelineConfig& cfg) {
  return cfg.eval.checkpoint_dir.empty() ? cfg.out : fs::path(cfg.eval.checkpoint_dir);
}

void RequireArtifact(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) {
    Fail(ErrorKind::kPrecondition,
         "missing " + what + " (" + p.string() + "); run the producing stage first");
  }
}

std::vector<Scenario> LoadScenarioArtifact(const PipelineConfig& cfg) {
  RequireArtifact(ScenarioPath(cfg), "scenario file");
  return LoadScenarios(ScenarioPath(cfg));
}

Dataset LoadSweepArtifact(const PipelineConfig& cfg) {
  const auto scenarios = LoadScenarioArtifact(cfg);
  RequireArtifact(SweepPath(cfg), "sweep store");
  return LoadDataset(SweepPath(cfg), scenarios);
}

std::vector<Scenario> EvalScenarios(const PipelineConfig& cfg) {
  const fs::path path =
      cfg.eval.scenario_file.empty() ? ScenarioPath(cfg) : fs::path(cfg.eval.scenario_file);
  RequireArtifact(path, "evaluation scenario file");
  auto test = FilterSplit(LoadScenarios(path), Split::kTest);
  Require(!test.empty(), ErrorKind::kPrecondition,
          "no test-split scenarios in " + path.string());
  return test;
}

SelectMode ParseSelectMode(const std::string& s) {
  if (s == "greedy") return SelectMode::kGreedy;
  if (s == "sample") return SelectMode::kSample;
  Fail(ErrorKind::kConfiguration, "unknown selection mode '" + s + "' (greedy|sample)");
}

ShapingParams Shaping(const PipelineConfig& cfg) {
  ShapingParams p;
  p.kappa = cfg.sweep.kappa;
  ValidateShaping(p);
  return p;
}

void WriteLossLog(const fs::path& path, const std::vector<LossPoint>& log) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kStorage, "cannot write " + path.string());
  for (const auto& p : log) {
    ojson j;
    j["step"] = p.step;
    j["loss"] = p.loss;
    out << j.dump() << '\n';
  }
}

std::vector<double> ReadLossSeries(const fs::path& path, const char* key) {
  std::ifstream in(path, std::ios::binary);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line).at(key).get<double>());
  }
  return out;
}

ojson MetricsJson(const MetricsReport& m) {
  ojson j;
  j["success_pct"] = m.success_pct;
  j["outcomes_mean"] = m.outcomes_mean ? ojson(*m.outcomes_mean) : ojson(nullptr);
  j["outcomes_std"] = m.outcomes_std ? ojson(*m.outcomes_std) : ojson(nullptr);
  j["utility_mean"] = m.utility_mean;
  j["utility_std"] = m.utility_std;
  j["rounds_mean"] = m.rounds_mean;
  j["rounds_std"] = m.rounds_std;
  j["turn_score_mean"] = m.turn_score_mean;
  j["ci_lo"] = m.outcomes_ci ? ojson(m.outcomes_ci->first) : ojson(nullptr);
  j["ci_hi"] = m.outcomes_ci ? ojson(m.outcomes_ci->second) : ojson(nullptr);
  j["n_episodes"] = m.n_episodes;
  j["aborted"] = m.aborted;
  return j;
}

MetricsReport MetricsFromJson(const ojson& j) {
  MetricsReport m;
  m.success_pct = j.at("success_pct").get<double>();
  if (!j.at("outcomes_mean").is_null()) m.outcomes_mean = j["outcomes_mean"].get<double>();
  if (!j.at("outcomes_std").is_null()) m.outcomes_std = j["outcomes_std"].get<double>();
  m.utility_mean = j.at("utility_mean").get<double>();
  m.utility_std = j.at("utility_std").get<double>();
  m.rounds_mean = j.at("rounds_mean").get<double>();
  m.rounds_std = j.at("rounds_std").get<double>();
  m.turn_score_mean = j.at("turn_score_mean").get<double>();
  if (!j.at("ci_lo").is_null()) {
    m.outcomes_ci = std::make_pair(j["ci_lo"].get<double>(), j["ci_hi"].get<double>());
  }
  m.n_episodes = j.at("n_episodes").get<std::size_t>();
  m.aborted = j.at("aborted").get<std::size_t>();
  return m;
}

EvalSettings MakeEvalSettings(const PipelineConfig& cfg) {
  EvalSettings es;
  Require(!cfg.eval.seeds.empty(), ErrorKind::kConfiguration, "eval.seeds is empty");
  es.seeds = cfg.eval.seeds;
  es.workers = cfg.workers;
  es.bootstrap_resamples = cfg.eval.bootstrap_resamples;
  es.bootstrap_seed = DeriveSeed(cfg.seed, Fnv1a64("bootstrap"));
  return es;
}

// Which trained artifacts a method name refers to.
struct MethodSpec {
  EmotionSource emotion = EmotionSource::kNeutral;
  std::string expression;  // "", "sft", "jpo", "alol"
  bool no_sft = false;
  bool external = false;
};

MethodSpec ParseMethod(const std::string& method) {
  static const std::vector<std::string> kKnown{
      "random", "vanilla",   "neutral",     "iql",      "iql+sft", "iql+jpo", "iql+sft+jpo",
      "iql+alol", "sft",     "jpo",         "sft+jpo",  "alol",    "external", "iql+external"};
  Require(std::find(kKnown.begin(), kKnown.end(), method) != kKnown.end(),
          ErrorKind::kConfiguration, "unknown method '" + method + "'");
  MethodSpec m;
  if (method == "random") m.emotion = EmotionSource::kUniform;
  if (method.rfind("iql", 0) == 0) m.emotion = EmotionSource::kSelector;
  if (method.find("external") != std::string::npos) m.external = true;
  if (method.find("jpo") != std::string::npos) {
    m.expression = "jpo";
    m.no_sft = method.find("sft") == std::string::npos;
  } else if (method.find("alol") != std::string::npos) {
    m.expression = "alol";
  } else if (method.find("sft") != std::string::npos) {
    m.expression = "sft";
  }
  return m;
}

std::string DefaultValidationMethod(const std::string& stage, const PipelineConfig& cfg) {
  const std::string prefix = cfg.emotion_free ? "" : "iql+";
  if (stage == "train-iql") return "iql";
  if (stage == "train-sft") return prefix + "sft";
  if (stage == "train-alol") return prefix + "alol";
  return prefix + (cfg.jpo.no_sft ? "jpo" : "sft+jpo");
}

ojson ValidationJson(const std::string& method, const PipelineConfig& cfg) {
  ojson v = MetricsJson(ValidateMethod(method, cfg));
  v["method"] = method;
  return v;
}

// (index into turns) of the top-fraction demonstrations, best first.
std::vector<std::size_t> DemoIndices(const std::vector<SweepTurn>& turns, double fraction) {
  std::vector<FilterKey> keys;
  keys.reserve(turns.size());
  for (const auto& t : turns) keys.push_back({t.scenario_id, t.state.turn + 1, t.q_hyb});
  return FilterTopFraction(keys, fraction);
}

template <typename T>
std::vector<T> Pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

ExpressionBatch RefinementBatch(const PipelineConfig& cfg, const Dataset& dataset,
                                RewardVariant variant, std::size_t* negatives) {
  const auto turns = FlattenDataset(dataset);
  Require(!turns.empty(), ErrorKind::kTraining, "the sweep has no transitions");
  const auto all_adv = TurnAdvantages(turns, AdvantageSourceFor(variant));
  const auto idx = DemoIndices(turns, cfg.sft.filter_fraction);
  const auto adv = Pick(all_adv, idx);
  if (negatives) {
    *negatives = static_cast<std::size_t>(
        std::count_if(adv.begin(), adv.end(), [](double a) { return a <= 0.0; }));
  }
  return BuildExpressionBatch(Pick(turns, idx), adv,
                              cfg.emotion_free ? ExpressionMode::kEmotionFree
                                               : ExpressionMode::kConditional);
}

ExpressionParams LoadReference(const PipelineConfig& cfg, fs::path* parent) {
  const ExpressionMode mode =
      cfg.emotion_free ? ExpressionMode::kEmotionFree : ExpressionMode::kConditional;
  if (cfg.jpo.no_sft) {
    *parent = "none";
    ExpressionParams p;
    p.mode = mode;
    return p;
  }
  const fs::path sft = ExpressionPath(cfg, "sft");
  RequireArtifact(sft, "SFT checkpoint (or pass --no-sft)");
  ExpressionParams p = LoadExpression(sft).params;
  Require(p.mode == mode, ErrorKind::kPrecondition,
          "SFT checkpoint mode does not match --emotion-free");
  *parent = sft;
  return p;
}

std::map<std::string, std::string> JpoHeader(const PipelineConfig& cfg, RewardVariant v) {
  return {{"clip_eps", FormatDouble(cfg.jpo.clip_eps)},
          {"lambda_kl", FormatDouble(cfg.jpo.lambda_kl)},
          {"kappa", FormatDouble(cfg.jpo.kappa)},
          {"steps", std::to_string(cfg.jpo.steps)},
          {"learning_rate", FormatDouble(cfg.jpo.learning_rate)},
          {"batch", std::to_string(cfg.jpo.batch)},
          {"variant", std::string(RewardVariantName(v))},
          {"filter_fraction", FormatDouble(cfg.sft.filter_fraction)}};
}

RewardVariant StageVariant(const PipelineConfig& cfg, const std::string& fallback) {
  return ParseRewardVariant(cfg.reward_variant.empty() ? fallback : cfg.reward_variant);
}

// ---- stages ---------------------------------------------------------------

StageOutcome StageGen(const PipelineConfig& cfg) {
  StageOutcome o;
  std::vector<Scenario> scenarios;
  if (!cfg.gen.scenario_file.empty()) {
    RequireArtifact(cfg.gen.scenario_file, "scenario import file");
    scenarios = LoadScenarios(cfg.gen.scenario_file);
    o.inputs.push_back(cfg.gen.scenario_file);
  } else {
    scenarios = GenerateScenarios(DefaultDomain(cfg.domain), cfg.gen.n_scenarios,
                                  DeriveSeed(cfg.seed, Fnv1a64("gen")));
  }
  SaveScenarios(ScenarioPath(cfg), scenarios);
  o.outputs.push_back(ScenarioPath(cfg));
  ojson s;
  s["scenarios"] = scenarios.size();
  s["train"] = FilterSplit(scenarios, Split::kTrain).size();
  s["test"] = FilterSplit(scenarios, Split::kTest).size();
  o.summary = s.dump();
  return o;
}

StageOutcome StageSweep(const PipelineConfig& cfg) {
  StageOutcome o;
  const auto scenarios = LoadScenarioArtifact(cfg);
  o.inputs.push_back(ScenarioPath(cfg));
  const auto train = FilterSplit(scenarios, Split::kTrain);
  Require(!train.empty(), ErrorKind::kPrecondition, "no train-split scenarios");
  SweepConfig sc;
  sc.n_scenarios = train.size();
  sc.m_rollouts = cfg.sweep.m_rollouts;
  sc.seed = DeriveSeed(cfg.seed, Fnv1a64("sweep"));
  if (cfg.sweep.behavior == "random") {
    sc.behavior_policy = BehaviorKind::kRandom;
  } else if (cfg.sweep.behavior == "scripted") {
    sc.behavior_policy = BehaviorKind::kScripted;
  } else {
    Fail(ErrorKind::kConfiguration, "unknown behavior policy '" + cfg.sweep.behavior + "'");
  }
  sc.profile = NamedProfile(cfg.counterparty);
  sc.shaping = Shaping(cfg);
  sc.workers = cfg.workers;
  const SweepResult r = GenerateSweep(train, sc);
  SaveStore(SweepPath(cfg), r.dataset);
  o.outputs.push_back(SweepPath(cfg));
  ojson s;
  s["trajectories"] = r.summary.trajectories;
  s["transitions"] = r.summary.transitions;
  s["accepted"] = r.summary.accepted;
  s["aborted"] = r.summary.aborted;
  o.summary = s.dump();
  return o;
}

StageOutcome StageTrainIql(const PipelineConfig& cfg) {
  StageOutcome o;
  const Dataset ds = LoadSweepArtifact(cfg);
  o.inputs = {ScenarioPath(cfg), SweepPath(cfg)};
  const RewardVariant variant = StageVariant(cfg, cfg.iql.variant);
  IqlHParams hp;
  hp.tau_exp = cfg.iql.tau_exp;
  hp.beta_awr = cfg.iql.beta_awr;
  hp.gamma = cfg.iql.gamma;
  hp.steps = cfg.iql.steps;
  hp.learning_rate = cfg.iql.learning_rate;
  hp.seed = cfg.seed;
  hp.variant = variant;
  const IqlResult r = FitIql(BuildIqlSamples(ds, variant, Shaping(cfg)), hp);
  SelectorCheckpoint ck;
  ck.params = r.params;
  ck.policy = ExtractAwrPolicy(r.params);
  ck.seed = cfg.seed;
  ck.variant = std::string(RewardVariantName(variant));
  SaveSelector(SelectorPath(cfg), ck);
  const fs::path log = cfg.out / "iql_loss.jsonl";
  {
    std::ofstream out(log, std::ios::binary);
    for (const auto& p : r.log) {
      ojson j;
      j["step"] = p.step;
      j["loss_v"] = p.loss_v;
      j["loss_q"] = p.loss_q;
      j["loss_pi"] = p.loss_pi;
      out << j.dump() << '\n';
    }
  }
  o.outputs = {SelectorPath(cfg), log};
  ojson s;
  s["steps_run"] = r.steps_run;
  s["loss_v"] = r.log.back().loss_v;
  s["loss_q"] = r.log.back().loss_q;
  s["agreement_rate"] = SelectorAgreementRate(FlattenDataset(ds), ck.policy);
  s["validation"] = ValidationJson("iql", cfg);
  o.summary = s.dump();
  return o;
}

StageOutcome StageTrainSft(const PipelineConfig& cfg) {
  StageOutcome o;
  const Dataset ds = LoadSweepArtifact(cfg);
  o.inputs = {ScenarioPath(cfg), SweepPath(cfg)};
  const ExpressionMode mode =
      cfg.emotion_free ? ExpressionMode::kEmotionFree : ExpressionMode::kConditional;
  const auto turns = FlattenDataset(ds);
  const auto demos = Pick(turns, DemoIndices(turns, cfg.sft.filter_fraction));
  SftHParams hp;
  hp.steps = cfg.sft.steps;
  hp.learning_rate = cfg.sft.learning_rate;
  hp.batch = cfg.sft.batch;
  hp.seed = cfg.seed;
  const SftResult r = FitSft(BuildExpressionBatch(demos, {}, mode), mode, hp);
  ExpressionCheckpoint ck;
  ck.params = r.params;
  ck.stage = "sft";
  ck.seed = cfg.seed;
  ck.hparams = {{"steps", std::to_string(hp.steps)},
                {"learning_rate", FormatDouble(hp.learning_rate)},
                {"batch", std::to_string(hp.batch)},
                {"filter_fraction", FormatDouble(cfg.sft.filter_fraction)}};
  const fs::path ckpt = ExpressionPath(cfg, "sft");
  SaveExpression(ckpt, ck);
  const fs::path log = cfg.out / ("sft_loss" + Suffix(cfg) + ".jsonl");
  WriteLossLog(log, r.log);
  o.outputs = {ckpt, log};
  ojson s;
  s["demonstrations"] = demos.size();
  s["loss_first"] = r.log.front().loss;
  s["loss_last"] = r.log.back().loss;
  const bool has_selector = fs::exists(SelectorPath(cfg));
  if (has_selector || cfg.emotion_free) {
    s["validation"] = ValidationJson(DefaultValidationMethod("train-sft", cfg), cfg);
  }
  o.summary = s.dump();
  return o;
}

StageOutcome StageTrainJpo(const PipelineConfig& cfg) {
  StageOutcome o;
  const Dataset ds = LoadSweepArtifact(cfg);
  o.inputs = {ScenarioPath(cfg), SweepPath(cfg)};
  fs::path parent;
  const ExpressionParams ref = LoadReference(cfg, &parent);
  if (!cfg.jpo.no_sft) o.inputs.push_back(parent);
  const RewardVariant variant = StageVariant(cfg, cfg.jpo.variant);
  std::size_t negatives = 0;
  const ExpressionBatch batch = RefinementBatch(cfg, ds, variant, &negatives);
  JpoHParams hp;
  hp.clip_eps = cfg.jpo.clip_eps;
  hp.lambda_kl = cfg.jpo.lambda_kl;
  hp.kappa = cfg.jpo.kappa;
  hp.steps = cfg.jpo.steps;
  hp.learning_rate = cfg.jpo.learning_rate;
  hp.batch = cfg.jpo.batch;
  hp.seed = cfg.seed;
  const JpoResult r = FitJpo(batch, ref, hp);
  ExpressionCheckpoint ck;
  ck.params = r.params;
  ck.stage = "jpo";
  ck.seed = cfg.seed;
  ck.parent = parent == "none" ? parent.string() : parent.lexically_relative(cfg.out).string();
  ck.hparams = JpoHeader(cfg, variant);
  const fs::path ckpt = ExpressionPath(cfg, "jpo", cfg.jpo.no_sft);
  SaveExpression(ckpt, ck);
  const fs::path log = cfg.out / ("jpo_stability" + std::string(cfg.jpo.no_sft ? "_nosft" : "") +
                                  Suffix(cfg) + ".jsonl");
  SaveStabilityLog(log, r.log);
  o.outputs = {ckpt, log};
  ojson s;
  s["samples"] = batch.size();
  s["negative_advantages"] = negatives;
  s["skipped"] = r.skipped;
  if (r.log.size() >= 4) {
    const StabilitySummary st = SummarizeStability(r.log);
    s["loss_median"] = st.median;
    s["loss_mad"] = st.mad;
    s["clip_count"] = st.clip_count;
    s["spike_count"] = st.spike_count;
  }
  if (fs::exists(SelectorPath(cfg)) || cfg.emotion_free) {
    s["validation"] = ValidationJson(DefaultValidationMethod("train-jpo", cfg), cfg);
  }
  o.summary = s.dump();
  return o;
}

StageOutcome StageTrainAlol(const PipelineConfig& cfg) {
  StageOutcome o;
  const Dataset ds = LoadSweepArtifact(cfg);
  o.inputs = {ScenarioPath(cfg), SweepPath(cfg)};
  PipelineConfig with_ref = cfg;
  fs::path parent;
  const ExpressionParams ref = LoadReference(with_ref, &parent);
  if (!cfg.jpo.no_sft) o.inputs.push_back(parent);
  const RewardVariant variant = StageVariant(cfg, cfg.jpo.variant);
  const ExpressionBatch batch = RefinementBatch(cfg, ds, variant, nullptr);
  AlolHParams hp;
  hp.steps = cfg.alol.steps;
  hp.learning_rate = cfg.alol.learning_rate;
  const SftResult r = FitAlol(batch, ref, hp);
  ExpressionCheckpoint ck;
  ck.params = r.params;
  ck.stage = "alol";
  ck.seed = cfg.seed;
  ck.parent = parent == "none" ? parent.string() : parent.lexically_relative(cfg.out).string();
  ck.hparams = {{"steps", std::to_string(hp.steps)},
                {"learning_rate", FormatDouble(hp.learning_rate)},
                {"variant", std::string(RewardVariantName(variant))}};
  const fs::path ckpt = ExpressionPath(cfg, "alol");
  SaveExpression(ckpt, ck);
  const fs::path log = cfg.out / ("alol_loss" + Suffix(cfg) + ".jsonl");
  WriteLossLog(log, r.log);
  o.outputs = {ckpt, log};
  ojson s;
  s["samples"] = batch.size();
  s["loss_first"] = r.log.empty() ? 0.0 : r.log.front().loss;
  s["loss_last"] = r.log.empty() ? 0.0 : r.log.back().loss;
  if (fs::exists(SelectorPath(cfg)) || cfg.emotion_free) {
    s["validation"] = ValidationJson(DefaultValidationMethod("train-alol", cfg), cfg);
  }
  o.summary = s.dump();
  return o;
}

std::string EvalFileStem(const PipelineConfig& cfg, const std::string& method) {
  std::string m = method;
  std::replace(m.begin(), m.end(), '+', '-');
  return m + "__" + cfg.counterparty + "__" + cfg.domain + Suffix(cfg);
}

StageOutcome StageEval(const PipelineConfig& cfg) {
  StageOutcome o;
  const std::string& method = cfg.eval.method;
  const MetricsReport m = ValidateMethod(method, cfg);
  fs::create_directories(cfg.out / "eval");
  const fs::path path = cfg.out / "eval" / (EvalFileStem(cfg, method) + ".json");
  ojson j;
  j["method"] = method;
  j["domain"] = cfg.domain;
  j["counterparty"] = cfg.counterparty;
  j["emotion_free"] = cfg.emotion_free;
  j["metrics"] = MetricsJson(m);
  ojson eps = ojson::array();
  for (const auto& e : m.episodes) {
    ojson r;
    r["scenario_id"] = e.scenario_id;
    r["seed"] = e.seed;
    r["status"] = std::string(StatusName(e.status));
    r["final_value"] = e.final_value ? ojson(*e.final_value) : ojson(nullptr);
    r["rounds"] = e.rounds;
    r["sav"] = e.sav ? ojson(*e.sav) : ojson(nullptr);
    r["utility"] = e.utility;
    r["mean_turn_score"] = e.mean_turn_score;
    if (e.error) r["error"] = *e.error;
    eps.push_back(std::move(r));
  }
  j["episodes"] = std::move(eps);
  {
    std::ofstream out(path, std::ios::binary);
    out << j.dump(1) << '\n';
  }
  o.inputs.push_back(CheckpointDir(cfg));
  o.outputs.push_back(path);
  ojson s;
  s["validation"] = MetricsJson(m);
  s["validation"]["method"] = method;
  o.summary = s.dump();
  return o;
}

CounterpartyEntry MakeCounterparty(const std::string& spec, const PipelineConfig& cfg) {
  CounterpartyEntry e;
  e.name = spec;
  if (spec.rfind("policy:", 0) == 0) {
    e.profile = NamedProfile(cfg.counterparty);
    e.policy = MakeMethodFactory(spec.substr(7), cfg, CheckpointDir(cfg));
  } else {
    e.profile = NamedProfile(spec);
  }
  return e;
}

StageOutcome StageTournament(const PipelineConfig& cfg) {
  StageOutcome o;
  const auto scenarios = EvalScenarios(cfg);
  std::vector<FocalEntry> focal;
  for (const auto& f : cfg.tournament.focal) {
    focal.push_back({f, MakeMethodFactory(f, cfg, CheckpointDir(cfg))});
  }
  std::vector<CounterpartyEntry> ctps;
  for (const auto& c : cfg.tournament.counterparties) ctps.push_back(MakeCounterparty(c, cfg));
  const TournamentResult r = RunTournament(focal, ctps, scenarios, MakeEvalSettings(cfg));
  const fs::path jsonl = cfg.out / "tournament.jsonl";
  const fs::path table = cfg.out / "tournament.txt";
  std::vector<ReportRow> rows;
  {
    std::ofstream out(jsonl, std::ios::binary);
    for (const auto& cell : r.cells) {
      ojson j;
      j["focal"] = cell.focal;
      j["counterparty"] = cell.counterparty;
      j["mirrored"] = cell.mirrored;
      j["metrics"] = MetricsJson(cell.report);
      out << j.dump() << '\n';
      rows.push_back({cell.focal, cfg.domain, cell.counterparty, cell.report});
    }
  }
  {
    std::ofstream out(table, std::ios::binary);
    WriteReportTable(out, rows);
  }
  o.inputs.push_back(CheckpointDir(cfg));
  o.outputs = {jsonl, table};
  ojson s;
  s["cells"] = r.cells.size();
  o.summary = s.dump();
  return o;
}

StageOutcome StageEmotionStudy(const PipelineConfig& cfg) {
  StageOutcome o;
  auto scenarios = EvalScenarios(cfg);
  Require(cfg.study.scenarios >= 2, ErrorKind::kConfiguration,
          "study.scenarios must be at least 2");
  if (scenarios.size() > cfg.study.scenarios) scenarios.resize(cfg.study.scenarios);
  Require(scenarios.size() >= 2, ErrorKind::kPrecondition,
          "emotion study needs at least 2 test scenarios");
  Require(cfg.study.runs >= 1, ErrorKind::kConfiguration, "study.runs must be >= 1");
  Require(cfg.study.metric == "utility" || cfg.study.metric == "judge",
          ErrorKind::kConfiguration, "study.metric must be utility or judge");
  EvalSettings es = MakeEvalSettings(cfg);
  es.seeds.clear();
  for (std::size_t j = 0; j < cfg.study.runs; ++j) {
    es.seeds.push_back(DeriveSeed(cfg.seed, Fnv1a64("study"), j));
  }
  es.bootstrap_resamples = 0;
  const CounterpartyProfile profile = NamedProfile(cfg.counterparty);
  RewardTensor tensor(kNumEmotions);
  for (int e = 0; e < kNumEmotions; ++e) {
    ComposedPolicyConfig pc;
    pc.name = std::string(EmotionId(e).label());
    pc.emotion_source = EmotionSource::kFixed;
    pc.fixed_emotion = EmotionId(e);
    const MetricsReport m = Evaluate(
        [pc] { return std::make_unique<ComposedPolicy>(pc); }, scenarios, profile, es);
    auto& slice = tensor[static_cast<std::size_t>(e)];
    slice.assign(scenarios.size(), {});
    for (std::size_t k = 0; k < m.episodes.size(); ++k) {
      const auto& ep = m.episodes[k];
      slice[k / es.seeds.size()].push_back(cfg.study.metric == "utility" ? ep.utility
                                                                         : ep.mean_turn_score);
    }
  }
  const auto rows = EmotionStudy(tensor);
  const fs::path tsv = cfg.out / "emotion_study.tsv";
  const fs::path jsonl = cfg.out / "emotion_study.jsonl";
  {
    std::ofstream out(tsv, std::ios::binary);
    WriteEmotionPlotData(out, rows);
  }
  std::size_t significant = 0;
  {
    std::ofstream out(jsonl, std::ios::binary);
    for (const auto& r : rows) {
      ojson j;
      j["emotion"] = std::string(r.emotion.label());
      j["mean"] = r.mean;
      j["ci_lo"] = r.ci_lo;
      j["ci_hi"] = r.ci_hi;
      j["delta_mean"] = r.delta_mean;
      j["t"] = std::isfinite(r.t) ? ojson(r.t) : ojson(r.t > 0 ? "inf" : "-inf");
      j["p"] = r.p;
      j["significant"] = r.significant;
      j["degenerate"] = r.degenerate;
      out << j.dump() << '\n';
      significant += r.significant ? 1 : 0;
    }
  }
  o.inputs.push_back(ScenarioPath(cfg));
  o.outputs = {tsv, jsonl};
  ojson s;
  s["alpha_bonferroni"] = kBonferroniAlpha;
  s["significant"] = significant;
  o.summary = s.dump();
  return o;
}

StageOutcome StageReport(const PipelineConfig& cfg) {
  StageOutcome o;
  const fs::path dir = cfg.out / "eval";
  RequireArtifact(dir, "evaluation results directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Require(!files.empty(), ErrorKind::kPrecondition, "no evaluation results to report");
  std::vector<ReportRow> rows;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    ojson j;
    try {
      j = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kStorage, "bad evaluation file " + f.string() + ": " + e.what());
    }
    std::string method = j.at("method").get<std::string>();
    if (j.value("emotion_free", false)) method += " (emotion-free)";
    rows.push_back({method, j.at("domain").get<std::string>(),
                    j.at("counterparty").get<std::string>(), MetricsFromJson(j.at("metrics"))});
    o.inputs.push_back(f);
  }
  const fs::path table = cfg.out / "report.txt";
  const fs::path jsonl = cfg.out / "report.jsonl";
  {
    std::ofstream out(table, std::ios::binary);
    WriteReportTable(out, rows);
    // Training stability over the final quarter of each logged run.
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (const auto& e : fs::directory_iterator(cfg.out)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("iql_loss", 0) == 0) {
        series.emplace_back(name + " loss_q", ReadLossSeries(e.path(), "loss_q"));
      } else if (name.find("_loss") != std::string::npos ||
                 name.rfind("jpo_stability", 0) == 0) {
        series.emplace_back(name, ReadLossSeries(e.path(), "loss"));
      }
    }
    std::sort(series.begin(), series.end());
    if (!series.empty()) out << "\nstability (final 25%)\n";
    for (const auto& [name, values] : series) {
      if (values.size() < 4) continue;
      StabilitySummary s;
      if (name.rfind("jpo_stability", 0) == 0) {
        s = SummarizeStability(LoadStabilityLog(cfg.out / name));
      } else {
        s = SummarizeSeries(values);
      }
      char line[256];
      std::snprintf(line, sizeof line, "%-34s median %.5f  mad %.5f  spikes %d  clips %d\n",
                    name.c_str(), s.median, s.mad, s.spike_count, s.clip_count);
      out << line;
    }
  }
  {
    std::ofstream out(jsonl, std::ios::binary);
    WriteReportJsonl(out, rows);
  }
  o.outputs = {table, jsonl};
  ojson s;
  s["rows"] = rows.size();
  o.summary = s.dump();
  return o;
}

void WriteManifest(const std::string& stage, const PipelineConfig& cfg,
                   const StageOutcome& o, double seconds) {
  fs::create_directories(cfg.out / "manifests");
  ojson j;
  j["stage"] = stage;
  j["config_hash"] = ConfigHash(cfg);
  j["seed"] = cfg.seed;
  ojson in = ojson::array();
  for (const auto& p : o.inputs) in.push_back(p.string());
  ojson out = ojson::array();
  for (const auto& p : o.outputs) out.push_back(p.string());
  j["inputs"] = std::move(in);
  j["outputs"] = std::move(out);
  j["wall_time_s"] = seconds;
  j["summary"] = o.summary.empty() ? ojson::object() : ojson::parse(o.summary);
  j["config"] = ToJson(cfg);
  std::ofstream f(ManifestPath(cfg, stage), std::ios::binary);
  Require(static_cast<bool>(f), ErrorKind::kStorage, "cannot write manifest");
  f << j.dump(2) << '\n';
}

}  // namespace

std::string ConfigToJson(const PipelineConfig& cfg) { return ToJson(cfg).dump(2); }

PipelineConfig ConfigFromJson(const std::string& text) {
  ojson given;
  try {
    given = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kUsage, std::string("config parse error: ") + e.what());
  }
  if (!given.is_object()) Fail(ErrorKind::kUsage, "config must be a JSON object");
  ojson merged = ToJson(PipelineConfig{});
  CheckKeys(given, merged, "");
  merged.merge_patch(given);
  try {
    return FromJson(merged);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kUsage, std::string("config value error: ") + e.what());
  }
}

PipelineConfig LoadConfig(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kUsage, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ConfigFromJson(ss.str());
}

std::string ConfigHash(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(Fnv1a64(ToJson(cfg).dump())));
  return buf;
}

const std::vector<std::string>& StageNames() {
  static const std::vector<std::string> kStages{
      "gen",  "sweep",      "train-iql",     "train-sft", "train-jpo",
      "train-alol", "eval", "tournament", "emotion-study", "report"};
  return kStages;
}

fs::path ScenarioPath(const PipelineConfig& cfg) { return cfg.out / "scenarios.jsonl"; }
fs::path SweepPath(const PipelineConfig& cfg) { return cfg.out / "sweep.jsonl"; }
fs::path SelectorPath(const PipelineConfig& cfg) { return cfg.out / "selector.txt"; }
fs::path ExpressionPath(const PipelineConfig& cfg, const std::string& stage, bool no_sft) {
  return cfg.out / (stage + (no_sft ? "_nosft" : "") + Suffix(cfg) + ".txt");
}
fs::path ManifestPath(const PipelineConfig& cfg, const std::string& stage) {
  return cfg.out / "manifests" / (stage + Suffix(cfg) + ".json");
}

PolicyFactory MakeMethodFactory(const std::string& method, const PipelineConfig& cfg,
                                const fs::path& checkpoint_dir) {
  const MethodSpec spec = ParseMethod(method);
  PipelineConfig at = cfg;
  at.out = checkpoint_dir;
  ComposedPolicyConfig pc;
  pc.name = method;
  pc.emotion_source = spec.emotion;
  pc.selector_mode = ParseSelectMode(cfg.eval.selector_mode);
  pc.action_mode = ParseSelectMode(cfg.eval.action_mode);
  if (cfg.emotion_free && spec.expression.empty() && !spec.external) {
    Fail(ErrorKind::kConfiguration,
         "method '" + method + "' has no expression policy to run emotion-free");
  }
  if (spec.emotion == EmotionSource::kSelector && !cfg.emotion_free) {
    RequireArtifact(SelectorPath(at), "selector checkpoint");
    pc.selector = LoadSelector(SelectorPath(at)).policy;
  }
  if (!spec.expression.empty()) {
    const fs::path p = ExpressionPath(at, spec.expression, spec.no_sft);
    RequireArtifact(p, spec.expression + " checkpoint");
    pc.expression = LoadExpression(p).params;
    const ExpressionMode want =
        cfg.emotion_free ? ExpressionMode::kEmotionFree : ExpressionMode::kConditional;
    Require(pc.expression->mode == want, ErrorKind::kPrecondition,
            p.string() + " was trained in a different emotion mode");
  }
  if (spec.external) {
    Require(!cfg.backend.agent_command.empty(), ErrorKind::kConfiguration,
            "external method needs backend.agent_command");
    auto transport = std::make_shared<ChildProcessTransport>(
        cfg.backend.agent_command, std::chrono::milliseconds(cfg.backend.timeout_ms));
    const bool ef = cfg.emotion_free;
    return [transport, pc, ef] {
      return std::make_unique<ExternalAgentPolicy>(transport, pc, ef);
    };
  }
  return [pc] { return std::make_unique<ComposedPolicy>(pc); };
}

MetricsReport ValidateMethod(const std::string& method, const PipelineConfig& cfg) {
  const auto scenarios = EvalScenarios(cfg);
  EvalSettings es = MakeEvalSettings(cfg);
  std::shared_ptr<ExternalJudge> judge;
  if (!cfg.backend.judge_command.empty()) {
    judge = std::make_shared<ExternalJudge>(std::make_shared<ChildProcessTransport>(
        cfg.backend.judge_command, std::chrono::milliseconds(cfg.backend.timeout_ms)));
    es.judge = [judge](Trajectory& t) { judge->AnnotateTurns(t); };
  }
  return Evaluate(MakeMethodFactory(method, cfg, CheckpointDir(cfg)), scenarios,
                  NamedProfile(cfg.counterparty), es);
}

StageOutcome RunStage(const std::string& stage, const PipelineConfig& cfg) {
  Require(cfg.workers >= 1, ErrorKind::kConfiguration, "workers must be >= 1");
  fs::create_directories(cfg.out);
  const auto start = std::chrono::steady_clock::now();
  StageOutcome o;
  if (stage == "gen") o = StageGen(cfg);
  else if (stage == "sweep") o = StageSweep(cfg);
  else if (stage == "train-iql") o = StageTrainIql(cfg);
  else if (stage == "train-sft") o = StageTrainSft(cfg);
  else if (stage == "train-jpo") o = StageTrainJpo(cfg);
  else if (stage == "train-alol") o = StageTrainAlol(cfg);
  else if (stage == "eval") o = StageEval(cfg);
  else if (stage == "tournament") o = StageTournament(cfg);
  else if (stage == "emotion-study") o = StageEmotionStudy(cfg);
  else if (stage == "report") o = StageReport(cfg);
  else Fail(ErrorKind::kUsage, "unknown stage '" + stage + "'");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  WriteManifest(stage, cfg, o, secs);
  return o;
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return 2;
    case ErrorKind::kConfiguration: return 3;
    case ErrorKind::kPrecondition: return 4;
    case ErrorKind::kStorage: return 5;
    case ErrorKind::kTraining: return 6;
    case ErrorKind::kBackend: return 7;
    case ErrorKind::kPolicy: return 8;
    case ErrorKind::kProtocol: return 9;
    case ErrorKind::kContract: return 10;
    case ErrorKind::kJudgeParse: return 11;
  }
  return 1;
}

}  // namespace emoneg
