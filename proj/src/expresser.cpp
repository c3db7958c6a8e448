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

#include "emoneg/expresser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "emoneg/softmax.hpp"

namespace emoneg {

namespace {

// Max-shifted row softmax of F * W^T.
Eigen::MatrixXd BatchProbs(const WeightMatrix& w, const Eigen::MatrixXd& features) {
  Eigen::MatrixXd logits = features * w.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  Eigen::MatrixXd p = logits.array().exp().matrix();
  const Eigen::VectorXd z = p.rowwise().sum();
  p.array().colwise() /= z.array();
  return p;
}

Eigen::VectorXd PickLogProbs(const Eigen::MatrixXd& probs, const std::vector<int>& actions) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(actions.size()));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) =
        std::log(probs(static_cast<Eigen::Index>(i), actions[i]));
  }
  return out;
}

// grad += sum_i coef_i * (p_i - e_{a_i}) f_i^T, i.e. coef_i times the
// gradient of -log pi(a_i | f_i).
void AccumulateNllGradient(const Eigen::MatrixXd& probs, const ExpressionBatch& batch,
                           const Eigen::VectorXd& coef, WeightMatrix* grad) {
  Eigen::MatrixXd g = probs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    g(static_cast<Eigen::Index>(i), batch.actions[i]) -= 1.0;
  }
  g.array().colwise() *= coef.array();
  grad->noalias() += g.transpose() * batch.features;
}

void CheckFinite(const WeightMatrix& w, double loss, int step, const char* stage) {
  if (!std::isfinite(loss) || loss > 1e6 || !w.allFinite()) {
    Fail(ErrorKind::kTraining,
         std::string(stage) + " diverged at step " + std::to_string(step));
  }
}

std::vector<std::size_t> DrawRows(std::size_t n, int batch, Rng& rng) {
  std::vector<std::size_t> rows;
  if (batch <= 0 || static_cast<std::size_t>(batch) >= n) return rows;
  rows.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) rows.push_back(rng.Index(n));
  return rows;
}

}  // namespace

std::string_view ExpressionModeName(ExpressionMode mode) {
  return mode == ExpressionMode::kConditional ? "conditional" : "emotion_free";
}

ExpressionMode ParseExpressionMode(std::string_view name) {
  if (name == "conditional") return ExpressionMode::kConditional;
  if (name == "emotion_free" || name == "emotion-free") return ExpressionMode::kEmotionFree;
  Fail(ErrorKind::kConfiguration, "unknown expression mode '" + std::string(name) + "'");
}

int ActionIndex(ConcessionBin bin, Style style, bool leverage) {
  return (static_cast<int>(bin) * kNumStyles + static_cast<int>(style)) * 2 +
         (leverage ? 1 : 0);
}

int ActionIndex(const Move& move) { return ActionIndex(move.bin, move.style, move.leverage); }

ActionTemplate ActionFromIndex(int index) {
  Require(index >= 0 && index < kNumActions, ErrorKind::kContract,
          "action index out of range");
  ActionTemplate a;
  a.leverage = index % 2 == 1;
  a.style = static_cast<Style>((index / 2) % kNumStyles);
  a.bin = static_cast<ConcessionBin>(index / (2 * kNumStyles));
  return a;
}

Move MoveFromAction(const DialogueState& state, int action) {
  const ActionTemplate a = ActionFromIndex(action);
  return MakeMove(state, a.bin, a.style, a.leverage);
}

FeatureVector Featurize(const DialogueState& state, EmotionId emotion,
                        ExpressionMode mode) {
  FeatureVector f = FeatureVector::Zero();
  const double g = state.initial_gap();
  f(0) = std::clamp(state.relative_gap(), 0.0, 1.0);
  f(1) = std::clamp(static_cast<double>(state.turn) / kMaxTurns, 0.0, 1.0);
  f(2) = std::clamp(10.0 * state.last_ctp_move() / g, -2.0, 2.0);
  f(3) = std::clamp(10.0 * state.last_focal_retreat() / g, -2.0, 2.0);
  f(4) = state.repetition_count > 0 ? 1.0 : 0.0;
  if (mode == ExpressionMode::kConditional) {
    f(kEmotionFeatureOffset + emotion.index()) = 1.0;
  }
  f(kBiasFeature) = 1.0;
  return f;
}

ActionProbs PolicyProbs(const ExpressionParams& params, const FeatureVector& f) {
  return Softmax(params.weights * f);
}

int SampleAction(const ActionProbs& probs, Rng& rng) {
  const double u = rng.Uniform();
  double acc = 0.0;
  int last = 0;
  for (int a = 0; a < kNumActions; ++a) {
    if (probs(a) <= 0.0) continue;
    last = a;
    acc += probs(a);
    if (u < acc) return a;
  }
  return last;
}

int GreedyAction(const ActionProbs& probs) {
  int best = 0;
  for (int a = 1; a < kNumActions; ++a) {
    if (probs(a) > probs(best)) best = a;
  }
  return best;
}

ExpressionBatch ExpressionBatch::Rows(std::span<const std::size_t> rows) const {
  ExpressionBatch out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), kNumFeatures);
  out.advantages.resize(static_cast<Eigen::Index>(rows.size()));
  out.actions.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    out.advantages(static_cast<Eigen::Index>(i)) = advantages(r);
    out.actions.push_back(actions[rows[i]]);
  }
  return out;
}

AdvantageSource AdvantageSourceFor(RewardVariant variant) {
  switch (variant) {
    case RewardVariant::kTurnDense: return AdvantageSource::kTurnJudge;
    case RewardVariant::kEpisodeBroadcast: return AdvantageSource::kEpisodeJudge;
    case RewardVariant::kOutcomeTerminal: return AdvantageSource::kOutcome;
  }
  return AdvantageSource::kTurnJudge;
}

std::vector<double> TurnAdvantages(std::span<const SweepTurn> turns,
                                   AdvantageSource source, double eps) {
  if (source == AdvantageSource::kTurnJudge) {
    std::vector<double> out;
    out.reserve(turns.size());
    for (const auto& t : turns) out.push_back(t.advantage);
    return out;
  }
  std::vector<ScoredTurn> scored;
  scored.reserve(turns.size());
  for (const auto& t : turns) {
    const double v = source == AdvantageSource::kEpisodeJudge
                         ? static_cast<double>(t.episode_score)
                         : t.trajectory_return;
    scored.push_back({t.scenario_id, t.state.turn + 1, v});
  }
  return NormalizeAdvantages(scored, eps);
}

ExpressionBatch BuildExpressionBatch(std::span<const SweepTurn> turns,
                                     std::span<const double> advantages,
                                     ExpressionMode mode) {
  Require(advantages.empty() || advantages.size() == turns.size(), ErrorKind::kContract,
          "advantage count does not match turn count");
  ExpressionBatch b;
  const auto n = static_cast<Eigen::Index>(turns.size());
  b.features.resize(n, kNumFeatures);
  b.advantages = Eigen::VectorXd::Zero(n);
  b.actions.reserve(turns.size());
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    b.features.row(r) = Featurize(turns[i].state, turns[i].emotion, mode).transpose();
    b.actions.push_back(ActionIndex(turns[i].move));
    if (!advantages.empty()) b.advantages(r) = advantages[i];
  }
  return b;
}

Eigen::VectorXd ActionLogProbs(const ExpressionParams& params,
                               const ExpressionBatch& batch) {
  return PickLogProbs(BatchProbs(params.weights, batch.features), batch.actions);
}

double SftLoss(const ExpressionParams& params, const ExpressionBatch& batch,
               WeightMatrix* grad) {
  Require(batch.size() > 0, ErrorKind::kContract, "empty SFT batch");
  const Eigen::MatrixXd probs = BatchProbs(params.weights, batch.features);
  const double n = static_cast<double>(batch.size());
  const double loss = -PickLogProbs(probs, batch.actions).sum() / n;
  if (grad) {
    grad->setZero();
    const Eigen::VectorXd coef =
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(batch.size()), 1.0 / n);
    AccumulateNllGradient(probs, batch, coef, grad);
  }
  return loss;
}

SftResult FitSft(const ExpressionBatch& demos, ExpressionMode mode, const SftHParams& hp) {
  Require(demos.size() > 0, ErrorKind::kTraining, "no demonstrations to imitate");
  Require(hp.learning_rate > 0.0, ErrorKind::kConfiguration, "SFT learning rate must be > 0");
  SftResult result;
  result.params.mode = mode;
  Rng rng(DeriveSeed(hp.seed, 0x736674));
  WeightMatrix grad;
  for (int step = 0; step < hp.steps; ++step) {
    const auto rows = DrawRows(demos.size(), hp.batch, rng);
    const double loss = rows.empty() ? SftLoss(result.params, demos, &grad)
                                     : SftLoss(result.params, demos.Rows(rows), &grad);
    CheckFinite(result.params.weights, loss, step, "SFT");
    result.log.push_back({step, loss});
    result.params.weights -= hp.learning_rate * grad;
  }
  return result;
}

void ValidateJpo(const JpoHParams& hp) {
  Require(hp.clip_eps > 0.0 && hp.clip_eps < 1.0, ErrorKind::kConfiguration,
          "clip_eps must be in (0, 1)");
  Require(hp.lambda_kl >= 0.0, ErrorKind::kConfiguration, "lambda_kl must be >= 0");
  Require(hp.kappa >= 0.0 && hp.kappa <= 1.0, ErrorKind::kConfiguration,
          "kappa must be in [0, 1]");
  Require(hp.learning_rate > 0.0, ErrorKind::kConfiguration,
          "JPO learning rate must be > 0");
  Require(hp.steps >= 0, ErrorKind::kConfiguration, "JPO steps must be >= 0");
}

double K3(double rho) {
  Require(rho > 0.0, ErrorKind::kContract, "K3 needs a positive ratio");
  return rho - 1.0 - std::log(rho);
}

JpoBatchStats JpoObjective(const ExpressionParams& theta, const ExpressionBatch& batch,
                           const Eigen::VectorXd& ref_logp, const JpoHParams& hp,
                           WeightMatrix* grad) {
  Require(static_cast<std::size_t>(ref_logp.size()) == batch.size(), ErrorKind::kContract,
          "reference log-probabilities do not match the batch");
  const Eigen::MatrixXd probs = BatchProbs(theta.weights, batch.features);
  const Eigen::VectorXd logp = PickLogProbs(probs, batch.actions);
  const double floor = std::log(kSupportFloor);

  JpoBatchStats st;
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ref_logp(i) < floor) {
      ++st.skipped;
      continue;
    }
    ++st.used;
    const double log_rho = logp(i) - ref_logp(i);
    const double rho = std::exp(log_rho);
    const double adv = AsymmetricAdvantage(batch.advantages(i), hp.kappa);
    const double unclipped = rho * adv;
    const double clipped = std::clamp(rho, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps) * adv;
    const double term = std::min(unclipped, clipped);
    const double k3 = rho - 1.0 - log_rho;
    st.reward_term += term;
    st.k3 += k3;
    st.mean_rho += rho;
    if (IsRatioClip(rho)) ++st.clip_count;
    // d(-rho A)/d log pi = -rho A when the unclipped branch is the minimum;
    // d k3 / d log pi = rho - 1. Coefficients multiply grad(-log pi).
    const double dlogp = (unclipped <= clipped ? -unclipped : 0.0) + hp.lambda_kl * (rho - 1.0);
    coef(i) = -dlogp;
  }
  Require(st.used > 0, ErrorKind::kTraining,
          "every JPO sample falls outside the reference support");
  const double used = static_cast<double>(st.used);
  st.reward_term /= used;
  st.k3 /= used;
  st.mean_rho /= used;
  st.surrogate = -st.reward_term;
  st.loss = st.surrogate + hp.lambda_kl * st.k3;
  if (grad) {
    grad->setZero();
    coef /= used;
    AccumulateNllGradient(probs, batch, coef, grad);
  }
  return st;
}

JpoResult FitJpo(const ExpressionBatch& data, const ExpressionParams& ref,
                 const JpoHParams& hp) {
  ValidateJpo(hp);
  Require(data.size() > 0, ErrorKind::kTraining, "JPO dataset is empty");
  JpoResult result;
  result.params = ref;
  const Eigen::VectorXd ref_logp = ActionLogProbs(ref, data);
  Rng rng(DeriveSeed(hp.seed, 0x6a706f));
  WeightMatrix grad;
  for (int step = 0; step < hp.steps; ++step) {
    const auto rows = DrawRows(data.size(), hp.batch, rng);
    JpoBatchStats st;
    if (rows.empty()) {
      st = JpoObjective(result.params, data, ref_logp, hp, &grad);
    } else {
      Eigen::VectorXd sub(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        sub(static_cast<Eigen::Index>(i)) = ref_logp(static_cast<Eigen::Index>(rows[i]));
      }
      st = JpoObjective(result.params, data.Rows(rows), sub, hp, &grad);
    }
    CheckFinite(result.params.weights, std::abs(st.loss), step, "JPO");
    result.skipped += st.skipped;
    result.log.push_back(
        {step, st.loss, st.reward_term, st.k3, st.mean_rho, st.clip_count, IsKlSpike(st.k3)});
    result.params.weights -= hp.learning_rate * grad;
  }
  return result;
}

double AlolLoss(const ExpressionParams& params, const ExpressionBatch& batch,
                WeightMatrix* grad) {
  const Eigen::MatrixXd probs = BatchProbs(params.weights, batch.features);
  const Eigen::VectorXd logp = PickLogProbs(probs, batch.actions);
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
  double loss = 0.0;
  int positives = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = batch.advantages(i);
    if (a <= 0.0) continue;
    ++positives;
    loss += -a * logp(i);
    coef(i) = a;
  }
  Require(positives > 0, ErrorKind::kTraining,
          "A-LoL objective is empty: no positive-advantage samples");
  if (grad) {
    grad->setZero();
    coef /= static_cast<double>(positives);
    AccumulateNllGradient(probs, batch, coef, grad);
  }
  return loss / positives;
}

SftResult FitAlol(const ExpressionBatch& data, const ExpressionParams& ref,
                  const AlolHParams& hp) {
  Require(hp.learning_rate > 0.0, ErrorKind::kConfiguration,
          "A-LoL learning rate must be > 0");
  SftResult result;
  result.params = ref;
  WeightMatrix grad;
  for (int step = 0; step < hp.steps; ++step) {
    const double loss = AlolLoss(result.params, data, &grad);
    CheckFinite(result.params.weights, std::abs(loss), step, "A-LoL");
    result.log.push_back({step, loss});
    result.params.weights -= hp.learning_rate * grad;
  }
  return result;
}

double K3Divergence(const ExpressionParams& params, const ExpressionParams& ref,
                    const ExpressionBatch& batch) {
  Require(batch.size() > 0, ErrorKind::kContract, "empty batch");
  const Eigen::VectorXd lp = ActionLogProbs(params, batch);
  const Eigen::VectorXd lr = ActionLogProbs(ref, batch);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < lp.size(); ++i) {
    const double rho = std::exp(lp(i) - lr(i));
    Require(rho > 0.0 && std::isfinite(rho), ErrorKind::kContract,
            "non-positive importance ratio in K3");
    sum += rho - 1.0 - (lp(i) - lr(i));
  }
  return sum / static_cast<double>(lp.size());
}

void SaveExpression(const std::filesystem::path& path, const ExpressionCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kStorage,
          "cannot open " + path.string() + " for writing");
  out << "# emoneg-expression\n";
  out << "# mode=" << ExpressionModeName(ckpt.params.mode) << '\n';
  out << "# stage=" << ckpt.stage << '\n';
  out << "# seed=" << ckpt.seed << '\n';
  out << "# parent=" << ckpt.parent << '\n';
  for (const auto& [k, v] : ckpt.hparams) out << "# " << k << '=' << v << '\n';
  out << "weights " << kNumActions << ' ' << kNumFeatures << '\n';
  for (int a = 0; a < kNumActions; ++a) {
    for (int j = 0; j < kNumFeatures; ++j) {
      if (j) out << ' ';
      out << FormatDouble(ckpt.params.weights(a, j));
    }
    out << '\n';
  }
  Require(static_cast<bool>(out), ErrorKind::kStorage, "write failed for " + path.string());
}

ExpressionCheckpoint LoadExpression(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kStorage, "cannot open " + path.string());
  ExpressionCheckpoint ckpt;
  std::string line;
  std::getline(in, line);
  Require(line == "# emoneg-expression", ErrorKind::kStorage,
          path.string() + " is not an expression checkpoint");
  while (std::getline(in, line)) {
    if (line.rfind("weights", 0) == 0) break;
    Require(line.rfind("# ", 0) == 0, ErrorKind::kStorage,
            "malformed checkpoint header in " + path.string());
    const auto eq = line.find('=');
    Require(eq != std::string::npos, ErrorKind::kStorage,
            "malformed checkpoint header in " + path.string());
    const std::string key = line.substr(2, eq - 2);
    const std::string val = line.substr(eq + 1);
    if (key == "mode") ckpt.params.mode = ParseExpressionMode(val);
    else if (key == "stage") ckpt.stage = val;
    else if (key == "seed") ckpt.seed = std::stoull(val);
    else if (key == "parent") ckpt.parent = val;
    else ckpt.hparams[key] = val;
  }
  std::istringstream dims(line.size() > 7 ? line.substr(7) : std::string());
  int rows = 0, cols = 0;
  dims >> rows >> cols;
  Require(rows == kNumActions && cols == kNumFeatures, ErrorKind::kStorage,
          "unexpected weight shape in " + path.string());
  for (int a = 0; a < kNumActions; ++a) {
    for (int j = 0; j < kNumFeatures; ++j) in >> ckpt.params.weights(a, j);
  }
  Require(static_cast<bool>(in), ErrorKind::kStorage,
          "truncated expression checkpoint " + path.string());
  return ckpt;
}

void SaveStabilityLog(const std::filesystem::path& path, const StabilityLog& log) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kStorage,
          "cannot open " + path.string() + " for writing");
  for (const auto& p : log) {
    nlohmann::ordered_json j;
    j["step"] = p.step;
    j["loss"] = p.loss;
    j["reward_term"] = p.reward_term;
    j["k3"] = p.k3;
    j["mean_rho"] = p.mean_rho;
    j["clip_count"] = p.clip_count;
    j["spike_flag"] = p.spike;
    out << j.dump() << '\n';
  }
}

StabilityLog LoadStabilityLog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kStorage, "cannot open " + path.string());
  StabilityLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      log.push_back({j.at("step").get<int>(), j.at("loss").get<double>(),
                     j.at("reward_term").get<double>(), j.at("k3").get<double>(),
                     j.at("mean_rho").get<double>(), j.at("clip_count").get<int>(),
                     j.at("spike_flag").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kStorage, "bad stability record in " + path.string() + ": " + e.what());
    }
  }
  return log;
}

}  // namespace emoneg
