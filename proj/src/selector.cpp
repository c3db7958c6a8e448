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

#include "emoneg/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "emoneg/softmax.hpp"

namespace emoneg {

StateBin StateBin::FromIndex(int index) {
  Require(index >= 0 && index < kNumStateBins, ErrorKind::kContract,
          "state bin index out of range");
  StateBin b;
  b.ctp_momentum = static_cast<Momentum>(index % kMomentumBins);
  b.turn_bin = (index / kMomentumBins) % kTurnBins;
  b.gap_progress_bin = index / (kMomentumBins * kTurnBins);
  return b;
}

StateBin Discretize(const DialogueState& state) {
  StateBin b;
  const double ratio = std::clamp(state.relative_gap(), 0.0, 1.0);
  b.gap_progress_bin = std::min(kGapBins - 1, static_cast<int>(ratio * kGapBins));
  b.turn_bin = std::min(kTurnBins - 1, (kTurnBins * state.turn) / kMaxTurns);
  const double move = state.last_ctp_move();
  const double eps = 1e-12 * state.initial_gap();
  b.ctp_momentum = move > eps    ? Momentum::kConceding
                   : move < -eps ? Momentum::kRetreating
                                 : Momentum::kStatic;
  return b;
}

double ExpectileLoss(double x, double tau_exp) {
  const double w = std::abs(tau_exp - (x < 0.0 ? 1.0 : 0.0));
  return w * x * x;
}

std::vector<IqlSample> BuildIqlSamples(const Dataset& dataset, RewardVariant variant,
                                       const ShapingParams& shaping) {
  std::vector<IqlSample> out;
  for (const auto& st : dataset.trajectories) {
    if (st.transitions.empty()) continue;
    const Trajectory traj = ReplayTrajectory(st, dataset.scenario(st.scenario_id));
    const std::optional<int> episode =
        st.transitions.front().episode_score > 0
            ? std::optional<int>(st.transitions.front().episode_score)
            : std::nullopt;
    const std::vector<double> rewards = PlaceRewards(traj, variant, episode, shaping);
    for (std::size_t i = 0; i < traj.transitions.size(); ++i) {
      const auto& tr = traj.transitions[i];
      IqlSample s;
      s.state = Discretize(tr.state).index();
      s.emotion = tr.emotion.index();
      s.reward = rewards[i];
      s.next_state = Discretize(tr.next_state).index();
      s.terminal = i + 1 == traj.transitions.size();
      out.push_back(s);
    }
  }
  return out;
}

double ValueLoss(const ValueTable& V, const QTable& Q, const std::vector<IqlSample>& batch,
                 double tau_exp, ValueTable* grad) {
  Require(!batch.empty(), ErrorKind::kContract, "empty IQL batch");
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  if (grad) grad->setZero();
  for (const auto& s : batch) {
    const double x = Q(s.state, s.emotion) - V(s.state);
    const double w = std::abs(tau_exp - (x < 0.0 ? 1.0 : 0.0));
    loss += w * x * x;
    if (grad) (*grad)(s.state) += -2.0 * w * x / n;
  }
  return loss / n;
}

double TdLoss(const QTable& Q, const ValueTable& V, const std::vector<IqlSample>& batch,
              double gamma, QTable* grad) {
  Require(!batch.empty(), ErrorKind::kContract, "empty IQL batch");
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  if (grad) grad->setZero();
  for (const auto& s : batch) {
    const double bootstrap = s.terminal ? 0.0 : gamma * V(s.next_state);
    const double err = s.reward + bootstrap - Q(s.state, s.emotion);
    loss += err * err;
    if (grad) (*grad)(s.state, s.emotion) += -2.0 * err / n;
  }
  return loss / n;
}

namespace {

double AwrLoss(const SelectorParams& p, const PolicyTable& pi,
               const std::vector<IqlSample>& batch) {
  // Advantage-weighted negative log-likelihood with self-normalized weights.
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& s : batch) {
    max_logit = std::max(max_logit, p.beta_awr * (p.Q(s.state, s.emotion) - p.V(s.state)));
  }
  double num = 0.0;
  double den = 0.0;
  for (const auto& s : batch) {
    const double w =
        std::exp(p.beta_awr * (p.Q(s.state, s.emotion) - p.V(s.state)) - max_logit);
    num += -w * std::log(std::max(pi(s.state, s.emotion), 1e-300));
    den += w;
  }
  return num / den;
}

}  // namespace

IqlResult FitIql(const std::vector<IqlSample>& samples, const IqlHParams& hp) {
  Require(!samples.empty(), ErrorKind::kTraining, "IQL dataset is empty");
  Require(hp.tau_exp > 0.0 && hp.tau_exp < 1.0, ErrorKind::kConfiguration,
          "tau_exp must be in (0, 1)");
  Require(hp.beta_awr > 0.0, ErrorKind::kConfiguration, "beta_awr must be > 0");
  Require(hp.gamma > 0.0 && hp.gamma <= 1.0, ErrorKind::kConfiguration,
          "gamma must be in (0, 1]");
  Require(hp.learning_rate > 0.0 && hp.learning_rate <= 0.5, ErrorKind::kConfiguration,
          "IQL learning rate must be in (0, 0.5]");

  const double n = static_cast<double>(samples.size());
  ValueTable v_count = ValueTable::Zero();
  QTable q_count = QTable::Zero();
  for (const auto& s : samples) {
    v_count(s.state) += 1.0;
    q_count(s.state, s.emotion) += 1.0;
  }
  // Count-normalised steps: each entry moves toward its own sample mean at
  // a rate independent of how often it is visited.
  const ValueTable v_scale =
      (v_count.array() > 0.0).select(n / v_count.array(), 0.0).matrix();
  const QTable q_scale =
      (q_count.array() > 0.0).select(n / q_count.array(), 0.0).matrix();

  IqlResult result;
  SelectorParams& p = result.params;
  p.tau_exp = hp.tau_exp;
  p.beta_awr = hp.beta_awr;
  p.gamma = hp.gamma;
  ValueTable gv;
  QTable gq;
  const int log_every = std::max(1, hp.steps / 200);
  for (int step = 0; step < hp.steps; ++step) {
    const double lv = ValueLoss(p.V, p.Q, samples, hp.tau_exp, &gv);
    const ValueTable dv = hp.learning_rate * v_scale.cwiseProduct(gv);
    p.V -= dv;
    const double lq = TdLoss(p.Q, p.V, samples, hp.gamma, &gq);
    const QTable dq = hp.learning_rate * q_scale.cwiseProduct(gq);
    p.Q -= dq;
    if (!std::isfinite(lv) || !std::isfinite(lq) || lv > 1e6 || lq > 1e6) {
      Fail(ErrorKind::kTraining, "IQL diverged at step " + std::to_string(step));
    }
    result.steps_run = step + 1;
    const bool done = std::max(dv.cwiseAbs().maxCoeff(), dq.cwiseAbs().maxCoeff()) <=
                      hp.tolerance;
    if (step % log_every == 0 || done || step + 1 == hp.steps) {
      const PolicyTable pi = ExtractAwrPolicy(p);
      result.log.push_back({step, lv, lq, AwrLoss(p, pi, samples)});
    }
    if (done) break;
  }
  // Unvisited (state, emotion) pairs carry zero advantage.
  for (int s = 0; s < kNumStateBins; ++s) {
    for (int e = 0; e < kNumEmotions; ++e) {
      if (q_count(s, e) == 0.0) p.Q(s, e) = p.V(s);
    }
  }
  return result;
}

PolicyTable ExtractAwrPolicy(const SelectorParams& params) {
  PolicyTable logits = params.Q;
  logits.colwise() -= params.V;
  logits *= params.beta_awr;
  return RowSoftmax(logits);
}

EmotionId SelectEmotion(const PolicyTable& policy, const StateBin& state,
                        SelectMode mode, uint64_t seed) {
  Rng rng(seed);
  return SelectEmotion(policy, state, mode, rng);
}

EmotionId SelectEmotion(const PolicyTable& policy, const StateBin& state,
                        SelectMode mode, Rng& rng) {
  const auto row = policy.row(state.index());
  if (mode == SelectMode::kGreedy) {
    int best = 0;
    for (int e = 1; e < kNumEmotions; ++e) {
      if (row(e) > row(best)) best = e;
    }
    return EmotionId(best);
  }
  const double u = rng.Uniform();
  double acc = 0.0;
  int last_positive = 0;
  for (int e = 0; e < kNumEmotions; ++e) {
    if (row(e) <= 0.0) continue;
    last_positive = e;
    acc += row(e);
    if (u < acc) return EmotionId(e);
  }
  return EmotionId(last_positive);
}

void SaveSelector(const std::filesystem::path& path, const SelectorCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kStorage,
          "cannot open " + path.string() + " for writing");
  const auto& p = ckpt.params;
  out << "# emoneg-selector tau_exp=" << FormatDouble(p.tau_exp)
      << " beta_awr=" << FormatDouble(p.beta_awr) << " gamma=" << FormatDouble(p.gamma)
      << " seed=" << ckpt.seed << " variant=" << ckpt.variant << '\n';
  for (int s = 0; s < kNumStateBins; ++s) {
    out << s << ' ' << FormatDouble(p.V(s));
    for (int e = 0; e < kNumEmotions; ++e) out << ' ' << FormatDouble(p.Q(s, e));
    for (int e = 0; e < kNumEmotions; ++e) out << ' ' << FormatDouble(ckpt.policy(s, e));
    out << '\n';
  }
  Require(static_cast<bool>(out), ErrorKind::kStorage, "write failed for " + path.string());
}

SelectorCheckpoint LoadSelector(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kStorage, "cannot open " + path.string());
  SelectorCheckpoint ckpt;
  std::string header;
  std::getline(in, header);
  Require(header.rfind("# emoneg-selector", 0) == 0, ErrorKind::kStorage,
          path.string() + " is not a selector checkpoint");
  std::istringstream hs(header.substr(17));
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    if (key == "tau_exp") ckpt.params.tau_exp = std::stod(val);
    if (key == "beta_awr") ckpt.params.beta_awr = std::stod(val);
    if (key == "gamma") ckpt.params.gamma = std::stod(val);
    if (key == "seed") ckpt.seed = std::stoull(val);
    if (key == "variant") ckpt.variant = val;
  }
  for (int s = 0; s < kNumStateBins; ++s) {
    int idx = -1;
    in >> idx;
    Require(idx == s, ErrorKind::kStorage, "selector checkpoint row mismatch");
    in >> ckpt.params.V(s);
    for (int e = 0; e < kNumEmotions; ++e) in >> ckpt.params.Q(s, e);
    for (int e = 0; e < kNumEmotions; ++e) in >> ckpt.policy(s, e);
  }
  Require(static_cast<bool>(in), ErrorKind::kStorage,
          "truncated selector checkpoint " + path.string());
  return ckpt;
}

}  // namespace emoneg
