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

#include "emoneg/signals.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace emoneg {

void ValidateShaping(const ShapingParams& p) {
  Require(p.t_max >= 1, ErrorKind::kConfiguration, "t_max must be >= 1");
  Require(p.step_clip > 0.0, ErrorKind::kConfiguration, "step_clip must be > 0");
  Require(p.kappa >= 0.0 && p.kappa <= 1.0, ErrorKind::kConfiguration,
          "kappa must be in [0, 1]");
}

std::string_view RewardVariantName(RewardVariant v) {
  switch (v) {
    case RewardVariant::kOutcomeTerminal: return "outcome";
    case RewardVariant::kEpisodeBroadcast: return "episode";
    case RewardVariant::kTurnDense: return "turn";
  }
  return "?";
}

RewardVariant ParseRewardVariant(std::string_view name) {
  if (name == "outcome" || name == "outcome_terminal") return RewardVariant::kOutcomeTerminal;
  if (name == "episode" || name == "episode_broadcast") return RewardVariant::kEpisodeBroadcast;
  if (name == "turn" || name == "turn_dense") return RewardVariant::kTurnDense;
  Fail(ErrorKind::kUsage, "unknown reward variant '" + std::string(name) + "'");
}

StepDelta StepDeltas(const Trajectory& traj, int t, const ShapingParams& p) {
  Require(t >= 1 && t <= static_cast<int>(traj.transitions.size()),
          ErrorKind::kContract, "turn index out of range: " + std::to_string(t));
  const double g = traj.scenario.target - traj.scenario.anchor;
  Require(g != 0.0, ErrorKind::kContract, "zero-gap scenario " + traj.scenario.id);
  const double sgn = g > 0.0 ? 1.0 : -1.0;
  const double d = std::max(1.0, std::abs(g));
  const auto& tr = traj.transitions[static_cast<std::size_t>(t - 1)];
  StepDelta out;
  out.ctp = std::clamp(sgn * (tr.next_state.ctp_offer - tr.state.ctp_offer) / d,
                       -p.step_clip, p.step_clip);
  out.focal = std::clamp(-sgn * (tr.next_state.focal_offer - tr.state.focal_offer) / d,
                         -p.step_clip, p.step_clip);
  return out;
}

double TimeWeight(int t, int t_max) {
  return std::max(0.0, std::min(1.0, 1.0 - static_cast<double>(t) / t_max));
}

double TrajectoryReturn(const Trajectory& traj, const ShapingParams& p) {
  Require(traj.scenario.target != traj.scenario.anchor, ErrorKind::kContract,
          "zero-gap scenario " + traj.scenario.id);
  double shaping = 0.0;
  const int n = static_cast<int>(traj.transitions.size());
  for (int t = 1; t <= n; ++t) {
    const StepDelta d = StepDeltas(traj, t, p);
    shaping += TimeWeight(t, p.t_max) * (d.ctp - d.focal);
  }
  const double terminal =
      traj.status == Status::kAccepted ? p.terminal_bonus : -p.terminal_bonus;
  return shaping + terminal;
}

std::vector<double> NormalizeAdvantages(std::span<const ScoredTurn> scores,
                                        double eps) {
  struct Moments {
    double sum = 0.0;
    double count = 0.0;
    double sq = 0.0;
  };
  std::map<std::string, Moments> groups;
  for (const auto& s : scores) {
    auto& m = groups[s.scenario_id];
    m.sum += s.score;
    m.count += 1.0;
  }
  std::map<std::string, double> means;
  for (const auto& [id, m] : groups) means[id] = m.sum / m.count;
  // Second pass on centred values for numerical stability.
  for (const auto& s : scores) {
    const double c = s.score - means[s.scenario_id];
    groups[s.scenario_id].sq += c * c;
  }
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& s : scores) {
    const auto& m = groups[s.scenario_id];
    const double sigma = std::sqrt(m.sq / m.count);
    out.push_back((s.score - means[s.scenario_id]) / (sigma + eps));
  }
  return out;
}

std::vector<double> PlaceRewards(const Trajectory& traj, RewardVariant variant,
                                 std::optional<int> episode_score,
                                 const ShapingParams& p) {
  const std::size_t n = traj.transitions.size();
  Require(n > 0, ErrorKind::kContract, "cannot place rewards on an empty trajectory");
  std::vector<double> out(n, 0.0);
  switch (variant) {
    case RewardVariant::kOutcomeTerminal:
      out.back() = TrajectoryReturn(traj, p);
      break;
    case RewardVariant::kEpisodeBroadcast:
      Require(episode_score.has_value(), ErrorKind::kContract,
              "episode_broadcast needs an episode judge score");
      std::fill(out.begin(), out.end(), static_cast<double>(*episode_score));
      break;
    case RewardVariant::kTurnDense:
      for (std::size_t i = 0; i < n; ++i) {
        Require(traj.transitions[i].judge_score.has_value(), ErrorKind::kContract,
                "turn_dense needs per-turn judge scores");
        out[i] = *traj.transitions[i].judge_score;
      }
      break;
  }
  return out;
}

std::vector<std::size_t> FilterTopFraction(std::span<const FilterKey> keys,
                                           double fraction) {
  Require(!keys.empty(), ErrorKind::kContract, "cannot filter an empty set");
  Require(fraction > 0.0 && fraction <= 1.0, ErrorKind::kContract,
          "filter fraction must be in (0, 1]");
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& ka = keys[a];
    const auto& kb = keys[b];
    if (ka.q_hyb != kb.q_hyb) return ka.q_hyb > kb.q_hyb;
    if (ka.scenario_id != kb.scenario_id) return ka.scenario_id < kb.scenario_id;
    return ka.turn < kb.turn;
  });
  const auto keep = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(keys.size()) - 1e-9));
  idx.resize(std::clamp<std::size_t>(keep, 1, keys.size()));
  return idx;
}

}  // namespace emoneg
