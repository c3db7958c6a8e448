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

#ifndef EMONEG_SIGNALS_HPP_
#define EMONEG_SIGNALS_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "emoneg/dialogue.hpp"

namespace emoneg {

struct ShapingParams {
  int t_max = kMaxTurns;
  double step_clip = 2.0;
  double terminal_bonus = 2.0;
  double eps = 1e-8;
  double kappa = 1.0;
};

void ValidateShaping(const ShapingParams& p);

enum class RewardVariant { kOutcomeTerminal, kEpisodeBroadcast, kTurnDense };

std::string_view RewardVariantName(RewardVariant v);
// Accepts "outcome", "episode", "turn" (and the long names).
RewardVariant ParseRewardVariant(std::string_view name);

struct StepDelta {
  double ctp = 0.0;    // counterparty move toward the focal target
  double focal = 0.0;  // focal retreat away from its own target
};

// Deltas for focal turn t (1-based).
StepDelta StepDeltas(const Trajectory& traj, int t, const ShapingParams& p = {});

// Linear time decay, clamped to [0, 1].
double TimeWeight(int t, int t_max);

// Time-weighted step shaping plus the terminal agreement anchor. Ongoing
// trajectories get the breakdown anchor.
double TrajectoryReturn(const Trajectory& traj, const ShapingParams& p = {});

struct ScoredTurn {
  std::string scenario_id;
  int turn = 0;
  double score = 0.0;
};

// Per-scenario z-score with population standard deviation.
std::vector<double> NormalizeAdvantages(std::span<const ScoredTurn> scores,
                                        double eps = 1e-8);

inline double AsymmetricAdvantage(double advantage, double kappa) {
  return advantage > 0.0 ? advantage : kappa * advantage;
}

inline double HybridScore(double turn_score, double trajectory_return) {
  return turn_score + 0.5 * trajectory_return;
}

std::vector<double> PlaceRewards(const Trajectory& traj, RewardVariant variant,
                                 std::optional<int> episode_score,
                                 const ShapingParams& p = {});

struct FilterKey {
  std::string scenario_id;
  int turn = 0;
  double q_hyb = 0.0;
};

// Indices of the ceil(fraction * N) highest-q_hyb entries, best first; ties
// go to the smaller (scenario_id, turn, index).
std::vector<std::size_t> FilterTopFraction(std::span<const FilterKey> keys,
                                           double fraction);

}  // namespace emoneg

#endif  // EMONEG_SIGNALS_HPP_
