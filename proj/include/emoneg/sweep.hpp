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

#ifndef EMONEG_SWEEP_HPP_
#define EMONEG_SWEEP_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emoneg/dialogue.hpp"
#include "emoneg/judge.hpp"
#include "emoneg/signals.hpp"

namespace emoneg {

enum class BehaviorKind { kRandom, kScripted };

struct SweepConfig {
  std::size_t n_scenarios = 80;
  std::size_t m_rollouts = 100;
  uint64_t seed = 0;
  BehaviorKind behavior_policy = BehaviorKind::kRandom;
  CounterpartyProfile profile = DefaultProfile();
  ShapingParams shaping;
  RubricWeights rubric;
  int workers = 1;
};

// One annotated focal turn as persisted in the store.
struct StoredTransition {
  int t = 0;
  EmotionId emotion;
  Move move;
  double focal_offer = 0.0;  // after the turn
  double ctp_offer = 0.0;    // after the turn
  int r_turn = 0;
  int episode_score = 0;
  double advantage = 0.0;
  double q_hyb = 0.0;
};

struct StoredTrajectory {
  std::string traj_id;
  std::string scenario_id;
  uint64_t rollout_seed = 0;
  Status status = Status::kOngoing;
  std::optional<double> final_value;
  int rounds = 0;
  double trajectory_return = 0.0;
  std::optional<std::string> error;
  std::vector<StoredTransition> transitions;
};

struct SweepSummary {
  std::size_t trajectories = 0;
  std::size_t transitions = 0;
  std::size_t aborted = 0;
  std::size_t accepted = 0;
  std::array<std::size_t, kNumEmotions> emotion_counts{};
};

struct Dataset {
  std::map<std::string, Scenario> scenarios;
  std::vector<StoredTrajectory> trajectories;

  const Scenario& scenario(const std::string& id) const;
};

struct SweepResult {
  Dataset dataset;
  SweepSummary summary;
};

SweepResult GenerateSweep(const std::vector<Scenario>& scenarios,
                          const SweepConfig& cfg);
SweepSummary Summarize(const Dataset& dataset);

// Fills r_turn, episode_score, R, q_hyb and the per-scenario advantages.
void AnnotateDataset(Dataset& dataset, const ShapingParams& shaping,
                     const RubricWeights& rubric);

// Line-delimited store: a header record per trajectory followed by its
// transition records.
void WriteStore(std::ostream& out, const Dataset& dataset);
std::vector<StoredTrajectory> ReadStore(std::istream& in);
void SaveStore(const std::filesystem::path& path, const Dataset& dataset);
Dataset LoadDataset(const std::filesystem::path& store,
                    const std::vector<Scenario>& scenarios);

// Rebuilds full dialogue states from stored offers. Judge scores and
// advantages are copied onto the transitions.
Trajectory ReplayTrajectory(const StoredTrajectory& stored, const Scenario& scenario);

// Flat per-turn view used by the trainers.
struct SweepTurn {
  std::size_t traj_index = 0;
  std::string scenario_id;
  DialogueState state;
  DialogueState next_state;
  EmotionId emotion;
  Move move;
  int r_turn = 0;
  int episode_score = 0;
  double advantage = 0.0;
  double q_hyb = 0.0;
  double trajectory_return = 0.0;
  bool terminal = false;
};

std::vector<SweepTurn> FlattenDataset(const Dataset& dataset);

// The top fraction of turns ranked by q_hyb.
std::vector<SweepTurn> FilterDemonstrations(const std::vector<SweepTurn>& turns,
                                            double fraction);

}  // namespace emoneg

#endif  // EMONEG_SWEEP_HPP_
