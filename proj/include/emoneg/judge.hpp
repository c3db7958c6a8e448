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

#ifndef EMONEG_JUDGE_HPP_
#define EMONEG_JUDGE_HPP_

#include <span>
#include <string_view>

#include "emoneg/dialogue.hpp"

namespace emoneg {

// Additive rubric terms; defaults reproduce the 10/8/6/4/2/1 anchors.
struct RubricWeights {
  int base = 6;
  int anchor_bonus = 2;
  double anchor_window = 0.10;  // fraction of |gap| around the target
  int leverage_bonus = 1;
  int calibrated_bonus = 1;
  int large_penalty = 2;
  int capitulate_penalty = 4;
  int repetition_penalty = 1;
  int escalation_penalty = 2;
  int inconsistency_penalty = 1;
};

struct JudgeContext {
  const Scenario& scenario;
  std::span<const Transition> prior;  // ordered by turn
  EmotionId emotion;
  Move move;
};

// True when `style` contradicts the stance implied by `emotion`.
bool EmotionStyleInconsistent(EmotionId emotion, Style style);

int ScoreTurn(const JudgeContext& ctx, const RubricWeights& w = {});
// Fills judge_score on every transition.
void AnnotateTurns(Trajectory& traj, const RubricWeights& w = {});
int ScoreEpisode(const Trajectory& traj);

// Extracts "SCORE: n" (or a bare 1-10 integer) from a judge reply.
int ParseExternalScore(std::string_view text);

}  // namespace emoneg

#endif  // EMONEG_JUDGE_HPP_
