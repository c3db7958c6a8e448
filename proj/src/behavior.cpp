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

#include "emoneg/behavior.hpp"

namespace emoneg {

Move BehaviorPolicy::SampleMove(const DialogueState& state, Rng& rng) const {
  const Style style = static_cast<Style>(rng.Index(kNumStyles));
  const bool leverage = rng.Bernoulli(0.5);
  if (rng.Bernoulli(capitulate_prob_)) {
    return MakeMove(state, ConcessionBin::kCapitulate, style, leverage);
  }
  static constexpr ConcessionBin kBins[] = {ConcessionBin::kHold, ConcessionBin::kSmall,
                                            ConcessionBin::kMedium};
  return MakeMove(state, kBins[rng.Index(3)], style, leverage);
}

Decision BehaviorPolicy::Act(const Scenario&, const DialogueState& state, Rng& rng) {
  const EmotionId emotion(static_cast<int>(rng.Index(kNumEmotions)));
  return {emotion, SampleMove(state, rng)};
}

Decision ScriptedPolicy::Act(const Scenario&, const DialogueState& state, Rng& rng) {
  const EmotionId emotion(static_cast<int>(rng.Index(kNumEmotions)));
  if (state.turn == 0) {
    return {emotion, MakeMove(state, ConcessionBin::kHold, Style::kFirm, true)};
  }
  if (state.relative_gap() < 0.2) {
    return {emotion, MakeMove(state, ConcessionBin::kSmall, Style::kClose, true)};
  }
  const Style style = state.turn % 2 == 0 ? Style::kFirm : Style::kProbe;
  return {emotion, MakeMove(state, ConcessionBin::kSmall, style, state.turn % 2 == 0)};
}

}  // namespace emoneg
