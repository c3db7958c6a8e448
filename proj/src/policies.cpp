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

#include "emoneg/policies.hpp"

namespace emoneg {

ComposedPolicy::ComposedPolicy(ComposedPolicyConfig cfg)
    : cfg_(std::move(cfg)), behavior_(cfg_.behavior_capitulate_prob) {
  Require(cfg_.emotion_source != EmotionSource::kSelector || cfg_.selector.has_value(),
          ErrorKind::kConfiguration, "selector emotion source needs a fitted selector");
}

EmotionId ChooseEmotion(const ComposedPolicyConfig& cfg, const DialogueState& state,
                        Rng& rng) {
  if (cfg.expression && cfg.expression->mode == ExpressionMode::kEmotionFree) {
    return EmotionId::Neutral();
  }
  switch (cfg.emotion_source) {
    case EmotionSource::kNeutral:
      break;
    case EmotionSource::kUniform:
      return EmotionId(static_cast<int>(rng.Index(kNumEmotions)));
    case EmotionSource::kFixed:
      return cfg.fixed_emotion;
    case EmotionSource::kSelector:
      return SelectEmotion(*cfg.selector, Discretize(state), cfg.selector_mode, rng);
  }
  return EmotionId::Neutral();
}

Decision ComposedPolicy::Act(const Scenario&, const DialogueState& state, Rng& rng) {
  const EmotionId emotion = ChooseEmotion(cfg_, state, rng);
  if (!cfg_.expression) return {emotion, behavior_.SampleMove(state, rng)};
  const ActionProbs probs =
      PolicyProbs(*cfg_.expression, Featurize(state, emotion, cfg_.expression->mode));
  const int action =
      cfg_.action_mode == SelectMode::kGreedy ? GreedyAction(probs) : SampleAction(probs, rng);
  return {emotion, MoveFromAction(state, action)};
}

}  // namespace emoneg
