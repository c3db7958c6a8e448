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

#ifndef EMONEG_POLICIES_HPP_
#define EMONEG_POLICIES_HPP_

#include <memory>
#include <optional>
#include <string>

#include "emoneg/behavior.hpp"
#include "emoneg/dialogue.hpp"
#include "emoneg/expresser.hpp"
#include "emoneg/selector.hpp"

namespace emoneg {

enum class EmotionSource { kNeutral, kUniform, kSelector, kFixed };

// Evaluation-time focal policy built from an emotion source and a move
// source. Without expression parameters, moves come from the behavior
// distribution (the stand-in for an untuned generator).
struct ComposedPolicyConfig {
  std::string name = "policy";
  EmotionSource emotion_source = EmotionSource::kUniform;
  EmotionId fixed_emotion;  // for kFixed
  std::optional<PolicyTable> selector;
  SelectMode selector_mode = SelectMode::kSample;
  std::optional<ExpressionParams> expression;
  SelectMode action_mode = SelectMode::kSample;
  double behavior_capitulate_prob = 0.02;
};

// The emotion half of a composed policy. Emotion-free expression policies
// never consult a selector and always report neutral.
EmotionId ChooseEmotion(const ComposedPolicyConfig& cfg, const DialogueState& state,
                        Rng& rng);

class ComposedPolicy : public FocalPolicy {
 public:
  explicit ComposedPolicy(ComposedPolicyConfig cfg);
  Decision Act(const Scenario& scenario, const DialogueState& state, Rng& rng) override;
  std::string name() const override { return cfg_.name; }
  const ComposedPolicyConfig& config() const { return cfg_; }

 private:
  ComposedPolicyConfig cfg_;
  BehaviorPolicy behavior_;
};

}  // namespace emoneg

#endif  // EMONEG_POLICIES_HPP_
