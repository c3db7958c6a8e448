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

#ifndef EMONEG_BEHAVIOR_HPP_
#define EMONEG_BEHAVIOR_HPP_

#include <optional>
#include <string>

#include "emoneg/dialogue.hpp"

namespace emoneg {

// Data-collection policy: uniform emotion, uniform move over
// {hold, small, medium} x styles x leverage, with a small capitulation rate.
class BehaviorPolicy : public FocalPolicy {
 public:
  explicit BehaviorPolicy(double capitulate_prob = 0.02)
      : capitulate_prob_(capitulate_prob) {}
  Decision Act(const Scenario& scenario, const DialogueState& state,
               Rng& rng) override;
  std::string name() const override { return "behavior"; }

  // Move half of the policy, shared with emotion-only controllers.
  Move SampleMove(const DialogueState& state, Rng& rng) const;

 private:
  double capitulate_prob_;
};

// Deterministic heuristic: hold once, then small concessions, closing when
// the gap is small. Emotion is uniform random.
class ScriptedPolicy : public FocalPolicy {
 public:
  Decision Act(const Scenario& scenario, const DialogueState& state,
               Rng& rng) override;
  std::string name() const override { return "scripted"; }
};

// Always plays the same emotion, bin, style and leverage.
class FixedPolicy : public FocalPolicy {
 public:
  FixedPolicy(EmotionId emotion, ConcessionBin bin, Style style, bool leverage)
      : emotion_(emotion), bin_(bin), style_(style), leverage_(leverage) {}
  Decision Act(const Scenario&, const DialogueState& state, Rng&) override {
    return {emotion_, MakeMove(state, bin_, style_, leverage_)};
  }
  std::string name() const override { return "fixed"; }

 private:
  EmotionId emotion_;
  ConcessionBin bin_;
  Style style_;
  bool leverage_;
};

}  // namespace emoneg

#endif  // EMONEG_BEHAVIOR_HPP_
