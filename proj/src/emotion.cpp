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

#include "emoneg/emotion.hpp"

#include "emoneg/common.hpp"

namespace emoneg {
namespace {

constexpr std::array<std::string_view, kNumEmotions> kLabels = {
    "admiration", "amusement",   "anger",       "annoyance",  "approval",
    "caring",     "confusion",   "curiosity",   "desire",     "disappointment",
    "disapproval", "disgust",    "embarrassment", "excitement", "fear",
    "gratitude",  "grief",       "joy",         "love",       "nervousness",
    "optimism",   "pride",       "realization", "relief",     "remorse",
    "sadness",    "surprise",    "neutral"};

struct Descriptor {
  std::string_view article_adjective;
  std::string_view affect;
  std::string_view hint;
};

constexpr std::array<Descriptor, kNumEmotions> kCatalog = {{
    {"an admiring",
     "Your words convey genuine respect for the other party's reasoning",
     "recognizes their merits while still pressing your position"},
    {"an amused",
     "Your words convey light playfulness about the back-and-forth",
     "injects subtle humor without dismissing the matter"},
    {"an angry",
     "Your words convey strong displeasure with the current state of affairs",
     "is firm, assertive, and signals urgency"},
    {"an annoyed", "Your words convey mild frustration with the slow progress",
     "is sharp and impatient without escalating into outright anger"},
    {"an approving",
     "Your words convey clear agreement with elements of the other party's "
     "position",
     "affirms shared ground before reintroducing your ask"},
    {"a caring",
     "Your words convey concern for the other party's wellbeing beyond the "
     "transaction",
     "is warm, supportive, and centered on mutual interest"},
    {"a confused",
     "Your words convey uncertainty about the other party's reasoning",
     "asks for clarification and probes their stated rationale"},
    {"a curious",
     "Your words convey genuine interest in the other party's underlying "
     "interests",
     "asks open-ended questions and invites them to share more"},
    {"a desiring", "Your words convey strong wanting for a particular outcome",
     "emphasizes what you seek and the value of reaching agreement"},
    {"a disappointed",
     "Your words convey measured letdown at the current offer",
     "signals that the proposal falls noticeably short of expectations"},
    {"a disapproving",
     "Your words convey firm rejection of the current proposal",
     "explicitly states the offer is unacceptable as stated"},
    {"a disgusted",
     "Your words convey strong distaste for the current direction",
     "signals that the proposal is fundamentally objectionable"},
    {"an embarrassed",
     "Your words convey self-consciousness about your own position",
     "hedges and softens your demands while still pursuing them"},
    {"an excited",
     "Your words convey high energy about the prospect of a deal",
     "is enthusiastic and momentum-building toward agreement"},
    {"a fearful",
     "Your words convey anxiety about potential negative outcomes",
     "is cautious and stresses risks of the negotiation collapsing"},
    {"a grateful",
     "Your words convey sincere thanks for the other party's flexibility so "
     "far",
     "acknowledges their concessions and invites further reciprocity"},
    {"a grieving",
     "Your words convey heavy loss over how things have unfolded",
     "is somber and reflects on what could have been"},
    {"a joyful",
     "Your words convey genuine delight at the prospect of a mutual deal",
     "is warm, enthusiastic, and frames the negotiation as opportunity"},
    {"a loving",
     "Your words convey deep care for the long-term relationship",
     "emphasizes partnership and shared future beyond this transaction"},
    {"a nervous",
     "Your words convey unease about the negotiation's trajectory",
     "is tentative, hedging, and signals openness to compromise"},
    {"an optimistic",
     "Your words convey confidence that an agreement is well within reach",
     "is forward-looking and solution-focused"},
    {"a proud", "Your words convey confidence and standing in your position",
     "is assertive about your value without being dismissive of theirs"},
    {"a discerning",
     "Your words convey a moment of insight about what is really at stake",
     "signals deeper comprehension and a sharper read of the situation"},
    {"a relieved",
     "Your words convey easing tension as progress finally emerges",
     "acknowledges the difficulty before moving forward"},
    {"a remorseful",
     "Your words convey regret for prior friction in the negotiation",
     "takes responsibility and seeks to repair the working relationship"},
    {"a sad", "Your words convey somber disappointment about the impasse",
     "is downcast and seeks empathy from the other side"},
    {"a surprised",
     "Your words convey genuine astonishment at the other party's position",
     "reflects an unexpected shift and reopens the conversation"},
    // Not part of the published catalog; written to the same schema.
    {"a neutral",
     "Your words convey calm and even-handed attention to the terms on the "
     "table",
     "is matter-of-fact and focused on the numbers under discussion"},
}};

}  // namespace

const std::array<std::string_view, kNumEmotions>& EmotionLabels() {
  return kLabels;
}

std::string_view EmotionId::label() const {
  Require(index_ >= 0 && index_ < kNumEmotions, ErrorKind::kContract,
          "emotion index out of range: " + std::to_string(index_));
  return kLabels[static_cast<std::size_t>(index_)];
}

std::optional<EmotionId> EmotionId::FromLabel(std::string_view label) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (kLabels[static_cast<std::size_t>(i)] == label) return EmotionId(i);
  }
  return std::nullopt;
}

EmotionId EmotionId::Neutral() { return emotions::kNeutral; }

std::string RenderEmotionBlock(EmotionId emotion) {
  const Descriptor& d = kCatalog.at(static_cast<std::size_t>(emotion.index()));
  std::string out = "Respond with ";
  out += d.article_adjective;
  out += " tone. ";
  out += d.affect;
  out += ". Use language that ";
  out += d.hint;
  out += ".";
  return out;
}

}  // namespace emoneg
