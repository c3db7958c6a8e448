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

#ifndef EMONEG_EMOTION_HPP_
#define EMONEG_EMOTION_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace emoneg {

inline constexpr int kNumEmotions = 28;

// One of the 28 GoEmotions labels, by index.
class EmotionId {
 public:
  constexpr EmotionId() = default;
  explicit constexpr EmotionId(int index) : index_(index) {}

  constexpr int index() const { return index_; }
  std::string_view label() const;

  static std::optional<EmotionId> FromLabel(std::string_view label);
  static EmotionId Neutral();

  friend constexpr bool operator==(EmotionId a, EmotionId b) = default;
  friend constexpr auto operator<=>(EmotionId a, EmotionId b) = default;

 private:
  int index_ = 27;
};

const std::array<std::string_view, kNumEmotions>& EmotionLabels();

namespace emotions {
inline constexpr EmotionId kAdmiration{0};
inline constexpr EmotionId kAmusement{1};
inline constexpr EmotionId kAnger{2};
inline constexpr EmotionId kAnnoyance{3};
inline constexpr EmotionId kApproval{4};
inline constexpr EmotionId kCaring{5};
inline constexpr EmotionId kConfusion{6};
inline constexpr EmotionId kCuriosity{7};
inline constexpr EmotionId kDesire{8};
inline constexpr EmotionId kDisappointment{9};
inline constexpr EmotionId kDisapproval{10};
inline constexpr EmotionId kDisgust{11};
inline constexpr EmotionId kEmbarrassment{12};
inline constexpr EmotionId kExcitement{13};
inline constexpr EmotionId kFear{14};
inline constexpr EmotionId kGratitude{15};
inline constexpr EmotionId kGrief{16};
inline constexpr EmotionId kJoy{17};
inline constexpr EmotionId kLove{18};
inline constexpr EmotionId kNervousness{19};
inline constexpr EmotionId kOptimism{20};
inline constexpr EmotionId kPride{21};
inline constexpr EmotionId kRealization{22};
inline constexpr EmotionId kRelief{23};
inline constexpr EmotionId kRemorse{24};
inline constexpr EmotionId kSadness{25};
inline constexpr EmotionId kSurprise{26};
inline constexpr EmotionId kNeutral{27};
}  // namespace emotions

// The three-sentence emotional-approach block inserted into the focal prompt.
std::string RenderEmotionBlock(EmotionId emotion);

}  // namespace emoneg

#endif  // EMONEG_EMOTION_HPP_
