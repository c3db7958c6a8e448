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

#ifndef EMONEG_PROMPTS_HPP_
#define EMONEG_PROMPTS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "emoneg/dialogue.hpp"

namespace emoneg {

struct RoleNames {
  std::string focal;         // e.g. "Creditor"
  std::string counterparty;  // e.g. "Debtor"
  std::string quantity;      // e.g. "payment days"
};

RoleNames RolesForDomain(const std::string& domain);

// Short textual rendering of a structured move.
std::string DescribeMove(const Move& move, const std::string& unit);

// Speaker-labelled history of offers up to `state`.
std::string RenderTimeline(const Scenario& scenario, const DialogueState& state);

// Focal-agent system message; the emotion block is omitted when `emotion`
// is empty (emotion-free mode).
std::string RenderFocalPrompt(const Scenario& scenario, const DialogueState& state,
                              std::optional<EmotionId> emotion);

const std::string& JudgeSystemMessage();
std::string RenderJudgeUserMessage(const Scenario& scenario,
                                   const std::vector<Transition>& prior,
                                   const Move& candidate);

}  // namespace emoneg

#endif  // EMONEG_PROMPTS_HPP_
