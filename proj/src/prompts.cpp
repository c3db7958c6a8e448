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

#include "emoneg/prompts.hpp"

#include <cstdio>
#include <sstream>

namespace emoneg {
namespace {

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string UnitFor(const std::string& domain) {
  if (domain == "disaster" || domain == "student") return "minutes";
  return "days";
}

}  // namespace

RoleNames RolesForDomain(const std::string& domain) {
  if (domain == "disaster") return {"Rescue Coordinator", "Survivor", "rescue minutes"};
  if (domain == "hospital") return {"Hospital Scheduler", "Patient", "surgery wait days"};
  if (domain == "student") return {"Sleep Health AI", "Student", "minutes past 9 PM"};
  return {"Creditor", "Debtor", "payment days"};
}

std::string DescribeMove(const Move& move, const std::string& unit) {
  std::ostringstream os;
  os << "Proposes " << Fmt(move.proposal) << ' ' << unit << " ("
     << BinName(move.bin) << " concession, " << StyleName(move.style) << " style"
     << (move.leverage ? ", citing leverage" : "") << ").";
  return os.str();
}

std::string RenderTimeline(const Scenario& scenario, const DialogueState& state) {
  const RoleNames roles = RolesForDomain(scenario.domain);
  const std::string unit = UnitFor(scenario.domain);
  std::ostringstream os;
  os << roles.counterparty << " opening position: " << Fmt(scenario.anchor) << ' '
     << unit << '\n';
  const auto n = state.focal_offer_history.size();
  for (std::size_t t = 1; t < n; ++t) {
    os << "Round " << t << " - " << roles.focal << ": "
       << Fmt(state.focal_offer_history[t]) << ' ' << unit << "; "
       << roles.counterparty << ": " << Fmt(state.ctp_offer_history[t]) << ' '
       << unit << '\n';
  }
  if (n <= 1) os << "(no offers exchanged yet)\n";
  return os.str();
}

std::string RenderFocalPrompt(const Scenario& scenario, const DialogueState& state,
                              std::optional<EmotionId> emotion) {
  const RoleNames roles = RolesForDomain(scenario.domain);
  std::ostringstream os;
  os << "You are a PROFESSIONAL " << roles.focal << " negotiating "
     << roles.quantity << " with the " << roles.counterparty << ".\n\n";
  os << "### CRITICAL NEGOTIATION RULES:\n"
     << "- NEVER copy the " << roles.counterparty << "'s exact number\n"
     << "- Move GRADUALLY toward their position (not all at once)\n"
     << "- Show you are negotiating, not just accepting\n"
     << "- Your goal: reach agreement as close as possible to your target\n\n";
  os << "### ROLE CLARITY\n"
     << "- You are ONLY the " << roles.focal << " - speak only as yourself\n"
     << "- Give only YOUR response (1-2 sentences max)\n\n";
  os << "### CONTEXT\n"
     << "- Your Target: " << Fmt(scenario.target) << ' ' << UnitFor(scenario.domain)
     << '\n';
  for (const auto& [k, v] : scenario.context) os << "- " << k << ": " << v << '\n';
  os << "\n### CURRENT SITUATION\n" << RenderTimeline(scenario, state) << '\n';
  if (emotion) {
    os << "### EMOTIONAL APPROACH\n"
       << "(you have to use the following emotion style if given):\n"
       << RenderEmotionBlock(*emotion) << "\n\n";
  }
  os << "Respond now with your negotiation counter-offer:\n";
  return os.str();
}

const std::string& JudgeSystemMessage() {
  static const std::string msg =
      "You are an expert negotiation analyst. Rate each focal-agent utterance "
      "on a 1-10 integer scale, balancing firmness with realism.\n"
      "Anchor points: 10 excellent, 8 strong, 6 average, 4 weak, 2 poor, "
      "1 terrible.\n"
      "RESPONSE FORMAT (strict): one line containing exactly:\n"
      "  SCORE: <int 1-10>\n";
  return msg;
}

std::string RenderJudgeUserMessage(const Scenario& scenario,
                                   const std::vector<Transition>& prior,
                                   const Move& candidate) {
  const RoleNames roles = RolesForDomain(scenario.domain);
  const std::string unit = UnitFor(scenario.domain);
  std::ostringstream os;
  os << "NEGOTIATION CONTEXT\n";
  for (const auto& [k, v] : scenario.context) os << "  " << k << ": " << v << '\n';
  os << "  " << roles.focal << "'s target settlement: " << Fmt(scenario.target)
     << ' ' << unit << "\n\nDIALOG HISTORY\n";
  os << roles.counterparty << ": " << Fmt(scenario.anchor) << ' ' << unit << '\n';
  for (const auto& tr : prior) {
    os << roles.focal << ": " << DescribeMove(tr.move, unit) << '\n'
       << roles.counterparty << ": " << Fmt(tr.next_state.ctp_offer) << ' ' << unit
       << '\n';
  }
  os << "\n" << "UTTERANCE TO SCORE\n" << DescribeMove(candidate, unit) << "\n\n"
     << "Provide your 1-10 score on the next line in the form 'SCORE: N'.\n";
  return os.str();
}

}  // namespace emoneg
