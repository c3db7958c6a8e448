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

#include "emoneg/judge.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <string>

namespace emoneg {

bool EmotionStyleInconsistent(EmotionId emotion, Style style) {
  using namespace emotions;
  auto in = [&](std::initializer_list<Style> allowed) {
    return std::find(allowed.begin(), allowed.end(), style) == allowed.end();
  };
  if (emotion == kAnger || emotion == kDisapproval || emotion == kDisgust) {
    return in({Style::kFirm, Style::kEscalation});
  }
  if (emotion == kFear || emotion == kNervousness || emotion == kSadness) {
    return in({Style::kEmpathic, Style::kProbe});
  }
  if (emotion == kJoy || emotion == kOptimism || emotion == kGratitude) {
    return in({Style::kClose, Style::kEmpathic});
  }
  return false;
}

int ScoreTurn(const JudgeContext& ctx, const RubricWeights& w) {
  const Scenario& sc = ctx.scenario;
  Require(!sc.id.empty() && sc.target != sc.anchor, ErrorKind::kContract,
          "judge context has an empty scenario");
  const DialogueState state =
      ctx.prior.empty() ? InitialState(sc) : ctx.prior.back().next_state;
  ValidateMove(state, ctx.move);

  const Move& m = ctx.move;
  const bool ctp_conceded = state.last_ctp_move() > 0.0;
  const double gap = std::abs(sc.target - sc.anchor);
  int score = w.base;
  if (std::abs(m.proposal - sc.target) <= w.anchor_window * gap && ctp_conceded) {
    score += w.anchor_bonus;
  }
  if (m.leverage && (m.style == Style::kFirm || m.style == Style::kClose)) {
    score += w.leverage_bonus;
  }
  if ((m.bin == ConcessionBin::kSmall || m.bin == ConcessionBin::kMedium) &&
      ctp_conceded) {
    score += w.calibrated_bonus;
  }
  if (m.bin == ConcessionBin::kLarge && !ctp_conceded) score -= w.large_penalty;
  if (m.bin == ConcessionBin::kCapitulate) score -= w.capitulate_penalty;
  if (state.last_focal_style == m.style && state.last_focal_bin == m.bin) {
    score -= w.repetition_penalty;
  }
  if (m.style == Style::kEscalation && ctp_conceded) score -= w.escalation_penalty;
  if (EmotionStyleInconsistent(ctx.emotion, m.style)) score -= w.inconsistency_penalty;
  return std::clamp(score, 1, 10);
}

void AnnotateTurns(Trajectory& traj, const RubricWeights& w) {
  for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
    auto& tr = traj.transitions[t];
    JudgeContext ctx{traj.scenario,
                     std::span<const Transition>(traj.transitions.data(), t),
                     tr.emotion, tr.move};
    tr.judge_score = ScoreTurn(ctx, w);
  }
}

int ScoreEpisode(const Trajectory& traj) {
  Require(!traj.transitions.empty(), ErrorKind::kContract,
          "cannot score an empty trajectory");
  double sum = 0.0;
  for (const auto& tr : traj.transitions) {
    Require(tr.judge_score.has_value(), ErrorKind::kContract,
            "episode scoring needs per-turn judge scores");
    sum += *tr.judge_score;
  }
  long score = std::lround(sum / static_cast<double>(traj.transitions.size()));
  if (traj.status == Status::kAccepted) score += 1;
  if (traj.status == Status::kBreakdown) score -= 1;
  return static_cast<int>(std::clamp(score, 1L, 10L));
}

int ParseExternalScore(std::string_view text) {
  static const std::regex kToken(R"(SCORE:\s*(\d{1,2}))");
  static const std::regex kBare(R"((^|[^0-9.])(10|[1-9])(?![0-9]|\.[0-9]))");
  const std::string s(text);
  std::smatch m;
  if (std::regex_search(s, m, kToken)) {
    return std::clamp(std::stoi(m[1].str()), 1, 10);
  }
  if (std::regex_search(s, m, kBare)) {
    return std::stoi(m[2].str());
  }
  Fail(ErrorKind::kJudgeParse, "no score in judge reply: '" + s + "'");
}

}  // namespace emoneg
