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

#include <tuple>

#include "doctest.h"

#include "emoneg/behavior.hpp"
#include "emoneg/judge.hpp"
#include "emoneg/prompts.hpp"
#include "test_util.hpp"

using namespace emoneg;
using emoneg::testing::MakeScenario;

namespace {

using Plan = std::tuple<ConcessionBin, Style, bool>;

std::vector<Transition> Play(const Scenario& sc, const CounterpartyProfile& profile,
                             const std::vector<Plan>& plan) {
  std::vector<Transition> out;
  DialogueState s = InitialState(sc);
  for (const auto& [bin, style, lev] : plan) {
    Transition tr;
    tr.state = s;
    tr.emotion = EmotionId::Neutral();
    tr.move = MakeMove(s, bin, style, lev);
    tr.next_state = Step(s, tr.emotion, tr.move, profile, 0);
    s = tr.next_state;
    out.push_back(tr);
  }
  return out;
}

CounterpartyProfile Still() {
  CounterpartyProfile p;
  p.name = "still";
  p.base_concession_rate = 0.0;
  p.susceptibility.fill(1.0);
  return p;
}

CounterpartyProfile Yielding() {
  CounterpartyProfile p = Still();
  p.base_concession_rate = 0.2;
  p.firmness = 0.0;
  return p;
}

int ScoreNext(const Scenario& sc, const std::vector<Transition>& prior, EmotionId e,
              ConcessionBin bin, Style style, bool lev) {
  const DialogueState s = prior.empty() ? InitialState(sc) : prior.back().next_state;
  return ScoreTurn({sc, prior, e, MakeMove(s, bin, style, lev)});
}

Trajectory WithScores(const std::vector<int>& scores, Status status) {
  Trajectory t;
  t.scenario = MakeScenario("x", 100, 40);
  for (int s : scores) {
    Transition tr;
    tr.judge_score = s;
    t.transitions.push_back(tr);
  }
  t.status = status;
  return t;
}

}  // namespace

TEST_CASE("anchored firm leverage after a counterparty concession scores 10") {
  const Scenario sc = MakeScenario("s", 159, 12);
  const auto prior = Play(sc, Yielding(), {{ConcessionBin::kHold, Style::kProbe, false}});
  REQUIRE(prior.back().next_state.last_ctp_move() > 0.0);
  // 6 + 2 anchor + 1 leverage + 1 calibrated.
  CHECK(ScoreNext(sc, prior, EmotionId::Neutral(), ConcessionBin::kSmall, Style::kFirm, true) ==
        10);
}

TEST_CASE("capitulating on the first turn scores 2") {
  const Scenario sc = MakeScenario("s", 159, 12);
  CHECK(ScoreNext(sc, {}, EmotionId::Neutral(), ConcessionBin::kCapitulate, Style::kProbe,
                  false) == 2);
}

TEST_CASE("an exact repeat with no other term scores 5") {
  const Scenario sc = MakeScenario("s", 159, 12);
  const auto prior = Play(sc, Still(), {{ConcessionBin::kHold, Style::kProbe, false}});
  CHECK(ScoreNext(sc, prior, EmotionId::Neutral(), ConcessionBin::kHold, Style::kProbe, false) ==
        5);
}

TEST_CASE("remaining rubric terms apply as stated") {
  const Scenario sc = MakeScenario("s", 159, 12);
  const auto conceded = Play(sc, Yielding(), {{ConcessionBin::kHold, Style::kProbe, false}});
  const auto still = Play(sc, Still(), {{ConcessionBin::kHold, Style::kProbe, false}});
  // Large concession into a static counterparty.
  CHECK(ScoreNext(sc, still, EmotionId::Neutral(), ConcessionBin::kLarge, Style::kEmpathic,
                  false) == 4);
  // Escalation right after a concession: 6 + 2 anchor - 2.
  CHECK(ScoreNext(sc, conceded, EmotionId::Neutral(), ConcessionBin::kHold, Style::kEscalation,
                  false) == 6);
  // Joy with a firm style is inconsistent.
  CHECK(ScoreNext(sc, still, emotions::kJoy, ConcessionBin::kHold, Style::kFirm, false) == 5);
  // Leverage does not count with probe.
  CHECK(ScoreNext(sc, still, EmotionId::Neutral(), ConcessionBin::kHold, Style::kEmpathic,
                  true) == 6);
}

TEST_CASE("consistency table") {
  CHECK_FALSE(EmotionStyleInconsistent(emotions::kAnger, Style::kEscalation));
  CHECK(EmotionStyleInconsistent(emotions::kAnger, Style::kEmpathic));
  CHECK(EmotionStyleInconsistent(emotions::kFear, Style::kFirm));
  CHECK_FALSE(EmotionStyleInconsistent(emotions::kGratitude, Style::kClose));
  for (int s = 0; s < kNumStyles; ++s) {
    CHECK_FALSE(EmotionStyleInconsistent(emotions::kCuriosity, static_cast<Style>(s)));
  }
}

TEST_CASE("turn scores stay in range and small dominates capitulate") {
  const auto scenarios = GenerateScenarios(DefaultDomain("student"), 10, 1);
  BehaviorPolicy behavior(0.2);
  for (const auto& sc : scenarios) {
    Trajectory t = RunEpisode(sc, behavior, DefaultProfile(), 2);
    AnnotateTurns(t);
    for (std::size_t i = 0; i < t.transitions.size(); ++i) {
      const auto& tr = t.transitions[i];
      CHECK(*tr.judge_score >= 1);
      CHECK(*tr.judge_score <= 10);
      std::span<const Transition> prior(t.transitions.data(), i);
      const int cap = ScoreTurn(
          {sc, prior, tr.emotion, MakeMove(tr.state, ConcessionBin::kCapitulate, tr.move.style,
                                           tr.move.leverage)});
      const int small = ScoreTurn(
          {sc, prior, tr.emotion,
           MakeMove(tr.state, ConcessionBin::kSmall, tr.move.style, tr.move.leverage)});
      CHECK(small > cap);
    }
  }
}

TEST_CASE("empty scenario context is a contract error") {
  Scenario empty;
  try {
    ScoreTurn({empty, {}, EmotionId::Neutral(), Move{}});
    FAIL("expected a contract error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kContract);
  }
}

TEST_CASE("episode scores") {
  CHECK(ScoreEpisode(WithScores({6, 6, 6}, Status::kAccepted)) == 7);
  CHECK(ScoreEpisode(WithScores({6, 6, 6}, Status::kBreakdown)) == 5);
  CHECK(ScoreEpisode(WithScores({10}, Status::kAccepted)) == 10);
  CHECK(ScoreEpisode(WithScores({1, 1}, Status::kBreakdown)) == 1);
  CHECK_THROWS_AS(ScoreEpisode(WithScores({}, Status::kAccepted)), Error);
}

TEST_CASE("external score parsing") {
  CHECK(ParseExternalScore("SCORE: 8\nfirm anchor") == 8);
  CHECK(ParseExternalScore("I'd say 7 overall") == 7);
  CHECK(ParseExternalScore("SCORE: 12") == 10);
  CHECK(ParseExternalScore("10/10") == 10);
  try {
    ParseExternalScore("great turn");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kJudgeParse);
  }
}

TEST_CASE("prompts carry the emotion block only when an emotion is given") {
  const Scenario sc = GenerateScenarios(DefaultDomain("crad"), 1, 0)[0];
  const DialogueState s = InitialState(sc);
  const std::string with = RenderFocalPrompt(sc, s, emotions::kAnger);
  const std::string without = RenderFocalPrompt(sc, s, std::nullopt);
  CHECK(with.find(RenderEmotionBlock(emotions::kAnger)) != std::string::npos);
  CHECK(without.find("Respond with") == std::string::npos);
  CHECK(JudgeSystemMessage().find("SCORE") != std::string::npos);
}
