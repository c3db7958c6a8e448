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

#ifndef EMONEG_DIALOGUE_HPP_
#define EMONEG_DIALOGUE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emoneg/common.hpp"
#include "emoneg/emotion.hpp"
#include "emoneg/scenario.hpp"

namespace emoneg {

inline constexpr int kMaxTurns = 30;

enum class ConcessionBin { kHold, kSmall, kMedium, kLarge, kCapitulate };
enum class Style { kFirm, kEmpathic, kEscalation, kProbe, kClose };
enum class Status { kOngoing, kAccepted, kBreakdown };

inline constexpr int kNumBins = 5;
inline constexpr int kNumStyles = 5;

// Fraction of the remaining focal-to-counterparty distance given up.
double BinFraction(ConcessionBin bin);
std::string_view BinName(ConcessionBin bin);
std::string_view StyleName(Style style);
std::string_view StatusName(Status status);
ConcessionBin ParseBin(std::string_view name);
Style ParseStyle(std::string_view name);
Status ParseStatus(std::string_view name);

// Structured stand-in for one focal utterance.
struct Move {
  double proposal = 0.0;
  ConcessionBin bin = ConcessionBin::kHold;
  Style style = Style::kFirm;
  bool leverage = false;
};

struct DialogueState {
  std::string scenario_id;
  double anchor = 0.0;
  double target = 0.0;
  int turn = 0;
  double focal_offer = 0.0;
  double ctp_offer = 0.0;
  std::vector<double> focal_offer_history;
  std::vector<double> ctp_offer_history;
  std::optional<Style> last_focal_style;
  std::optional<ConcessionBin> last_focal_bin;
  int repetition_count = 0;
  int aggressive_streak = 0;
  Status status = Status::kOngoing;
  std::optional<double> final_value;

  double direction() const { return target > anchor ? 1.0 : -1.0; }
  double initial_gap() const { return target > anchor ? target - anchor : anchor - target; }
  // |focal - ctp| relative to the initial gap.
  double relative_gap() const;
  // Counterparty movement toward the focal target on the last turn, in
  // domain units (0 before the first turn).
  double last_ctp_move() const;
  double last_focal_retreat() const;
};

DialogueState InitialState(const Scenario& scenario);

// Builds the move whose proposal is consistent with `bin` from `state`.
Move MakeMove(const DialogueState& state, ConcessionBin bin, Style style,
              bool leverage);
// Throws a policy error when move.proposal disagrees with its bin.
void ValidateMove(const DialogueState& state, const Move& move);

struct CounterpartyProfile {
  std::string name;
  double base_concession_rate = 0.08;
  std::array<double, kNumEmotions> susceptibility{};
  int breakdown_tolerance = 3;
  double accept_threshold = 0.08;
  double firmness = 0.6;
  // Half-width of the multiplicative jitter on each concession.
  double noise = 0.0;

  double Susceptibility(EmotionId e) const {
    return susceptibility[static_cast<std::size_t>(e.index())];
  }
};

void ValidateProfile(const CounterpartyProfile& profile);
CounterpartyProfile DefaultProfile();
CounterpartyProfile NamedProfile(std::string_view name);
const std::vector<std::string>& ProfileNames();

// Concession multiplier for the focal style (aggression penalty).
double StyleConcessionFactor(Style style, double firmness);

DialogueState Step(const DialogueState& state, EmotionId emotion,
                   const Move& move, const CounterpartyProfile& profile,
                   uint64_t rng_seed);

struct Transition {
  DialogueState state;
  EmotionId emotion;
  Move move;
  std::optional<int> judge_score;
  DialogueState next_state;
  std::optional<double> advantage;
};

struct Trajectory {
  Scenario scenario;
  std::vector<Transition> transitions;
  std::optional<double> final_value;
  Status status = Status::kOngoing;
  int rounds = 0;
  std::optional<std::string> error;  // set when the episode was aborted
};

struct Decision {
  EmotionId emotion;
  Move move;
};

// Anything that chooses a focal (emotion, move) for a state.
class FocalPolicy {
 public:
  virtual ~FocalPolicy() = default;
  virtual Decision Act(const Scenario& scenario, const DialogueState& state,
                       Rng& rng) = 0;
  virtual std::string name() const = 0;
};

// The counterparty side of an episode: a scripted profile, optionally
// replaced by a policy that plays the mirrored role. The profile still
// supplies acceptance and walkout thresholds in that case.
struct CounterpartySide {
  CounterpartyProfile profile;
  FocalPolicy* policy = nullptr;
};

// Mirrored view used when a policy plays the counterparty.
Scenario MirrorScenario(const Scenario& scenario);
DialogueState MirrorState(const DialogueState& state);

DialogueState StepAgainstPolicy(const DialogueState& state, EmotionId emotion,
                                const Move& move, const Scenario& scenario,
                                const CounterpartySide& side, uint64_t rng_seed);

Trajectory RunEpisode(const Scenario& scenario, FocalPolicy& policy,
                      const CounterpartyProfile& profile, uint64_t seed);
Trajectory RunEpisode(const Scenario& scenario, FocalPolicy& policy,
                      const CounterpartySide& side, uint64_t seed);
// Like RunEpisode, but policy or backend failures produce an aborted
// trajectory with `error` set instead of throwing.
Trajectory RunEpisodeRecorded(const Scenario& scenario, FocalPolicy& policy,
                              const CounterpartySide& side, uint64_t seed);

}  // namespace emoneg

#endif  // EMONEG_DIALOGUE_HPP_
