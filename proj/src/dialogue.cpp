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

#include "emoneg/dialogue.hpp"

#include <algorithm>
#include <cmath>

namespace emoneg {
namespace {

// Position on the focal-favourable axis.
double Favour(const DialogueState& s, double x) { return s.direction() * x; }

double RelativeGap(const DialogueState& s, double focal, double ctp) {
  return std::abs(focal - ctp) / s.initial_gap();
}

void Accept(DialogueState& s, double value) {
  s.status = Status::kAccepted;
  s.final_value = value;
  s.focal_offer = value;
  s.ctp_offer = value;
}

// Applies the focal half of a step. Returns true when the dialogue ended.
bool ApplyFocalMove(DialogueState& next, const Move& move,
                    const CounterpartyProfile& profile) {
  next.turn += 1;
  next.focal_offer = move.proposal;
  const bool repeat = next.last_focal_style == move.style &&
                      next.last_focal_bin == move.bin;
  next.repetition_count = repeat ? next.repetition_count + 1 : 0;
  const bool aggressive =
      move.style == Style::kEscalation && move.bin == ConcessionBin::kHold;
  next.aggressive_streak = aggressive ? next.aggressive_streak + 1 : 0;
  next.last_focal_style = move.style;
  next.last_focal_bin = move.bin;

  if (Favour(next, move.proposal) <= Favour(next, next.ctp_offer)) {
    Accept(next, next.ctp_offer);
    return true;
  }
  if (next.aggressive_streak >= profile.breakdown_tolerance) {
    next.status = Status::kBreakdown;
    return true;
  }
  if (move.style == Style::kClose &&
      RelativeGap(next, next.focal_offer, next.ctp_offer) <=
          2.0 * profile.accept_threshold) {
    Accept(next, next.focal_offer);
    return true;
  }
  return false;
}

// Moves the counterparty to `new_ctp` (clamped at target and at the focal
// offer) and applies the acceptance rule.
void SettleCounterparty(DialogueState& next, double new_ctp,
                        const CounterpartyProfile& profile) {
  double p = Favour(next, new_ctp);
  p = std::min(p, Favour(next, next.target));
  if (p >= Favour(next, next.focal_offer)) {
    Accept(next, next.focal_offer);
    return;
  }
  next.ctp_offer = next.direction() * p;
  if (RelativeGap(next, next.focal_offer, next.ctp_offer) <=
      profile.accept_threshold) {
    Accept(next, next.focal_offer);
  }
}

void AppendHistory(DialogueState& next) {
  next.focal_offer_history.push_back(next.focal_offer);
  next.ctp_offer_history.push_back(next.ctp_offer);
}

void CheckSteppable(const DialogueState& state) {
  Require(state.status == Status::kOngoing, ErrorKind::kProtocol,
          "step on terminated dialogue " + state.scenario_id);
  Require(state.turn < kMaxTurns, ErrorKind::kProtocol,
          "step beyond the turn cap on " + state.scenario_id);
}

}  // namespace

double BinFraction(ConcessionBin bin) {
  switch (bin) {
    case ConcessionBin::kHold: return 0.0;
    case ConcessionBin::kSmall: return 0.05;
    case ConcessionBin::kMedium: return 0.15;
    case ConcessionBin::kLarge: return 0.30;
    case ConcessionBin::kCapitulate: return 1.0;
  }
  return 0.0;
}

std::string_view BinName(ConcessionBin bin) {
  switch (bin) {
    case ConcessionBin::kHold: return "hold";
    case ConcessionBin::kSmall: return "small";
    case ConcessionBin::kMedium: return "medium";
    case ConcessionBin::kLarge: return "large";
    case ConcessionBin::kCapitulate: return "capitulate";
  }
  return "?";
}

std::string_view StyleName(Style style) {
  switch (style) {
    case Style::kFirm: return "firm";
    case Style::kEmpathic: return "empathic";
    case Style::kEscalation: return "escalation";
    case Style::kProbe: return "probe";
    case Style::kClose: return "close";
  }
  return "?";
}

std::string_view StatusName(Status status) {
  switch (status) {
    case Status::kOngoing: return "ongoing";
    case Status::kAccepted: return "accepted";
    case Status::kBreakdown: return "breakdown";
  }
  return "?";
}

ConcessionBin ParseBin(std::string_view name) {
  for (int i = 0; i < kNumBins; ++i) {
    auto b = static_cast<ConcessionBin>(i);
    if (BinName(b) == name) return b;
  }
  Fail(ErrorKind::kContract, "unknown concession bin '" + std::string(name) + "'");
}

Style ParseStyle(std::string_view name) {
  for (int i = 0; i < kNumStyles; ++i) {
    auto s = static_cast<Style>(i);
    if (StyleName(s) == name) return s;
  }
  Fail(ErrorKind::kContract, "unknown style '" + std::string(name) + "'");
}

Status ParseStatus(std::string_view name) {
  for (auto s : {Status::kOngoing, Status::kAccepted, Status::kBreakdown}) {
    if (StatusName(s) == name) return s;
  }
  Fail(ErrorKind::kContract, "unknown status '" + std::string(name) + "'");
}

double DialogueState::relative_gap() const {
  return RelativeGap(*this, focal_offer, ctp_offer);
}

double DialogueState::last_ctp_move() const {
  const auto n = ctp_offer_history.size();
  if (n < 2) return 0.0;
  return direction() * (ctp_offer_history[n - 1] - ctp_offer_history[n - 2]);
}

double DialogueState::last_focal_retreat() const {
  const auto n = focal_offer_history.size();
  if (n < 2) return 0.0;
  return -direction() * (focal_offer_history[n - 1] - focal_offer_history[n - 2]);
}

DialogueState InitialState(const Scenario& scenario) {
  Require(scenario.target != scenario.anchor, ErrorKind::kContract,
          "scenario " + scenario.id + " has zero gap");
  DialogueState s;
  s.scenario_id = scenario.id;
  s.anchor = scenario.anchor;
  s.target = scenario.target;
  s.focal_offer = scenario.target;
  s.ctp_offer = scenario.anchor;
  s.focal_offer_history = {s.focal_offer};
  s.ctp_offer_history = {s.ctp_offer};
  return s;
}

Move MakeMove(const DialogueState& state, ConcessionBin bin, Style style,
              bool leverage) {
  Move m;
  m.bin = bin;
  m.style = style;
  m.leverage = leverage;
  m.proposal = bin == ConcessionBin::kCapitulate
                   ? state.ctp_offer
                   : state.focal_offer +
                         BinFraction(bin) * (state.ctp_offer - state.focal_offer);
  return m;
}

void ValidateMove(const DialogueState& state, const Move& move) {
  const Move expected = MakeMove(state, move.bin, move.style, move.leverage);
  const double tol = 1e-9 * std::max(1.0, state.initial_gap());
  Require(std::isfinite(move.proposal) &&
              std::abs(move.proposal - expected.proposal) <= tol,
          ErrorKind::kPolicy,
          "proposal " + FormatDouble(move.proposal) + " inconsistent with bin " +
              std::string(BinName(move.bin)) + " (expected " +
              FormatDouble(expected.proposal) + ")");
}

void ValidateProfile(const CounterpartyProfile& p) {
  Require(p.base_concession_rate >= 0.0 && p.base_concession_rate < 1.0,
          ErrorKind::kConfiguration, "base_concession_rate must be in [0, 1)");
  Require(p.breakdown_tolerance >= 1, ErrorKind::kConfiguration,
          "breakdown_tolerance must be >= 1");
  Require(p.accept_threshold >= 0.0, ErrorKind::kConfiguration,
          "accept_threshold must be >= 0");
  Require(p.firmness >= 0.0 && p.firmness <= 1.0, ErrorKind::kConfiguration,
          "firmness must be in [0, 1]");
  Require(p.noise >= 0.0 && p.noise < 1.0, ErrorKind::kConfiguration,
          "noise must be in [0, 1)");
  for (double m : p.susceptibility) {
    Require(m >= 0.0 && m <= 2.0, ErrorKind::kConfiguration,
            "susceptibility multipliers must be in [0, 2]");
  }
  Require(p.Susceptibility(emotions::kNeutral) == 1.0, ErrorKind::kConfiguration,
          "neutral susceptibility must be 1");
}

CounterpartyProfile DefaultProfile() {
  CounterpartyProfile p;
  p.name = "default";
  p.base_concession_rate = 0.08;
  p.breakdown_tolerance = 3;
  p.accept_threshold = 0.08;
  p.firmness = 0.6;
  p.noise = 0.2;
  // Pressure-driven emotions move this counterparty; light-hearted ones don't.
  p.susceptibility = {
      1.1,  // admiration
      0.3,  // amusement
      1.8,  // anger
      1.3,  // annoyance
      0.9,  // approval
      0.8,  // caring
      0.9,  // confusion
      1.0,  // curiosity
      1.1,  // desire
      1.4,  // disappointment
      1.7,  // disapproval
      1.3,  // disgust
      0.6,  // embarrassment
      0.7,  // excitement
      2.0,  // fear
      0.9,  // gratitude
      0.8,  // grief
      0.4,  // joy
      0.6,  // love
      0.7,  // nervousness
      0.9,  // optimism
      1.2,  // pride
      1.2,  // realization
      0.8,  // relief
      0.7,  // remorse
      1.0,  // sadness
      1.0,  // surprise
      1.0,  // neutral
  };
  return p;
}

const std::vector<std::string>& ProfileNames() {
  static const std::vector<std::string> names = {"default", "stubborn", "soft",
                                                 "warm"};
  return names;
}

CounterpartyProfile NamedProfile(std::string_view name) {
  CounterpartyProfile p = DefaultProfile();
  if (name == "default" || name == "vanilla") return p;
  if (name == "stubborn") {
    p.name = "stubborn";
    p.base_concession_rate = 0.05;
    p.firmness = 0.9;
    p.breakdown_tolerance = 2;
    p.accept_threshold = 0.06;
    for (auto& m : p.susceptibility) m = 1.0 + 0.6 * (m - 1.0);
    return p;
  }
  if (name == "soft") {
    p.name = "soft";
    p.base_concession_rate = 0.12;
    p.firmness = 0.2;
    p.accept_threshold = 0.12;
    return p;
  }
  if (name == "warm") {
    // Rewards affiliative emotions and resists pressure.
    p.name = "warm";
    for (auto& m : p.susceptibility) m = std::clamp(2.0 - m, 0.0, 2.0);
    p.susceptibility[static_cast<std::size_t>(emotions::kNeutral.index())] = 1.0;
    return p;
  }
  Fail(ErrorKind::kConfiguration,
       "unknown counterparty profile '" + std::string(name) + "'");
}

double StyleConcessionFactor(Style style, double firmness) {
  switch (style) {
    case Style::kEscalation: return 1.0 - firmness * 0.5;
    case Style::kFirm: return 1.0 - firmness * 0.25;
    default: return 1.0;
  }
}

DialogueState Step(const DialogueState& state, EmotionId emotion,
                   const Move& move, const CounterpartyProfile& profile,
                   uint64_t rng_seed) {
  CheckSteppable(state);
  ValidateMove(state, move);
  DialogueState next = state;
  if (!ApplyFocalMove(next, move, profile)) {
    Rng rng(rng_seed);
    const double jitter = 1.0 + profile.noise * rng.Uniform(-1.0, 1.0);
    const double remaining = std::abs(next.ctp_offer - next.target);
    const double concession = profile.base_concession_rate *
                              profile.Susceptibility(emotion) *
                              StyleConcessionFactor(move.style, profile.firmness) *
                              remaining * jitter;
    SettleCounterparty(next, next.ctp_offer + next.direction() * concession,
                       profile);
  }
  AppendHistory(next);
  return next;
}

Scenario MirrorScenario(const Scenario& scenario) {
  Scenario m = scenario;
  m.anchor = scenario.target;
  m.target = scenario.anchor;
  return m;
}

DialogueState MirrorState(const DialogueState& state) {
  DialogueState m;
  m.scenario_id = state.scenario_id;
  m.anchor = state.target;
  m.target = state.anchor;
  m.turn = state.turn;
  m.focal_offer = state.ctp_offer;
  m.ctp_offer = state.focal_offer;
  m.focal_offer_history = state.ctp_offer_history;
  m.ctp_offer_history = state.focal_offer_history;
  m.status = state.status;
  return m;
}

DialogueState StepAgainstPolicy(const DialogueState& state, EmotionId emotion,
                                const Move& move, const Scenario& scenario,
                                const CounterpartySide& side,
                                uint64_t rng_seed) {
  if (side.policy == nullptr) {
    return Step(state, emotion, move, side.profile, rng_seed);
  }
  CheckSteppable(state);
  ValidateMove(state, move);
  DialogueState next = state;
  if (!ApplyFocalMove(next, move, side.profile)) {
    const Scenario mirrored = MirrorScenario(scenario);
    DialogueState view = MirrorState(next);
    // The mirrored view sees the focal proposal as the latest opposing offer.
    view.focal_offer_history.push_back(next.ctp_offer);
    view.ctp_offer_history.push_back(next.focal_offer);
    Rng rng(rng_seed);
    const Decision reply = side.policy->Act(mirrored, view, rng);
    ValidateMove(view, reply.move);
    if (reply.move.bin == ConcessionBin::kCapitulate) {
      Accept(next, next.focal_offer);
    } else {
      SettleCounterparty(next, reply.move.proposal, side.profile);
    }
  }
  AppendHistory(next);
  return next;
}

Trajectory RunEpisode(const Scenario& scenario, FocalPolicy& policy,
                      const CounterpartyProfile& profile, uint64_t seed) {
  return RunEpisode(scenario, policy, CounterpartySide{profile, nullptr}, seed);
}

Trajectory RunEpisode(const Scenario& scenario, FocalPolicy& policy,
                      const CounterpartySide& side, uint64_t seed) {
  Trajectory traj;
  traj.scenario = scenario;
  DialogueState state = InitialState(scenario);
  Rng policy_rng(DeriveSeed(seed, 0x706f6c));
  while (state.status == Status::kOngoing && state.turn < kMaxTurns) {
    const Decision d = policy.Act(scenario, state, policy_rng);
    Transition tr;
    tr.state = state;
    tr.emotion = d.emotion;
    tr.move = d.move;
    tr.next_state = StepAgainstPolicy(state, d.emotion, d.move, scenario, side,
                                      DeriveSeed(seed, 1, static_cast<uint64_t>(state.turn)));
    state = tr.next_state;
    traj.transitions.push_back(std::move(tr));
  }
  traj.status = state.status;
  traj.final_value = state.final_value;
  traj.rounds = static_cast<int>(traj.transitions.size());
  return traj;
}

Trajectory RunEpisodeRecorded(const Scenario& scenario, FocalPolicy& policy,
                              const CounterpartySide& side, uint64_t seed) {
  try {
    return RunEpisode(scenario, policy, side, seed);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kPolicy && e.kind() != ErrorKind::kBackend) throw;
    Trajectory traj;
    traj.scenario = scenario;
    traj.status = Status::kOngoing;
    traj.error = e.what();
    return traj;
  }
}

}  // namespace emoneg
