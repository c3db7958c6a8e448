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

#include "emoneg/sweep.hpp"

#include <cstdio>
#include <fstream>
#include <memory>

#include "emoneg/behavior.hpp"
#include "json.hpp"

namespace emoneg {
namespace {

using ojson = nlohmann::ordered_json;

std::string TrajId(const std::string& scenario_id, std::size_t rollout) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/r%04zu", rollout);
  return scenario_id + buf;
}

StoredTrajectory StoreFromTrajectory(const Trajectory& traj, std::string traj_id,
                                     uint64_t seed) {
  StoredTrajectory st;
  st.traj_id = std::move(traj_id);
  st.scenario_id = traj.scenario.id;
  st.rollout_seed = seed;
  st.status = traj.status;
  st.final_value = traj.final_value;
  st.rounds = traj.rounds;
  st.error = traj.error;
  for (const auto& tr : traj.transitions) {
    StoredTransition s;
    s.t = tr.next_state.turn;
    s.emotion = tr.emotion;
    s.move = tr.move;
    s.focal_offer = tr.next_state.focal_offer;
    s.ctp_offer = tr.next_state.ctp_offer;
    st.transitions.push_back(s);
  }
  return st;
}

}  // namespace

const Scenario& Dataset::scenario(const std::string& id) const {
  auto it = scenarios.find(id);
  Require(it != scenarios.end(), ErrorKind::kContract,
          "dataset has no scenario '" + id + "'");
  return it->second;
}

Trajectory ReplayTrajectory(const StoredTrajectory& stored, const Scenario& scenario) {
  Trajectory traj;
  traj.scenario = scenario;
  traj.status = stored.status;
  traj.final_value = stored.final_value;
  traj.rounds = stored.rounds;
  traj.error = stored.error;
  DialogueState state = InitialState(scenario);
  for (std::size_t i = 0; i < stored.transitions.size(); ++i) {
    const auto& s = stored.transitions[i];
    DialogueState next = state;
    next.turn = s.t;
    next.focal_offer = s.focal_offer;
    next.ctp_offer = s.ctp_offer;
    next.repetition_count = (state.last_focal_style == s.move.style &&
                             state.last_focal_bin == s.move.bin)
                                ? state.repetition_count + 1
                                : 0;
    next.aggressive_streak =
        (s.move.style == Style::kEscalation && s.move.bin == ConcessionBin::kHold)
            ? state.aggressive_streak + 1
            : 0;
    next.last_focal_style = s.move.style;
    next.last_focal_bin = s.move.bin;
    next.focal_offer_history.push_back(s.focal_offer);
    next.ctp_offer_history.push_back(s.ctp_offer);
    if (i + 1 == stored.transitions.size()) {
      next.status = stored.status;
      next.final_value = stored.final_value;
    }
    Transition tr;
    tr.state = state;
    tr.emotion = s.emotion;
    tr.move = s.move;
    tr.judge_score = s.r_turn;
    tr.next_state = next;
    tr.advantage = s.advantage;
    traj.transitions.push_back(std::move(tr));
    state = std::move(next);
  }
  return traj;
}

void AnnotateDataset(Dataset& dataset, const ShapingParams& shaping,
                     const RubricWeights& rubric) {
  std::vector<ScoredTurn> scores;
  for (auto& st : dataset.trajectories) {
    if (st.transitions.empty()) {
      st.trajectory_return = -shaping.terminal_bonus;
      continue;
    }
    Trajectory traj = ReplayTrajectory(st, dataset.scenario(st.scenario_id));
    AnnotateTurns(traj, rubric);
    const int episode = ScoreEpisode(traj);
    st.trajectory_return = TrajectoryReturn(traj, shaping);
    for (std::size_t i = 0; i < st.transitions.size(); ++i) {
      auto& s = st.transitions[i];
      s.r_turn = *traj.transitions[i].judge_score;
      s.episode_score = episode;
      s.q_hyb = HybridScore(s.r_turn, st.trajectory_return);
      scores.push_back({st.scenario_id, s.t, static_cast<double>(s.r_turn)});
    }
  }
  const std::vector<double> adv = NormalizeAdvantages(scores, shaping.eps);
  std::size_t k = 0;
  for (auto& st : dataset.trajectories) {
    for (auto& s : st.transitions) s.advantage = adv[k++];
  }
}

SweepSummary Summarize(const Dataset& dataset) {
  SweepSummary sum;
  for (const auto& st : dataset.trajectories) {
    ++sum.trajectories;
    if (st.error) ++sum.aborted;
    if (st.status == Status::kAccepted) ++sum.accepted;
    sum.transitions += st.transitions.size();
    for (const auto& s : st.transitions) {
      ++sum.emotion_counts[static_cast<std::size_t>(s.emotion.index())];
    }
  }
  return sum;
}

SweepResult GenerateSweep(const std::vector<Scenario>& scenarios,
                          const SweepConfig& cfg) {
  Require(cfg.n_scenarios >= 1 && cfg.m_rollouts >= 1, ErrorKind::kConfiguration,
          "sweep needs n, m >= 1");
  Require(scenarios.size() >= cfg.n_scenarios, ErrorKind::kPrecondition,
          "sweep needs " + std::to_string(cfg.n_scenarios) + " scenarios, got " +
              std::to_string(scenarios.size()));
  ValidateProfile(cfg.profile);
  ValidateShaping(cfg.shaping);
  for (std::size_t i = 0; i < cfg.n_scenarios; ++i) {
    Require(scenarios[i].split == Split::kTrain, ErrorKind::kPrecondition,
            "sweep scenario " + scenarios[i].id + " is not a training scenario");
  }

  SweepResult result;
  for (std::size_t i = 0; i < cfg.n_scenarios; ++i) {
    result.dataset.scenarios[scenarios[i].id] = scenarios[i];
  }
  const std::size_t total = cfg.n_scenarios * cfg.m_rollouts;
  result.dataset.trajectories.resize(total);
  const CounterpartySide side{cfg.profile, nullptr};
  ParallelFor(total, cfg.workers, [&](std::size_t k) {
    const std::size_t si = k / cfg.m_rollouts;
    const std::size_t ri = k % cfg.m_rollouts;
    const Scenario& sc = scenarios[si];
    const uint64_t seed = DeriveSeed(cfg.seed, Fnv1a64(sc.id), ri);
    std::unique_ptr<FocalPolicy> policy;
    if (cfg.behavior_policy == BehaviorKind::kScripted) {
      policy = std::make_unique<ScriptedPolicy>();
    } else {
      policy = std::make_unique<BehaviorPolicy>();
    }
    const Trajectory traj = RunEpisodeRecorded(sc, *policy, side, seed);
    result.dataset.trajectories[k] = StoreFromTrajectory(traj, TrajId(sc.id, ri), seed);
  });
  AnnotateDataset(result.dataset, cfg.shaping, cfg.rubric);
  result.summary = Summarize(result.dataset);
  return result;
}

void WriteStore(std::ostream& out, const Dataset& dataset) {
  for (const auto& st : dataset.trajectories) {
    ojson h;
    h["traj_id"] = st.traj_id;
    h["scenario_id"] = st.scenario_id;
    h["rollout_seed"] = st.rollout_seed;
    h["status"] = std::string(StatusName(st.status));
    h["final_value"] = st.final_value ? ojson(*st.final_value) : ojson(nullptr);
    h["rounds"] = st.rounds;
    h["R"] = st.trajectory_return;
    if (st.error) h["error"] = *st.error;
    out << h.dump() << '\n';
    for (const auto& s : st.transitions) {
      ojson r;
      r["traj_id"] = st.traj_id;
      r["t"] = s.t;
      r["emotion_index"] = s.emotion.index();
      r["move"] = {{"proposal", s.move.proposal},
                   {"bin", std::string(BinName(s.move.bin))},
                   {"style", std::string(StyleName(s.move.style))},
                   {"leverage", s.move.leverage}};
      r["focal_offer"] = s.focal_offer;
      r["ctp_offer"] = s.ctp_offer;
      r["r_turn"] = s.r_turn;
      r["episode_score"] = s.episode_score;
      r["A"] = s.advantage;
      r["q_hyb"] = s.q_hyb;
      out << r.dump() << '\n';
    }
  }
}

std::vector<StoredTrajectory> ReadStore(std::istream& in) {
  std::vector<StoredTrajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const ojson j = ojson::parse(line);
      if (j.contains("rounds")) {
        StoredTrajectory st;
        st.traj_id = j.at("traj_id").get<std::string>();
        st.scenario_id = j.at("scenario_id").get<std::string>();
        st.rollout_seed = j.at("rollout_seed").get<uint64_t>();
        st.status = ParseStatus(j.at("status").get<std::string>());
        if (!j.at("final_value").is_null()) st.final_value = j.at("final_value").get<double>();
        st.rounds = j.at("rounds").get<int>();
        st.trajectory_return = j.at("R").get<double>();
        if (j.contains("error")) st.error = j.at("error").get<std::string>();
        out.push_back(std::move(st));
        continue;
      }
      Require(!out.empty() && out.back().traj_id == j.at("traj_id").get<std::string>(),
              ErrorKind::kStorage,
              "transition record without its trajectory header at line " +
                  std::to_string(lineno));
      StoredTransition s;
      s.t = j.at("t").get<int>();
      const int e = j.at("emotion_index").get<int>();
      Require(e >= 0 && e < kNumEmotions, ErrorKind::kStorage,
              "emotion_index out of range at line " + std::to_string(lineno));
      s.emotion = EmotionId(e);
      const auto& mv = j.at("move");
      s.move.proposal = mv.at("proposal").get<double>();
      s.move.bin = ParseBin(mv.at("bin").get<std::string>());
      s.move.style = ParseStyle(mv.at("style").get<std::string>());
      s.move.leverage = mv.at("leverage").get<bool>();
      s.focal_offer = j.at("focal_offer").get<double>();
      s.ctp_offer = j.at("ctp_offer").get<double>();
      s.r_turn = j.at("r_turn").get<int>();
      s.episode_score = j.at("episode_score").get<int>();
      s.advantage = j.at("A").get<double>();
      s.q_hyb = j.at("q_hyb").get<double>();
      out.back().transitions.push_back(s);
    } catch (const nlohmann::json::exception& e) {
      Fail(ErrorKind::kStorage, "store line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (const auto& st : out) {
    Require(static_cast<int>(st.transitions.size()) == st.rounds, ErrorKind::kStorage,
            "trajectory " + st.traj_id + " is truncated");
  }
  return out;
}

void SaveStore(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kStorage,
          "cannot open " + path.string() + " for writing");
  WriteStore(out, dataset);
  out.flush();
  Require(static_cast<bool>(out), ErrorKind::kStorage, "write failed for " + path.string());
}

Dataset LoadDataset(const std::filesystem::path& store,
                    const std::vector<Scenario>& scenarios) {
  std::ifstream in(store, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kStorage, "cannot open " + store.string());
  Dataset ds;
  ds.trajectories = ReadStore(in);
  for (const auto& s : scenarios) ds.scenarios[s.id] = s;
  for (const auto& st : ds.trajectories) (void)ds.scenario(st.scenario_id);
  return ds;
}

std::vector<SweepTurn> FlattenDataset(const Dataset& dataset) {
  std::vector<SweepTurn> out;
  for (std::size_t k = 0; k < dataset.trajectories.size(); ++k) {
    const auto& st = dataset.trajectories[k];
    if (st.transitions.empty()) continue;
    const Trajectory traj = ReplayTrajectory(st, dataset.scenario(st.scenario_id));
    for (std::size_t i = 0; i < st.transitions.size(); ++i) {
      const auto& s = st.transitions[i];
      SweepTurn turn;
      turn.traj_index = k;
      turn.scenario_id = st.scenario_id;
      turn.state = traj.transitions[i].state;
      turn.next_state = traj.transitions[i].next_state;
      turn.emotion = s.emotion;
      turn.move = s.move;
      turn.r_turn = s.r_turn;
      turn.episode_score = s.episode_score;
      turn.advantage = s.advantage;
      turn.q_hyb = s.q_hyb;
      turn.trajectory_return = st.trajectory_return;
      turn.terminal = i + 1 == st.transitions.size();
      out.push_back(std::move(turn));
    }
  }
  return out;
}

std::vector<SweepTurn> FilterDemonstrations(const std::vector<SweepTurn>& turns,
                                            double fraction) {
  std::vector<FilterKey> keys;
  keys.reserve(turns.size());
  for (const auto& t : turns) keys.push_back({t.scenario_id, t.state.turn + 1, t.q_hyb});
  std::vector<SweepTurn> out;
  for (std::size_t i : FilterTopFraction(keys, fraction)) out.push_back(turns[i]);
  return out;
}

}  // namespace emoneg
