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

#include <cmath>
#include <sstream>

#include "doctest.h"

#include "emoneg/sweep.hpp"
#include "test_util.hpp"

using namespace emoneg;

namespace {

std::vector<Scenario> Train(std::size_t n, uint64_t seed) {
  return FilterSplit(GenerateScenarios(DefaultDomain("crad"), n * 5 / 4, seed), Split::kTrain);
}

std::string StoreBytes(const Dataset& d) {
  std::ostringstream ss;
  WriteStore(ss, d);
  return ss.str();
}

}  // namespace

TEST_CASE("single-rollout sweep is byte-identical across runs") {
  const auto sc = Train(4, 1);
  SweepConfig cfg;
  cfg.n_scenarios = 1;
  cfg.m_rollouts = 1;
  cfg.seed = 42;
  const auto a = GenerateSweep(sc, cfg);
  const auto b = GenerateSweep(sc, cfg);
  CHECK(a.summary.trajectories == 1);
  CHECK(StoreBytes(a.dataset) == StoreBytes(b.dataset));
}

TEST_CASE("worker count does not change the store") {
  const auto sc = Train(8, 2);
  SweepConfig cfg;
  cfg.n_scenarios = 8;
  cfg.m_rollouts = 10;
  cfg.seed = 5;
  const auto one = GenerateSweep(sc, cfg);
  cfg.workers = 4;
  const auto four = GenerateSweep(sc, cfg);
  CHECK(StoreBytes(one.dataset) == StoreBytes(four.dataset));
  CHECK(one.summary.trajectories == 80);
}

TEST_CASE("sweep summary counts and emotion usage") {
  const auto sc = Train(20, 3);
  SweepConfig cfg;
  cfg.n_scenarios = 20;
  cfg.m_rollouts = 50;
  const auto res = GenerateSweep(sc, cfg);
  const auto& sum = res.summary;
  CHECK(sum.trajectories == 1000);
  std::size_t rounds = 0;
  for (const auto& st : res.dataset.trajectories) rounds += static_cast<std::size_t>(st.rounds);
  CHECK(sum.transitions == rounds);
  // Binomial 3-sigma band around 1/28 for every emotion.
  const double n = static_cast<double>(sum.transitions);
  const double p = 1.0 / kNumEmotions;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (std::size_t c : sum.emotion_counts) {
    CHECK(std::abs(static_cast<double>(c) - n * p) <= 3.0 * sigma);
  }
}

TEST_CASE("stored transitions carry every annotation and reload bit-for-bit") {
  const auto sc = Train(6, 4);
  SweepConfig cfg;
  cfg.n_scenarios = sc.size();
  cfg.m_rollouts = 20;
  cfg.seed = 9;
  const auto res = GenerateSweep(sc, cfg);
  std::stringstream ss;
  WriteStore(ss, res.dataset);
  Dataset reloaded;
  reloaded.scenarios = res.dataset.scenarios;
  reloaded.trajectories = ReadStore(ss);
  REQUIRE(reloaded.trajectories.size() == res.dataset.trajectories.size());

  Dataset recomputed = reloaded;
  AnnotateDataset(recomputed, cfg.shaping, cfg.rubric);
  for (std::size_t k = 0; k < reloaded.trajectories.size(); ++k) {
    const auto& a = reloaded.trajectories[k];
    const auto& b = recomputed.trajectories[k];
    CHECK(a.trajectory_return == b.trajectory_return);
    REQUIRE(a.transitions.size() == b.transitions.size());
    for (std::size_t i = 0; i < a.transitions.size(); ++i) {
      CHECK(a.transitions[i].advantage == b.transitions[i].advantage);
      CHECK(a.transitions[i].q_hyb == b.transitions[i].q_hyb);
      CHECK(a.transitions[i].r_turn == b.transitions[i].r_turn);
      CHECK(a.transitions[i].t == static_cast<int>(i) + 1);
    }
  }
  CHECK(StoreBytes(reloaded) == StoreBytes(res.dataset));
}

TEST_CASE("store records use the normative field names") {
  const auto sc = Train(2, 6);
  SweepConfig cfg;
  cfg.n_scenarios = 1;
  cfg.m_rollouts = 1;
  const std::string bytes = StoreBytes(GenerateSweep(sc, cfg).dataset);
  for (const char* key : {"\"traj_id\"", "\"scenario_id\"", "\"rollout_seed\"", "\"status\"",
                          "\"final_value\"", "\"rounds\"", "\"R\"", "\"t\"", "\"emotion_index\"",
                          "\"proposal\"", "\"bin\"", "\"style\"", "\"leverage\"",
                          "\"focal_offer\"", "\"ctp_offer\"", "\"r_turn\"", "\"episode_score\"",
                          "\"A\"", "\"q_hyb\""}) {
    CHECK(bytes.find(key) != std::string::npos);
  }
}

TEST_CASE("truncated or orphaned store lines are storage errors") {
  const auto sc = Train(2, 7);
  SweepConfig cfg;
  cfg.n_scenarios = 1;
  cfg.m_rollouts = 2;
  const std::string bytes = StoreBytes(GenerateSweep(sc, cfg).dataset);
  const std::string first_line = bytes.substr(0, bytes.find('\n') + 1);
  std::istringstream truncated(first_line);
  try {
    ReadStore(truncated);
    FAIL("expected a storage error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kStorage);
  }
  std::istringstream orphan("{\"traj_id\":\"x\",\"t\":1}\n");
  CHECK_THROWS_AS(ReadStore(orphan), Error);
  std::istringstream garbage("not json\n");
  CHECK_THROWS_AS(ReadStore(garbage), Error);
}

TEST_CASE("sweep preconditions") {
  auto all = GenerateScenarios(DefaultDomain("crad"), 10, 0);
  SweepConfig cfg;
  cfg.n_scenarios = 10;
  cfg.m_rollouts = 1;
  try {
    GenerateSweep(all, cfg);
    FAIL("test scenarios must be rejected");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kPrecondition);
  }
  cfg.m_rollouts = 0;
  CHECK_THROWS_AS(GenerateSweep(all, cfg), Error);
}

TEST_CASE("demonstration filter keeps the top quarter by hybrid score") {
  const auto sc = Train(4, 8);
  SweepConfig cfg;
  cfg.n_scenarios = 4;
  cfg.m_rollouts = 10;
  const auto turns = FlattenDataset(GenerateSweep(sc, cfg).dataset);
  const auto demos = FilterDemonstrations(turns, 0.25);
  CHECK(demos.size() == static_cast<std::size_t>(std::ceil(0.25 * turns.size())));
  double min_kept = 1e9;
  for (const auto& d : demos) min_kept = std::min(min_kept, d.q_hyb);
  std::size_t above = 0;
  for (const auto& t : turns) above += t.q_hyb > min_kept;
  CHECK(above <= demos.size());
}
