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

#include "doctest.h"

#include "emoneg/selector.hpp"
#include "test_util.hpp"

using namespace emoneg;
using emoneg::testing::MaxRelError;
using emoneg::testing::NumericGradient;

namespace {

// Root of sum_i |tau - 1(x_i < v)| (x_i - v) = 0 by bisection.
double BruteExpectile(const std::vector<double>& xs, double tau) {
  double lo = *std::min_element(xs.begin(), xs.end());
  double hi = *std::max_element(xs.begin(), xs.end());
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double g = 0.0;
    for (double x : xs) g += std::abs(tau - (x < mid ? 1.0 : 0.0)) * (x - mid);
    (g > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<IqlSample> RandomSamples(Rng& rng, int n, bool terminal_only) {
  std::vector<IqlSample> out;
  for (int i = 0; i < n; ++i) {
    IqlSample s;
    s.state = static_cast<int>(rng.Index(kNumStateBins));
    s.emotion = static_cast<int>(rng.Index(kNumEmotions));
    s.reward = rng.Uniform(-2.0, 3.0);
    s.next_state = static_cast<int>(rng.Index(kNumStateBins));
    s.terminal = terminal_only || rng.Bernoulli(0.3);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("expectile loss values") {
  CHECK(ExpectileLoss(1.0, 0.7) == doctest::Approx(0.7));
  CHECK(ExpectileLoss(-1.0, 0.7) == doctest::Approx(0.3));
  for (double tau : {0.1, 0.5, 0.9}) CHECK(ExpectileLoss(0.0, tau) == 0.0);
}

TEST_CASE("IQL loss gradients match central differences") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto batch = RandomSamples(rng, 300, false);
    ValueTable V = ValueTable::Random();
    QTable Q = QTable::Random();
    ValueTable gv;
    ValueLoss(V, Q, batch, 0.7, &gv);
    const ValueTable nv = NumericGradient(
        V, [&](const ValueTable& v) { return ValueLoss(v, Q, batch, 0.7); });
    CHECK(MaxRelError(gv, nv) <= 1e-5);
    QTable gq;
    TdLoss(Q, V, batch, 0.99, &gq);
    const QTable nq =
        NumericGradient(Q, [&](const QTable& q) { return TdLoss(q, V, batch, 0.99); });
    CHECK(MaxRelError(gq, nq) <= 1e-5);
  }
}

TEST_CASE("a single terminal transition drives Q to its reward") {
  IqlSample s;
  s.state = 4;
  s.emotion = 2;
  s.reward = 2.0;
  s.terminal = true;
  IqlHParams hp;
  hp.steps = 5000;
  const IqlResult r = FitIql({s}, hp);
  CHECK(std::abs(r.params.Q(4, 2) - 2.0) < 1e-4);
  CHECK(r.steps_run < hp.steps);
}

TEST_CASE("IQL values match a bisection expectile on a 3-state, 2-action dataset") {
  // Terminal-only rewards so every Q entry converges to its sample mean.
  const std::vector<std::tuple<int, int, std::vector<double>>> cells{
      {0, 0, {1.0, 2.0, 0.5}}, {0, 1, {-1.0, 0.0}},
      {1, 0, {3.0}},           {1, 1, {0.2, 0.4, 0.6, 0.8}},
      {2, 0, {-2.0, -1.5}},    {2, 1, {1.0, 1.0, 4.0}}};
  std::vector<IqlSample> samples;
  for (const auto& [s, e, rewards] : cells) {
    for (double r : rewards) samples.push_back({s, e, r, 0, true});
  }
  for (double tau : {0.5, 0.7, 0.9}) {
    IqlHParams hp;
    hp.tau_exp = tau;
    hp.steps = 20000;
    const IqlResult r = FitIql(samples, hp);
    for (int s = 0; s < 3; ++s) {
      std::vector<double> targets;
      for (const auto& x : samples) {
        if (x.state == s) targets.push_back(r.params.Q(s, x.emotion));
      }
      CHECK(std::abs(r.params.V(s) - BruteExpectile(targets, tau)) <= 1e-6);
    }
  }
}

TEST_CASE("AWR extraction") {
  SelectorParams p;
  p.V.setConstant(0.5);
  p.Q.setConstant(0.5);
  PolicyTable pi = ExtractAwrPolicy(p);
  CHECK((pi.array() - 1.0 / kNumEmotions).abs().maxCoeff() < 1e-15);

  Rng rng(1);
  for (int i = 0; i < p.Q.size(); ++i) p.Q.data()[i] = rng.Uniform(-1, 1);
  p.beta_awr = 1e-12;
  pi = ExtractAwrPolicy(p);
  CHECK((pi.array() - 1.0 / kNumEmotions).abs().maxCoeff() < 1e-9);

  p.beta_awr = 3.0;
  const PolicyTable base = ExtractAwrPolicy(p);
  SelectorParams shifted = p;
  shifted.Q.row(7).array() += 4.25;
  shifted.V(7) += 4.25;
  CHECK((ExtractAwrPolicy(shifted) - base).cwiseAbs().maxCoeff() <= 1e-12);
  for (int s = 0; s < kNumStateBins; ++s) CHECK(base.row(s).sum() == doctest::Approx(1.0));
}

TEST_CASE("emotion selection modes") {
  PolicyTable pi = PolicyTable::Constant(1.0 / kNumEmotions);
  const StateBin b = StateBin::FromIndex(10);
  CHECK(SelectEmotion(pi, b, SelectMode::kGreedy).index() == 0);
  CHECK(SelectEmotion(pi, b, SelectMode::kSample, 77) ==
        SelectEmotion(pi, b, SelectMode::kSample, 77));

  pi.row(10).setZero();
  pi(10, 14) = 1.0;
  CHECK(SelectEmotion(pi, b, SelectMode::kGreedy).index() == 14);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(SelectEmotion(pi, b, SelectMode::kSample, seed).index() == 14);
  }
}

TEST_CASE("state bins round-trip and discretize") {
  for (int i = 0; i < kNumStateBins; ++i) CHECK(StateBin::FromIndex(i).index() == i);
  CHECK_THROWS_AS(StateBin::FromIndex(kNumStateBins), Error);
  const Scenario sc = emoneg::testing::MakeScenario("s", 100, 40);
  DialogueState s = InitialState(sc);
  StateBin b = Discretize(s);
  CHECK(b.gap_progress_bin == kGapBins - 1);
  CHECK(b.turn_bin == 0);
  CHECK(b.ctp_momentum == Momentum::kStatic);
  s.turn = 29;
  s.ctp_offer = 45;
  s.ctp_offer_history.push_back(45);
  b = Discretize(s);
  CHECK(b.gap_progress_bin == 0);
  CHECK(b.turn_bin == kTurnBins - 1);
  CHECK(b.ctp_momentum == Momentum::kConceding);
}

TEST_CASE("selector checkpoints round-trip exactly") {
  Rng rng(4);
  SelectorCheckpoint c;
  for (int i = 0; i < c.params.Q.size(); ++i) c.params.Q.data()[i] = rng.Uniform(-3, 3);
  for (int i = 0; i < c.params.V.size(); ++i) c.params.V.data()[i] = rng.Uniform(-3, 3);
  c.params.beta_awr = 10.0;
  c.params.tau_exp = 0.9;
  c.policy = ExtractAwrPolicy(c.params);
  c.seed = 123;
  c.variant = "turn";
  const auto dir = emoneg::testing::TempDir("selector");
  SaveSelector(dir / "sel.txt", c);
  const SelectorCheckpoint back = LoadSelector(dir / "sel.txt");
  CHECK(back.params.Q == c.params.Q);
  CHECK(back.params.V == c.params.V);
  CHECK(back.policy == c.policy);
  CHECK(back.params.beta_awr == 10.0);
  CHECK(back.params.tau_exp == 0.9);
  CHECK(back.seed == 123);
  CHECK(back.variant == "turn");
  CHECK_THROWS_AS(LoadSelector(dir / "missing.txt"), Error);
}

TEST_CASE("IQL hyperparameters are validated") {
  std::vector<IqlSample> one{{0, 0, 1.0, 0, true}};
  IqlHParams hp;
  hp.tau_exp = 1.0;
  CHECK_THROWS_AS(FitIql(one, hp), Error);
  hp = {};
  hp.learning_rate = 2.0;
  CHECK_THROWS_AS(FitIql(one, hp), Error);
  try {
    FitIql({}, IqlHParams{});
    FAIL("expected a training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTraining);
  }
}
