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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "emoneg/expresser.hpp"
#include "emoneg/sweep.hpp"
#include "test_util.hpp"

using namespace emoneg;
using emoneg::testing::MaxRelError;
using emoneg::testing::NumericGradient;

namespace {

ExpressionBatch RandomBatch(Rng& rng, int n) {
  ExpressionBatch b;
  b.features = Eigen::MatrixXd::Zero(n, kNumFeatures);
  b.advantages.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < kEmotionFeatureOffset; ++j) b.features(i, j) = rng.Uniform(-1, 1);
    b.features(i, kEmotionFeatureOffset + static_cast<int>(rng.Index(kNumEmotions))) = 1.0;
    b.features(i, kBiasFeature) = 1.0;
    b.actions.push_back(static_cast<int>(rng.Index(kNumActions)));
    b.advantages(i) = rng.Uniform(-2, 2);
  }
  return b;
}

ExpressionParams RandomParams(Rng& rng, double scale) {
  ExpressionParams p;
  for (int i = 0; i < p.weights.size(); ++i) p.weights.data()[i] = rng.Uniform(-scale, scale);
  return p;
}

double MinBoundaryDistance(const ExpressionParams& theta, const ExpressionParams& ref,
                           const ExpressionBatch& b, double eps) {
  const Eigen::VectorXd lr = ActionLogProbs(theta, b) - ActionLogProbs(ref, b);
  double d = 1e9;
  for (Eigen::Index i = 0; i < lr.size(); ++i) {
    const double rho = std::exp(lr(i));
    d = std::min({d, std::abs(rho - (1 - eps)), std::abs(rho - (1 + eps))});
  }
  return d;
}

WeightMatrix JpoGrad(const ExpressionParams& theta, const ExpressionBatch& b,
                     const Eigen::VectorXd& ref_logp, const JpoHParams& hp) {
  WeightMatrix g;
  JpoObjective(theta, b, ref_logp, hp, &g);
  return g;
}

}  // namespace

TEST_CASE("action indexing round-trips over all 50 templates") {
  for (int a = 0; a < kNumActions; ++a) {
    const ActionTemplate t = ActionFromIndex(a);
    CHECK(ActionIndex(t.bin, t.style, t.leverage) == a);
  }
  CHECK(ActionIndex(ConcessionBin::kHold, Style::kFirm, false) == 0);
  CHECK(ActionIndex(ConcessionBin::kCapitulate, Style::kClose, true) == 49);
  CHECK_THROWS_AS(ActionFromIndex(50), Error);
}

TEST_CASE("features have the documented layout") {
  const Scenario sc = emoneg::testing::MakeScenario("s", 100, 40);
  DialogueState s = InitialState(sc);
  const FeatureVector f = Featurize(s, emotions::kFear, ExpressionMode::kConditional);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == 0.0);
  CHECK(f(kEmotionFeatureOffset + emotions::kFear.index()) == 1.0);
  CHECK(f.segment(kEmotionFeatureOffset, kNumEmotions).sum() == 1.0);
  CHECK(f(kBiasFeature) == 1.0);
  const FeatureVector g = Featurize(s, emotions::kFear, ExpressionMode::kEmotionFree);
  CHECK(g.segment(kEmotionFeatureOffset, kNumEmotions).isZero());
  s.ctp_offer_history.push_back(-1000);
  CHECK(Featurize(s, emotions::kFear, ExpressionMode::kConditional)(2) == 2.0);
}

TEST_CASE("policy probabilities") {
  ExpressionParams p;
  const FeatureVector f = FeatureVector::Ones();
  CHECK((PolicyProbs(p, f).array() - 1.0 / kNumActions).abs().maxCoeff() < 1e-15);

  Rng rng(2);
  p = RandomParams(rng, 1.0);
  const ActionProbs base = PolicyProbs(p, f);
  ExpressionParams shifted = p;
  shifted.weights.col(kBiasFeature).array() += 3.5;
  FeatureVector fb = FeatureVector::Zero();
  fb(kBiasFeature) = 1.0;
  CHECK((PolicyProbs(shifted, fb) - PolicyProbs(p, fb)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(base.sum() == doctest::Approx(1.0));

  ExpressionParams sat;
  sat.weights(17, kBiasFeature) = 1000.0;
  CHECK(PolicyProbs(sat, fb)(17) > 1.0 - 1e-6);
  CHECK(GreedyAction(PolicyProbs(sat, fb)) == 17);
  CHECK(GreedyAction(PolicyProbs(ExpressionParams{}, fb)) == 0);
}

TEST_CASE("SFT gradient matches central differences") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const ExpressionBatch b = RandomBatch(rng, 40);
    const ExpressionParams p = RandomParams(rng, 0.5);
    WeightMatrix g;
    SftLoss(p, b, &g);
    const WeightMatrix num = NumericGradient(p.weights, [&](const WeightMatrix& w) {
      return SftLoss({w, p.mode}, b);
    });
    CHECK(MaxRelError(g, num) <= 1e-5);
  }
}

TEST_CASE("JPO objective gradient matches central differences on interior batches") {
  int checked = 0;
  for (uint64_t seed = 0; seed < 20 && checked < 4; ++seed) {
    Rng rng(seed + 100);
    const ExpressionBatch b = RandomBatch(rng, 30);
    const ExpressionParams ref = RandomParams(rng, 0.5);
    ExpressionParams theta = ref;
    theta.weights += RandomParams(rng, 0.15).weights;
    JpoHParams hp;
    hp.kappa = 0.5;
    if (MinBoundaryDistance(theta, ref, b, hp.clip_eps) < 1e-3) continue;
    const Eigen::VectorXd ref_logp = ActionLogProbs(ref, b);
    const WeightMatrix g = JpoGrad(theta, b, ref_logp, hp);
    const WeightMatrix num = NumericGradient(theta.weights, [&](const WeightMatrix& w) {
      return JpoObjective({w, theta.mode}, b, ref_logp, hp).loss;
    });
    CHECK(MaxRelError(g, num) <= 1e-5);
    ++checked;
  }
  CHECK(checked >= 2);
}

TEST_CASE("K3 anchor gradient matches central differences") {
  Rng rng(7);
  ExpressionBatch b = RandomBatch(rng, 25);
  b.advantages.setZero();
  const ExpressionParams ref = RandomParams(rng, 0.5);
  ExpressionParams theta = ref;
  theta.weights += RandomParams(rng, 0.4).weights;
  JpoHParams hp;
  hp.lambda_kl = 1.0;
  const Eigen::VectorXd ref_logp = ActionLogProbs(ref, b);
  const WeightMatrix g = JpoGrad(theta, b, ref_logp, hp);
  const WeightMatrix num = NumericGradient(theta.weights, [&](const WeightMatrix& w) {
    return K3Divergence({w, theta.mode}, ref, b);
  });
  CHECK(MaxRelError(g, num) <= 1e-5);
}

TEST_CASE("JPO at the reference") {
  Rng rng(11);
  const ExpressionBatch b = RandomBatch(rng, 60);
  const ExpressionParams ref = RandomParams(rng, 0.7);
  JpoHParams hp;
  hp.kappa = 0.3;
  const JpoBatchStats st = JpoObjective(ref, b, ActionLogProbs(ref, b), hp);
  double mean_adv = 0.0;
  for (Eigen::Index i = 0; i < b.advantages.size(); ++i) {
    mean_adv += AsymmetricAdvantage(b.advantages(i), hp.kappa);
  }
  mean_adv /= static_cast<double>(b.size());
  CHECK(st.mean_rho == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(st.k3 == 0.0);
  CHECK(st.clip_count == 0);
  CHECK(st.surrogate == doctest::Approx(-mean_adv).epsilon(1e-12));
}

TEST_CASE("kappa zero silences negative advantages") {
  Rng rng(12);
  ExpressionBatch b = RandomBatch(rng, 30);
  b.advantages = -b.advantages.cwiseAbs() - Eigen::VectorXd::Constant(30, 0.1);
  const ExpressionParams ref = RandomParams(rng, 0.5);
  ExpressionParams theta = ref;
  theta.weights += RandomParams(rng, 0.1).weights;
  JpoHParams hp;
  hp.kappa = 0.0;
  hp.lambda_kl = 0.0;
  const WeightMatrix g = JpoGrad(theta, b, ActionLogProbs(ref, b), hp);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("clipping bounds the surrogate term") {
  Rng rng(13);
  ExpressionBatch b = RandomBatch(rng, 1);
  b.advantages(0) = 1.3;
  ExpressionParams ref;
  const Eigen::VectorXd ref_logp = ActionLogProbs(ref, b);
  JpoHParams hp;
  hp.lambda_kl = 0.0;
  double previous = 0.0;
  for (double push : {1.0, 2.0, 4.0}) {
    ExpressionParams theta;
    theta.weights(b.actions[0], kBiasFeature) = push;
    const JpoBatchStats st = JpoObjective(theta, b, ref_logp, hp);
    CHECK(st.mean_rho > 1.0 + hp.clip_eps);
    CHECK(st.reward_term == doctest::Approx(1.3 * (1 + hp.clip_eps)));
    if (previous != 0.0) CHECK(st.reward_term == previous);
    previous = st.reward_term;
    CHECK(std::abs(st.surrogate) <= std::max(1.3 * 1.2, 1.3 * st.mean_rho) + 1e-12);
  }
}

TEST_CASE("A-LoL matches the kappa-zero JPO gradient at the reference") {
  Rng rng(14);
  const ExpressionBatch b = RandomBatch(rng, 80);
  const ExpressionParams ref = RandomParams(rng, 0.6);
  JpoHParams hp;
  hp.kappa = 0.0;
  hp.lambda_kl = 0.0;
  const WeightMatrix jpo = JpoGrad(ref, b, ActionLogProbs(ref, b), hp);
  WeightMatrix alol;
  AlolLoss(ref, b, &alol);
  const double positives = static_cast<double>((b.advantages.array() > 0.0).count());
  const WeightMatrix matched = jpo * (static_cast<double>(b.size()) / positives);
  CHECK((matched - alol).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("A-LoL training") {
  Rng rng(15);
  ExpressionBatch one = RandomBatch(rng, 1);
  one.advantages(0) = 1.0;
  AlolHParams hp;
  hp.steps = 1;
  ExpressionParams p;
  double prob = PolicyProbs(p, one.features.row(0).transpose())(one.actions[0]);
  for (int i = 0; i < 20; ++i) {
    p = FitAlol(one, p, hp).params;
    const double next = PolicyProbs(p, one.features.row(0).transpose())(one.actions[0]);
    CHECK(next > prob);
    prob = next;
  }
  ExpressionBatch negative = RandomBatch(rng, 5);
  negative.advantages.setConstant(-0.5);
  try {
    FitAlol(negative, ExpressionParams{}, hp);
    FAIL("expected a training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTraining);
  }
}

TEST_CASE("SFT on a repeated demo drives its probability to one") {
  Rng rng(16);
  ExpressionBatch one = RandomBatch(rng, 1);
  ExpressionBatch demos = one.Rows(std::vector<std::size_t>(10, 0));
  SftHParams hp;
  hp.steps = 3000;
  hp.learning_rate = 2.0;
  const SftResult r = FitSft(demos, ExpressionMode::kConditional, hp);
  CHECK(PolicyProbs(r.params, one.features.row(0).transpose())(one.actions[0]) > 0.99);
  CHECK(r.log.back().loss < 0.01);
  CHECK(r.log.back().loss < r.log.front().loss);
}

TEST_CASE("K3 values") {
  Rng rng(17);
  const ExpressionBatch b = RandomBatch(rng, 10);
  const ExpressionParams ref = RandomParams(rng, 0.4);
  CHECK(K3Divergence(ref, ref, b) == 0.0);
  CHECK(K3(std::exp(1.0)) == doctest::Approx(std::exp(1.0) - 2.0).epsilon(1e-15));
  CHECK(K3(0.5) == doctest::Approx(0.19314718).epsilon(1e-8));
  CHECK_THROWS_AS(K3(0.0), Error);

  // Every sample is the same action under a uniform reference; bias the
  // policy so that pi = e / 50 and hence rho = e.
  ExpressionBatch same = b;
  std::fill(same.actions.begin(), same.actions.end(), 3);
  ExpressionParams theta;
  const double e = std::exp(1.0);
  theta.weights(3, kBiasFeature) = std::log(49.0 * e / (50.0 - e));
  CHECK(K3Divergence(theta, ExpressionParams{}, same) ==
        doctest::Approx(e - 2.0).epsilon(1e-12));
}

TEST_CASE("stability log at the first step of a JPO run") {
  Rng rng(18);
  const ExpressionBatch b = RandomBatch(rng, 100);
  const ExpressionParams ref = RandomParams(rng, 0.5);
  JpoHParams hp;
  hp.steps = 30;
  const JpoResult r = FitJpo(b, ref, hp);
  REQUIRE(r.log.size() == 30);
  CHECK(r.log[0].mean_rho == 1.0);
  CHECK(r.log[0].k3 == 0.0);
  CHECK(r.log[0].clip_count == 0);
  CHECK_FALSE(r.log[0].spike);
  CHECK(IsRatioClip(0.79));
  CHECK_FALSE(IsRatioClip(0.8));
  CHECK_FALSE(IsRatioClip(1.2));
  CHECK(IsRatioClip(1.2000001));
  CHECK(IsKlSpike(0.5000001));
  CHECK_FALSE(IsKlSpike(0.5));
}

TEST_CASE("JPO hyperparameters are validated") {
  JpoHParams hp;
  hp.clip_eps = 1.0;
  CHECK_THROWS_AS(ValidateJpo(hp), Error);
  hp = {};
  hp.kappa = -0.1;
  CHECK_THROWS_AS(ValidateJpo(hp), Error);
  hp = {};
  hp.lambda_kl = -1;
  CHECK_THROWS_AS(ValidateJpo(hp), Error);
}

TEST_CASE("reference support floor skips unsupported samples") {
  Rng rng(19);
  const ExpressionBatch b = RandomBatch(rng, 4);
  ExpressionParams ref;
  Eigen::VectorXd ref_logp = ActionLogProbs(ref, b);
  ref_logp(1) = std::log(1e-14);
  const JpoBatchStats st = JpoObjective(ref, b, ref_logp, JpoHParams{});
  CHECK(st.skipped == 1);
  CHECK(st.used == 3);
  ref_logp.setConstant(std::log(1e-20));
  CHECK_THROWS_AS(JpoObjective(ref, b, ref_logp, JpoHParams{}), Error);
}

TEST_CASE("emotion-free policy ignores the emotion argument") {
  Rng rng(20);
  ExpressionParams p = RandomParams(rng, 1.0);
  p.mode = ExpressionMode::kEmotionFree;
  const auto scenarios = GenerateScenarios(DefaultDomain("crad"), 5, 3);
  for (const auto& sc : scenarios) {
    DialogueState s = InitialState(sc);
    const ActionProbs base = PolicyProbs(p, Featurize(s, EmotionId(0), p.mode));
    for (int e = 1; e < kNumEmotions; ++e) {
      CHECK(PolicyProbs(p, Featurize(s, EmotionId(e), p.mode)) == base);
    }
  }
}

TEST_CASE("expression checkpoints and stability logs round-trip") {
  Rng rng(21);
  ExpressionCheckpoint c;
  c.params = RandomParams(rng, 2.0);
  c.params.mode = ExpressionMode::kEmotionFree;
  c.stage = "jpo";
  c.seed = 99;
  c.parent = "sft.txt";
  c.hparams["kappa"] = "0.5";
  const auto dir = emoneg::testing::TempDir("expression");
  SaveExpression(dir / "c.txt", c);
  const ExpressionCheckpoint back = LoadExpression(dir / "c.txt");
  CHECK(back.params.weights == c.params.weights);
  CHECK(back.params.mode == ExpressionMode::kEmotionFree);
  CHECK(back.stage == "jpo");
  CHECK(back.seed == 99);
  CHECK(back.parent == "sft.txt");
  CHECK(back.hparams.at("kappa") == "0.5");

  StabilityLog log{{0, 1.5, -1.5, 0.0, 1.0, 0, false}, {1, 1.2, -1.3, 0.7, 1.1, 3, true}};
  SaveStabilityLog(dir / "s.jsonl", log);
  const StabilityLog lb = LoadStabilityLog(dir / "s.jsonl");
  REQUIRE(lb.size() == 2);
  CHECK(lb[1].k3 == 0.7);
  CHECK(lb[1].clip_count == 3);
  CHECK(lb[1].spike);
}

TEST_CASE("turn advantages by source") {
  std::vector<SweepTurn> turns(4);
  for (std::size_t i = 0; i < turns.size(); ++i) {
    turns[i].scenario_id = "s";
    turns[i].state.turn = static_cast<int>(i);
    turns[i].advantage = 0.25 * static_cast<double>(i);
    turns[i].episode_score = i < 2 ? 4 : 8;
    turns[i].trajectory_return = i < 2 ? -2.0 : 2.0;
  }
  const auto judge = TurnAdvantages(turns, AdvantageSource::kTurnJudge);
  CHECK(judge == std::vector<double>{0.0, 0.25, 0.5, 0.75});
  const auto episode = TurnAdvantages(turns, AdvantageSource::kEpisodeJudge);
  CHECK(episode[0] == doctest::Approx(-1.0));
  CHECK(episode[3] == doctest::Approx(1.0));
  const auto outcome = TurnAdvantages(turns, AdvantageSource::kOutcome);
  CHECK(outcome[1] == doctest::Approx(-1.0));
  CHECK(AdvantageSourceFor(RewardVariant::kTurnDense) == AdvantageSource::kTurnJudge);
}
