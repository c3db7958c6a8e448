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

#include "emoneg/behavior.hpp"
#include "emoneg/evalstats.hpp"
#include "emoneg/policies.hpp"
#include "test_util.hpp"

using namespace emoneg;
using emoneg::testing::MakeScenario;

namespace {

EpisodeResult Accepted(double sav) {
  EpisodeResult e;
  e.status = Status::kAccepted;
  e.sav = sav;
  e.utility = sav;
  e.rounds = 4;
  return e;
}

EpisodeResult Broken() {
  EpisodeResult e;
  e.status = Status::kBreakdown;
  e.rounds = 3;
  return e;
}

// Regularized incomplete beta by the Lentz continued fraction.
double IncompleteBeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - IncompleteBeta(b, a, 1.0 - x);
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double tiny = 1e-300;
  double f = 1.0, c = 1.0, d = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const int m = i / 2;
    double num;
    if (i == 0) {
      num = 1.0;
    } else if (i % 2 == 0) {
      num = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    } else {
      num = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
    }
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    const double cd = c * d;
    f *= cd;
    if (std::abs(1.0 - cd) < 1e-16) break;
  }
  return std::exp(ln_front) * (f - 1.0) / a;
}

double OracleTwoSided(double t, double df) {
  return IncompleteBeta(0.5 * df, 0.5, df / (df + t * t));
}

// Same stream as the library resampler, written independently.
std::pair<double, double> OracleBootstrap(const std::vector<double>& v, std::size_t b,
                                          uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::vector<double> means;
  for (std::size_t r = 0; r < b; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double u = static_cast<double>(eng() >> 11) / 9007199254740992.0;
      std::size_t j = static_cast<std::size_t>(u * static_cast<double>(v.size()));
      if (j >= v.size()) j = v.size() - 1;
      s += v[j];
    }
    means.push_back(s / static_cast<double>(v.size()));
  }
  std::sort(means.begin(), means.end());
  auto pct = [&](double q) {
    const double pos = q * static_cast<double>(means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  return {pct(0.025), pct(0.975)};
}

RewardTensor FlatTensor(std::size_t n_scen, std::size_t runs, double value) {
  return RewardTensor(kNumEmotions,
                      std::vector<std::vector<double>>(n_scen, std::vector<double>(runs, value)));
}

}  // namespace

TEST_CASE("savings on two reference deals") {
  CHECK(Savings(MakeScenario("c1", 159, 12), 10) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(Savings(MakeScenario("c4", 152, 19), 24) == doctest::Approx(0.962).epsilon(1e-3));
  const Scenario sc = MakeScenario("s", 80, 200);
  CHECK(Savings(sc, 80) == 0.0);
  CHECK(Savings(sc, 200) == 1.0);
  CHECK(Savings(sc, 20) == 0.0);
  CHECK_THROWS_AS(Savings(MakeScenario("z", 5, 5), 5), Error);
}

TEST_CASE("metric aggregation") {
  std::vector<EpisodeResult> two{Accepted(1.0), Broken()};
  MetricsReport m = AggregateMetrics(two);
  CHECK(m.success_pct == 50.0);
  REQUIRE(m.outcomes_mean.has_value());
  CHECK(*m.outcomes_mean == 1.0);
  CHECK(m.utility_mean == 0.5);
  CHECK(m.rounds_mean == 3.5);

  std::vector<EpisodeResult> broken{Broken(), Broken()};
  m = AggregateMetrics(broken);
  CHECK(m.success_pct == 0.0);
  CHECK(m.utility_mean == 0.0);
  CHECK_FALSE(m.outcomes_mean.has_value());

  std::vector<EpisodeResult> half(20, Accepted(0.5));
  m = AggregateMetrics(half);
  CHECK(*m.outcomes_mean == 0.5);
  CHECK(*m.outcomes_std == 0.0);
  CHECK_THROWS_AS(AggregateMetrics(std::vector<EpisodeResult>{}), Error);
}

TEST_CASE("bootstrap intervals") {
  const std::vector<double> constant(10, 0.7);
  const auto c = BootstrapCi(constant, 10000, 3);
  REQUIRE(c.has_value());
  CHECK(c->first == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(c->second - c->first == 0.0);

  std::vector<double> two_point;
  for (int i = 0; i < 5; ++i) {
    two_point.push_back(0.0);
    two_point.push_back(1.0);
  }
  for (uint64_t seed : {0ULL, 1ULL, 12345ULL}) {
    const auto lib = BootstrapCi(two_point, 10000, seed);
    const auto oracle = OracleBootstrap(two_point, 10000, seed);
    CHECK(lib->first == oracle.first);
    CHECK(lib->second == oracle.second);
    CHECK(lib->first <= 0.5 + 1e-12);
    CHECK(lib->second >= 0.5 - 1e-12);
  }
  CHECK_FALSE(BootstrapCi(std::vector<double>{}, 100, 0).has_value());
}

TEST_CASE("percentiles interpolate linearly") {
  const std::vector<double> v{1, 2, 3, 4, 5};
  CHECK(Percentile(v, 0.0) == 1.0);
  CHECK(Percentile(v, 1.0) == 5.0);
  CHECK(Percentile(v, 0.5) == 3.0);
  CHECK(Percentile(v, 0.125) == doctest::Approx(1.5));
}

TEST_CASE("Bonferroni threshold") {
  CHECK(kBonferroniAlpha == doctest::Approx(0.0018518518).epsilon(1e-9));
  CHECK(std::abs(kBonferroniAlpha - 0.05 / 27.0) < 1e-6);
}

TEST_CASE("t distribution agrees with an incomplete-beta oracle") {
  for (double df : {1.0, 2.0, 5.0, 19.0, 60.0}) {
    for (double t : {0.1, 0.7, 1.5, 2.1, 3.3, 6.0, 15.0}) {
      const double lib = TwoSidedTPValue(t, df);
      const double ref = OracleTwoSided(t, df);
      CHECK(std::abs(lib - ref) <= 1e-9 * std::max(1.0, ref));
      CHECK(StudentTCdf(t, df) + StudentTCdf(-t, df) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // Cauchy closed form.
  CHECK(StudentTCdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(StudentTQuantile(0.975, 19.0) == doctest::Approx(2.0930240544).epsilon(1e-9));
  CHECK(TwoSidedTPValue(0.0, 5.0) == 1.0);
}

TEST_CASE("emotion study paired tests") {
  RewardTensor r = FlatTensor(6, 3, 0.4);
  const auto same = EmotionStudy(r);
  for (const auto& row : same) {
    CHECK(row.delta_mean == 0.0);
    CHECK(row.t == 0.0);
    CHECK_FALSE(row.significant);
  }

  // Deltas of 1 with a small known jitter per scenario.
  const std::vector<double> jitter{0.01, -0.02, 0.015, -0.005};
  r = FlatTensor(4, 2, 0.0);
  const int e = emotions::kAnger.index();
  for (std::size_t s = 0; s < 4; ++s) {
    r[e][s] = {1.0 + jitter[s], 1.0 + jitter[s]};
  }
  const auto rows = EmotionStudy(r);
  double dbar = 0.0;
  for (double j : jitter) dbar += 1.0 + j;
  dbar /= 4.0;
  double ss = 0.0;
  for (double j : jitter) ss += (1.0 + j - dbar) * (1.0 + j - dbar);
  const double t = dbar / (std::sqrt(ss / 3.0) / 2.0);
  CHECK(std::abs(rows[e].t - t) <= 1e-9 * t);
  CHECK(rows[e].delta_mean == doctest::Approx(dbar));
  CHECK(rows[e].p == doctest::Approx(OracleTwoSided(t, 3.0)).epsilon(1e-9));
  CHECK(rows[e].significant == (rows[e].p < kBonferroniAlpha));
  CHECK_FALSE(rows[emotions::kNeutral.index()].significant);
  CHECK(rows[e].ci_lo < rows[e].mean);
  CHECK(rows[e].ci_hi > rows[e].mean);
  CHECK_THROWS_AS(EmotionStudy(RewardTensor(3)), Error);
}

TEST_CASE("stability summaries use the final quarter") {
  const std::vector<double> constant(12, 0.25);
  CHECK(SummarizeSeries(constant).mad == 0.0);
  const std::vector<double> early_spike{0, 0, 0, 1, 0, 0, 0, 0};
  const StabilitySummary s = SummarizeSeries(early_spike);
  CHECK(s.median == 0.0);
  CHECK(s.mad == 0.0);

  StabilityLog log;
  for (int i = 0; i < 10; ++i) log.push_back({i, 1.0, -1.0, 0.0, 1.0, 0, false});
  CHECK(SummarizeStability(log).clip_count == 0);
  log[2].k3 = 0.9;
  log[3].clip_count = 4;
  const StabilitySummary t = SummarizeStability(log);
  CHECK(t.spike_count == 1);
  CHECK(t.clip_count == 4);
}

TEST_CASE("selector agreement rate") {
  std::vector<SweepTurn> turns;
  const Scenario sc = MakeScenario("s", 100, 40);
  PolicyTable pi = PolicyTable::Zero();
  pi.col(5).setConstant(1.0);
  for (int i = 0; i < 10; ++i) {
    SweepTurn t;
    t.state = InitialState(sc);
    t.emotion = EmotionId(5);
    turns.push_back(t);
  }
  CHECK(SelectorAgreementRate(turns, pi) == 1.0);

  Rng rng(3);
  std::vector<SweepTurn> random(5000);
  for (auto& t : random) {
    t.state = InitialState(sc);
    t.emotion = EmotionId(static_cast<int>(rng.Index(kNumEmotions)));
  }
  const double p = 1.0 / kNumEmotions;
  const double sigma = std::sqrt(p * (1 - p) / 5000.0);
  CHECK(std::abs(SelectorAgreementRate(random, pi) - p) <= 3 * sigma);
  CHECK_THROWS_AS(SelectorAgreementRate(std::vector<SweepTurn>{}, pi), Error);
}

TEST_CASE("tournament cells match direct evaluation and are deterministic") {
  const auto scenarios =
      FilterSplit(GenerateScenarios(DefaultDomain("crad"), 10, 4), Split::kTest);
  const PolicyFactory vanilla = [] {
    ComposedPolicyConfig c;
    c.name = "vanilla";
    c.emotion_source = EmotionSource::kNeutral;
    return std::make_unique<ComposedPolicy>(c);
  };
  const PolicyFactory uniform = [] { return std::make_unique<BehaviorPolicy>(); };
  EvalSettings es;
  es.seeds = {1, 2};
  es.bootstrap_resamples = 200;
  std::vector<FocalEntry> focal{{"vanilla", vanilla}, {"uniform", uniform}};
  std::vector<CounterpartyEntry> ctp{{"default", DefaultProfile(), {}},
                                     {"vanilla", DefaultProfile(), vanilla}};
  const TournamentResult a = RunTournament(focal, ctp, scenarios, es);
  const TournamentResult b = RunTournament(focal, ctp, scenarios, es);
  CHECK(a.cells.size() == 4);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].report.utility_mean == b.cells[i].report.utility_mean);
    CHECK(a.cells[i].report.rounds_mean == b.cells[i].report.rounds_mean);
  }
  const MetricsReport direct = Evaluate(vanilla, scenarios, DefaultProfile(), es);
  CHECK(a.at(0, 0).report.utility_mean == direct.utility_mean);
  CHECK(a.at(0, 1).mirrored);
  CHECK_FALSE(a.at(1, 0).mirrored);
}

TEST_CASE("report writers") {
  std::vector<EpisodeResult> eps{Accepted(0.8), Broken()};
  ReportRow row{"iql", "crad", "default", AggregateMetrics(eps)};
  std::ostringstream js, table;
  WriteReportJsonl(js, std::span<const ReportRow>(&row, 1));
  WriteReportTable(table, std::span<const ReportRow>(&row, 1));
  CHECK(js.str().find("\"success_pct\":50.0") != std::string::npos);
  CHECK(js.str().find("\"utility_mean\":40.0") != std::string::npos);
  CHECK(table.str().find("iql") != std::string::npos);

  std::vector<EmotionStudyRow> rows(2);
  rows[0].emotion = emotions::kJoy;
  rows[0].mean = 0.1;
  rows[1].emotion = emotions::kFear;
  rows[1].mean = 0.9;
  std::ostringstream plot;
  WriteEmotionPlotData(plot, rows);
  const std::string text = plot.str();
  CHECK(text.find("fear") < text.find("joy"));
}
