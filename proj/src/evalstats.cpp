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

#include "emoneg/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>

#include "json.hpp"

namespace emoneg {

double Savings(const Scenario& scenario, double final_value) {
  const double gap = scenario.target - scenario.anchor;
  Require(gap != 0.0, ErrorKind::kContract, "savings undefined for a zero gap");
  return std::clamp((final_value - scenario.anchor) / gap, 0.0, 1.0);
}

EpisodeResult ResultFromTrajectory(const Trajectory& traj, uint64_t seed,
                                   const RubricWeights& rubric) {
  EpisodeResult r;
  r.scenario_id = traj.scenario.id;
  r.seed = seed;
  r.status = traj.status;
  r.rounds = traj.rounds;
  r.error = traj.error;
  if (traj.status == Status::kAccepted && traj.final_value) {
    r.final_value = traj.final_value;
    r.sav = Savings(traj.scenario, *traj.final_value);
    r.utility = *r.sav;
  }
  Trajectory judged = traj;
  const bool prejudged = std::all_of(judged.transitions.begin(), judged.transitions.end(),
                                     [](const Transition& t) { return t.judge_score; });
  if (!prejudged) AnnotateTurns(judged, rubric);
  double sum = 0.0;
  for (const auto& tr : judged.transitions) sum += *tr.judge_score;
  r.turns = static_cast<int>(judged.transitions.size());
  r.mean_turn_score = r.turns ? sum / r.turns : 0.0;
  return r;
}

namespace {

std::pair<double, double> MeanStd(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MetricsReport AggregateMetrics(std::span<const EpisodeResult> episodes) {
  Require(!episodes.empty(), ErrorKind::kContract, "no episodes to aggregate");
  MetricsReport m;
  m.n_episodes = episodes.size();
  std::vector<double> sav, util, rounds;
  double score_sum = 0.0;
  int score_n = 0;
  for (const auto& e : episodes) {
    if (e.status == Status::kAccepted && e.sav) sav.push_back(*e.sav);
    util.push_back(e.utility);
    rounds.push_back(e.rounds);
    if (e.error) ++m.aborted;
    score_sum += e.mean_turn_score * e.turns;
    score_n += e.turns;
  }
  m.success_pct = 100.0 * static_cast<double>(sav.size()) / static_cast<double>(m.n_episodes);
  if (!sav.empty()) {
    const auto [mu, sd] = MeanStd(sav);
    m.outcomes_mean = mu;
    m.outcomes_std = sd;
  }
  std::tie(m.utility_mean, m.utility_std) = MeanStd(util);
  std::tie(m.rounds_mean, m.rounds_std) = MeanStd(rounds);
  m.turn_score_mean = score_n ? score_sum / score_n : 0.0;
  m.episodes.assign(episodes.begin(), episodes.end());
  return m;
}

void AttachOutcomesCi(MetricsReport& report, std::size_t resamples, uint64_t seed) {
  std::vector<double> sav;
  for (const auto& e : report.episodes) {
    if (e.status == Status::kAccepted && e.sav) sav.push_back(*e.sav);
  }
  report.outcomes_ci = BootstrapCi(sav, resamples, seed);
}

double Percentile(std::span<const double> sorted, double q) {
  Require(!sorted.empty(), ErrorKind::kContract, "percentile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::optional<std::pair<double, double>> BootstrapCi(std::span<const double> values,
                                                     std::size_t resamples, uint64_t seed) {
  if (values.empty() || resamples == 0) return std::nullopt;
  Rng rng(seed);
  const std::size_t n = values.size();
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[rng.Index(n)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  return std::make_pair(Percentile(means, 0.025), Percentile(means, 0.975));
}

double StudentTPdf(double t, double df) {
  const double logc = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                      0.5 * std::log(df * std::numbers::pi);
  return std::exp(logc - 0.5 * (df + 1.0) * std::log1p(t * t / df));
}

namespace {

template <typename F>
double SimpsonStep(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * eps) return left + right + diff / 15.0;
  return SimpsonStep(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         SimpsonStep(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

template <typename F>
double AdaptiveSimpson(const F& f, double a, double b, double eps) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return SimpsonStep(f, a, b, fa, fm, fb, whole, eps, 48);
}

// P(T > a) for a > 0, integrated on u in (0, 1] with s = a / u.
double UpperTail(double a, double df) {
  const auto f = [a, df](double u) {
    if (u <= 0.0) return df == 1.0 ? 1.0 / (std::numbers::pi * a) : 0.0;
    return StudentTPdf(a / u, df) * a / (u * u);
  };
  // Split so the bulk near u = 1 and the decaying part near 0 are both
  // resolved.
  return AdaptiveSimpson(f, 0.0, 0.5, 1e-15) + AdaptiveSimpson(f, 0.5, 1.0, 1e-15);
}

}  // namespace

double StudentTCdf(double t, double df) {
  Require(df >= 1.0, ErrorKind::kContract, "t distribution needs df >= 1");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t == 0.0) return 0.5;
  const double tail = UpperTail(std::abs(t), df);
  return t > 0 ? 1.0 - tail : tail;
}

double TwoSidedTPValue(double t, double df) {
  Require(df >= 1.0, ErrorKind::kContract, "t distribution needs df >= 1");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return std::min(1.0, 2.0 * UpperTail(std::abs(t), df));
}

double StudentTQuantile(double p, double df) {
  Require(p > 0.0 && p < 1.0, ErrorKind::kContract, "quantile level must be in (0, 1)");
  double lo = -1.0, hi = 1.0;
  while (StudentTCdf(lo, df) > p) lo *= 2.0;
  while (StudentTCdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (StudentTCdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<EmotionStudyRow> EmotionStudy(const RewardTensor& rewards) {
  Require(rewards.size() == static_cast<std::size_t>(kNumEmotions), ErrorKind::kContract,
          "emotion study needs one slice per emotion, neutral included");
  const std::size_t n_scen = rewards[0].size();
  Require(n_scen >= 2, ErrorKind::kContract, "emotion study needs at least 2 scenarios");
  std::vector<std::vector<double>> means(kNumEmotions, std::vector<double>(n_scen));
  for (int e = 0; e < kNumEmotions; ++e) {
    Require(rewards[static_cast<std::size_t>(e)].size() == n_scen, ErrorKind::kContract,
            "ragged emotion study tensor");
    for (std::size_t s = 0; s < n_scen; ++s) {
      const auto& runs = rewards[static_cast<std::size_t>(e)][s];
      Require(!runs.empty(), ErrorKind::kContract, "emotion study cell has no runs");
      double sum = 0.0;
      for (double r : runs) sum += r;
      means[static_cast<std::size_t>(e)][s] = sum / static_cast<double>(runs.size());
    }
  }
  const double df = static_cast<double>(n_scen - 1);
  const double tcrit = StudentTQuantile(0.975, df);
  const auto& neutral = means[static_cast<std::size_t>(emotions::kNeutral.index())];
  std::vector<EmotionStudyRow> rows;
  for (int e = 0; e < kNumEmotions; ++e) {
    const auto& m = means[static_cast<std::size_t>(e)];
    EmotionStudyRow row;
    row.emotion = EmotionId(e);
    double mu = 0.0;
    for (double x : m) mu += x;
    mu /= static_cast<double>(n_scen);
    double ss = 0.0;
    for (double x : m) ss += (x - mu) * (x - mu);
    const double half = tcrit * std::sqrt(ss / df) / std::sqrt(static_cast<double>(n_scen));
    row.mean = mu;
    row.ci_lo = mu - half;
    row.ci_hi = mu + half;

    std::vector<double> delta(n_scen);
    for (std::size_t s = 0; s < n_scen; ++s) delta[s] = m[s] - neutral[s];
    double dbar = 0.0;
    for (double d : delta) dbar += d;
    dbar /= static_cast<double>(n_scen);
    double dss = 0.0;
    for (double d : delta) dss += (d - dbar) * (d - dbar);
    const double sd = std::sqrt(dss / df);
    row.delta_mean = dbar;
    if (sd == 0.0) {
      row.degenerate = true;
      if (dbar == 0.0) {
        row.t = 0.0;
        row.p = 1.0;
      } else {
        row.t = dbar > 0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
        row.p = 0.0;
      }
    } else {
      row.t = dbar / (sd / std::sqrt(static_cast<double>(n_scen)));
      row.p = TwoSidedTPValue(row.t, df);
    }
    row.significant = EmotionId(e) != emotions::kNeutral && row.p < kBonferroniAlpha;
    rows.push_back(row);
  }
  return rows;
}

StabilitySummary SummarizeSeries(std::span<const double> series) {
  Require(series.size() >= 4, ErrorKind::kContract,
          "stability summary needs at least 4 points");
  const std::size_t window = (series.size() + 3) / 4;
  std::vector<double> tail(series.end() - static_cast<std::ptrdiff_t>(window), series.end());
  StabilitySummary s;
  s.median = Median(tail);
  for (double& x : tail) x = std::abs(x - s.median);
  s.mad = Median(tail);
  return s;
}

StabilitySummary SummarizeStability(const StabilityLog& log) {
  std::vector<double> losses;
  losses.reserve(log.size());
  for (const auto& p : log) losses.push_back(p.loss);
  StabilitySummary s = SummarizeSeries(losses);
  for (const auto& p : log) {
    s.clip_count += p.clip_count;
    if (IsKlSpike(p.k3)) ++s.spike_count;
  }
  return s;
}

double SelectorAgreementRate(std::span<const SweepTurn> turns, const PolicyTable& policy) {
  Require(!turns.empty(), ErrorKind::kContract, "agreement rate over an empty turn set");
  std::size_t hits = 0;
  for (const auto& t : turns) {
    if (SelectEmotion(policy, Discretize(t.state), SelectMode::kGreedy) == t.emotion) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(turns.size());
}

namespace {

MetricsReport EvaluateSide(const PolicyFactory& make_policy,
                           std::span<const Scenario> scenarios,
                           const CounterpartyProfile& profile, const PolicyFactory& ctp_policy,
                           const EvalSettings& settings) {
  Require(!scenarios.empty() && !settings.seeds.empty(), ErrorKind::kContract,
          "evaluation needs scenarios and seeds");
  const std::size_t n_seeds = settings.seeds.size();
  std::vector<EpisodeResult> results(scenarios.size() * n_seeds);
  ParallelFor(results.size(), settings.workers, [&](std::size_t k) {
    const Scenario& sc = scenarios[k / n_seeds];
    const uint64_t seed = settings.seeds[k % n_seeds];
    const uint64_t episode_seed = DeriveSeed(seed, Fnv1a64(sc.id));
    auto focal = make_policy();
    std::unique_ptr<FocalPolicy> other = ctp_policy ? ctp_policy() : nullptr;
    CounterpartySide side{profile, other.get()};
    Trajectory traj = RunEpisodeRecorded(sc, *focal, side, episode_seed);
    if (settings.judge && !traj.error) settings.judge(traj);
    results[k] = ResultFromTrajectory(traj, seed, settings.rubric);
  });
  MetricsReport m = AggregateMetrics(results);
  AttachOutcomesCi(m, settings.bootstrap_resamples, settings.bootstrap_seed);
  return m;
}

}  // namespace

MetricsReport Evaluate(const PolicyFactory& make_policy, std::span<const Scenario> scenarios,
                       const CounterpartyProfile& profile, const EvalSettings& settings) {
  return EvaluateSide(make_policy, scenarios, profile, PolicyFactory{}, settings);
}

TournamentResult RunTournament(std::span<const FocalEntry> focal,
                               std::span<const CounterpartyEntry> counterparties,
                               std::span<const Scenario> scenarios,
                               const EvalSettings& settings) {
  TournamentResult out;
  for (const auto& f : focal) out.focal_names.push_back(f.name);
  for (const auto& c : counterparties) out.counterparty_names.push_back(c.name);
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& f : focal) {
    for (const auto& c : counterparties) pairs.emplace(f.name, c.name);
  }
  for (const auto& f : focal) {
    for (const auto& c : counterparties) {
      TournamentCell cell;
      cell.focal = f.name;
      cell.counterparty = c.name;
      cell.mirrored = pairs.count({c.name, f.name}) > 0;
      cell.report = EvaluateSide(f.policy, scenarios, c.profile, c.policy, settings);
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json OptionalPct(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(100.0 * *v) : nlohmann::ordered_json(nullptr);
}

std::string Cell(const std::optional<double>& v, int precision = 1) {
  if (!v) return "N/A";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
  return buf;
}

}  // namespace

void WriteReportJsonl(std::ostream& out, std::span<const ReportRow> rows) {
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["domain"] = r.domain;
    j["counterparty"] = r.counterparty;
    j["success_pct"] = m.success_pct;
    j["outcomes_mean"] = OptionalPct(m.outcomes_mean);
    j["outcomes_std"] = OptionalPct(m.outcomes_std);
    j["utility_mean"] = 100.0 * m.utility_mean;
    j["utility_std"] = 100.0 * m.utility_std;
    j["rounds_mean"] = m.rounds_mean;
    j["rounds_std"] = m.rounds_std;
    j["ci_lo"] = OptionalPct(m.outcomes_ci ? std::optional(m.outcomes_ci->first) : std::nullopt);
    j["ci_hi"] = OptionalPct(m.outcomes_ci ? std::optional(m.outcomes_ci->second) : std::nullopt);
    j["turn_score_mean"] = m.turn_score_mean;
    j["n_episodes"] = m.n_episodes;
    j["aborted"] = m.aborted;
    out << j.dump() << '\n';
  }
}

void WriteReportTable(std::ostream& out, std::span<const ReportRow> rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-9s %-20s %8s %15s %15s %13s %9s\n", "method",
                "domain", "counterparty", "success", "outcomes", "utility", "rounds",
                "judge");
  out << line;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    const auto pct = [](std::optional<double> v) {
      return v ? std::optional<double>(100.0 * *v) : std::nullopt;
    };
    const std::string outcomes = Cell(pct(m.outcomes_mean)) + "+-" + Cell(pct(m.outcomes_std));
    const std::string utility =
        Cell(100.0 * m.utility_mean) + "+-" + Cell(100.0 * m.utility_std);
    const std::string rounds = Cell(m.rounds_mean) + "+-" + Cell(m.rounds_std);
    std::snprintf(line, sizeof line, "%-22s %-9s %-20s %8.1f %15s %15s %13s %9.2f\n",
                  r.method.c_str(), r.domain.c_str(), r.counterparty.c_str(), m.success_pct,
                  outcomes.c_str(), utility.c_str(), rounds.c_str(), m.turn_score_mean);
    out << line;
  }
}

void WriteEmotionPlotData(std::ostream& out, std::span<const EmotionStudyRow> rows) {
  std::vector<EmotionStudyRow> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.mean > b.mean; });
  out << "emotion\tmean\tci_lo\tci_hi\tt\tp\tsignificant\n";
  for (const auto& r : sorted) {
    out << r.emotion.label() << '\t' << FormatDouble(r.mean) << '\t' << FormatDouble(r.ci_lo)
        << '\t' << FormatDouble(r.ci_hi) << '\t' << FormatDouble(r.t) << '\t'
        << FormatDouble(r.p) << '\t' << (r.significant ? 1 : 0) << '\n';
  }
}

}  // namespace emoneg
