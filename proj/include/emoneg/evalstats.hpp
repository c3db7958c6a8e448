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

#ifndef EMONEG_EVALSTATS_HPP_
#define EMONEG_EVALSTATS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emoneg/dialogue.hpp"
#include "emoneg/expresser.hpp"
#include "emoneg/judge.hpp"
#include "emoneg/selector.hpp"
#include "emoneg/sweep.hpp"

namespace emoneg {

// Fraction of the anchor-to-target distance closed, clipped to [0, 1].
double Savings(const Scenario& scenario, double final_value);

struct EpisodeResult {
  std::string scenario_id;
  uint64_t seed = 0;
  Status status = Status::kOngoing;
  std::optional<double> final_value;
  int rounds = 0;
  std::optional<double> sav;
  double utility = 0.0;
  double mean_turn_score = 0.0;
  int turns = 0;
  std::optional<std::string> error;
};

EpisodeResult ResultFromTrajectory(const Trajectory& traj, uint64_t seed,
                                   const RubricWeights& rubric = {});

struct MetricsReport {
  double success_pct = 0.0;
  std::optional<double> outcomes_mean;
  std::optional<double> outcomes_std;
  double utility_mean = 0.0;
  double utility_std = 0.0;
  double rounds_mean = 0.0;
  double rounds_std = 0.0;
  double turn_score_mean = 0.0;  // over all judged focal turns
  std::size_t n_episodes = 0;
  std::size_t aborted = 0;
  std::optional<std::pair<double, double>> outcomes_ci;
  std::vector<EpisodeResult> episodes;
};

// Population means and standard deviations. The outcomes CI is filled
// separately by AttachOutcomesCi.
MetricsReport AggregateMetrics(std::span<const EpisodeResult> episodes);
void AttachOutcomesCi(MetricsReport& report, std::size_t resamples, uint64_t seed);

// Percentile bootstrap of the mean. Resample index j is
// floor(u * n) with u drawn from Rng(seed).Uniform().
std::optional<std::pair<double, double>> BootstrapCi(std::span<const double> values,
                                                     std::size_t resamples = 10000,
                                                     uint64_t seed = 0);
// Linear-interpolated percentile of sorted data, q in [0, 1].
double Percentile(std::span<const double> sorted, double q);

inline constexpr double kBonferroniAlpha = 0.05 / 27.0;

double StudentTPdf(double t, double df);
double StudentTCdf(double t, double df);
double TwoSidedTPValue(double t, double df);
double StudentTQuantile(double p, double df);

struct EmotionStudyRow {
  EmotionId emotion;
  double mean = 0.0;  // mean over scenarios of per-scenario run means
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double delta_mean = 0.0;
  double t = 0.0;
  double p = 1.0;
  bool significant = false;
  bool degenerate = false;  // zero-variance deltas
};

// rewards[e][s][j]: reward of run j on scenario s under emotion e.
using RewardTensor = std::vector<std::vector<std::vector<double>>>;
std::vector<EmotionStudyRow> EmotionStudy(const RewardTensor& rewards);

struct StabilitySummary {
  double median = 0.0;
  double mad = 0.0;
  int spike_count = 0;
  int clip_count = 0;
};

// Median and MAD over the final quarter of the series.
StabilitySummary SummarizeSeries(std::span<const double> series);
StabilitySummary SummarizeStability(const StabilityLog& log);

// Fraction of turns whose recorded emotion equals the greedy selector
// choice at the binned state.
double SelectorAgreementRate(std::span<const SweepTurn> turns, const PolicyTable& policy);

using PolicyFactory = std::function<std::unique_ptr<FocalPolicy>()>;

struct EvalSettings {
  std::vector<uint64_t> seeds{0};
  RubricWeights rubric;
  int workers = 1;
  std::size_t bootstrap_resamples = 10000;
  uint64_t bootstrap_seed = 0;
  // Optional turn scorer replacing the built-in rubric (e.g. an external
  // judge). Must be safe to call from worker threads.
  std::function<void(Trajectory&)> judge;
};

// Runs every (scenario, seed) episode; a fresh policy per episode.
MetricsReport Evaluate(const PolicyFactory& make_policy, std::span<const Scenario> scenarios,
                       const CounterpartyProfile& profile, const EvalSettings& settings);

struct CounterpartyEntry {
  std::string name;
  CounterpartyProfile profile;
  PolicyFactory policy;  // empty: the scripted profile plays alone
};

struct FocalEntry {
  std::string name;
  PolicyFactory policy;
};

struct TournamentCell {
  std::string focal;
  std::string counterparty;
  bool mirrored = false;  // the reverse pairing is also in the matrix
  MetricsReport report;
};

struct TournamentResult {
  std::vector<std::string> focal_names;
  std::vector<std::string> counterparty_names;
  std::vector<TournamentCell> cells;  // row-major, focal outer

  const TournamentCell& at(std::size_t focal, std::size_t ctp) const {
    return cells.at(focal * counterparty_names.size() + ctp);
  }
};

TournamentResult RunTournament(std::span<const FocalEntry> focal,
                               std::span<const CounterpartyEntry> counterparties,
                               std::span<const Scenario> scenarios,
                               const EvalSettings& settings);

struct ReportRow {
  std::string method;
  std::string domain;
  std::string counterparty;
  MetricsReport metrics;
};

// Line-delimited summary; savings-based fields are percentages.
void WriteReportJsonl(std::ostream& out, std::span<const ReportRow> rows);
void WriteReportTable(std::ostream& out, std::span<const ReportRow> rows);
void WriteEmotionPlotData(std::ostream& out, std::span<const EmotionStudyRow> rows);

}  // namespace emoneg

#endif  // EMONEG_EVALSTATS_HPP_
