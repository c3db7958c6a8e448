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

#ifndef EMONEG_SELECTOR_HPP_
#define EMONEG_SELECTOR_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emoneg/dialogue.hpp"
#include "emoneg/signals.hpp"
#include "emoneg/sweep.hpp"

namespace emoneg {

inline constexpr int kGapBins = 5;
inline constexpr int kTurnBins = 3;
inline constexpr int kMomentumBins = 3;
inline constexpr int kNumStateBins = kGapBins * kTurnBins * kMomentumBins;

enum class Momentum { kConceding, kStatic, kRetreating };

struct StateBin {
  int gap_progress_bin = 0;  // quintile of |focal - ctp| / initial gap
  int turn_bin = 0;          // tercile of t / T_max
  Momentum ctp_momentum = Momentum::kStatic;

  int index() const {
    return (gap_progress_bin * kTurnBins + turn_bin) * kMomentumBins +
           static_cast<int>(ctp_momentum);
  }
  static StateBin FromIndex(int index);
};

StateBin Discretize(const DialogueState& state);

using ValueTable = Eigen::Matrix<double, kNumStateBins, 1>;
using QTable = Eigen::Matrix<double, kNumStateBins, kNumEmotions>;
using PolicyTable = Eigen::Matrix<double, kNumStateBins, kNumEmotions>;

struct SelectorParams {
  ValueTable V = ValueTable::Zero();
  QTable Q = QTable::Zero();
  double beta_awr = 3.0;
  double tau_exp = 0.7;
  double gamma = 0.99;
};

struct IqlHParams {
  double tau_exp = 0.7;
  double beta_awr = 3.0;
  double gamma = 0.99;
  int steps = 2000;
  double learning_rate = 0.5;
  // Stop once no table entry moves by more than this in a step.
  double tolerance = 1e-13;
  uint64_t seed = 0;
  RewardVariant variant = RewardVariant::kOutcomeTerminal;
};

struct IqlSample {
  int state = 0;
  int emotion = 0;
  double reward = 0.0;
  int next_state = 0;
  bool terminal = false;
};

struct IqlLossPoint {
  int step = 0;
  double loss_v = 0.0;
  double loss_q = 0.0;
  double loss_pi = 0.0;
};

struct IqlResult {
  SelectorParams params;
  std::vector<IqlLossPoint> log;
  int steps_run = 0;
};

double ExpectileLoss(double x, double tau_exp);

// Builds (s, e, r, s', done) samples with rewards placed per `variant`.
std::vector<IqlSample> BuildIqlSamples(const Dataset& dataset, RewardVariant variant,
                                       const ShapingParams& shaping = {});

// Mean expectile value loss (Q held fixed) and its gradient in V.
double ValueLoss(const ValueTable& V, const QTable& Q,
                 const std::vector<IqlSample>& batch, double tau_exp,
                 ValueTable* grad = nullptr);
// Mean TD loss (V held fixed) and its gradient in Q.
double TdLoss(const QTable& Q, const ValueTable& V, const std::vector<IqlSample>& batch,
              double gamma, QTable* grad = nullptr);

IqlResult FitIql(const std::vector<IqlSample>& samples, const IqlHParams& hp);

PolicyTable ExtractAwrPolicy(const SelectorParams& params);

enum class SelectMode { kSample, kGreedy };

EmotionId SelectEmotion(const PolicyTable& policy, const StateBin& state,
                        SelectMode mode, uint64_t seed = 0);
EmotionId SelectEmotion(const PolicyTable& policy, const StateBin& state,
                        SelectMode mode, Rng& rng);

// Plain-text checkpoint: header line, then one row per state with
// V, 28 Q values and 28 probabilities.
struct SelectorCheckpoint {
  SelectorParams params;
  PolicyTable policy = PolicyTable::Zero();
  uint64_t seed = 0;
  std::string variant = "outcome";
};

void SaveSelector(const std::filesystem::path& path, const SelectorCheckpoint& ckpt);
SelectorCheckpoint LoadSelector(const std::filesystem::path& path);

}  // namespace emoneg

#endif  // EMONEG_SELECTOR_HPP_
