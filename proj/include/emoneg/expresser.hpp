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

#ifndef EMONEG_EXPRESSER_HPP_
#define EMONEG_EXPRESSER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emoneg/dialogue.hpp"
#include "emoneg/signals.hpp"
#include "emoneg/sweep.hpp"

namespace emoneg {

// normalized gap, turn fraction, ctp concession, focal concession,
// repetition flag, 28 emotion indicators, bias.
inline constexpr int kNumFeatures = 34;
inline constexpr int kEmotionFeatureOffset = 5;
inline constexpr int kBiasFeature = kNumFeatures - 1;
inline constexpr int kNumActions = kNumBins * kNumStyles * 2;

using FeatureVector = Eigen::Matrix<double, kNumFeatures, 1>;
using ActionProbs = Eigen::Matrix<double, kNumActions, 1>;
using WeightMatrix = Eigen::Matrix<double, kNumActions, kNumFeatures>;

enum class ExpressionMode { kConditional, kEmotionFree };
std::string_view ExpressionModeName(ExpressionMode mode);
ExpressionMode ParseExpressionMode(std::string_view name);

struct ActionTemplate {
  ConcessionBin bin = ConcessionBin::kHold;
  Style style = Style::kFirm;
  bool leverage = false;
};

int ActionIndex(ConcessionBin bin, Style style, bool leverage);
int ActionIndex(const Move& move);
ActionTemplate ActionFromIndex(int index);
Move MoveFromAction(const DialogueState& state, int action);

FeatureVector Featurize(const DialogueState& state, EmotionId emotion,
                        ExpressionMode mode);

struct ExpressionParams {
  WeightMatrix weights = WeightMatrix::Zero();
  ExpressionMode mode = ExpressionMode::kConditional;
};

ActionProbs PolicyProbs(const ExpressionParams& params, const FeatureVector& f);
int SampleAction(const ActionProbs& probs, Rng& rng);
// Argmax with the lowest index winning ties.
int GreedyAction(const ActionProbs& probs);

// Row-major training batch: one feature row per transition.
struct ExpressionBatch {
  Eigen::MatrixXd features;  // N x kNumFeatures
  std::vector<int> actions;
  Eigen::VectorXd advantages;

  std::size_t size() const { return actions.size(); }
  ExpressionBatch Rows(std::span<const std::size_t> rows) const;
};

// Which per-turn advantage JPO and A-LoL consume.
enum class AdvantageSource { kTurnJudge, kEpisodeJudge, kOutcome };
AdvantageSource AdvantageSourceFor(RewardVariant variant);

// Advantages per turn: the stored turn-judge A_t, or the episode score or
// trajectory return broadcast over the trajectory and z-normalised per
// scenario.
std::vector<double> TurnAdvantages(std::span<const SweepTurn> turns,
                                   AdvantageSource source, double eps = 1e-8);

ExpressionBatch BuildExpressionBatch(std::span<const SweepTurn> turns,
                                     std::span<const double> advantages,
                                     ExpressionMode mode);

// Log-probabilities of the batch actions, one per row.
Eigen::VectorXd ActionLogProbs(const ExpressionParams& params,
                               const ExpressionBatch& batch);

struct LossPoint {
  int step = 0;
  double loss = 0.0;
};

struct SftHParams {
  int steps = 400;
  double learning_rate = 1.0;
  int batch = 0;  // 0 = full batch
  uint64_t seed = 0;
};

struct SftResult {
  ExpressionParams params;
  std::vector<LossPoint> log;
};

// Mean negative log-likelihood of the demonstrated actions.
double SftLoss(const ExpressionParams& params, const ExpressionBatch& batch,
               WeightMatrix* grad = nullptr);
SftResult FitSft(const ExpressionBatch& demos, ExpressionMode mode, const SftHParams& hp);

struct JpoHParams {
  double clip_eps = 0.2;
  double lambda_kl = 0.04;
  double kappa = 1.0;
  int steps = 300;
  int batch = 0;  // 0 = full batch
  double learning_rate = 1.0;
  uint64_t seed = 0;
};
void ValidateJpo(const JpoHParams& hp);

inline constexpr double kRatioClipLow = 0.8;
inline constexpr double kRatioClipHigh = 1.2;
inline constexpr double kKlSpikeThreshold = 0.5;
inline constexpr double kSupportFloor = 1e-12;

inline bool IsRatioClip(double rho) { return rho < kRatioClipLow || rho > kRatioClipHigh; }
inline bool IsKlSpike(double k3) { return k3 > kKlSpikeThreshold; }

struct JpoBatchStats {
  double loss = 0.0;         // surrogate + lambda * k3
  double surrogate = 0.0;    // mean of -min(rho A, clip(rho) A)
  double reward_term = 0.0;  // mean of min(rho A, clip(rho) A)
  double k3 = 0.0;
  double mean_rho = 0.0;
  int clip_count = 0;
  int skipped = 0;
  int used = 0;
};

// Objective and gradient on a batch. `ref_logp` holds log pi_ref of each
// batch action; rows with pi_ref below the support floor are skipped.
JpoBatchStats JpoObjective(const ExpressionParams& theta, const ExpressionBatch& batch,
                           const Eigen::VectorXd& ref_logp, const JpoHParams& hp,
                           WeightMatrix* grad = nullptr);

struct StabilityPoint {
  int step = 0;
  double loss = 0.0;
  double reward_term = 0.0;
  double k3 = 0.0;
  double mean_rho = 0.0;
  int clip_count = 0;
  bool spike = false;
};
using StabilityLog = std::vector<StabilityPoint>;

struct JpoResult {
  ExpressionParams params;
  StabilityLog log;
  int skipped = 0;
};

JpoResult FitJpo(const ExpressionBatch& data, const ExpressionParams& ref,
                 const JpoHParams& hp);

struct AlolHParams {
  int steps = 300;
  double learning_rate = 1.0;
};

// Mean over positive-advantage rows of -A log pi.
double AlolLoss(const ExpressionParams& params, const ExpressionBatch& batch,
                WeightMatrix* grad = nullptr);
SftResult FitAlol(const ExpressionBatch& data, const ExpressionParams& ref,
                  const AlolHParams& hp);

// Mean of rho - 1 - ln rho over the batch actions.
double K3Divergence(const ExpressionParams& params, const ExpressionParams& ref,
                    const ExpressionBatch& batch);
double K3(double rho);

// Plain-text checkpoint: a header of key=value pairs, then one row of
// weights per action template.
struct ExpressionCheckpoint {
  ExpressionParams params;
  std::string stage = "sft";
  uint64_t seed = 0;
  std::string parent = "none";
  std::map<std::string, std::string> hparams;
};

void SaveExpression(const std::filesystem::path& path, const ExpressionCheckpoint& ckpt);
ExpressionCheckpoint LoadExpression(const std::filesystem::path& path);

void SaveStabilityLog(const std::filesystem::path& path, const StabilityLog& log);
StabilityLog LoadStabilityLog(const std::filesystem::path& path);

}  // namespace emoneg

#endif  // EMONEG_EXPRESSER_HPP_
