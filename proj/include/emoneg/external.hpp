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

#ifndef EMONEG_EXTERNAL_HPP_
#define EMONEG_EXTERNAL_HPP_

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "emoneg/dialogue.hpp"
#include "emoneg/policies.hpp"

namespace emoneg {

// One request line out, one reply line back.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual std::string Exchange(const std::string& request) = 0;
};

// Talks to a child process over its stdin/stdout. Calls are serialised;
// a reply that does not arrive within the timeout is a backend error.
class ChildProcessTransport : public LineTransport {
 public:
  ChildProcessTransport(std::vector<std::string> argv, std::chrono::milliseconds timeout);
  ~ChildProcessTransport() override;
  ChildProcessTransport(const ChildProcessTransport&) = delete;
  ChildProcessTransport& operator=(const ChildProcessTransport&) = delete;

  std::string Exchange(const std::string& request) override;

 private:
  void Shutdown();

  std::mutex mu_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

// Nearest concession bin for a free-form proposal.
ConcessionBin SnapToBin(const DialogueState& state, double proposal);

// Focal policy whose move comes from an external agent. The emotion is
// chosen locally and sent as the rendered emotion block.
class ExternalAgentPolicy : public FocalPolicy {
 public:
  ExternalAgentPolicy(std::shared_ptr<LineTransport> transport, ComposedPolicyConfig emotion,
                      bool emotion_free = false);
  Decision Act(const Scenario& scenario, const DialogueState& state, Rng& rng) override;
  std::string name() const override { return "external"; }

  static std::string RenderRequest(const Scenario& scenario, const DialogueState& state,
                                   std::optional<EmotionId> emotion);
  static Move ParseReply(const DialogueState& state, const std::string& reply);

 private:
  std::shared_ptr<LineTransport> transport_;
  ComposedPolicyConfig emotion_;
  bool emotion_free_;
};

// Scores focal turns through an external judge.
class ExternalJudge {
 public:
  explicit ExternalJudge(std::shared_ptr<LineTransport> transport)
      : transport_(std::move(transport)) {}
  int ScoreTurn(const Scenario& scenario, const std::vector<Transition>& prior,
                const Move& move);
  void AnnotateTurns(Trajectory& traj);

 private:
  std::shared_ptr<LineTransport> transport_;
};

}  // namespace emoneg

#endif  // EMONEG_EXTERNAL_HPP_
