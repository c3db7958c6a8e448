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

#include "emoneg/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include "json.hpp"

#include "emoneg/judge.hpp"
#include "emoneg/prompts.hpp"

namespace emoneg {

namespace {

[[noreturn]] void BackendFail(const std::string& what) {
  Fail(ErrorKind::kBackend, what);
}

}  // namespace

ChildProcessTransport::ChildProcessTransport(std::vector<std::string> argv,
                                             std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  Require(!argv.empty(), ErrorKind::kConfiguration, "external backend command is empty");
  // A child that exits early must surface as a write error, not a signal.
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) BackendFail("pipe failed: " + std::string(std::strerror(errno)));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    BackendFail("pipe failed: " + std::string(std::strerror(errno)));
  }
  std::vector<char*> args;
  for (auto& a : argv) args.push_back(a.data());
  args.push_back(nullptr);
  pid_ = ::fork();
  if (pid_ < 0) BackendFail("fork failed: " + std::string(std::strerror(errno)));
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
}

ChildProcessTransport::~ChildProcessTransport() { Shutdown(); }

void ChildProcessTransport::Shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ChildProcessTransport::Exchange(const std::string& request) {
  std::lock_guard<std::mutex> lock(mu_);
  if (to_child_ < 0) BackendFail("external backend is closed");
  Require(request.find('\n') == std::string::npos, ErrorKind::kContract,
          "requests must be a single line");
  const std::string line = request + "\n";
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(to_child_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      BackendFail("write to external backend failed: " + std::string(std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return reply;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) BackendFail("external backend timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      BackendFail("poll failed: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) BackendFail("external backend timed out");
    char buf[4096];
    const ssize_t n = ::read(from_child_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      BackendFail("read from external backend failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) BackendFail("external backend closed its output");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

ConcessionBin SnapToBin(const DialogueState& state, double proposal) {
  const double span = state.ctp_offer - state.focal_offer;
  if (span == 0.0) return ConcessionBin::kHold;
  const double frac = (proposal - state.focal_offer) / span;
  ConcessionBin best = ConcessionBin::kHold;
  double best_dist = std::abs(frac);
  for (int b = 1; b < kNumBins; ++b) {
    const auto bin = static_cast<ConcessionBin>(b);
    const double d = std::abs(frac - BinFraction(bin));
    if (d < best_dist) {
      best = bin;
      best_dist = d;
    }
  }
  return best;
}

ExternalAgentPolicy::ExternalAgentPolicy(std::shared_ptr<LineTransport> transport,
                                         ComposedPolicyConfig emotion, bool emotion_free)
    : transport_(std::move(transport)), emotion_(std::move(emotion)),
      emotion_free_(emotion_free) {
  Require(transport_ != nullptr, ErrorKind::kConfiguration, "external agent needs a transport");
}

std::string ExternalAgentPolicy::RenderRequest(const Scenario& scenario,
                                               const DialogueState& state,
                                               std::optional<EmotionId> emotion) {
  nlohmann::ordered_json j;
  j["scenario_id"] = scenario.id;
  j["context"] = scenario.context;
  j["turn"] = state.turn;
  j["focal_offer"] = state.focal_offer;
  j["ctp_offer"] = state.ctp_offer;
  j["system"] = RenderFocalPrompt(scenario, state, emotion);
  j["timeline"] = RenderTimeline(scenario, state);
  j["emotion_block"] = emotion ? nlohmann::ordered_json(RenderEmotionBlock(*emotion))
                               : nlohmann::ordered_json(nullptr);
  return j.dump();
}

Move ExternalAgentPolicy::ParseReply(const DialogueState& state, const std::string& reply) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::exception&) {
    BackendFail("malformed agent reply: " + reply.substr(0, 200));
  }
  if (!j.is_object() || !j.contains("proposal") || !j["proposal"].is_number() ||
      !j.contains("style") || !j["style"].is_string()) {
    BackendFail("agent reply lacks proposal or style: " + reply.substr(0, 200));
  }
  const double proposal = j["proposal"].get<double>();
  if (!std::isfinite(proposal)) BackendFail("agent proposal is not finite");
  Style style;
  try {
    style = ParseStyle(j["style"].get<std::string>());
  } catch (const Error&) {
    BackendFail("agent reply has an unknown style: " + j["style"].get<std::string>());
  }
  const bool leverage = j.contains("leverage") && j["leverage"].is_boolean()
                            ? j["leverage"].get<bool>()
                            : false;
  return MakeMove(state, SnapToBin(state, proposal), style, leverage);
}

Decision ExternalAgentPolicy::Act(const Scenario& scenario, const DialogueState& state,
                                  Rng& rng) {
  const EmotionId emotion =
      emotion_free_ ? EmotionId::Neutral() : ChooseEmotion(emotion_, state, rng);
  const std::string reply = transport_->Exchange(
      RenderRequest(scenario, state, emotion_free_ ? std::nullopt : std::optional(emotion)));
  return {emotion, ParseReply(state, reply)};
}

int ExternalJudge::ScoreTurn(const Scenario& scenario, const std::vector<Transition>& prior,
                             const Move& move) {
  nlohmann::ordered_json j;
  j["system"] = JudgeSystemMessage();
  j["user"] = RenderJudgeUserMessage(scenario, prior, move);
  const std::string reply = transport_->Exchange(j.dump());
  std::string text = reply;
  try {
    const auto r = nlohmann::json::parse(reply);
    if (r.is_object() && r.contains("text") && r["text"].is_string()) {
      text = r["text"].get<std::string>();
    }
  } catch (const nlohmann::json::exception&) {
    // Plain-text replies are parsed as-is.
  }
  return ParseExternalScore(text);
}

void ExternalJudge::AnnotateTurns(Trajectory& traj) {
  std::vector<Transition> prior;
  for (auto& tr : traj.transitions) {
    tr.judge_score = ScoreTurn(traj.scenario, prior, tr.move);
    prior.push_back(tr);
  }
}

}  // namespace emoneg
