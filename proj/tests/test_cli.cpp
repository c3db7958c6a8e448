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

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "doctest.h"

#include "json.hpp"
#include "test_util.hpp"

#ifndef EMONEG_CLI_PATH
#error "EMONEG_CLI_PATH must point at the built command-line tool"
#endif

namespace fs = std::filesystem;
using emoneg::testing::ReadFile;
using emoneg::testing::TempDir;

namespace {

int Run(const std::string& args) {
  const std::string cmd = std::string(EMONEG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json Manifest(const fs::path& out, const std::string& stage) {
  return nlohmann::json::parse(ReadFile(out / "manifests" / (stage + ".json")));
}

// Small but complete pipeline settings so every stage runs in well under a second.
fs::path SmallConfig(const fs::path& dir) {
  const fs::path p = dir / "small.json";
  std::ofstream(p) << R"({"gen": {"n_scenarios": 20}, "sweep": {"m_rollouts": 10},
    "iql": {"steps": 200}, "sft": {"steps": 40}, "jpo": {"steps": 40},
    "alol": {"steps": 40}, "eval": {"seeds": [1], "bootstrap_resamples": 100},
    "study": {"scenarios": 2, "runs": 2}})";
  return p;
}

}  // namespace

TEST_CASE("default sweep writes the full trajectory count") {
  const fs::path out = TempDir("cli_default");
  REQUIRE(Run("gen --out " + out.string()) == 0);
  REQUIRE(Run("sweep --out " + out.string()) == 0);
  CHECK(Manifest(out, "sweep")["summary"]["trajectories"] == 8000);
  CHECK(Manifest(out, "gen")["config_hash"] == Manifest(out, "sweep")["config_hash"]);
}

TEST_CASE("pipeline stages chain and reruns are byte-identical") {
  const fs::path root = TempDir("cli_chain");
  const fs::path cfg = SmallConfig(root);
  std::string first_jpo;
  for (const char* name : {"a", "b"}) {
    const std::string base = "--config " + cfg.string() + " --out " + (root / name).string();
    for (const char* stage : {"gen", "sweep", "train-iql", "train-sft"}) {
      REQUIRE(Run(std::string(stage) + " " + base) == 0);
    }
    REQUIRE(Run("train-jpo --kappa 0.5 " + base) == 0);
    REQUIRE(Run("eval " + base) == 0);
  }
  for (const char* file : {"scenarios.jsonl", "sweep.jsonl", "selector.txt", "sft.txt", "jpo.txt",
                           "jpo_stability.jsonl"}) {
    CAPTURE(file);
    CHECK(ReadFile(root / "a" / file) == ReadFile(root / "b" / file));
  }
  const std::string jpo = ReadFile(root / "a" / "jpo.txt");
  CHECK(jpo.find("# kappa=0.5\n") != std::string::npos);
  CHECK(Manifest(root / "a", "train-jpo")["config"]["jpo"]["kappa"] == 0.5);
}

TEST_CASE("exit codes follow the error kind") {
  const fs::path root = TempDir("cli_errors");
  // Training needs a sweep that does not exist yet.
  CHECK(Run("train-iql --out " + (root / "empty").string()) == 4);
  CHECK(Run("no-such-stage") == 2);
  CHECK(Run("gen --workers 0") == 2);

  const fs::path bad = root / "bad.json";
  std::ofstream(bad) << R"({"gen": {"n_scenarios": 10}, "mystery": 1})";
  CHECK(Run("gen --config " + bad.string() + " --out " + (root / "x").string()) == 2);
  CHECK(Run("gen --config " + (root / "missing.json").string()) != 0);
}
