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

#ifndef EMONEG_SCENARIO_HPP_
#define EMONEG_SCENARIO_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace emoneg {

enum class GapSign { kTargetBelowAnchor, kTargetAboveAnchor };
enum class Split { kTrain, kTest };

std::string_view SplitName(Split split);
Split ParseSplit(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct DomainConfig {
  std::string name;  // crad | disaster | hospital | student
  std::string variable_name;
  GapSign gap_sign = GapSign::kTargetBelowAnchor;
  Interval anchor_range;
  Interval target_range;
  std::string unit;
};

// Built-in configuration for one of the four domains.
DomainConfig DefaultDomain(std::string_view name);
const std::vector<std::string>& DomainNames();

struct Scenario {
  std::string id;
  std::string domain;
  double anchor = 0.0;  // counterparty opening offer
  double target = 0.0;  // focal target
  std::map<std::string, std::string> context;
  Split split = Split::kTrain;

  double gap() const { return target - anchor; }
  // +1 when the focal agent wants larger values, -1 otherwise.
  double direction() const { return gap() > 0.0 ? 1.0 : -1.0; }
};

std::vector<Scenario> GenerateScenarios(const DomainConfig& config,
                                        std::size_t n, uint64_t seed);

// Line-delimited records with fields id, domain, anchor, target, split, context.
void WriteScenarios(std::ostream& out, const std::vector<Scenario>& scenarios);
std::vector<Scenario> ReadScenarios(std::istream& in);
void SaveScenarios(const std::filesystem::path& path,
                   const std::vector<Scenario>& scenarios);
std::vector<Scenario> LoadScenarios(const std::filesystem::path& path);

// Comma-separated import with header row id,domain,anchor,target,split.
std::vector<Scenario> ReadScenarioCsv(std::istream& in);

std::vector<Scenario> FilterSplit(const std::vector<Scenario>& scenarios,
                                  Split split);

}  // namespace emoneg

#endif  // EMONEG_SCENARIO_HPP_
