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

#include "emoneg/scenario.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "emoneg/common.hpp"
#include "json.hpp"

namespace emoneg {
namespace {

using nlohmann::json;

struct PhraseBank {
  std::string_view key;
  std::vector<std::string_view> phrases;
};

// Narrative context only; never read by the dynamics.
const std::vector<PhraseBank>& PhraseBanks(std::string_view domain) {
  static const std::vector<PhraseBank> crad = {
      {"outstanding_balance", {"12,400", "38,900", "7,250", "64,000", "21,300"}},
      {"recovery_stage", {"early collections", "second notice", "pre-legal"}},
      {"business_sector", {"restaurant", "logistics", "retail", "construction"}},
      {"reason_for_overdue",
       {"seasonal slowdown", "late client payments", "equipment failure",
        "supplier dispute"}},
  };
  static const std::vector<PhraseBank> disaster = {
      {"location", {"riverside district", "hill village", "coastal town"}},
      {"hazard", {"flooding", "landslide", "storm surge"}},
      {"survivor_condition", {"stable", "minor injuries", "exhausted"}},
  };
  static const std::vector<PhraseBank> hospital = {
      {"procedure", {"knee replacement", "hernia repair", "cataract surgery"}},
      {"urgency", {"elective", "semi-urgent"}},
      {"patient_concern", {"work schedule", "pain levels", "family care"}},
  };
  static const std::vector<PhraseBank> student = {
      {"course_load", {"light", "moderate", "heavy"}},
      {"deadline", {"essay due", "lab report", "exam week"}},
      {"habit", {"gaming", "late study", "social media"}},
  };
  if (domain == "crad") return crad;
  if (domain == "disaster") return disaster;
  if (domain == "hospital") return hospital;
  return student;
}

void ValidateInterval(const Interval& iv, std::string_view what) {
  Require(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi,
          ErrorKind::kConfiguration,
          std::string(what) + " range is empty or non-finite");
}

}  // namespace

std::string_view SplitName(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

Split ParseSplit(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  Fail(ErrorKind::kConfiguration, "unknown split '" + std::string(name) + "'");
}

const std::vector<std::string>& DomainNames() {
  static const std::vector<std::string> names = {"crad", "disaster", "hospital",
                                                 "student"};
  return names;
}

DomainConfig DefaultDomain(std::string_view name) {
  if (name == "crad") {
    return {"crad", "overdue days", GapSign::kTargetBelowAnchor,
            {120.0, 180.0}, {10.0, 30.0}, "days"};
  }
  if (name == "disaster") {
    return {"disaster", "rescue wait minutes", GapSign::kTargetAboveAnchor,
            {5.0, 15.0}, {45.0, 120.0}, "minutes"};
  }
  if (name == "hospital") {
    return {"hospital", "surgery wait days", GapSign::kTargetAboveAnchor,
            {3.0, 10.0}, {30.0, 90.0}, "days"};
  }
  if (name == "student") {
    return {"student", "minutes past 9 PM", GapSign::kTargetBelowAnchor,
            {150.0, 240.0}, {15.0, 45.0}, "minutes"};
  }
  Fail(ErrorKind::kConfiguration, "unknown domain '" + std::string(name) + "'");
}

std::vector<Scenario> GenerateScenarios(const DomainConfig& config,
                                        std::size_t n, uint64_t seed) {
  Require(n >= 1, ErrorKind::kConfiguration, "scenario count must be >= 1");
  ValidateInterval(config.anchor_range, "anchor");
  ValidateInterval(config.target_range, "target");
  const bool below = config.gap_sign == GapSign::kTargetBelowAnchor;
  // Some pair must satisfy the sign constraint strictly.
  const bool feasible = below ? config.target_range.lo < config.anchor_range.hi
                              : config.target_range.hi > config.anchor_range.lo;
  Require(feasible, ErrorKind::kConfiguration,
          "target range cannot satisfy the gap sign of domain " + config.name);

  Rng rng(DeriveSeed(seed, Fnv1a64(config.name)));
  const auto& banks = PhraseBanks(config.name);
  const std::size_t n_train = (n * 4) / 5;
  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scenario s;
    std::ostringstream id;
    id << config.name << '_' << std::setw(3) << std::setfill('0') << (i + 1);
    s.id = id.str();
    s.domain = config.name;
    for (int attempt = 0;; ++attempt) {
      Require(attempt < 100000, ErrorKind::kConfiguration,
              "rejection sampling failed for domain " + config.name);
      const double a = rng.Uniform(config.anchor_range.lo, config.anchor_range.hi);
      const double t = rng.Uniform(config.target_range.lo, config.target_range.hi);
      const bool ok = below ? (t < a) : (t > a);
      if (ok) {
        s.anchor = a;
        s.target = t;
        break;
      }
    }
    for (const auto& bank : banks) {
      s.context[std::string(bank.key)] =
          std::string(bank.phrases[rng.Index(bank.phrases.size())]);
    }
    s.split = i < n_train ? Split::kTrain : Split::kTest;
    out.push_back(std::move(s));
  }
  return out;
}

void WriteScenarios(std::ostream& out, const std::vector<Scenario>& scenarios) {
  for (const auto& s : scenarios) {
    json j;
    j["id"] = s.id;
    j["domain"] = s.domain;
    j["anchor"] = s.anchor;
    j["target"] = s.target;
    j["split"] = std::string(SplitName(s.split));
    j["context"] = s.context;
    out << j.dump() << '\n';
  }
}

std::vector<Scenario> ReadScenarios(std::istream& in) {
  std::vector<Scenario> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Scenario s;
      s.id = j.at("id").get<std::string>();
      s.domain = j.at("domain").get<std::string>();
      s.anchor = j.at("anchor").get<double>();
      s.target = j.at("target").get<double>();
      s.split = ParseSplit(j.at("split").get<std::string>());
      if (j.contains("context")) {
        s.context = j.at("context").get<std::map<std::string, std::string>>();
      }
      Require(s.target != s.anchor, ErrorKind::kConfiguration,
              "scenario " + s.id + " has zero gap");
      Require(ids.insert(s.id).second, ErrorKind::kConfiguration,
              "duplicate scenario id " + s.id);
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      Fail(ErrorKind::kStorage, "scenario line " + std::to_string(lineno) +
                                    ": " + e.what());
    }
  }
  return out;
}

void SaveScenarios(const std::filesystem::path& path,
                   const std::vector<Scenario>& scenarios) {
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorKind::kStorage,
          "cannot open " + path.string() + " for writing");
  WriteScenarios(out, scenarios);
  Require(static_cast<bool>(out), ErrorKind::kStorage,
          "write failed for " + path.string());
}

std::vector<Scenario> LoadScenarios(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorKind::kStorage,
          "cannot open " + path.string());
  if (path.extension() == ".csv") return ReadScenarioCsv(in);
  return ReadScenarios(in);
}

std::vector<Scenario> ReadScenarioCsv(std::istream& in) {
  auto split_row = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
        cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    return cells;
  };
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), ErrorKind::kStorage,
          "empty scenario csv");
  const auto header = split_row(line);
  const std::array<std::string, 5> want = {"id", "domain", "anchor", "target",
                                           "split"};
  std::array<std::size_t, 5> col{};
  for (std::size_t k = 0; k < want.size(); ++k) {
    bool found = false;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == want[k]) {
        col[k] = c;
        found = true;
      }
    }
    Require(found, ErrorKind::kStorage, "csv header lacks column " + want[k]);
  }
  std::vector<Scenario> out;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line);
    Require(cells.size() >= header.size(), ErrorKind::kStorage,
            "short csv row: " + line);
    Scenario s;
    s.id = cells[col[0]];
    s.domain = cells[col[1]];
    try {
      s.anchor = std::stod(cells[col[2]]);
      s.target = std::stod(cells[col[3]]);
    } catch (const std::exception&) {
      Fail(ErrorKind::kStorage, "non-numeric csv row: " + line);
    }
    s.split = ParseSplit(cells[col[4]]);
    Require(s.target != s.anchor, ErrorKind::kConfiguration,
            "scenario " + s.id + " has zero gap");
    Require(ids.insert(s.id).second, ErrorKind::kConfiguration,
            "duplicate scenario id " + s.id);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> FilterSplit(const std::vector<Scenario>& scenarios,
                                  Split split) {
  std::vector<Scenario> out;
  for (const auto& s : scenarios) {
    if (s.split == split) out.push_back(s);
  }
  return out;
}

}  // namespace emoneg
