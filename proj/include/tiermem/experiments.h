// Copyright 2026 The tiermem Authors
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

#ifndef TIERMEM_EXPERIMENTS_H_
#define TIERMEM_EXPERIMENTS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tiermem/simulation.h"
#include "tiermem/workload.h"

namespace tiermem {

struct ExperimentOptions {
  uint64_t seed = 1;
  // Multiplies every query count; tests use < 1 for speed.
  double scale = 1.0;
};

struct ExperimentRow {
  std::string variant;
  std::string param;
  std::string phase;
  WindowMetrics window;
};

struct TrendPoint {
  std::string variant;
  std::string param;
  std::string metric;
  double value = 0;
};

struct ExperimentResult {
  std::string name;
  std::string parameters;  // canonical description, hashed in the summary
  std::vector<ExperimentRow> rows;
  std::vector<TrendPoint> trend;
  // Summed over asynchronous runs only; the sync baseline is expected to
  // put the network on the write path.
  uint64_t critical_path_violations = 0;
  uint64_t mismatches = 0;
  uint64_t lost_pages = 0;
  double wall_ms = 0;

  std::optional<double> Get(std::string_view variant, std::string_view param,
                            std::string_view metric) const;
  std::string MetricsCsv() const;
  std::string TrendCsv() const;
  std::string Summary() const;
  bool ok() const {
    return critical_path_violations == 0 && mismatches == 0 && lost_pages == 0;
  }
};

const std::vector<std::string>& ExperimentNames();

// Throws ConfigError for an unknown name.
ExperimentResult RunExperiment(std::string_view name,
                               const ExperimentOptions& options);

// Writes metrics.csv, trend.csv and summary.txt.
void WriteExperimentOutputs(const ExperimentResult& result,
                            const std::filesystem::path& out_dir);

// Shared base of the built-in experiments: 6 peers, 4 MiB slabs, 8192
// records of 4 KiB.
ScenarioConfig ExperimentBaseConfig(uint64_t seed);

}  // namespace tiermem

#endif  // TIERMEM_EXPERIMENTS_H_
