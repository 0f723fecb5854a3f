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

#ifndef TIERMEM_WORKLOAD_H_
#define TIERMEM_WORKLOAD_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiermem/random.h"
#include "tiermem/sender_engine.h"
#include "tiermem/types.h"

namespace tiermem {

// Ranks 0..n-1 with P(r) proportional to 1/(r+1)^theta, sampled by binary
// search over the exact cumulative table. theta = 0 is uniform.
class ZipfianGenerator {
 public:
  ZipfianGenerator(uint64_t n, double theta);

  uint64_t n() const { return n_; }
  double theta() const { return theta_; }
  uint64_t Sample(Rng& rng) const;
  // Exact probability of rank r (0-based).
  double Probability(uint64_t r) const;

 private:
  uint64_t n_;
  double theta_;
  std::vector<double> cdf_;
};

struct OpMix {
  uint32_t get_percent = 95;
  uint32_t set_percent = 5;

  static OpMix Etc() { return {95, 5}; }
  static OpMix Sys() { return {75, 25}; }
  // "etc", "sys", or "custom:<get>" / "<get>/<set>".
  static OpMix Parse(std::string_view text);
};

struct WorkloadSpec {
  uint64_t record_count = 10000;
  uint64_t query_count = 100000;
  uint64_t value_bytes = 4096;
  double theta = 0.99;
  OpMix mix = OpMix::Etc();
  uint32_t clients = 1;
  uint64_t seed = 1;
  uint64_t window_ops = 10000;  // ops per metrics window

  void Validate() const;
  uint64_t pages_per_value(uint32_t page_size) const {
    return CeilDiv(value_bytes, page_size);
  }
  // Dense mapping: key k occupies pages [k*ppv, (k+1)*ppv).
  PageAddress KeyAddress(uint64_t key, uint32_t page_size) const {
    return PageAddress{key * pages_per_value(page_size)};
  }
};

// Content of `key` at `version`, a pure function of both. Used by the
// workload and by its shadow oracle.
void FillValue(uint64_t key, uint64_t version, std::span<std::byte> out);

uint64_t Percentile(std::vector<uint64_t> samples, double p);

struct WindowMetrics {
  uint64_t index = 0;
  uint64_t ops = 0;
  SimTime start = 0;
  SimTime end = 0;
  double throughput = 0;  // ops per simulated second (1 unit = 1us)
  double mean_latency = 0;
  uint64_t p99_latency = 0;
  double mean_write_latency = 0;
  double mean_read_latency = 0;
  uint64_t local_hits = 0;
  uint64_t remote_hits = 0;
  uint64_t disk_hits = 0;
};

struct MetricsReport {
  uint64_t ops = 0;
  uint64_t gets = 0;
  uint64_t sets = 0;
  SimTime completion_time = 0;
  double throughput = 0;
  double mean_latency = 0;
  uint64_t p99_latency = 0;
  double mean_write_latency = 0;
  double mean_read_latency = 0;
  // Page-granular; local includes never-written pages served as zeros.
  uint64_t local_hits = 0;
  uint64_t remote_hits = 0;
  uint64_t disk_hits = 0;
  uint64_t read_pages = 0;
  uint64_t migrations = 0;
  uint64_t evictions = 0;
  uint64_t bytes_moved = 0;
  uint64_t mismatches = 0;  // GETs that disagreed with the shadow oracle
  std::vector<WindowMetrics> windows;

  double local_hit_ratio() const {
    return read_pages == 0 ? 0.0
                           : static_cast<double>(local_hits) / read_pages;
  }
};

// Drives a Device with a key-value workload and checks every GET against a
// shadow copy of the expected versions.
class Workload {
 public:
  Workload(WorkloadSpec spec, Device& device);

  const WorkloadSpec& spec() const { return spec_; }

  // Called after each client operation; the scenario uses it to advance the
  // drainer, migrations and pressure schedules.
  using Hook = std::function<void(uint64_t op_index)>;

  // Writes every record at version 0.
  void Populate(const Hook& after_write = {});

  MetricsReport Run(const Hook& after_op = {}) {
    return Run(spec_.query_count, spec_.seed, after_op);
  }
  // `queries` operations from the streams of `seed`. Versions carry over
  // between runs, so phases of one experiment share the oracle.
  MetricsReport Run(uint64_t queries, uint64_t seed, const Hook& after_op);

  // Keys touched by the generated trace, for tests: (client, is_get, key).
  struct TraceOp {
    uint32_t client;
    bool get;
    uint64_t key;
  };
  std::vector<TraceOp> Trace(uint64_t queries, uint64_t seed) const;

 private:
  void WriteValue(uint64_t key, uint64_t version);
  bool ReadAndCheck(uint64_t key);

  WorkloadSpec spec_;
  Device& device_;
  ZipfianGenerator zipf_;
  std::vector<uint64_t> versions_;
  std::vector<std::byte> buffer_;
  std::vector<std::byte> expected_;
};

}  // namespace tiermem

#endif  // TIERMEM_WORKLOAD_H_
