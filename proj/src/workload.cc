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

#include "tiermem/workload.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace tiermem {
namespace {

uint64_t SplitMix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t ClientSeed(uint64_t seed, uint32_t client) {
  uint64_t s = seed ^ (uint64_t{client} << 32);
  return SplitMix64(s);
}

}  // namespace

ZipfianGenerator::ZipfianGenerator(uint64_t n, double theta)
    : n_(n), theta_(theta) {
  if (n == 0) throw ConfigError("zipf: need at least one key");
  if (!(theta >= 0.0) || !std::isfinite(theta)) {
    throw ConfigError("zipf: theta must be >= 0");
  }
  cdf_.resize(n);
  double sum = 0;
  for (uint64_t r = 0; r < n; ++r) {
    sum += std::pow(static_cast<double>(r + 1), -theta);
    cdf_[r] = sum;
  }
  for (double& c : cdf_) c /= sum;
  cdf_.back() = 1.0;
}

uint64_t ZipfianGenerator::Sample(Rng& rng) const {
  const double u = UniformDouble(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<uint64_t>(static_cast<uint64_t>(it - cdf_.begin()), n_ - 1);
}

double ZipfianGenerator::Probability(uint64_t r) const {
  if (r >= n_) return 0.0;
  return r == 0 ? cdf_[0] : cdf_[r] - cdf_[r - 1];
}

OpMix OpMix::Parse(std::string_view text) {
  if (text == "etc" || text == "ETC") return Etc();
  if (text == "sys" || text == "SYS") return Sys();
  std::string body(text);
  if (body.rfind("custom:", 0) == 0) body = body.substr(7);
  const auto slash = body.find('/');
  try {
    size_t used = 0;
    const int get = std::stoi(body.substr(0, slash), &used);
    if (slash == std::string::npos && used != body.size()) throw 0;
    const int set =
        slash == std::string::npos ? 100 - get : std::stoi(body.substr(slash + 1));
    if (get < 0 || set < 0 || get + set != 100) throw 0;
    return {static_cast<uint32_t>(get), static_cast<uint32_t>(set)};
  } catch (...) {
    throw ConfigError("workload: bad mix '" + std::string(text) +
                      "' (expected etc, sys, or get/set percentages summing "
                      "to 100)");
  }
}

void WorkloadSpec::Validate() const {
  if (record_count == 0) throw ConfigError("workload: records must be > 0");
  if (value_bytes == 0) throw ConfigError("workload: value_bytes must be > 0");
  if (mix.get_percent + mix.set_percent != 100) {
    throw ConfigError("workload: mix percentages must sum to 100");
  }
  if (clients == 0) throw ConfigError("workload: clients must be > 0");
  if (window_ops == 0) throw ConfigError("workload: window_ops must be > 0");
}

void FillValue(uint64_t key, uint64_t version, std::span<std::byte> out) {
  uint64_t state = key * 0x100000001B3ULL ^ (version + 1) * 0xC2B2AE3D27D4EB4FULL;
  size_t i = 0;
  while (i < out.size()) {
    const uint64_t word = SplitMix64(state);
    const size_t n = std::min<size_t>(8, out.size() - i);
    std::memcpy(out.data() + i, &word, n);
    i += n;
  }
}

uint64_t Percentile(std::vector<uint64_t> samples, double p) {
  if (samples.empty()) return 0;
  auto rank = static_cast<size_t>(
      std::ceil(p * static_cast<double>(samples.size())));
  rank = std::clamp<size_t>(rank, 1, samples.size()) - 1;
  std::nth_element(samples.begin(), samples.begin() + rank, samples.end());
  return samples[rank];
}

Workload::Workload(WorkloadSpec spec, Device& device)
    : spec_(spec), device_(device), zipf_(spec.record_count, spec.theta) {
  spec_.Validate();
  const uint32_t ps = device_.page_size();
  const uint64_t pages = spec_.pages_per_value(ps);
  if (spec_.record_count > device_.space_pages() / pages) {
    throw RangeError("workload: " + std::to_string(spec_.record_count) +
                     " records of " + std::to_string(spec_.value_bytes) +
                     " bytes exceed the device address space");
  }
  versions_.assign(spec_.record_count, 0);
  buffer_.resize(pages * ps);
  expected_.resize(pages * ps);
}

void Workload::WriteValue(uint64_t key, uint64_t version) {
  const uint32_t ps = device_.page_size();
  std::fill(buffer_.begin(), buffer_.end(), std::byte{0});
  FillValue(key, version, std::span(buffer_).first(spec_.value_bytes));
  const uint64_t chunk = device_.config().block_io_bytes;
  const uint64_t base = spec_.KeyAddress(key, ps).value();
  for (uint64_t off = 0; off < buffer_.size(); off += chunk) {
    const uint64_t n = std::min<uint64_t>(chunk, buffer_.size() - off);
    device_.Write(PageAddress{base + off / ps},
                  std::span<const std::byte>(buffer_).subspan(off, n));
  }
}

bool Workload::ReadAndCheck(uint64_t key) {
  const uint32_t ps = device_.page_size();
  device_.Read(spec_.KeyAddress(key, ps), buffer_.size() / ps, buffer_);
  std::fill(expected_.begin(), expected_.end(), std::byte{0});
  FillValue(key, versions_[key], std::span(expected_).first(spec_.value_bytes));
  return buffer_ == expected_;
}

void Workload::Populate(const Hook& after_write) {
  for (uint64_t k = 0; k < spec_.record_count; ++k) {
    versions_[k] = 0;
    WriteValue(k, 0);
    if (after_write) after_write(k);
  }
}

std::vector<Workload::TraceOp> Workload::Trace(uint64_t queries,
                                               uint64_t seed) const {
  std::vector<Rng> rngs;
  for (uint32_t c = 0; c < spec_.clients; ++c) {
    rngs.emplace_back(ClientSeed(seed, c));
  }
  std::vector<TraceOp> out;
  out.reserve(queries);
  for (uint64_t i = 0; i < queries; ++i) {
    const auto c = static_cast<uint32_t>(i % spec_.clients);
    const bool get = UniformBelow(rngs[c], 100) < spec_.mix.get_percent;
    out.push_back({c, get, zipf_.Sample(rngs[c])});
  }
  return out;
}

MetricsReport Workload::Run(uint64_t queries, uint64_t seed,
                           const Hook& after_op) {
  LatencyLedger& ledger = device_.ledger();
  const DeviceStats before = device_.stats();
  std::vector<Rng> rngs;
  for (uint32_t c = 0; c < spec_.clients; ++c) {
    rngs.emplace_back(ClientSeed(seed, c));
  }

  MetricsReport report;
  std::vector<uint64_t> latencies;
  latencies.reserve(queries);
  uint64_t write_sum = 0, read_sum = 0;
  const SimTime start = ledger.now(Channel::kForeground);

  WindowMetrics window;
  std::vector<uint64_t> window_lat;
  uint64_t w_write_sum = 0, w_read_sum = 0, w_sets = 0;
  DeviceStats window_stats = before;
  window.start = start;
  auto close_window = [&] {
    const DeviceStats& now = device_.stats();
    window.end = ledger.now(Channel::kForeground);
    window.ops = window_lat.size();
    uint64_t sum = 0;
    for (uint64_t l : window_lat) sum += l;
    const SimTime span = window.end - window.start;
    window.throughput = span == 0 ? 0.0 : window.ops * 1e6 / span;
    window.mean_latency =
        window.ops == 0 ? 0.0 : static_cast<double>(sum) / window.ops;
    window.p99_latency = Percentile(window_lat, 0.99);
    const uint64_t w_gets = window.ops - w_sets;
    window.mean_write_latency =
        w_sets == 0 ? 0.0 : static_cast<double>(w_write_sum) / w_sets;
    window.mean_read_latency =
        w_gets == 0 ? 0.0 : static_cast<double>(w_read_sum) / w_gets;
    window.local_hits = (now.local_hits + now.zero_fills) -
                        (window_stats.local_hits + window_stats.zero_fills);
    window.remote_hits = now.remote_hits - window_stats.remote_hits;
    window.disk_hits = now.disk_hits - window_stats.disk_hits;
    report.windows.push_back(window);
    const uint64_t next_index = window.index + 1;
    window = WindowMetrics{};
    window.index = next_index;
    window.start = ledger.now(Channel::kForeground);
    window_lat.clear();
    w_write_sum = w_read_sum = w_sets = 0;
    window_stats = now;
  };

  for (uint64_t i = 0; i < queries; ++i) {
    const auto c = static_cast<uint32_t>(i % spec_.clients);
    const bool get = UniformBelow(rngs[c], 100) < spec_.mix.get_percent;
    const uint64_t key = zipf_.Sample(rngs[c]);
    const SimTime t0 = ledger.now(Channel::kForeground);
    if (get) {
      if (!ReadAndCheck(key)) ++report.mismatches;
      ++report.gets;
    } else {
      WriteValue(key, ++versions_[key]);
      ++report.sets;
      ++w_sets;
    }
    const SimTime lat = ledger.now(Channel::kForeground) - t0;
    latencies.push_back(lat);
    window_lat.push_back(lat);
    (get ? read_sum : write_sum) += lat;
    (get ? w_read_sum : w_write_sum) += lat;
    if (after_op) after_op(i);
    if (window_lat.size() == spec_.window_ops) close_window();
  }
  if (!window_lat.empty()) close_window();

  const DeviceStats& after = device_.stats();
  report.ops = queries;
  report.completion_time = ledger.now(Channel::kForeground) - start;
  report.throughput = report.completion_time == 0
                          ? 0.0
                          : report.ops * 1e6 / report.completion_time;
  uint64_t sum = 0;
  for (uint64_t l : latencies) sum += l;
  report.mean_latency =
      report.ops == 0 ? 0.0 : static_cast<double>(sum) / report.ops;
  report.p99_latency = Percentile(std::move(latencies), 0.99);
  report.mean_write_latency =
      report.sets == 0 ? 0.0 : static_cast<double>(write_sum) / report.sets;
  report.mean_read_latency =
      report.gets == 0 ? 0.0 : static_cast<double>(read_sum) / report.gets;
  report.local_hits = (after.local_hits + after.zero_fills) -
                      (before.local_hits + before.zero_fills);
  report.remote_hits = after.remote_hits - before.remote_hits;
  report.disk_hits = after.disk_hits - before.disk_hits;
  report.read_pages = report.local_hits + report.remote_hits + report.disk_hits;
  return report;
}

}  // namespace tiermem
