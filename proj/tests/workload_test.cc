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

#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "test_util.h"
#include "tiermem/workload.h"

namespace tiermem {
namespace {

using testing::Rig;
using testing::RigOptions;

std::vector<uint64_t> Histogram(const ZipfianGenerator& z, uint64_t samples,
                                uint64_t seed) {
  Rng rng(seed);
  std::vector<uint64_t> counts(z.n());
  for (uint64_t i = 0; i < samples; ++i) ++counts[z.Sample(rng)];
  return counts;
}

TEST_CASE("zipf probabilities follow the rank law and sum to one") {
  const ZipfianGenerator z(1000, 0.99);
  double sum = 0;
  for (uint64_t r = 0; r < z.n(); ++r) sum += z.Probability(r);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  for (uint64_t r : {1u, 9u, 99u}) {
    CHECK(z.Probability(0) / z.Probability(r) ==
          doctest::Approx(std::pow(r + 1.0, 0.99)).epsilon(1e-9));
  }
}

TEST_CASE("zipf samples fit the configured exponent over the top 100 ranks") {
  const ZipfianGenerator z(10000, 0.99);
  const auto counts = Histogram(z, 1000000, 42);
  // Least-squares slope of log frequency against log rank.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int k = 100;
  for (int r = 0; r < k; ++r) {
    REQUIRE(counts[r] > 0);
    const double x = std::log(r + 1.0);
    const double y = std::log(static_cast<double>(counts[r]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  CHECK(std::abs(-slope - 0.99) / 0.99 <= 0.05);
  // The ten hottest ranks individually, where sampling noise is small.
  for (int r = 0; r < 10; ++r) {
    const double expected = 1e6 * z.Probability(r);
    CHECK(std::abs(counts[r] - expected) / expected <= 0.05);
  }
}

TEST_CASE("theta zero gives uniform frequencies") {
  const ZipfianGenerator z(50, 0.0);
  const uint64_t samples = 200000;
  const auto counts = Histogram(z, samples, 5);
  const double expected = static_cast<double>(samples) / 50;
  double chi2 = 0;
  for (uint64_t c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 49 degrees of freedom; the 0.999 quantile is about 85.4.
  CHECK(chi2 < 85.4);
}

TEST_CASE("zipf rejects bad parameters") {
  CHECK_THROWS_AS(ZipfianGenerator(0, 0.99), ConfigError);
  CHECK_THROWS_AS(ZipfianGenerator(10, -1.0), ConfigError);
  CHECK_THROWS_AS(ZipfianGenerator(10, NAN), ConfigError);
}

TEST_CASE("op mixes") {
  CHECK(OpMix::Parse("etc").get_percent == 95);
  CHECK(OpMix::Parse("SYS").set_percent == 25);
  CHECK(OpMix::Parse("custom:60").set_percent == 40);
  CHECK(OpMix::Parse("50/50").get_percent == 50);
  CHECK_THROWS_AS(OpMix::Parse("60/50"), ConfigError);
  CHECK_THROWS_AS(OpMix::Parse("lots"), ConfigError);
  CHECK_THROWS_AS(OpMix::Parse("custom:101"), ConfigError);
}

TEST_CASE("the etc mix issues 95 percent gets") {
  RigOptions o;
  Rig rig(o);
  WorkloadSpec spec;
  spec.record_count = 100;
  spec.mix = OpMix::Etc();
  Workload w(spec, *rig.device);
  uint64_t gets = 0;
  const auto trace = w.Trace(10000, 3);
  for (const auto& op : trace) gets += op.get;
  CHECK(trace.size() == 10000);
  CHECK(std::abs(static_cast<double>(gets) / 10000 - 0.95) <= 0.01);
}

TEST_CASE("traces are reproducible per seed and spread over clients") {
  Rig rig;
  WorkloadSpec spec;
  spec.record_count = 200;
  spec.clients = 4;
  Workload w(spec, *rig.device);
  const auto a = w.Trace(1000, 9);
  const auto b = w.Trace(1000, 9);
  const auto c = w.Trace(1000, 10);
  auto same = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (size_t i = 0; i < x.size(); ++i) {
      if (x[i].client != y[i].client || x[i].get != y[i].get || x[i].key != y[i].key) {
        return false;
      }
    }
    return true;
  };
  CHECK(same(a, b));
  CHECK_FALSE(same(a, c));
  std::map<uint32_t, int> per_client;
  for (const auto& op : a) ++per_client[op.client];
  CHECK(per_client.size() == 4);
  for (const auto& [client, n] : per_client) CHECK(n == 250);
}

TEST_CASE("run checks every get against the written versions") {
  RigOptions o;
  o.pool_pages = 32;
  o.space_pages = 4096;
  Rig rig(o);
  WorkloadSpec spec;
  spec.record_count = 300;
  spec.query_count = 5000;
  spec.mix = OpMix::Sys();
  spec.window_ops = 1000;
  Workload w(spec, *rig.device);
  w.Populate([&](uint64_t) { rig.device->Pump(); });
  const MetricsReport r = w.Run([&](uint64_t) { rig.device->Pump(); });
  CHECK(r.ops == 5000);
  CHECK(r.gets + r.sets == 5000);
  CHECK(r.mismatches == 0);
  CHECK(r.windows.size() == 5);
  CHECK(r.remote_hits > 0);
  CHECK(r.local_hits + r.remote_hits + r.disk_hits == r.read_pages);
  CHECK(r.throughput > 0);
  CHECK(r.p99_latency >= static_cast<uint64_t>(r.mean_latency));
}

TEST_CASE("multi-page values map to disjoint page ranges") {
  RigOptions o;
  o.space_pages = 4096;
  Rig rig(o);
  WorkloadSpec spec;
  spec.record_count = 50;
  spec.value_bytes = 3 * 4096 + 1;
  spec.query_count = 2000;
  Workload w(spec, *rig.device);
  CHECK(spec.pages_per_value(4096) == 4);
  CHECK(spec.KeyAddress(3, 4096).value() == 12);
  w.Populate();
  CHECK(w.Run().mismatches == 0);
}

TEST_CASE("populate twice leaves the same state") {
  Rig a;
  Rig b;
  WorkloadSpec spec;
  spec.record_count = 40;
  Workload wa(spec, *a.device);
  Workload wb(spec, *b.device);
  wa.Populate();
  wb.Populate();
  wb.Populate();
  for (uint64_t p = 0; p < 40; ++p) CHECK(a.Read(p) == b.Read(p));
  CHECK(wb.Run(500, 1, {}).mismatches == 0);
}

TEST_CASE("a keyspace larger than the device is a range error") {
  Rig rig;
  WorkloadSpec spec;
  spec.record_count = rig.device->space_pages() + 1;
  CHECK_THROWS_AS(Workload(spec, *rig.device), RangeError);
  spec.record_count = 10;
  spec.clients = 0;
  CHECK_THROWS_AS(Workload(spec, *rig.device), ConfigError);
}

TEST_CASE("percentile uses the nearest rank") {
  CHECK(Percentile({}, 0.99) == 0);
  CHECK(Percentile({5}, 0.99) == 5);
  std::vector<uint64_t> v;
  for (uint64_t i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(Percentile(v, 0.99) == 99);
  CHECK(Percentile(v, 1.0) == 100);
  CHECK(Percentile(v, 0.5) == 50);
}

TEST_CASE("fill value depends on key and version") {
  std::vector<std::byte> a(64), b(64), c(64);
  FillValue(1, 0, a);
  FillValue(1, 1, b);
  FillValue(1, 0, c);
  CHECK(a != b);
  CHECK(a == c);
}

}  // namespace
}  // namespace tiermem
