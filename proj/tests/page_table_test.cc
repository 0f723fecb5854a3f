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

#include <map>

#include "doctest.h"
#include "tiermem/page_table.h"
#include "tiermem/random.h"

namespace tiermem {
namespace {

TEST_CASE("empty table finds nothing") {
  GlobalPageTable t;
  CHECK_FALSE(t.Find(PageAddress{0}));
  CHECK_FALSE(t.Find(PageAddress{123456789}));
  CHECK_FALSE(t.Erase(PageAddress{5}));
  CHECK(t.size() == 0);
}

TEST_CASE("insert, overwrite and erase") {
  GlobalPageTable t;
  t.Insert(PageAddress{7}, 3);
  t.Insert(PageAddress{7}, 4);
  CHECK(t.size() == 1);
  CHECK(t.Find(PageAddress{7}) == 4u);
  t.Insert(PageAddress{uint64_t{1} << 40}, 9);
  CHECK(t.Find(PageAddress{uint64_t{1} << 40}) == 9u);
  CHECK(t.Erase(PageAddress{7}));
  CHECK_FALSE(t.Find(PageAddress{7}));
  CHECK(t.Erase(PageAddress{uint64_t{1} << 40}));
  CHECK(t.size() == 0);
  CHECK(t.node_count() <= 1);
}

TEST_CASE("height follows the largest key") {
  GlobalPageTable t;
  t.Insert(PageAddress{1}, 1);
  const unsigned low = t.height();
  t.Insert(PageAddress{uint64_t{1} << 30}, 2);
  CHECK(t.height() > low);
  t.Erase(PageAddress{uint64_t{1} << 30});
  CHECK(t.height() == low);
}

TEST_CASE("matches std::map under random operations") {
  Rng rng(3);
  GlobalPageTable t;
  std::map<uint64_t, PageId> oracle;
  for (int i = 0; i < 50000; ++i) {
    // Mix dense low keys with sparse far ones.
    const uint64_t key = UniformBelow(rng, 4) == 0 ? rng() >> UniformBelow(rng, 64)
                                                   : UniformBelow(rng, 5000);
    switch (UniformBelow(rng, 3)) {
      case 0:
      case 1: {
        const auto v = static_cast<PageId>(rng());
        t.Insert(PageAddress{key}, v);
        oracle[key] = v;
        break;
      }
      default:
        CHECK(t.Erase(PageAddress{key}) == (oracle.erase(key) == 1));
        break;
    }
    const uint64_t probe = UniformBelow(rng, 5000);
    auto it = oracle.find(probe);
    const auto got = t.Find(PageAddress{probe});
    REQUIRE(got.has_value() == (it != oracle.end()));
    if (got) REQUIRE(*got == it->second);
  }
  CHECK(t.size() == oracle.size());
  // Range walk visits exactly the oracle's keys in order.
  std::vector<uint64_t> seen;
  t.ForEachInRange(100, 3000, [&](PageAddress a, PageId id) {
    seen.push_back(a.value());
    CHECK(oracle.at(a.value()) == id);
  });
  std::vector<uint64_t> want;
  for (auto it = oracle.lower_bound(100); it != oracle.end() && it->first < 3000; ++it) {
    want.push_back(it->first);
  }
  CHECK(seen == want);
}

}  // namespace
}  // namespace tiermem
