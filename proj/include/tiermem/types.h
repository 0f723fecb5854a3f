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

#ifndef TIERMEM_TYPES_H_
#define TIERMEM_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tiermem {

// Strongly typed integral identifier. `Tag` only distinguishes the types.
template <typename Tag, typename Rep = uint64_t>
class Id {
 public:
  using rep_type = Rep;

  constexpr Id() = default;
  constexpr explicit Id(Rep value) : value_(value) {}

  constexpr Rep value() const { return value_; }

  friend constexpr auto operator<=>(const Id&, const Id&) = default;

  friend std::ostream& operator<<(std::ostream& os, const Id& id) {
    return os << id.value_;
  }

 private:
  Rep value_ = 0;
};

struct PageAddressTag {};
struct PeerIdTag {};
struct BlockIdTag {};
struct SlabIdTag {};
struct SenderIdTag {};

// Page index in the linear global address space of one device.
using PageAddress = Id<PageAddressTag>;
using PeerId = Id<PeerIdTag, uint32_t>;
using BlockId = Id<BlockIdTag>;
using SlabId = Id<SlabIdTag>;
using SenderId = Id<SenderIdTag, uint32_t>;

// Virtual clock value in abstract time units (1 unit is reported as 1us).
using SimTime = uint64_t;

inline constexpr uint32_t kDefaultPageSize = 4096;

// Base of every error raised by the engine. `kind()` names the family so
// callers that do not care about the concrete type can still branch on it.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    kConfig,
    kTopology,
    kTransport,
    kMapping,
    kRange,
    kCapacity,
    kPoolExhausted,
    kDataLoss,
    kProtocol,
  };

  Error(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

#define TIERMEM_DEFINE_ERROR(Name, K)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(Kind::K, what) {}    \
  }

TIERMEM_DEFINE_ERROR(ConfigError, kConfig);
TIERMEM_DEFINE_ERROR(TopologyError, kTopology);
TIERMEM_DEFINE_ERROR(TransportError, kTransport);
TIERMEM_DEFINE_ERROR(MappingError, kMapping);
TIERMEM_DEFINE_ERROR(RangeError, kRange);
TIERMEM_DEFINE_ERROR(CapacityError, kCapacity);
TIERMEM_DEFINE_ERROR(PoolExhaustedError, kPoolExhausted);
TIERMEM_DEFINE_ERROR(DataLossError, kDataLoss);
TIERMEM_DEFINE_ERROR(ProtocolError, kProtocol);

#undef TIERMEM_DEFINE_ERROR

inline constexpr uint64_t CeilDiv(uint64_t a, uint64_t b) {
  return (a + b - 1) / b;
}

}  // namespace tiermem

template <typename Tag, typename Rep>
struct std::hash<tiermem::Id<Tag, Rep>> {
  size_t operator()(const tiermem::Id<Tag, Rep>& id) const noexcept {
    return std::hash<Rep>{}(id.value());
  }
};

#endif  // TIERMEM_TYPES_H_
