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

#ifndef TIERMEM_PAGE_TABLE_H_
#define TIERMEM_PAGE_TABLE_H_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "tiermem/mempool.h"
#include "tiermem/types.h"

namespace tiermem {

// Global Page Table: radix tree from page address to mempool slot. Nodes
// are 64-way and allocated on demand; the tree gains levels as larger
// addresses appear and drops them again when the upper range empties.
// Presence of an address means its freshest copy is in the mempool.
class GlobalPageTable {
 public:
  static constexpr unsigned kBits = 6;
  static constexpr unsigned kFanout = 1u << kBits;

  GlobalPageTable();
  ~GlobalPageTable();
  GlobalPageTable(GlobalPageTable&&) noexcept;
  GlobalPageTable& operator=(GlobalPageTable&&) noexcept;

  std::optional<PageId> Find(PageAddress addr) const;
  void Insert(PageAddress addr, PageId page);
  bool Erase(PageAddress addr);

  size_t size() const { return size_; }
  unsigned height() const { return height_; }
  size_t node_count() const { return nodes_; }

  // Visits entries with lo <= addr < hi in ascending order.
  void ForEachInRange(uint64_t lo, uint64_t hi,
                      const std::function<void(PageAddress, PageId)>& fn) const;

 private:
  struct Node;

  uint64_t Capacity() const;

  std::unique_ptr<Node> root_;
  unsigned height_ = 1;  // levels including the leaf level
  size_t size_ = 0;
  size_t nodes_ = 0;
};

}  // namespace tiermem

#endif  // TIERMEM_PAGE_TABLE_H_
