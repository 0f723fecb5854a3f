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

#include "tiermem/page_table.h"

#include <bit>

namespace tiermem {

struct GlobalPageTable::Node {
  std::array<std::unique_ptr<Node>, kFanout> children;  // inner levels
  std::array<PageId, kFanout> values{};                 // leaf level
  uint64_t present = 0;  // occupancy bitmap of children or values
};

GlobalPageTable::GlobalPageTable() : root_(std::make_unique<Node>()) {
  nodes_ = 1;
}
GlobalPageTable::~GlobalPageTable() = default;
GlobalPageTable::GlobalPageTable(GlobalPageTable&&) noexcept = default;
GlobalPageTable& GlobalPageTable::operator=(GlobalPageTable&&) noexcept =
    default;

uint64_t GlobalPageTable::Capacity() const {
  const unsigned bits = kBits * height_;
  return bits >= 64 ? UINT64_MAX : (uint64_t{1} << bits);
}

std::optional<PageId> GlobalPageTable::Find(PageAddress addr) const {
  const uint64_t key = addr.value();
  if (key >= Capacity()) return std::nullopt;
  const Node* node = root_.get();
  for (unsigned level = height_; level > 1; --level) {
    const unsigned idx = (key >> (kBits * (level - 1))) & (kFanout - 1);
    node = node->children[idx].get();
    if (node == nullptr) return std::nullopt;
  }
  const unsigned idx = key & (kFanout - 1);
  if ((node->present >> idx & 1) == 0) return std::nullopt;
  return node->values[idx];
}

void GlobalPageTable::Insert(PageAddress addr, PageId page) {
  const uint64_t key = addr.value();
  while (key >= Capacity()) {
    auto root = std::make_unique<Node>();
    if (root_->present != 0) {
      root->children[0] = std::move(root_);
      root->present = 1;
    } else {
      --nodes_;
    }
    root_ = std::move(root);
    ++height_;
    ++nodes_;
  }
  Node* node = root_.get();
  for (unsigned level = height_; level > 1; --level) {
    const unsigned idx = (key >> (kBits * (level - 1))) & (kFanout - 1);
    auto& child = node->children[idx];
    if (!child) {
      child = std::make_unique<Node>();
      node->present |= uint64_t{1} << idx;
      ++nodes_;
    }
    node = child.get();
  }
  const unsigned idx = key & (kFanout - 1);
  if ((node->present >> idx & 1) == 0) {
    node->present |= uint64_t{1} << idx;
    ++size_;
  }
  node->values[idx] = page;
}

bool GlobalPageTable::Erase(PageAddress addr) {
  const uint64_t key = addr.value();
  if (key >= Capacity()) return false;
  // Record the path so empty nodes can be pruned bottom-up.
  std::array<Node*, 12> path{};
  Node* node = root_.get();
  for (unsigned level = height_; level > 1; --level) {
    path[level - 1] = node;
    const unsigned idx = (key >> (kBits * (level - 1))) & (kFanout - 1);
    node = node->children[idx].get();
    if (node == nullptr) return false;
  }
  const unsigned leaf_idx = key & (kFanout - 1);
  if ((node->present >> leaf_idx & 1) == 0) return false;
  node->present &= ~(uint64_t{1} << leaf_idx);
  --size_;
  for (unsigned level = 2; level <= height_ && node->present == 0; ++level) {
    Node* parent = path[level - 1];
    const unsigned idx = (key >> (kBits * (level - 1))) & (kFanout - 1);
    parent->children[idx].reset();
    parent->present &= ~(uint64_t{1} << idx);
    --nodes_;
    node = parent;
  }
  // Drop levels whose only populated child is the lowest one.
  while (height_ > 1 && root_->present == 1) {
    auto child = std::move(root_->children[0]);
    root_ = std::move(child);
    --height_;
    --nodes_;
  }
  if (height_ > 1 && root_->present == 0) {
    root_ = std::make_unique<Node>();
    nodes_ = 1;
    height_ = 1;
  }
  return true;
}

namespace {

void Visit(const auto& node, unsigned level, uint64_t base, uint64_t lo,
           uint64_t hi, const std::function<void(PageAddress, PageId)>& fn,
           unsigned bits) {
  const uint64_t span = level > 1 ? uint64_t{1} << (bits * (level - 1)) : 1;
  uint64_t mask = node.present;
  while (mask != 0) {
    const unsigned idx = static_cast<unsigned>(std::countr_zero(mask));
    mask &= mask - 1;
    const uint64_t start = base + idx * span;
    if (start >= hi) break;
    if (start + span <= lo) continue;
    if (level == 1) {
      fn(PageAddress{start}, node.values[idx]);
    } else {
      Visit(*node.children[idx], level - 1, start, lo, hi, fn, bits);
    }
  }
}

}  // namespace

void GlobalPageTable::ForEachInRange(
    uint64_t lo, uint64_t hi,
    const std::function<void(PageAddress, PageId)>& fn) const {
  Visit(*root_, height_, 0, lo, hi, fn, kBits);
}

}  // namespace tiermem
