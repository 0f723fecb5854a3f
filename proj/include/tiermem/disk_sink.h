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

#ifndef TIERMEM_DISK_SINK_H_
#define TIERMEM_DISK_SINK_H_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "tiermem/types.h"

namespace tiermem {

// Local backup store addressed by page. Latency is charged by the caller.
class DiskSink {
 public:
  virtual ~DiskSink() = default;
  virtual uint32_t page_size() const = 0;
  virtual void Write(PageAddress addr, std::span<const std::byte> pages) = 0;
  // Unwritten pages read as zeros.
  virtual void Read(PageAddress addr, uint64_t count,
                    std::span<std::byte> out) = 0;
};

// Sparse image file, one per device; truncated on open.
class FileDiskSink : public DiskSink {
 public:
  FileDiskSink(const std::filesystem::path& path, uint32_t page_size);

  uint32_t page_size() const override { return page_size_; }
  void Write(PageAddress addr, std::span<const std::byte> pages) override;
  void Read(PageAddress addr, uint64_t count,
            std::span<std::byte> out) override;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  uint32_t page_size_;
  std::fstream file_;
  uint64_t end_ = 0;  // bytes written so far (file length)
};

class MemoryDiskSink : public DiskSink {
 public:
  explicit MemoryDiskSink(uint32_t page_size) : page_size_(page_size) {}

  uint32_t page_size() const override { return page_size_; }
  void Write(PageAddress addr, std::span<const std::byte> pages) override;
  void Read(PageAddress addr, uint64_t count,
            std::span<std::byte> out) override;

 private:
  uint32_t page_size_;
  std::unordered_map<uint64_t, std::vector<std::byte>> pages_;
};

}  // namespace tiermem

#endif  // TIERMEM_DISK_SINK_H_
