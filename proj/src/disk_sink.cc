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

#include "tiermem/disk_sink.h"

#include <algorithm>
#include <cstring>

namespace tiermem {

FileDiskSink::FileDiskSink(const std::filesystem::path& path,
                           uint32_t page_size)
    : path_(path), page_size_(page_size) {
  file_.open(path_, std::ios::in | std::ios::out | std::ios::binary |
                        std::ios::trunc);
  if (!file_) {
    throw ConfigError("disk sink: cannot open " + path_.string());
  }
}

void FileDiskSink::Write(PageAddress addr, std::span<const std::byte> pages) {
  const uint64_t pos = addr.value() * page_size_;
  file_.clear();
  file_.seekp(static_cast<std::streamoff>(pos));
  file_.write(reinterpret_cast<const char*>(pages.data()),
              static_cast<std::streamsize>(pages.size()));
  if (!file_) throw DataLossError("disk sink: write failed");
  end_ = std::max(end_, pos + pages.size());
}

void FileDiskSink::Read(PageAddress addr, uint64_t count,
                        std::span<std::byte> out) {
  const uint64_t pos = addr.value() * page_size_;
  const uint64_t len = count * page_size_;
  std::fill(out.begin(), out.begin() + static_cast<ptrdiff_t>(len),
            std::byte{0});
  if (pos >= end_) return;
  const uint64_t avail = std::min(len, end_ - pos);
  file_.clear();
  file_.seekg(static_cast<std::streamoff>(pos));
  file_.read(reinterpret_cast<char*>(out.data()),
             static_cast<std::streamsize>(avail));
  if (!file_) throw DataLossError("disk sink: read failed");
}

void MemoryDiskSink::Write(PageAddress addr,
                           std::span<const std::byte> pages) {
  const uint64_t count = pages.size() / page_size_;
  for (uint64_t i = 0; i < count; ++i) {
    pages_[addr.value() + i].assign(pages.begin() + i * page_size_,
                                    pages.begin() + (i + 1) * page_size_);
  }
}

void MemoryDiskSink::Read(PageAddress addr, uint64_t count,
                          std::span<std::byte> out) {
  for (uint64_t i = 0; i < count; ++i) {
    auto dst = out.subspan(i * page_size_, page_size_);
    auto it = pages_.find(addr.value() + i);
    if (it == pages_.end()) {
      std::fill(dst.begin(), dst.end(), std::byte{0});
    } else {
      std::memcpy(dst.data(), it->second.data(), page_size_);
    }
  }
}

}  // namespace tiermem
