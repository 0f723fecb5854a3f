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

#include "tiermem/latency.h"

#include <algorithm>

namespace tiermem {

void LatencyModel::Validate() const {
  const SimTime fields[] = {copy_per_page, index_insert, enqueue,
                            net_write,     net_read,     connect,
                            map_block,     disk_write,   disk_read};
  for (SimTime f : fields) {
    if (f == 0) throw ConfigError("latency: all costs must be positive");
  }
  if (disk_read <= net_read) {
    throw ConfigError("latency: disk_read must exceed net_read");
  }
  if (disk_write <= net_write) {
    throw ConfigError("latency: disk_write must exceed net_write");
  }
}

std::string_view ToString(Channel channel) {
  switch (channel) {
    case Channel::kForeground: return "foreground";
    case Channel::kDrainer: return "drainer";
    case Channel::kDisk: return "disk";
    case Channel::kMigration: return "migration";
  }
  return "?";
}

std::string_view ToString(ChargeKind kind) {
  switch (kind) {
    case ChargeKind::kCopy: return "copy";
    case ChargeKind::kIndexInsert: return "index_insert";
    case ChargeKind::kEnqueue: return "enqueue";
    case ChargeKind::kStall: return "stall";
    case ChargeKind::kNetWrite: return "net_write";
    case ChargeKind::kNetRead: return "net_read";
    case ChargeKind::kConnect: return "connect";
    case ChargeKind::kMapBlock: return "map_block";
    case ChargeKind::kDiskWrite: return "disk_write";
    case ChargeKind::kDiskRead: return "disk_read";
  }
  return "?";
}

void LatencyLedger::Charge(ChargeKind kind, SimTime amount) {
  const auto c = static_cast<size_t>(current_);
  const auto k = static_cast<size_t>(kind);
  if (tracing_) {
    trace_.push_back(
        ChargeRecord{op_id_, op_kind_, current_, kind, clocks_[c], amount});
  }
  clocks_[c] += amount;
  totals_[k] += amount;
  counts_[k] += 1;
  channel_totals_[c][k] += amount;
  if (op_kind_ == OpKind::kWrite && current_ == Channel::kForeground &&
      IsIoCharge(kind)) {
    ++violations_;
  }
}

void LatencyLedger::AdvanceTo(Channel channel, SimTime t) {
  auto& clock = clocks_[static_cast<size_t>(channel)];
  clock = std::max(clock, t);
}

uint64_t LatencyLedger::BeginOp(OpKind kind) {
  op_id_ = next_op_id_++;
  op_kind_ = kind;
  return op_id_;
}

void LatencyLedger::EndOp() {
  op_id_ = 0;
  op_kind_ = OpKind::kNone;
}

}  // namespace tiermem
