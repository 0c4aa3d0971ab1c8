#pragma once

// Small systems and trace helpers shared by the test suites.

#include <string>
#include <vector>

#include "isoforge/hv_model.hpp"

namespace isoforge::testing {

// Regular partitions P1..Pn, 64 KiB quota, one 4 KiB RAM region each at
// 0x10000 * (i + 1), a kernel region at 0xF0000 and the given slot lengths.
inline SystemSpec mini_spec(const std::vector<Tick>& slots) {
  SystemSpec spec;
  for (std::uint32_t i = 0; i < slots.size(); ++i) {
    PartitionSpec p;
    p.id = PartitionId{i};
    p.name = "P" + std::to_string(i + 1);
    p.kind = PartitionKind::Regular;
    p.memory_quota = 65536;
    spec.partitions.push_back(p);

    MemoryRegion r;
    r.id = RegionId{i};
    r.name = "p" + std::to_string(i + 1) + "_ram";
    r.base = 0x10000 * (i + 1);
    r.size = 0x1000;
    r.owner = p.id;
    spec.regions.push_back(r);

    spec.schedule.slots.push_back({p.id, slots[i]});
  }
  MemoryRegion k;
  k.id = RegionId{static_cast<std::uint32_t>(spec.regions.size())};
  k.name = "kernel";
  k.base = 0xF0000;
  k.size = 0x1000;
  k.space = AddressSpace::Kernel;
  spec.regions.push_back(k);
  return spec;
}

inline std::vector<TraceEvent> of_kind(const std::vector<TraceEvent>& trace, EventKind kind) {
  std::vector<TraceEvent> out;
  for (const auto& e : trace) {
    if (e.kind == kind) out.push_back(e);
  }
  return out;
}

}  // namespace isoforge::testing
