#include "isoforge/hv_model.hpp"

#include <algorithm>
#include <numeric>

#include "isoforge/errors.hpp"

namespace isoforge {

std::string_view to_string(PartitionKind k) {
  switch (k) {
    case PartitionKind::TestPv: return "test-pv";
    case PartitionKind::TestHwfv: return "test-hwfv";
    case PartitionKind::Regular: return "regular";
  }
  return "?";
}

std::optional<PartitionKind> parse_partition_kind(std::string_view text) {
  for (auto k : {PartitionKind::TestPv, PartitionKind::TestHwfv, PartitionKind::Regular}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(AddressSpace s) { return s == AddressSpace::User ? "user" : "kernel"; }
std::string_view to_string(RegionKind k) { return k == RegionKind::Ram ? "ram" : "mmio"; }

bool MemoryRegion::has_grant(PartitionId p, Access a) const {
  return std::any_of(grants.begin(), grants.end(), [&](const Grant& g) { return g.partition == p && g.access == a; });
}

Tick CyclicSchedule::major_frame() const {
  return std::accumulate(slots.begin(), slots.end(), Tick{0}, [](Tick acc, const Slot& s) { return acc + s.length; });
}

std::size_t CyclicSchedule::slot_at(Tick pos) const {
  Tick start = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (pos < start + slots[i].length) return i;
    start += slots[i].length;
  }
  return slots.size() - 1;
}

Tick CyclicSchedule::slot_start(std::size_t index) const {
  Tick start = 0;
  for (std::size_t i = 0; i < index; ++i) start += slots[i].length;
  return start;
}

PartitionId CyclicSchedule::partition_at(Tick tick) const { return slots[slot_at(tick % major_frame())].partition; }

Tick CyclicSchedule::ticks_for(PartitionId p) const {
  Tick total = 0;
  for (const auto& s : slots) {
    if (s.partition == p) total += s.length;
  }
  return total;
}

bool SystemSpec::enforces(Mechanism m) const {
  switch (m) {
    case Mechanism::M1: return !has_defect(DefectId::M1W) && !has_defect(DefectId::M1R);
    case Mechanism::M2: return !has_defect(DefectId::M2);
    case Mechanism::M3: return !has_defect(DefectId::M3);
    case Mechanism::M4: return !has_defect(DefectId::M4);
    case Mechanism::T1: return !has_defect(DefectId::T1);
    case Mechanism::T2: return !has_defect(DefectId::T2);
    case Mechanism::T3: return !has_defect(DefectId::T3);
    case Mechanism::T4: return !has_defect(DefectId::T4);
  }
  return true;
}

std::optional<PartitionId> SystemSpec::find_partition(std::string_view name) const {
  for (const auto& p : partitions) {
    if (p.name == name) return p.id;
  }
  return std::nullopt;
}

std::optional<RegionId> SystemSpec::find_region(std::string_view name) const {
  for (const auto& r : regions) {
    if (r.name == name) return r.id;
  }
  return std::nullopt;
}

const MemoryRegion* SystemSpec::region_containing(Address a) const {
  for (const auto& r : regions) {
    if (r.contains(a)) return &r;
  }
  return nullptr;
}

std::uint64_t SystemSpec::static_bytes(PartitionId p) const {
  std::uint64_t total = 0;
  for (const auto& r : regions) {
    if (r.owner == p) total += r.size;
  }
  return total;
}

bool SystemSpec::channel_allowed(PartitionId from, PartitionId to) const {
  return std::find(channels.begin(), channels.end(), std::make_pair(from, to)) != channels.end();
}

void validate(const SystemSpec& spec) {
  if (spec.partitions.empty()) throw InvalidSpec("no partitions");
  for (std::size_t i = 0; i < spec.partitions.size(); ++i) {
    const auto& p = spec.partitions[i];
    if (p.id.value != i) throw InvalidSpec("partition ids must be dense and unique (" + p.name + ")");
    if (p.name.empty()) throw InvalidSpec("partition " + std::to_string(i) + " has no name");
    for (std::size_t j = 0; j < i; ++j) {
      if (spec.partitions[j].name == p.name) throw InvalidSpec("duplicate partition name " + p.name);
    }
  }

  for (std::size_t i = 0; i < spec.regions.size(); ++i) {
    const auto& r = spec.regions[i];
    if (r.id.value != i) throw InvalidSpec("region ids must be dense and unique (" + r.name + ")");
    if (r.size == 0) throw InvalidSpec("region " + r.name + " is empty");
    if (r.base + r.size < r.base) throw InvalidSpec("region " + r.name + " wraps the address space");
    if (r.space == AddressSpace::Kernel && r.owner) {
      throw InvalidSpec("kernel-space region " + r.name + " must be owned by the hypervisor");
    }
    if (r.space == AddressSpace::User && !r.owner) {
      throw InvalidSpec("user-space region " + r.name + " has no owning partition");
    }
    if (r.owner && !spec.valid_partition(r.owner->value)) {
      throw InvalidSpec("region " + r.name + " owned by unknown partition");
    }
    for (const auto& g : r.grants) {
      if (!spec.valid_partition(g.partition.value)) throw InvalidSpec("region " + r.name + " grants unknown partition");
    }
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = spec.regions[j];
      if (r.base < o.base + o.size && o.base < r.base + r.size) {
        throw InvalidSpec("regions " + o.name + " and " + r.name + " overlap");
      }
    }
  }

  for (const auto& p : spec.partitions) {
    if (p.memory_quota < spec.static_bytes(p.id)) {
      throw InvalidSpec("partition " + p.name + " quota is below its statically owned memory");
    }
  }

  if (spec.schedule.slots.empty()) throw InvalidSpec("empty schedule");
  for (const auto& s : spec.schedule.slots) {
    if (s.length == 0) throw InvalidSpec("schedule slot with zero length");
    if (!spec.valid_partition(s.partition.value)) throw InvalidSpec("schedule references unknown partition");
  }

  for (const auto& [from, to] : spec.channels) {
    if (!spec.valid_partition(from.value) || !spec.valid_partition(to.value)) {
      throw InvalidSpec("channel references unknown partition");
    }
    if (from == to) throw InvalidSpec("self-channel on " + spec.partition(from).name);
  }

  const Tick frame = spec.schedule.major_frame();
  for (const auto& w : spec.device.windows) {
    if (!spec.valid_partition(w.partition.value)) throw InvalidSpec("device window for unknown partition");
    if (w.length == 0 || w.offset + w.length > frame) throw InvalidSpec("device window outside the major frame");
  }

  for (const auto& [id, bound] : spec.wcet) {
    if (bound == 0) throw InvalidSpec("zero WCET bound for hypercall " + std::to_string(id));
  }
}

std::vector<DeviceWindow> windows_from_schedule(const CyclicSchedule& schedule) {
  std::vector<DeviceWindow> out;
  Tick start = 0;
  for (const auto& s : schedule.slots) {
    out.push_back({s.partition, start, s.length});
    start += s.length;
  }
  return out;
}

bool SystemState::may_access(const MemoryRegion& region, PartitionId actor, Access kind) const {
  if (region.owner == actor || region.has_grant(actor, kind)) return true;
  auto it = mapped_grants.find(region.id);
  if (it == mapped_grants.end()) return false;
  return std::find(it->second.begin(), it->second.end(), Grant{actor, kind}) != it->second.end();
}

const TraceEvent& SystemState::emit(EventKind kind, PartitionId actor, EventPayload payload) {
  trace.push_back(TraceEvent{next_seq++, tick, kind, actor, std::move(payload)});
  return trace.back();
}

SystemState boot(const SystemSpec& spec) {
  validate(spec);
  SystemState state;
  state.spec = spec;
  state.active = spec.schedule.slots.front().partition;
  for (const auto& p : spec.partitions) {
    state.saved_contexts[p.id] = RegisterContext{};
    state.alloc_used[p.id] = spec.static_bytes(p.id);
  }
  state.emit(EventKind::SchedSwitch, state.active, SwitchInfo{});
  return state;
}

std::vector<TraceEvent> context_switch(SystemState& state, PartitionId from, PartitionId to, Tick refused_overrun) {
  if (from == to) return {};
  state.saved_contexts[from] = state.live_regs;
  if (state.spec.enforces(Mechanism::T1)) {
    state.live_regs = state.saved_contexts[to];
  }
  state.active = to;
  std::vector<TraceEvent> out;
  out.push_back(state.emit(EventKind::SchedSwitch, to, SwitchInfo{from, refused_overrun}));
  out.push_back(state.emit(EventKind::RegSnapshot, to, RegisterInfo{from, state.live_regs}));
  return out;
}

std::vector<TraceEvent> advance(SystemState& state, Tick n) {
  const auto& schedule = state.spec.schedule;
  const Tick frame = schedule.major_frame();
  const std::size_t first = state.trace.size();
  for (Tick i = 0; i < n; ++i) {
    ++state.tick;
    const Tick pos = state.tick % frame;
    if (pos == 0) state.device_queue.clear();
    if (state.overrun_until > state.tick) continue;

    const std::size_t slot = schedule.slot_at(pos);
    const PartitionId nominal = schedule.slots[slot].partition;
    if (nominal == state.active) continue;

    Tick refused = 0;
    if (pos == schedule.slot_start(slot)) {
      auto greedy = state.greedy.find(state.active);
      if (greedy != state.greedy.end() && greedy->second > 0) {
        if (state.spec.has_defect(DefectId::T2)) {
          const Tick extra = std::min(greedy->second, schedule.slots[slot].length - 1);
          if (extra > 0) {
            state.overrun_until = state.tick + extra;
            state.emit(EventKind::SlotOverrun, state.active, OverrunInfo{extra, nominal});
            continue;
          }
        } else {
          refused = greedy->second;
        }
      }
    }
    context_switch(state, state.active, nominal, refused);
  }
  return {state.trace.begin() + static_cast<std::ptrdiff_t>(first), state.trace.end()};
}

namespace {

struct Decision {
  AccessDecision verdict = AccessDecision::Deny;
  const MemoryRegion* region = nullptr;
  DenyReason reason = DenyReason::None;
};

Decision decide(const SystemState& state, PartitionId actor, Address addr, Access kind) {
  const auto& spec = state.spec;
  const MemoryRegion* region = spec.region_containing(addr);
  if (region == nullptr) return {AccessDecision::Deny, nullptr, DenyReason::Unmapped};
  if (region->space == AddressSpace::Kernel) {
    if (spec.has_defect(DefectId::M2)) return {AccessDecision::Allow, region, DenyReason::None};
    return {AccessDecision::Deny, region, DenyReason::Kernel};
  }
  if (state.may_access(*region, actor, kind)) return {AccessDecision::Allow, region, DenyReason::None};
  if (kind == Access::Write && spec.has_defect(DefectId::M1W)) return {AccessDecision::Allow, region, DenyReason::None};
  if (kind == Access::Read && spec.has_defect(DefectId::M1R)) return {AccessDecision::Allow, region, DenyReason::None};
  return {AccessDecision::Deny, region, DenyReason::Foreign};
}

void record(SystemState& state, PartitionId actor, Address addr, Access kind, Word value, const Decision& d) {
  MemAccessInfo info;
  info.addr = addr;
  if (d.region) info.region = d.region->id;
  info.access = kind;
  info.value = value;
  info.reason = d.reason;
  EventKind ek = EventKind::MemDenied;
  if (d.verdict == AccessDecision::Allow) ek = kind == Access::Read ? EventKind::MemRead : EventKind::MemWrite;
  state.emit(ek, actor, info);
}

}  // namespace

AccessDecision check_mem_access(SystemState& state, PartitionId actor, Address addr, Access kind, Word value) {
  const Decision d = decide(state, actor, addr, kind);
  record(state, actor, addr, kind, value, d);
  return d.verdict;
}

std::optional<Word> read_word(SystemState& state, PartitionId actor, Address addr) {
  const Decision d = decide(state, actor, addr, Access::Read);
  Word value = 0;
  if (d.verdict == AccessDecision::Allow) {
    auto it = state.memory_words.find(addr);
    if (it != state.memory_words.end()) value = it->second;
  }
  record(state, actor, addr, Access::Read, value, d);
  if (d.verdict == AccessDecision::Deny) return std::nullopt;
  return value;
}

bool write_word(SystemState& state, PartitionId actor, Address addr, Word value) {
  if (check_mem_access(state, actor, addr, Access::Write, value) == AccessDecision::Deny) return false;
  state.memory_words[addr] = value;
  return true;
}

AllocResult alloc_memory(SystemState& state, PartitionId actor, std::uint64_t bytes) {
  auto& used = state.alloc_used[actor];
  const std::uint64_t quota = state.spec.partition(actor).memory_quota;
  if (used + bytes <= quota || state.spec.has_defect(DefectId::M4)) {
    used += bytes;
    state.emit(EventKind::Alloc, actor, AllocInfo{bytes, used, quota});
    return AllocResult::Ok;
  }
  state.emit(EventKind::AllocDenied, actor, AllocInfo{bytes, used, quota});
  return AllocResult::QuotaExceeded;
}

std::uint64_t free_memory(SystemState& state, PartitionId actor, std::uint64_t bytes) {
  auto& used = state.alloc_used[actor];
  const std::uint64_t floor = state.spec.static_bytes(actor);
  const std::uint64_t released = std::min(bytes, used - floor);
  used -= released;
  return released;
}

DeviceResult device_access(SystemState& state, PartitionId actor, Tick busy) {
  const auto& spec = state.spec;
  const auto& device = spec.device;
  if (spec.enforces(Mechanism::M3) && !device.windows.empty()) {
    const Tick pos = state.tick % spec.schedule.major_frame();
    const bool inside = std::any_of(device.windows.begin(), device.windows.end(), [&](const DeviceWindow& w) {
      return w.partition == actor && pos >= w.offset && pos < w.offset + w.length;
    });
    if (!inside) {
      state.emit(EventKind::DeviceAccess, actor, DeviceInfo{true, 0, busy});
      return {true, 0};
    }
  }

  Tick latency = device.normalized_latency;
  if (!spec.enforces(Mechanism::M3) || !spec.enforces(Mechanism::T4)) {
    latency = device.base_latency;
    for (const auto& entry : state.device_queue) {
      if (entry.partition != actor) latency += entry.busy;
    }
  }
  if (busy > 0) state.device_queue.push_back({actor, busy});
  state.emit(EventKind::DeviceAccess, actor, DeviceInfo{false, latency, busy});
  return {false, latency};
}

void set_register(SystemState& state, PartitionId actor, std::size_t index, Word value) {
  state.live_regs.write(index % kRegisterCount, value, actor);
}

void halt_partition(SystemState& state, PartitionId p, FaultKind why) {
  state.halted.insert(p);
  state.greedy.erase(p);
  state.emit(EventKind::PartFault, p, FaultInfo{why, 0});
}

SystemSpec seed_defect(SystemSpec spec, DefectId d) {
  spec.defects.insert(d);
  return spec;
}

SystemSpec seed_defect(SystemSpec spec, std::string_view name) { return seed_defect(std::move(spec), parse_defect(name)); }

void seed_defect(SystemState&, DefectId) { throw SpecFrozen(); }

Snapshot snapshot(const SystemState& state) { return Snapshot{state}; }

SystemState restore(const Snapshot& snap) { return snap.state; }

std::string state_digest(const SystemState& state) {
  Fnv1a h;
  h.update_u64(state.tick);
  h.update_u64(state.active.value);
  for (const auto& [p, used] : state.alloc_used) {
    h.update_u64(p.value);
    h.update_u64(used);
  }
  for (const auto& [addr, value] : state.memory_words) {
    h.update_u64(addr);
    h.update_u64(value);
  }
  for (auto p : state.halted) h.update_u64(p.value);
  for (auto v : state.live_regs.values) h.update_u64(v);
  for (const auto& [p, ctx] : state.saved_contexts) {
    h.update_u64(p.value);
    for (auto v : ctx.values) h.update_u64(v);
  }
  for (const auto& [r, grants] : state.mapped_grants) {
    for (const auto& g : grants) {
      h.update_u64(r.value);
      h.update_u64(g.partition.value);
      h.update_u64(static_cast<std::uint64_t>(g.access));
    }
  }
  return h.hex();
}

}  // namespace isoforge
