#pragma once

// Tick-based model of a partitioning hypervisor. Each partitioning mechanism
// is an enforcement point that a seeded defect switches off.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "isoforge/trace.hpp"
#include "isoforge/types.hpp"

namespace isoforge {

enum class PartitionKind : std::uint8_t { TestPv, TestHwfv, Regular };
enum class AddressSpace : std::uint8_t { User, Kernel };
enum class RegionKind : std::uint8_t { Ram, Mmio };

std::string_view to_string(PartitionKind k);
std::optional<PartitionKind> parse_partition_kind(std::string_view text);
std::string_view to_string(AddressSpace s);
std::string_view to_string(RegionKind k);

struct PartitionSpec {
  PartitionId id;
  std::string name;
  PartitionKind kind = PartitionKind::Regular;
  std::uint64_t memory_quota = 0;
  // Workload binding: a representative profile for regular partitions.
  std::string role;

  bool is_test() const { return kind != PartitionKind::Regular; }
};

struct Grant {
  PartitionId partition;
  Access access = Access::Read;
  friend bool operator==(const Grant&, const Grant&) = default;
};

struct MemoryRegion {
  RegionId id;
  std::string name;
  Address base = 0;
  std::uint64_t size = 0;
  AddressSpace space = AddressSpace::User;
  RegionKind kind = RegionKind::Ram;
  std::optional<PartitionId> owner;  // empty: hypervisor-owned
  std::vector<Grant> grants;

  bool contains(Address a) const { return a >= base && a - base < size; }
  bool has_grant(PartitionId p, Access a) const;
};

struct Slot {
  PartitionId partition;
  Tick length = 0;
};

struct CyclicSchedule {
  std::vector<Slot> slots;

  Tick major_frame() const;
  // Index of the slot covering frame offset `pos` (pos < major_frame()).
  std::size_t slot_at(Tick pos) const;
  Tick slot_start(std::size_t index) const;
  PartitionId partition_at(Tick tick) const;
  // Ticks per major frame granted to `p`.
  Tick ticks_for(PartitionId p) const;
};

struct DeviceWindow {
  PartitionId partition;
  Tick offset = 0;
  Tick length = 0;
};

struct DeviceSpec {
  Tick base_latency = 2;
  Tick normalized_latency = 8;
  Tick pulse_busy_ticks = 4;
  // Frame-relative access windows. Empty: every partition may use the
  // device at any time.
  std::vector<DeviceWindow> windows;
};

struct SystemSpec {
  std::vector<PartitionSpec> partitions;
  std::vector<MemoryRegion> regions;
  CyclicSchedule schedule;
  std::vector<std::pair<PartitionId, PartitionId>> channels;
  DeviceSpec device;
  std::map<std::uint32_t, Tick> wcet;  // hypercall id -> tick bound
  std::set<DefectId> defects;

  bool has_defect(DefectId d) const { return defects.contains(d); }
  // True when the mechanism is fully enforced (no defect touches it).
  bool enforces(Mechanism m) const;

  const PartitionSpec& partition(PartitionId p) const { return partitions.at(p.value); }
  const MemoryRegion& region(RegionId r) const { return regions.at(r.value); }
  bool valid_partition(std::uint64_t index) const { return index < partitions.size(); }
  std::optional<PartitionId> find_partition(std::string_view name) const;
  std::optional<RegionId> find_region(std::string_view name) const;
  const MemoryRegion* region_containing(Address a) const;
  std::uint64_t static_bytes(PartitionId p) const;
  bool channel_allowed(PartitionId from, PartitionId to) const;
  bool is_test(PartitionId p) const { return partition(p).is_test(); }
};

// Throws InvalidSpec describing the first violated invariant.
void validate(const SystemSpec& spec);

// Windows equal to each partition's own schedule slots.
std::vector<DeviceWindow> windows_from_schedule(const CyclicSchedule& schedule);

struct DeviceQueueEntry {
  PartitionId partition;
  Tick busy = 0;
};

struct SystemState {
  SystemSpec spec;
  Tick tick = 0;
  PartitionId active;
  std::map<PartitionId, RegisterContext> saved_contexts;
  RegisterContext live_regs;
  std::map<PartitionId, std::uint64_t> alloc_used;
  std::map<Address, Word> memory_words;
  std::set<PartitionId> halted;
  std::vector<TraceEvent> trace;
  // Grants created at run time through MEM_MAP.
  std::map<RegionId, std::vector<Grant>> mapped_grants;

  // Scheduler and device internals.
  std::map<PartitionId, Tick> greedy;
  Tick overrun_until = 0;
  std::vector<DeviceQueueEntry> device_queue;
  std::uint64_t next_seq = 0;

  Tick frame() const { return tick / spec.schedule.major_frame(); }
  bool is_halted(PartitionId p) const { return halted.contains(p); }
  bool may_access(const MemoryRegion& region, PartitionId actor, Access kind) const;
  const TraceEvent& emit(EventKind kind, PartitionId actor, EventPayload payload);
};

struct Snapshot {
  SystemState state;
};

enum class AccessDecision : std::uint8_t { Allow, Deny };
enum class AllocResult : std::uint8_t { Ok, QuotaExceeded };

struct DeviceResult {
  bool denied = false;
  Tick latency = 0;
};

// Throws InvalidSpec.
SystemState boot(const SystemSpec& spec);

// Runs the cyclic scheduler for n ticks and returns the events emitted.
std::vector<TraceEvent> advance(SystemState& state, Tick n);

// Decision plus MEM_READ / MEM_WRITE / MEM_DENIED event. `value` is recorded
// on writes.
AccessDecision check_mem_access(SystemState& state, PartitionId actor, Address addr, Access kind,
                                Word value = 0);
std::optional<Word> read_word(SystemState& state, PartitionId actor, Address addr);
bool write_word(SystemState& state, PartitionId actor, Address addr, Word value);

AllocResult alloc_memory(SystemState& state, PartitionId actor, std::uint64_t bytes);
// Releases dynamic allocations only; statically owned bytes stay accounted.
std::uint64_t free_memory(SystemState& state, PartitionId actor, std::uint64_t bytes);

std::vector<TraceEvent> context_switch(SystemState& state, PartitionId from, PartitionId to,
                                       Tick refused_overrun = 0);

DeviceResult device_access(SystemState& state, PartitionId actor, Tick busy);

void set_register(SystemState& state, PartitionId actor, std::size_t index, Word value);
void halt_partition(SystemState& state, PartitionId p, FaultKind why);

// Throws UnknownDefect for names outside the catalog.
SystemSpec seed_defect(SystemSpec spec, DefectId d);
SystemSpec seed_defect(SystemSpec spec, std::string_view name);
// A booted system is frozen; always throws SpecFrozen.
[[noreturn]] void seed_defect(SystemState& state, DefectId d);

Snapshot snapshot(const SystemState& state);
SystemState restore(const Snapshot& snap);

// Stable digest of the state visible to the hypervisor (not the trace).
std::string state_digest(const SystemState& state);

}  // namespace isoforge
