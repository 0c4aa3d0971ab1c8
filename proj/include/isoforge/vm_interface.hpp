#pragma once

// The two guest-facing surfaces of the hypervisor: PV hypercalls and HWFV
// traps. Both are total: every input yields a status code.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isoforge/hv_model.hpp"

namespace isoforge {

enum class Hypercall : std::uint32_t {
  ConsoleWrite = 0,
  MemMap,
  MemUnmap,
  Alloc,
  Free,
  IpcSend,
  Yield,
  DevAccess,
  Copy,
  Info,
};

enum class TrapReason : std::uint32_t {
  MmioRead = 0,
  MmioWrite,
  IoPort,
  InfoQuery,
  Halt,
  ControlReg,
};

inline constexpr std::uint32_t kHypercallCount = 10;
inline constexpr std::uint32_t kTrapReasonCount = 6;

// How a fuzzer should draw values for an argument, and the hard validity
// range the dispatcher enforces (anything outside is EINVAL).
enum class DomainKind : std::uint8_t { Address, Length, Bytes, Partition, Region, AccessMode, Value, Register, Port, Busy };

std::string_view to_string(DomainKind k);

struct ArgDomain {
  std::string name;
  DomainKind kind = DomainKind::Value;
  Word min = 0;
  Word max = ~Word{0};

  bool admits(Word v) const { return v >= min && v <= max; }
};

struct SurfaceEntry {
  Surface surface = Surface::Pv;
  std::uint32_t id = 0;
  std::string name;
  std::vector<ArgDomain> args;
  std::string cost_rule;

  std::size_t arity() const { return args.size(); }
};

struct CallRecord {
  Surface surface = Surface::Pv;
  std::uint32_t op = 0;
  std::vector<Word> args;
  Status status = Status::Ok;
  Word value = 0;
  Tick duration = 1;

  bool ok() const { return status == Status::Ok; }
};

// Ordered, stable catalog; its size is the interface-coverage denominator.
const std::vector<SurfaceEntry>& list_surface(Surface kind);
// PV entries followed by HWFV entries.
std::vector<SurfaceEntry> full_surface();
const SurfaceEntry* find_entry(Surface kind, std::string_view name);
const SurfaceEntry* find_entry(Surface kind, std::uint32_t id);

// Declared tick cost of a call before any WCET enforcement.
Tick declared_cost(Surface surface, std::uint32_t op, std::span<const Word> args);

CallRecord dispatch_pv(SystemState& state, PartitionId actor, std::uint32_t id, std::span<const Word> args);
CallRecord dispatch_hwfv(SystemState& state, PartitionId actor, std::uint32_t reason, std::span<const Word> payload);

// Catalog as a JSON document.
std::string export_catalog();

// Read-only digest a partition may learn about itself via INFO/INFO_QUERY.
Word self_digest(const SystemState& state, PartitionId actor);

}  // namespace isoforge
