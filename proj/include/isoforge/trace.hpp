#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "isoforge/types.hpp"

namespace isoforge {

inline constexpr std::size_t kRegisterCount = 8;

enum class Access : std::uint8_t { Read, Write };
enum class Surface : std::uint8_t { Pv, Hwfv };

// Result of every PV/HWFV call. Never thrown.
enum class Status : std::uint8_t { Ok, Einval, Eperm, Efault, Enomem, Etime, Enodev };

std::string_view to_string(Access a);
std::string_view to_string(Surface s);
std::string_view to_string(Status s);

enum class EventKind : std::uint8_t {
  MemRead,
  MemWrite,
  MemDenied,
  SchedSwitch,
  Hypercall,
  Trap,
  Alloc,
  AllocDenied,
  DeviceAccess,
  PartFault,
  RegSnapshot,
  SlotOverrun,
  WcetAbort,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view text);

enum class DenyReason : std::uint8_t { None, Unmapped, Foreign, Kernel };
std::string_view to_string(DenyReason r);

enum class FaultKind : std::uint8_t { Crash, MemCorrupt, RegCorrupt, Leak, Halt };
std::string_view to_string(FaultKind k);
std::optional<FaultKind> parse_fault_kind(std::string_view text);

struct RegisterContext {
  std::array<Word, kRegisterCount> values{};
  // Partition that last wrote each register; empty for boot-time zeros.
  std::array<std::optional<PartitionId>, kRegisterCount> writers{};

  void write(std::size_t index, Word value, PartitionId writer) {
    values[index] = value;
    writers[index] = writer;
  }
  void clear() { *this = RegisterContext{}; }
  friend bool operator==(const RegisterContext&, const RegisterContext&) = default;
};

struct MemAccessInfo {
  Address addr = 0;
  std::optional<RegionId> region;
  Access access = Access::Read;
  Word value = 0;
  DenyReason reason = DenyReason::None;
  friend bool operator==(const MemAccessInfo&, const MemAccessInfo&) = default;
};

struct SwitchInfo {
  std::optional<PartitionId> from;
  // Overrun ticks the outgoing partition asked for and the scheduler refused.
  Tick refused_overrun = 0;
  friend bool operator==(const SwitchInfo&, const SwitchInfo&) = default;
};

struct CallInfo {
  Surface surface = Surface::Pv;
  std::uint32_t op = 0;
  std::vector<Word> args;
  Status status = Status::Ok;
  Word value = 0;
  Tick duration = 1;
  bool aborted = false;
  friend bool operator==(const CallInfo&, const CallInfo&) = default;
};

struct AllocInfo {
  std::uint64_t bytes = 0;
  std::uint64_t used_after = 0;
  std::uint64_t quota = 0;
  friend bool operator==(const AllocInfo&, const AllocInfo&) = default;
};

struct DeviceInfo {
  bool denied = false;
  Tick latency = 0;
  Tick busy = 0;
  friend bool operator==(const DeviceInfo&, const DeviceInfo&) = default;
};

struct FaultInfo {
  FaultKind kind = FaultKind::Crash;
  Word detail = 0;
  friend bool operator==(const FaultInfo&, const FaultInfo&) = default;
};

struct RegisterInfo {
  std::optional<PartitionId> from;
  RegisterContext regs;
  friend bool operator==(const RegisterInfo&, const RegisterInfo&) = default;
};

struct OverrunInfo {
  Tick extra = 0;
  PartitionId delayed;
  friend bool operator==(const OverrunInfo&, const OverrunInfo&) = default;
};

struct WcetInfo {
  std::uint32_t op = 0;
  Tick bound = 0;
  Tick demanded = 0;
  friend bool operator==(const WcetInfo&, const WcetInfo&) = default;
};

using EventPayload = std::variant<MemAccessInfo, SwitchInfo, CallInfo, AllocInfo, DeviceInfo, FaultInfo,
                                  RegisterInfo, OverrunInfo, WcetInfo>;

struct TraceEvent {
  std::uint64_t seq = 0;
  Tick tick = 0;
  EventKind kind = EventKind::SchedSwitch;
  PartitionId actor;
  EventPayload payload;

  template <typename T>
  const T& as() const {
    return std::get<T>(payload);
  }
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Canonical, field-order-stable encoding used for logs and digests.
nlohmann::ordered_json to_json(const TraceEvent& e);
TraceEvent event_from_json(const nlohmann::json& j);

// 64-bit FNV-1a; stable across platforms and runs.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  void update_u64(std::uint64_t v);
  std::uint64_t value() const noexcept { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t v);

class TraceDigest {
 public:
  void add(const TraceEvent& e);
  std::string hex() const { return hash_.hex(); }
  std::uint64_t count() const noexcept { return count_; }

 private:
  Fnv1a hash_;
  std::uint64_t count_ = 0;
};

std::string digest_of(const std::vector<TraceEvent>& trace);

}  // namespace isoforge
