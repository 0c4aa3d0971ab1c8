#include "isoforge/trace.hpp"

#include <array>
#include <cstdio>

#include "isoforge/errors.hpp"

namespace isoforge {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 13> kEventNames = {
    "MEM_READ",    "MEM_WRITE",  "MEM_DENIED",  "SCHED_SWITCH", "HYPERCALL",    "TRAP",      "ALLOC",
    "ALLOC_DENIED", "DEVICE_ACCESS", "PART_FAULT", "REG_SNAPSHOT", "SLOT_OVERRUN", "WCET_ABORT"};

ordered_json optional_id(const std::optional<PartitionId>& p) {
  return p ? ordered_json(p->value) : ordered_json(nullptr);
}

std::optional<PartitionId> optional_id(const json& j) {
  if (j.is_null()) return std::nullopt;
  return PartitionId{j.get<std::uint32_t>()};
}

Access parse_access(const std::string& s) {
  if (s == "read") return Access::Read;
  if (s == "write") return Access::Write;
  throw Error("bad access kind '" + s + "'");
}

Status parse_status(const std::string& s) {
  for (auto st : {Status::Ok, Status::Einval, Status::Eperm, Status::Efault, Status::Enomem, Status::Etime,
                  Status::Enodev}) {
    if (to_string(st) == s) return st;
  }
  throw Error("bad status '" + s + "'");
}

DenyReason parse_reason(const std::string& s) {
  for (auto r : {DenyReason::None, DenyReason::Unmapped, DenyReason::Foreign, DenyReason::Kernel}) {
    if (to_string(r) == s) return r;
  }
  throw Error("bad deny reason '" + s + "'");
}

}  // namespace

std::string_view to_string(Access a) { return a == Access::Read ? "read" : "write"; }

std::string_view to_string(Surface s) { return s == Surface::Pv ? "PV" : "HWFV"; }

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Ok: return "OK";
    case Status::Einval: return "EINVAL";
    case Status::Eperm: return "EPERM";
    case Status::Efault: return "EFAULT";
    case Status::Enomem: return "ENOMEM";
    case Status::Etime: return "ETIME";
    case Status::Enodev: return "ENODEV";
  }
  return "?";
}

std::string_view to_string(EventKind k) { return kEventNames[static_cast<std::size_t>(k)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == text) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(DenyReason r) {
  switch (r) {
    case DenyReason::None: return "none";
    case DenyReason::Unmapped: return "unmapped";
    case DenyReason::Foreign: return "foreign";
    case DenyReason::Kernel: return "kernel";
  }
  return "?";
}

std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::Crash: return "crash";
    case FaultKind::MemCorrupt: return "mem_corrupt";
    case FaultKind::RegCorrupt: return "reg_corrupt";
    case FaultKind::Leak: return "leak";
    case FaultKind::Halt: return "halt";
  }
  return "?";
}

std::optional<FaultKind> parse_fault_kind(std::string_view text) {
  for (auto k : {FaultKind::Crash, FaultKind::MemCorrupt, FaultKind::RegCorrupt, FaultKind::Leak, FaultKind::Halt}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

ordered_json to_json(const TraceEvent& e) {
  ordered_json j;
  j["seq"] = e.seq;
  j["tick"] = e.tick;
  j["kind"] = to_string(e.kind);
  j["actor"] = e.actor.value;
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MemAccessInfo>) {
          j["addr"] = p.addr;
          j["region"] = p.region ? ordered_json(p.region->value) : ordered_json(nullptr);
          j["access"] = to_string(p.access);
          j["value"] = p.value;
          j["reason"] = to_string(p.reason);
        } else if constexpr (std::is_same_v<T, SwitchInfo>) {
          j["from"] = optional_id(p.from);
          j["refused_overrun"] = p.refused_overrun;
        } else if constexpr (std::is_same_v<T, CallInfo>) {
          j["surface"] = to_string(p.surface);
          j["op"] = p.op;
          j["args"] = p.args;
          j["status"] = to_string(p.status);
          j["value"] = p.value;
          j["duration"] = p.duration;
          j["aborted"] = p.aborted;
        } else if constexpr (std::is_same_v<T, AllocInfo>) {
          j["bytes"] = p.bytes;
          j["used_after"] = p.used_after;
          j["quota"] = p.quota;
        } else if constexpr (std::is_same_v<T, DeviceInfo>) {
          j["denied"] = p.denied;
          j["latency"] = p.latency;
          j["busy"] = p.busy;
        } else if constexpr (std::is_same_v<T, FaultInfo>) {
          j["fault"] = to_string(p.kind);
          j["detail"] = p.detail;
        } else if constexpr (std::is_same_v<T, RegisterInfo>) {
          j["from"] = optional_id(p.from);
          j["regs"] = p.regs.values;
          auto writers = ordered_json::array();
          for (const auto& w : p.regs.writers) writers.push_back(optional_id(w));
          j["writers"] = std::move(writers);
        } else if constexpr (std::is_same_v<T, OverrunInfo>) {
          j["extra"] = p.extra;
          j["delayed"] = p.delayed.value;
        } else if constexpr (std::is_same_v<T, WcetInfo>) {
          j["op"] = p.op;
          j["bound"] = p.bound;
          j["demanded"] = p.demanded;
        }
      },
      e.payload);
  return j;
}

TraceEvent event_from_json(const json& j) {
  TraceEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.tick = j.at("tick").get<Tick>();
  auto kind = parse_event_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error("unknown event kind");
  e.kind = *kind;
  e.actor = PartitionId{j.at("actor").get<std::uint32_t>()};
  switch (e.kind) {
    case EventKind::MemRead:
    case EventKind::MemWrite:
    case EventKind::MemDenied: {
      MemAccessInfo p;
      p.addr = j.at("addr").get<Address>();
      if (!j.at("region").is_null()) p.region = RegionId{j.at("region").get<std::uint32_t>()};
      p.access = parse_access(j.at("access").get<std::string>());
      p.value = j.at("value").get<Word>();
      p.reason = parse_reason(j.at("reason").get<std::string>());
      e.payload = p;
      break;
    }
    case EventKind::SchedSwitch:
      e.payload = SwitchInfo{optional_id(j.at("from")), j.at("refused_overrun").get<Tick>()};
      break;
    case EventKind::Hypercall:
    case EventKind::Trap: {
      CallInfo p;
      p.surface = j.at("surface").get<std::string>() == "PV" ? Surface::Pv : Surface::Hwfv;
      p.op = j.at("op").get<std::uint32_t>();
      p.args = j.at("args").get<std::vector<Word>>();
      p.status = parse_status(j.at("status").get<std::string>());
      p.value = j.at("value").get<Word>();
      p.duration = j.at("duration").get<Tick>();
      p.aborted = j.at("aborted").get<bool>();
      e.payload = p;
      break;
    }
    case EventKind::Alloc:
    case EventKind::AllocDenied:
      e.payload = AllocInfo{j.at("bytes").get<std::uint64_t>(), j.at("used_after").get<std::uint64_t>(),
                            j.at("quota").get<std::uint64_t>()};
      break;
    case EventKind::DeviceAccess:
      e.payload = DeviceInfo{j.at("denied").get<bool>(), j.at("latency").get<Tick>(), j.at("busy").get<Tick>()};
      break;
    case EventKind::PartFault: {
      auto kind_name = parse_fault_kind(j.at("fault").get<std::string>());
      if (!kind_name) throw Error("unknown fault kind");
      e.payload = FaultInfo{*kind_name, j.at("detail").get<Word>()};
      break;
    }
    case EventKind::RegSnapshot: {
      RegisterInfo p;
      p.from = optional_id(j.at("from"));
      const auto& regs = j.at("regs");
      const auto& writers = j.at("writers");
      for (std::size_t i = 0; i < kRegisterCount; ++i) {
        p.regs.values[i] = regs.at(i).get<Word>();
        p.regs.writers[i] = optional_id(writers.at(i));
      }
      e.payload = p;
      break;
    }
    case EventKind::SlotOverrun:
      e.payload = OverrunInfo{j.at("extra").get<Tick>(), PartitionId{j.at("delayed").get<std::uint32_t>()}};
      break;
    case EventKind::WcetAbort:
      e.payload = WcetInfo{j.at("op").get<std::uint32_t>(), j.at("bound").get<Tick>(), j.at("demanded").get<Tick>()};
      break;
  }
  return e;
}

void Fnv1a::update(std::string_view bytes) {
  for (unsigned char c : bytes) {
    state_ ^= c;
    state_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::update_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    state_ ^= (v >> (8 * i)) & 0xff;
    state_ *= 0x100000001b3ULL;
  }
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Fnv1a::hex() const { return to_hex(state_); }

void TraceDigest::add(const TraceEvent& e) {
  hash_.update(to_json(e).dump());
  hash_.update("\n");
  ++count_;
}

std::string digest_of(const std::vector<TraceEvent>& trace) {
  TraceDigest d;
  for (const auto& e : trace) d.add(e);
  return d.hex();
}

}  // namespace isoforge
