#include "isoforge/vm_interface.hpp"

#include <algorithm>

#include <json.hpp>

namespace isoforge {

namespace {

constexpr Word kMaxBytes = Word{1} << 32;
constexpr Word kMaxCopy = 65536;
constexpr Word kMaxIndex = 0xFFFF;
constexpr Word kMaxBusy = 16;
constexpr Tick kCopyBytesPerTick = 64;

ArgDomain arg(std::string name, DomainKind kind, Word min = 0, Word max = ~Word{0}) {
  return ArgDomain{std::move(name), kind, min, max};
}

std::vector<SurfaceEntry> build_pv() {
  const auto p = Surface::Pv;
  return {
      {p, 0, "CONSOLE_WRITE", {arg("value", DomainKind::Value)}, "1"},
      {p, 1, "MEM_MAP",
       {arg("region", DomainKind::Region, 0, kMaxIndex), arg("target", DomainKind::Partition, 0, kMaxIndex),
        arg("access", DomainKind::AccessMode, 1, 2)},
       "1"},
      {p, 2, "MEM_UNMAP",
       {arg("region", DomainKind::Region, 0, kMaxIndex), arg("target", DomainKind::Partition, 0, kMaxIndex)}, "1"},
      {p, 3, "ALLOC", {arg("bytes", DomainKind::Bytes, 1, kMaxBytes)}, "1"},
      {p, 4, "FREE", {arg("bytes", DomainKind::Bytes, 1, kMaxBytes)}, "1"},
      {p, 5, "IPC_SEND", {arg("target", DomainKind::Partition, 0, kMaxIndex), arg("value", DomainKind::Value)}, "1"},
      {p, 6, "YIELD", {}, "1"},
      {p, 7, "DEV_ACCESS", {arg("busy", DomainKind::Busy, 0, kMaxBusy)}, "1"},
      {p, 8, "COPY",
       {arg("dst", DomainKind::Address), arg("src", DomainKind::Address), arg("len", DomainKind::Length, 1, kMaxCopy)},
       "ceil(len/64)"},
      {p, 9, "INFO", {}, "1"},
  };
}

std::vector<SurfaceEntry> build_hwfv() {
  const auto h = Surface::Hwfv;
  return {
      {h, 0, "MMIO_READ", {arg("addr", DomainKind::Address)}, "1"},
      {h, 1, "MMIO_WRITE", {arg("addr", DomainKind::Address), arg("value", DomainKind::Value)}, "1"},
      {h, 2, "IO_PORT", {arg("port", DomainKind::Port, 0, 255), arg("busy", DomainKind::Busy, 0, kMaxBusy)}, "1"},
      {h, 3, "INFO_QUERY", {}, "1"},
      {h, 4, "HALT", {}, "1"},
      {h, 5, "CONTROL_REG",
       {arg("reg", DomainKind::Register, 0, kRegisterCount - 1), arg("value", DomainKind::Value)}, "1"},
  };
}

bool args_admitted(const SurfaceEntry& entry, std::span<const Word> args, const SystemSpec& spec) {
  if (args.size() != entry.arity()) return false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& d = entry.args[i];
    if (!d.admits(args[i])) return false;
    if (d.kind == DomainKind::Partition && !spec.valid_partition(args[i])) return false;
    if (d.kind == DomainKind::Region && args[i] >= spec.regions.size()) return false;
  }
  return true;
}

Status map_grant(SystemState& state, PartitionId actor, RegionId region_id, PartitionId target, Access access) {
  const auto& spec = state.spec;
  const auto& region = spec.region(region_id);
  if (region.space == AddressSpace::Kernel) {
    return spec.has_defect(DefectId::M2) ? Status::Ok : Status::Eperm;
  }
  const bool owner = region.owner == actor;
  const bool defect_allows = (access == Access::Write && spec.has_defect(DefectId::M1W)) ||
                             (access == Access::Read && spec.has_defect(DefectId::M1R));
  if (!owner && !defect_allows) return Status::Eperm;
  if (region.owner == target) return Status::Ok;
  auto& grants = state.mapped_grants[region_id];
  const Grant g{target, access};
  if (std::find(grants.begin(), grants.end(), g) == grants.end()) grants.push_back(g);
  return Status::Ok;
}

Status unmap_grant(SystemState& state, PartitionId actor, RegionId region_id, PartitionId target) {
  const auto& region = state.spec.region(region_id);
  if (region.owner != actor) return Status::Eperm;
  auto it = state.mapped_grants.find(region_id);
  if (it != state.mapped_grants.end()) {
    std::erase_if(it->second, [&](const Grant& g) { return g.partition == target; });
    if (it->second.empty()) state.mapped_grants.erase(it);
  }
  return Status::Ok;
}

// Copies word by word; every access passes the memory checks.
Status copy_words(SystemState& state, PartitionId actor, Address dst, Address src, Word bytes) {
  for (Word off = 0; off < bytes; off += sizeof(Word)) {
    auto v = read_word(state, actor, src + off);
    if (!v) return Status::Efault;
    if (!write_word(state, actor, dst + off, *v)) return Status::Efault;
  }
  return Status::Ok;
}

Status mmio_access(SystemState& state, PartitionId actor, Address addr, std::optional<Word> write, Word& out) {
  const MemoryRegion* region = state.spec.region_containing(addr);
  if (region == nullptr || region->kind != RegionKind::Mmio) return Status::Efault;
  if (write) return write_word(state, actor, addr, *write) ? Status::Ok : Status::Eperm;
  auto v = read_word(state, actor, addr);
  if (!v) return Status::Eperm;
  out = *v;
  return Status::Ok;
}

Status control_reg(SystemState& state, PartitionId actor, Word reg, Word value) {
  const auto& regions = state.spec.regions;
  auto kernel = std::find_if(regions.begin(), regions.end(),
                             [](const MemoryRegion& r) { return r.space == AddressSpace::Kernel && r.size >= 64; });
  if (kernel == regions.end()) return Status::Enodev;
  return write_word(state, actor, kernel->base + reg * sizeof(Word), value) ? Status::Ok : Status::Eperm;
}

}  // namespace

std::string_view to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Address: return "address";
    case DomainKind::Length: return "length";
    case DomainKind::Bytes: return "bytes";
    case DomainKind::Partition: return "partition";
    case DomainKind::Region: return "region";
    case DomainKind::AccessMode: return "access";
    case DomainKind::Value: return "value";
    case DomainKind::Register: return "register";
    case DomainKind::Port: return "port";
    case DomainKind::Busy: return "busy";
  }
  return "?";
}

const std::vector<SurfaceEntry>& list_surface(Surface kind) {
  static const std::vector<SurfaceEntry> pv = build_pv();
  static const std::vector<SurfaceEntry> hwfv = build_hwfv();
  return kind == Surface::Pv ? pv : hwfv;
}

std::vector<SurfaceEntry> full_surface() {
  auto out = list_surface(Surface::Pv);
  const auto& h = list_surface(Surface::Hwfv);
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

const SurfaceEntry* find_entry(Surface kind, std::string_view name) {
  for (const auto& e : list_surface(kind)) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const SurfaceEntry* find_entry(Surface kind, std::uint32_t id) {
  const auto& entries = list_surface(kind);
  return id < entries.size() ? &entries[id] : nullptr;
}

Tick declared_cost(Surface surface, std::uint32_t op, std::span<const Word> args) {
  if (surface == Surface::Pv && op == static_cast<std::uint32_t>(Hypercall::Copy) && args.size() == 3) {
    return std::max<Tick>(1, (args[2] + kCopyBytesPerTick - 1) / kCopyBytesPerTick);
  }
  return 1;
}

Word self_digest(const SystemState& state, PartitionId actor) {
  Fnv1a h;
  h.update_u64(actor.value);
  h.update_u64(state.tick);
  auto used = state.alloc_used.find(actor);
  h.update_u64(used == state.alloc_used.end() ? 0 : used->second);
  h.update_u64(state.spec.partition(actor).memory_quota);
  return h.value();
}

CallRecord dispatch_pv(SystemState& state, PartitionId actor, std::uint32_t id, std::span<const Word> args) {
  CallRecord rec{Surface::Pv, id, {args.begin(), args.end()}, Status::Ok, 0, 1};
  bool aborted = false;

  const SurfaceEntry* entry = find_entry(Surface::Pv, id);
  if (entry == nullptr || !args_admitted(*entry, args, state.spec)) {
    rec.status = Status::Einval;
  } else if (state.spec.partition(actor).kind == PartitionKind::TestHwfv) {
    rec.status = Status::Eperm;
  } else {
    const Tick cost = declared_cost(Surface::Pv, id, args);
    rec.duration = cost;
    auto bound = state.spec.wcet.find(id);
    if (bound != state.spec.wcet.end() && cost > bound->second && state.spec.enforces(Mechanism::T3)) {
      aborted = true;
      rec.duration = bound->second;
    }

    switch (static_cast<Hypercall>(id)) {
      case Hypercall::ConsoleWrite:
        rec.value = args[0];
        break;
      case Hypercall::MemMap:
        rec.status = map_grant(state, actor, RegionId{static_cast<std::uint32_t>(args[0])},
                               PartitionId{static_cast<std::uint32_t>(args[1])},
                               args[2] == 1 ? Access::Read : Access::Write);
        break;
      case Hypercall::MemUnmap:
        rec.status = unmap_grant(state, actor, RegionId{static_cast<std::uint32_t>(args[0])},
                                 PartitionId{static_cast<std::uint32_t>(args[1])});
        break;
      case Hypercall::Alloc:
        rec.status = alloc_memory(state, actor, args[0]) == AllocResult::Ok ? Status::Ok : Status::Enomem;
        rec.value = state.alloc_used[actor];
        break;
      case Hypercall::Free:
        rec.value = free_memory(state, actor, args[0]);
        break;
      case Hypercall::IpcSend:
        rec.status = state.spec.channel_allowed(actor, PartitionId{static_cast<std::uint32_t>(args[0])}) ? Status::Ok
                                                                                                        : Status::Eperm;
        break;
      case Hypercall::Yield:
        break;
      case Hypercall::DevAccess: {
        auto r = device_access(state, actor, args[0]);
        rec.status = r.denied ? Status::Eperm : Status::Ok;
        rec.value = r.latency;
        break;
      }
      case Hypercall::Copy: {
        const Word budget = aborted ? std::min<Word>(args[2], rec.duration * kCopyBytesPerTick) : args[2];
        rec.status = copy_words(state, actor, args[0], args[1], budget);
        break;
      }
      case Hypercall::Info:
        rec.value = self_digest(state, actor);
        break;
    }

    if (aborted) {
      state.emit(EventKind::WcetAbort, actor, WcetInfo{id, bound->second, cost});
      if (rec.status == Status::Ok) rec.status = Status::Etime;
    }
  }

  state.emit(EventKind::Hypercall, actor,
             CallInfo{Surface::Pv, id, rec.args, rec.status, rec.value, rec.duration, aborted});
  return rec;
}

CallRecord dispatch_hwfv(SystemState& state, PartitionId actor, std::uint32_t reason, std::span<const Word> payload) {
  CallRecord rec{Surface::Hwfv, reason, {payload.begin(), payload.end()}, Status::Ok, 0, 1};

  const SurfaceEntry* entry = find_entry(Surface::Hwfv, reason);
  if (entry == nullptr || !args_admitted(*entry, payload, state.spec)) {
    rec.status = Status::Einval;
  } else if (state.spec.partition(actor).kind == PartitionKind::TestPv) {
    rec.status = Status::Eperm;
  } else {
    switch (static_cast<TrapReason>(reason)) {
      case TrapReason::MmioRead:
        rec.status = mmio_access(state, actor, payload[0], std::nullopt, rec.value);
        break;
      case TrapReason::MmioWrite:
        rec.status = mmio_access(state, actor, payload[0], payload[1], rec.value);
        break;
      case TrapReason::IoPort:
        if (payload[0] != 0) {
          rec.status = Status::Enodev;
        } else {
          auto r = device_access(state, actor, payload[1]);
          rec.status = r.denied ? Status::Eperm : Status::Ok;
          rec.value = r.latency;
        }
        break;
      case TrapReason::InfoQuery:
        rec.value = self_digest(state, actor);
        break;
      case TrapReason::Halt:
        halt_partition(state, actor, FaultKind::Halt);
        break;
      case TrapReason::ControlReg:
        rec.status = control_reg(state, actor, payload[0], payload[1]);
        break;
    }
  }

  state.emit(EventKind::Trap, actor,
             CallInfo{Surface::Hwfv, reason, rec.args, rec.status, rec.value, rec.duration, false});
  return rec;
}

std::string export_catalog() {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  auto surfaces = nlohmann::ordered_json::array();
  for (auto kind : {Surface::Pv, Surface::Hwfv}) {
    nlohmann::ordered_json s;
    s["surface"] = to_string(kind);
    auto entries = nlohmann::ordered_json::array();
    for (const auto& e : list_surface(kind)) {
      nlohmann::ordered_json je;
      je["id"] = e.id;
      je["name"] = e.name;
      auto args = nlohmann::ordered_json::array();
      for (const auto& a : e.args) {
        args.push_back({{"name", a.name}, {"domain", to_string(a.kind)}, {"min", a.min}, {"max", a.max}});
      }
      je["args"] = std::move(args);
      je["cost"] = e.cost_rule;
      entries.push_back(std::move(je));
    }
    s["entries"] = std::move(entries);
    surfaces.push_back(std::move(s));
  }
  doc["surfaces"] = std::move(surfaces);
  return doc.dump(2) + "\n";
}

}  // namespace isoforge
