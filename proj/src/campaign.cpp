#include "isoforge/campaign.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "isoforge/errors.hpp"
#include "isoforge/vm_interface.hpp"

namespace isoforge {

using nlohmann::json;

namespace {

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string at(const std::string& path, const std::string& key) { return path + "." + key; }
std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void expect_object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaError(at(path, key), "unknown key");
  }
}

const json& array_at(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i < 0) throw SchemaError(path, "must not be negative");
    return static_cast<std::uint64_t>(i);
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    try {
      std::size_t used = 0;
      const auto value = std::stoull(s, &used, 0);
      if (used == s.size()) return value;
    } catch (const std::exception&) {
    }
    throw SchemaError(path, "expected a number, got '" + s + "'");
  }
  throw SchemaError(path, "expected a number");
}

std::uint64_t u64_or(const json& obj, const char* key, const std::string& path, std::uint64_t fallback) {
  return obj.contains(key) ? as_u64(obj.at(key), at(path, key)) : fallback;
}

double number_at(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  return v.get<double>();
}

std::string string_at(const json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path, "expected a string");
  return v.get<std::string>();
}

std::string string_or(const json& obj, const char* key, const std::string& path, std::string fallback) {
  return obj.contains(key) ? string_at(obj.at(key), at(path, key)) : fallback;
}

PartitionId partition_named(const SystemSpec& spec, const json& v, const std::string& path) {
  const auto name = string_at(v, path);
  auto p = spec.find_partition(name);
  if (!p) throw SchemaError(path, "unknown partition '" + name + "'");
  return *p;
}

std::optional<PartitionId> first_of_kind(const SystemSpec& spec, PartitionKind kind) {
  for (const auto& p : spec.partitions) {
    if (p.kind == kind) return p.id;
  }
  return std::nullopt;
}

std::optional<PartitionId> first_test(const SystemSpec& spec) {
  if (auto p = first_of_kind(spec, PartitionKind::TestPv)) return p;
  return first_of_kind(spec, PartitionKind::TestHwfv);
}

std::optional<PartitionId> device_client(const SystemSpec& spec) {
  for (const auto& p : spec.partitions) {
    if (!p.is_test() && p.role == "device_client") return p.id;
  }
  return std::nullopt;
}

std::map<std::uint32_t, Tick> default_wcet() {
  std::map<std::uint32_t, Tick> out;
  for (const auto& e : list_surface(Surface::Pv)) out[e.id] = 1;
  out[static_cast<std::uint32_t>(Hypercall::Copy)] = 5;
  return out;
}

}  // namespace

SystemSpec builtin_testbed() {
  SystemSpec spec;
  auto part = [&](std::string name, PartitionKind kind, std::uint64_t quota, std::string role) {
    const PartitionId id{static_cast<std::uint32_t>(spec.partitions.size())};
    spec.partitions.push_back({id, std::move(name), kind, quota, std::move(role)});
    return id;
  };
  const auto tpv = part("T_PV", PartitionKind::TestPv, 65536, "");
  const auto r1 = part("R1", PartitionKind::Regular, 32768, "periodic_compute");
  const auto thw = part("T_HW", PartitionKind::TestHwfv, 65536, "");
  const auto r2 = part("R2", PartitionKind::Regular, 32768, "memory_toucher");
  const auto r3 = part("R3", PartitionKind::Regular, 32768, "device_client");

  auto region = [&](std::string name, Address base, std::uint64_t size, AddressSpace space, RegionKind kind,
                    std::optional<PartitionId> owner) {
    const RegionId id{static_cast<std::uint32_t>(spec.regions.size())};
    spec.regions.push_back({id, std::move(name), base, size, space, kind, owner, {}});
  };
  region("tpv_ram", 0x10000, 0x1000, AddressSpace::User, RegionKind::Ram, tpv);
  region("r1_ram", 0x20000, 0x1000, AddressSpace::User, RegionKind::Ram, r1);
  region("thw_ram", 0x30000, 0x1000, AddressSpace::User, RegionKind::Ram, thw);
  region("r2_ram", 0x40000, 0x1000, AddressSpace::User, RegionKind::Ram, r2);
  region("r3_ram", 0x50000, 0x1000, AddressSpace::User, RegionKind::Ram, r3);
  region("thw_mmio", 0x90000, 0x100, AddressSpace::User, RegionKind::Mmio, thw);
  region("r2_mmio", 0x91000, 0x100, AddressSpace::User, RegionKind::Mmio, r2);
  region("tpv_mmio", 0x92000, 0x100, AddressSpace::User, RegionKind::Mmio, tpv);
  region("kernel", 0xF0000, 0x1000, AddressSpace::Kernel, RegionKind::Ram, std::nullopt);

  spec.schedule.slots = {{tpv, 10}, {r1, 5}, {thw, 10}, {r2, 5}, {r3, 5}};
  spec.channels = {{tpv, thw}};
  spec.device.windows = windows_from_schedule(spec.schedule);
  spec.wcet = default_wcet();
  return spec;
}

json system_to_json(const SystemSpec& spec) {
  json j;
  auto parts = json::array();
  for (const auto& p : spec.partitions) {
    parts.push_back({{"name", p.name}, {"kind", to_string(p.kind)}, {"quota", p.memory_quota}, {"role", p.role}});
  }
  j["partitions"] = std::move(parts);

  auto regions = json::array();
  for (const auto& r : spec.regions) {
    json jr{{"name", r.name},
            {"base", hex(r.base)},
            {"size", hex(r.size)},
            {"space", to_string(r.space)},
            {"kind", to_string(r.kind)},
            {"owner", r.owner ? json(spec.partition(*r.owner).name) : json(nullptr)}};
    auto grants = json::array();
    for (const auto& g : r.grants) {
      grants.push_back({{"partition", spec.partition(g.partition).name}, {"access", to_string(g.access)}});
    }
    jr["grants"] = std::move(grants);
    regions.push_back(std::move(jr));
  }
  j["regions"] = std::move(regions);

  auto slots = json::array();
  for (const auto& s : spec.schedule.slots) {
    slots.push_back({{"partition", spec.partition(s.partition).name}, {"length", s.length}});
  }
  j["schedule"] = std::move(slots);

  auto windows = json::array();
  for (const auto& w : spec.device.windows) {
    windows.push_back({{"partition", spec.partition(w.partition).name}, {"offset", w.offset}, {"length", w.length}});
  }
  j["device"] = {{"base_latency", spec.device.base_latency},
                 {"normalized_latency", spec.device.normalized_latency},
                 {"pulse_busy", spec.device.pulse_busy_ticks},
                 {"windows", std::move(windows)}};

  json wcet = json::object();
  for (const auto& [id, bound] : spec.wcet) {
    const SurfaceEntry* e = find_entry(Surface::Pv, id);
    wcet[e ? e->name : std::to_string(id)] = bound;
  }
  j["wcet"] = std::move(wcet);

  auto channels = json::array();
  for (const auto& [from, to] : spec.channels) {
    channels.push_back({spec.partition(from).name, spec.partition(to).name});
  }
  j["channels"] = std::move(channels);

  auto defects = json::array();
  for (auto d : spec.defects) defects.push_back(to_string(d));
  j["defects"] = std::move(defects);
  return j;
}

SystemSpec system_from_json(const json& j, const std::string& path) {
  expect_object(j, path, {"partitions", "regions", "schedule", "device", "wcet", "channels", "defects"});
  SystemSpec spec;
  if (!j.contains("partitions")) {
    for (const char* key : {"regions", "schedule", "device", "channels"}) {
      if (j.contains(key)) throw SchemaError(at(path, key), "requires an explicit partitions list");
    }
    spec = builtin_testbed();
  } else {
    for (const char* key : {"regions", "schedule"}) {
      if (!j.contains(key)) throw SchemaError(at(path, key), "required when partitions are given");
    }
    const auto ppath = at(path, "partitions");
    const auto& parts = array_at(j.at("partitions"), ppath);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const auto p = at(ppath, i);
      expect_object(parts[i], p, {"name", "kind", "quota", "role"});
      PartitionSpec ps;
      ps.id = PartitionId{static_cast<std::uint32_t>(i)};
      ps.name = string_at(parts[i].value("name", json()), at(p, "name"));
      const auto kind_text = string_or(parts[i], "kind", p, "regular");
      auto kind = parse_partition_kind(kind_text);
      if (!kind) throw SchemaError(at(p, "kind"), "unknown partition kind '" + kind_text + "'");
      ps.kind = *kind;
      ps.memory_quota = u64_or(parts[i], "quota", p, 0);
      ps.role = string_or(parts[i], "role", p, "");
      if (!ps.is_test() && !ps.role.empty()) parse_profile(ps.role);
      spec.partitions.push_back(std::move(ps));
    }

    const auto rpath = at(path, "regions");
    const auto& regions = array_at(j.at("regions"), rpath);
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const auto p = at(rpath, i);
      const auto& jr = regions[i];
      expect_object(jr, p, {"name", "base", "size", "space", "kind", "owner", "grants"});
      MemoryRegion r;
      r.id = RegionId{static_cast<std::uint32_t>(i)};
      r.name = string_at(jr.value("name", json()), at(p, "name"));
      if (!jr.contains("base") || !jr.contains("size")) throw SchemaError(p, "base and size are required");
      r.base = as_u64(jr.at("base"), at(p, "base"));
      r.size = as_u64(jr.at("size"), at(p, "size"));
      const auto space = string_or(jr, "space", p, "user");
      if (space != "user" && space != "kernel") throw SchemaError(at(p, "space"), "expected user or kernel");
      r.space = space == "user" ? AddressSpace::User : AddressSpace::Kernel;
      const auto kind = string_or(jr, "kind", p, "ram");
      if (kind != "ram" && kind != "mmio") throw SchemaError(at(p, "kind"), "expected ram or mmio");
      r.kind = kind == "ram" ? RegionKind::Ram : RegionKind::Mmio;
      if (jr.contains("owner") && !jr.at("owner").is_null()) r.owner = partition_named(spec, jr.at("owner"), at(p, "owner"));
      if (jr.contains("grants")) {
        const auto gpath = at(p, "grants");
        const auto& grants = array_at(jr.at("grants"), gpath);
        for (std::size_t g = 0; g < grants.size(); ++g) {
          const auto gp = at(gpath, g);
          expect_object(grants[g], gp, {"partition", "access"});
          const auto access = string_or(grants[g], "access", gp, "read");
          if (access != "read" && access != "write") throw SchemaError(at(gp, "access"), "expected read or write");
          r.grants.push_back({partition_named(spec, grants[g].value("partition", json()), at(gp, "partition")),
                              access == "read" ? Access::Read : Access::Write});
        }
      }
      spec.regions.push_back(std::move(r));
    }

    const auto spath = at(path, "schedule");
    const auto& slots = array_at(j.at("schedule"), spath);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto p = at(spath, i);
      expect_object(slots[i], p, {"partition", "length"});
      spec.schedule.slots.push_back(
          {partition_named(spec, slots[i].value("partition", json()), at(p, "partition")), u64_or(slots[i], "length", p, 0)});
    }
    spec.device.windows = windows_from_schedule(spec.schedule);
    spec.wcet = default_wcet();
    spec.channels.clear();
  }

  if (j.contains("device")) {
    const auto dpath = at(path, "device");
    const auto& d = j.at("device");
    expect_object(d, dpath, {"base_latency", "normalized_latency", "pulse_busy", "windows"});
    spec.device.base_latency = u64_or(d, "base_latency", dpath, spec.device.base_latency);
    spec.device.normalized_latency = u64_or(d, "normalized_latency", dpath, spec.device.normalized_latency);
    spec.device.pulse_busy_ticks = u64_or(d, "pulse_busy", dpath, spec.device.pulse_busy_ticks);
    if (d.contains("windows")) {
      const auto wpath = at(dpath, "windows");
      const auto& w = d.at("windows");
      spec.device.windows.clear();
      if (w.is_string()) {
        if (w.get<std::string>() != "schedule") throw SchemaError(wpath, "expected \"schedule\" or a list");
        spec.device.windows = windows_from_schedule(spec.schedule);
      } else {
        const auto& list = array_at(w, wpath);
        for (std::size_t i = 0; i < list.size(); ++i) {
          const auto p = at(wpath, i);
          expect_object(list[i], p, {"partition", "offset", "length"});
          spec.device.windows.push_back({partition_named(spec, list[i].value("partition", json()), at(p, "partition")),
                                         u64_or(list[i], "offset", p, 0), u64_or(list[i], "length", p, 0)});
        }
      }
    }
  }

  if (j.contains("wcet")) {
    const auto wpath = at(path, "wcet");
    const auto& w = j.at("wcet");
    if (!w.is_object()) throw SchemaError(wpath, "expected an object of call name to tick bound");
    spec.wcet.clear();
    for (const auto& [name, bound] : w.items()) {
      const SurfaceEntry* e = find_entry(Surface::Pv, name);
      if (e == nullptr) throw SchemaError(at(wpath, name), "unknown hypercall");
      spec.wcet[e->id] = as_u64(bound, at(wpath, name));
    }
  }

  if (j.contains("channels")) {
    const auto cpath = at(path, "channels");
    const auto& list = array_at(j.at("channels"), cpath);
    spec.channels.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto p = at(cpath, i);
      if (!list[i].is_array() || list[i].size() != 2) throw SchemaError(p, "expected [from, to]");
      spec.channels.push_back({partition_named(spec, list[i][0], at(p, 0)), partition_named(spec, list[i][1], at(p, 1))});
    }
  }

  if (j.contains("defects")) {
    const auto dpath = at(path, "defects");
    const auto& list = array_at(j.at("defects"), dpath);
    for (std::size_t i = 0; i < list.size(); ++i) spec.defects.insert(parse_defect(string_at(list[i], at(dpath, i))));
  }

  try {
    validate(spec);
  } catch (const InvalidSpec& e) {
    throw SchemaError(path, e.what());
  }
  return spec;
}

namespace {

MonitorConfig monitor_from_json(const json& j, const std::string& path) {
  MonitorConfig cfg;
  expect_object(j, path, {"enabled", "thresholds"});
  if (j.contains("enabled")) {
    const auto epath = at(path, "enabled");
    const auto& list = array_at(j.at("enabled"), epath);
    cfg.enabled.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto name = string_at(list[i], at(epath, i));
      auto p = parse_property(name);
      if (!p) throw SchemaError(at(epath, i), "unknown property '" + name + "'");
      cfg.enabled.insert(*p);
    }
  }
  if (j.contains("thresholds")) {
    const auto tpath = at(path, "thresholds");
    const auto& t = j.at("thresholds");
    expect_object(t, tpath, {"slot_jitter", "degradation", "covert_capacity"});
    cfg.thresholds.slot_jitter = u64_or(t, "slot_jitter", tpath, cfg.thresholds.slot_jitter);
    if (t.contains("degradation")) cfg.thresholds.degradation = number_at(t.at("degradation"), at(tpath, "degradation"));
    if (t.contains("covert_capacity")) {
      cfg.thresholds.covert_capacity = number_at(t.at("covert_capacity"), at(tpath, "covert_capacity"));
    }
  }
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    throw SchemaError(at(path, "thresholds"), e.what());
  }
  return cfg;
}

std::vector<PartitionId> partitions_at(const SystemSpec& spec, const json& v, const std::string& path) {
  std::vector<PartitionId> out;
  const auto& list = array_at(v, path);
  for (std::size_t i = 0; i < list.size(); ++i) out.push_back(partition_named(spec, list[i], at(path, i)));
  return out;
}

TechniqueConfig technique_from_json(const SystemSpec& spec, const json& j, const std::string& path) {
  expect_object(j, path, {"name", "seed", "count", "params"});
  TechniqueConfig t;
  const auto name = string_at(j.value("name", json()), at(path, "name"));
  auto tech = parse_technique(name);
  if (!tech) throw SchemaError(at(path, "name"), "unknown technique '" + name + "'");
  if (!implemented(*tech)) throw SchemaError(at(path, "name"), "technique '" + name + "' has no generator");
  t.technique = *tech;
  t.seed = u64_or(j, "seed", path, 0);
  t.count = u64_or(j, "count", path, t.technique == Technique::Fuzz ? 64 : 1);
  if (t.count == 0) throw SchemaError(at(path, "count"), "must be at least 1");

  const json params = j.contains("params") ? j.at("params") : json::object();
  const auto ppath = at(path, "params");
  switch (t.technique) {
    case Technique::Fuzz: {
      expect_object(params, ppath, {"policy", "steps_per_case", "surface"});
      const auto policy = string_or(params, "policy", ppath, "sweep");
      auto p = parse_fuzz_policy(policy);
      if (!p) throw SchemaError(at(ppath, "policy"), "unknown policy '" + policy + "'");
      t.fuzz.policy = *p;
      t.fuzz.steps_per_case = u64_or(params, "steps_per_case", ppath, kDefaultStepsPerCase);
      if (t.fuzz.steps_per_case == 0) throw SchemaError(at(ppath, "steps_per_case"), "must be at least 1");
      const auto surface = string_or(params, "surface", ppath, "all");
      if (surface == "pv") {
        t.fuzz.surface = Surface::Pv;
      } else if (surface == "hwfv") {
        t.fuzz.surface = Surface::Hwfv;
      } else if (surface != "all") {
        throw SchemaError(at(ppath, "surface"), "expected pv, hwfv or all");
      }
      break;
    }
    case Technique::FaultInjection: {
      expect_object(params, ppath, {"kinds", "targets", "frames", "leak_bytes"});
      auto& plan = t.fault.plan;
      if (params.contains("kinds")) {
        const auto kpath = at(ppath, "kinds");
        const auto& list = array_at(params.at("kinds"), kpath);
        for (std::size_t i = 0; i < list.size(); ++i) {
          const auto k = string_at(list[i], at(kpath, i));
          auto kind = parse_fault_kind(k);
          if (!kind || *kind == FaultKind::Halt) throw SchemaError(at(kpath, i), "unknown fault kind '" + k + "'");
          plan.kinds.push_back(*kind);
        }
      } else {
        plan.kinds = {FaultKind::Crash, FaultKind::MemCorrupt, FaultKind::RegCorrupt, FaultKind::Leak};
      }
      if (params.contains("targets")) {
        plan.targets = partitions_at(spec, params.at("targets"), at(ppath, "targets"));
      } else {
        for (const auto& p : spec.partitions) {
          if (p.is_test()) plan.targets.push_back(p.id);
        }
      }
      for (std::size_t i = 0; i < plan.targets.size(); ++i) {
        if (!spec.is_test(plan.targets[i])) {
          throw SchemaError(at(at(ppath, "targets"), i), "fault plans may only target test partitions");
        }
      }
      if (params.contains("frames")) {
        const auto fpath = at(ppath, "frames");
        const auto& list = array_at(params.at("frames"), fpath);
        for (std::size_t i = 0; i < list.size(); ++i) plan.frames.push_back(as_u64(list[i], at(fpath, i)));
      } else {
        plan.frames = {1};
      }
      plan.leak_bytes = u64_or(params, "leak_bytes", ppath, plan.leak_bytes);
      if (plan.kinds.empty() || plan.targets.empty() || plan.frames.empty()) {
        throw SchemaError(ppath, "kinds, targets and frames must not be empty");
      }
      break;
    }
    case Technique::Scripted: {
      expect_object(params, ppath, {"script", "scripts", "target"});
      if (params.contains("script")) t.script.scripts.push_back(string_at(params.at("script"), at(ppath, "script")));
      if (params.contains("scripts")) {
        const auto spath = at(ppath, "scripts");
        const auto& list = array_at(params.at("scripts"), spath);
        for (std::size_t i = 0; i < list.size(); ++i) t.script.scripts.push_back(string_at(list[i], at(spath, i)));
      }
      if (t.script.scripts.empty()) throw SchemaError(ppath, "scripted technique needs script or scripts");
      for (std::size_t i = 0; i < t.script.scripts.size(); ++i) {
        try {
          parse_script(t.script.scripts[i]);
        } catch (const ParseError& e) {
          throw SchemaError(at(at(ppath, "scripts"), i), e.what());
        }
      }
      if (params.contains("target")) {
        t.script.target = partition_named(spec, params.at("target"), at(ppath, "target"));
      } else {
        auto p = first_test(spec);
        if (!p) throw SchemaError(at(ppath, "target"), "no test partition to run the script");
        t.script.target = *p;
      }
      break;
    }
    case Technique::CovertProbe: {
      expect_object(params, ppath, {"n_bits", "sender"});
      t.covert.n_bits = u64_or(params, "n_bits", ppath, 64);
      if (t.covert.n_bits == 0) throw SchemaError(at(ppath, "n_bits"), "must be at least 1");
      if (params.contains("sender")) {
        t.covert.sender = partition_named(spec, params.at("sender"), at(ppath, "sender"));
        if (!spec.is_test(t.covert.sender)) throw SchemaError(at(ppath, "sender"), "sender must be a test partition");
      } else {
        auto p = first_test(spec);
        if (!p) throw SchemaError(at(ppath, "sender"), "no test partition to send");
        t.covert.sender = *p;
      }
      auto receiver = device_client(spec);
      if (!receiver) throw SchemaError(ppath, "covert probes need a regular partition running device_client");
      t.covert.receiver = *receiver;
      break;
    }
    default:
      break;
  }
  return t;
}

}  // namespace

Campaign load_campaign(const json& doc) {
  expect_object(doc, "$", {"system", "monitor", "techniques", "frames_per_case", "parallelism", "trace_cap"});
  Campaign c;
  c.spec = doc.contains("system") ? system_from_json(doc.at("system"), "$.system") : builtin_testbed();
  if (doc.contains("monitor")) c.monitor = monitor_from_json(doc.at("monitor"), "$.monitor");

  if (!doc.contains("techniques")) throw SchemaError("$.techniques", "required");
  const auto& list = array_at(doc.at("techniques"), "$.techniques");
  if (list.empty()) throw SchemaError("$.techniques", "at least one technique is required");
  for (std::size_t i = 0; i < list.size(); ++i) {
    c.techniques.push_back(technique_from_json(c.spec, list[i], at(std::string("$.techniques"), i)));
  }

  c.frames_per_case = u64_or(doc, "frames_per_case", "$", kDefaultFramesPerCase);
  if (c.frames_per_case == 0) throw SchemaError("$.frames_per_case", "must be at least 1");
  c.parallelism = u64_or(doc, "parallelism", "$", 1);
  if (c.parallelism == 0) throw SchemaError("$.parallelism", "must be at least 1");
  c.trace_cap = u64_or(doc, "trace_cap", "$", kDefaultTraceCap);
  return c;
}

Campaign load_campaign_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("not valid JSON: ") + e.what());
  }
  return load_campaign(doc);
}

Campaign load_campaign_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read campaign file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_campaign_text(buf.str());
}

}  // namespace isoforge

namespace isoforge {

namespace {

json technique_to_json(const SystemSpec& spec, const TechniqueConfig& t) {
  json params = json::object();
  switch (t.technique) {
    case Technique::Fuzz:
      params["policy"] = to_string(t.fuzz.policy);
      params["steps_per_case"] = t.fuzz.steps_per_case;
      params["surface"] = t.fuzz.surface ? std::string(*t.fuzz.surface == Surface::Pv ? "pv" : "hwfv") : std::string("all");
      break;
    case Technique::FaultInjection: {
      const auto& plan = t.fault.plan;
      auto kinds = json::array();
      for (auto k : plan.kinds) kinds.push_back(to_string(k));
      auto targets = json::array();
      for (auto p : plan.targets) targets.push_back(spec.partition(p).name);
      params["kinds"] = std::move(kinds);
      params["targets"] = std::move(targets);
      params["frames"] = plan.frames;
      params["leak_bytes"] = plan.leak_bytes;
      break;
    }
    case Technique::Scripted:
      params["scripts"] = t.script.scripts;
      params["target"] = spec.partition(t.script.target).name;
      break;
    case Technique::CovertProbe:
      params["n_bits"] = t.covert.n_bits;
      params["sender"] = spec.partition(t.covert.sender).name;
      break;
    default:
      break;
  }
  return {{"name", to_string(t.technique)}, {"seed", t.seed}, {"count", t.count}, {"params", std::move(params)}};
}

}  // namespace

json campaign_to_json(const Campaign& c) {
  json doc;
  doc["system"] = system_to_json(c.spec);
  auto enabled = json::array();
  for (auto p : c.monitor.enabled) enabled.push_back(to_string(p));
  doc["monitor"] = {{"enabled", std::move(enabled)},
                    {"thresholds",
                     {{"slot_jitter", c.monitor.thresholds.slot_jitter},
                      {"degradation", c.monitor.thresholds.degradation},
                      {"covert_capacity", c.monitor.thresholds.covert_capacity}}}};
  auto techniques = json::array();
  for (const auto& t : c.techniques) techniques.push_back(technique_to_json(c.spec, t));
  doc["techniques"] = std::move(techniques);
  doc["frames_per_case"] = c.frames_per_case;
  doc["trace_cap"] = c.trace_cap;
  return doc;
}

}  // namespace isoforge
