#include "isoforge/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "isoforge/errors.hpp"
#include "isoforge/vm_interface.hpp"

namespace isoforge {

std::string_view to_string(PropertyId p) {
  switch (p) {
    case PropertyId::SpInt: return "SP-INT";
    case PropertyId::SpConf: return "SP-CONF";
    case PropertyId::SpKern: return "SP-KERN";
    case PropertyId::SpQuota: return "SP-QUOTA";
    case PropertyId::TpSlot: return "TP-SLOT";
    case PropertyId::TpWcet: return "TP-WCET";
    case PropertyId::TpResid: return "TP-RESID";
    case PropertyId::TpCovert: return "TP-COVERT";
    case PropertyId::FtCont: return "FT-CONT";
  }
  return "?";
}

std::optional<PropertyId> parse_property(std::string_view text) {
  for (auto p : kAllProperties) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

MechanismSet mechanisms_of(PropertyId p) {
  switch (p) {
    case PropertyId::SpInt:
    case PropertyId::SpConf: return {Mechanism::M1};
    case PropertyId::SpKern: return {Mechanism::M2};
    case PropertyId::SpQuota: return {Mechanism::M4};
    case PropertyId::TpSlot: return {Mechanism::T2};
    case PropertyId::TpWcet: return {Mechanism::T3};
    case PropertyId::TpResid: return {Mechanism::T1};
    case PropertyId::TpCovert: return {Mechanism::M3, Mechanism::T4};
    case PropertyId::FtCont: return {};
  }
  return {};
}

std::string tag_of(PropertyId p) {
  if (p == PropertyId::FtCont) return "fault-isolation";
  return mechanisms_of(p).to_string();
}

std::size_t MonitorReport::count(PropertyId p) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.property == p; }));
}

void validate(const MonitorConfig& config) {
  const auto& t = config.thresholds;
  if (!(t.degradation > 0.0 && t.degradation < 1.0)) throw ConfigError("degradation threshold must lie in (0, 1)");
  if (!(t.covert_capacity >= 0.0 && t.covert_capacity <= 1.0)) {
    throw ConfigError("covert capacity bound must lie in [0, 1]");
  }
}

// --- frame ledger -----------------------------------------------------------

FrameLedger::FrameLedger(const SystemSpec& spec) : spec_(&spec), frame_len_(spec.schedule.major_frame()) {}

std::map<PartitionId, FrameLedger::Cell>& FrameLedger::cell_frame(std::uint64_t f) {
  if (frames_.size() <= f) {
    frames_.resize(f + 1);
    busy_.resize(f + 1, false);
  }
  return frames_[f];
}

const std::map<PartitionId, FrameLedger::Cell>& FrameLedger::frame(std::uint64_t f) const {
  static const std::map<PartitionId, Cell> empty;
  return f < frames_.size() ? frames_[f] : empty;
}

bool FrameLedger::test_busy(std::uint64_t f) const { return f < busy_.size() && busy_[f]; }

void FrameLedger::credit(PartitionId p, Tick from, Tick to) {
  while (from < to) {
    const std::uint64_t f = from / frame_len_;
    const Tick end = std::min(to, (f + 1) * frame_len_);
    cell_frame(f)[p].active += end - from;
    from = end;
  }
}

void FrameLedger::observe(const TraceEvent& e) {
  const std::uint64_t f = e.tick / frame_len_;
  if (f > complete_) {
    if (active_) credit(*active_, since_, f * frame_len_);
    since_ = std::max(since_, f * frame_len_);
    complete_ = f;
  }
  switch (e.kind) {
    case EventKind::SchedSwitch:
      if (active_) credit(*active_, since_, e.tick);
      active_ = e.actor;
      since_ = e.tick;
      cell_frame(f);
      break;
    case EventKind::Hypercall: {
      const auto& c = e.as<CallInfo>();
      if (c.op == static_cast<std::uint32_t>(Hypercall::ConsoleWrite) && c.status == Status::Ok &&
          !spec_->is_test(e.actor)) {
        auto& cell = cell_frame(f)[e.actor];
        if (!cell.checksum) cell.checksum = c.value;
      }
      break;
    }
    case EventKind::DeviceAccess: {
      const auto& d = e.as<DeviceInfo>();
      if (d.denied) break;
      auto& cell = cell_frame(f)[e.actor];
      if (!cell.latency) {
        cell.latency = d.latency;
        cell.latency_seq = e.seq;
      }
      if (d.busy > 0 && spec_->is_test(e.actor)) busy_[f] = true;
      break;
    }
    default:
      break;
  }
}

void FrameLedger::finish(Tick end_tick) {
  if (active_ && end_tick > since_) credit(*active_, since_, end_tick);
  since_ = std::max(since_, end_tick);
  complete_ = std::max<std::uint64_t>(complete_, end_tick / frame_len_);
  if (complete_ > 0) cell_frame(complete_ - 1);
}

// --- baseline ---------------------------------------------------------------

BaselineMetrics capture_baseline(const SystemSpec& spec, const std::map<PartitionId, Workload>& workloads,
                                 std::uint64_t frames) {
  if (!spec.defects.empty()) throw SpecHasDefects();
  BaselineMetrics out;
  out.frames = frames;
  if (frames == 0) return out;

  SystemState state = boot(spec);
  FrameLedger ledger(spec);
  ExecutionPlan plan;
  plan.workloads = workloads;
  Runner runner(state, std::move(plan));
  runner.run_frames(frames, [&](const TraceEvent& e) { ledger.observe(e); });
  ledger.finish(state.tick);

  for (const auto& [p, wl] : workloads) {
    auto& pb = out.partitions[p];
    for (std::uint64_t f = 0; f < frames; ++f) {
      const auto& cells = ledger.frame(f);
      auto it = cells.find(p);
      if (it == cells.end()) {
        pb.checksums.push_back(std::nullopt);
        pb.active_ticks.push_back(0);
        pb.latencies.push_back(std::nullopt);
      } else {
        pb.checksums.push_back(it->second.checksum);
        pb.active_ticks.push_back(it->second.active);
        pb.latencies.push_back(it->second.latency);
      }
    }
  }
  return out;
}

// --- monitor ----------------------------------------------------------------

namespace {

std::string hex(Word v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::optional<PartitionId> default_receiver(const SystemSpec& spec) {
  for (const auto& p : spec.partitions) {
    if (!p.is_test() && p.role == "device_client") return p.id;
  }
  return std::nullopt;
}

constexpr std::size_t kCovertMinSymbols = 8;
constexpr std::size_t kMaxEvidence = 16;

}  // namespace

Monitor::Monitor(const SystemSpec& spec, MonitorConfig config)
    : spec_(spec), config_(std::move(config)), ledger_(spec) {
  validate(config_);
  if (!config_.covert_receiver) config_.covert_receiver = default_receiver(spec);
}

void Monitor::add(std::vector<Violation>& out, PropertyId p, std::vector<std::uint64_t> evidence, std::string detail,
                  const TraceEvent& e) {
  if (!on(p)) return;
  if (evidence.empty()) evidence.push_back(e.seq);
  out.push_back(Violation{p, std::move(evidence), std::move(detail), e.tick, e.actor});
}

bool Monitor::granted(RegionId r, PartitionId p, Access a) const {
  if (spec_.region(r).has_grant(p, a)) return true;
  auto it = grants_.find(r);
  return it != grants_.end() && std::find(it->second.begin(), it->second.end(), Grant{p, a}) != it->second.end();
}

std::vector<Violation> Monitor::observe(const TraceEvent& e) {
  if (finalized_) throw OutOfOrderEvent("event after finalize");
  if (last_seq_ && e.seq <= *last_seq_) {
    throw OutOfOrderEvent("seq " + std::to_string(e.seq) + " after " + std::to_string(*last_seq_));
  }
  if (e.tick < last_tick_) throw OutOfOrderEvent("tick " + std::to_string(e.tick) + " after " + std::to_string(last_tick_));
  last_seq_ = e.seq;
  last_tick_ = e.tick;
  ++events_;

  std::vector<Violation> out;
  ledger_.observe(e);
  close_frames(ledger_.complete_frames(), out);

  switch (e.kind) {
    case EventKind::MemRead:
    case EventKind::MemWrite:
      check_memory(e, out);
      break;
    case EventKind::Hypercall:
      check_call(e, out);
      break;
    case EventKind::Alloc: {
      const auto& a = e.as<AllocInfo>();
      if (a.used_after > a.quota) {
        add(out, PropertyId::SpQuota, {e.seq},
            spec_.partition(e.actor).name + " holds " + std::to_string(a.used_after) + " bytes, quota " +
                std::to_string(a.quota),
            e);
      }
      break;
    }
    case EventKind::SchedSwitch:
      check_switch(e, out);
      break;
    case EventKind::RegSnapshot: {
      const auto& r = e.as<RegisterInfo>();
      for (std::size_t i = 0; i < kRegisterCount; ++i) {
        const auto& w = r.regs.writers[i];
        if (r.regs.values[i] != 0 && w && *w != e.actor) {
          add(out, PropertyId::TpResid, {e.seq},
              spec_.partition(e.actor).name + " entered with r" + std::to_string(i) + "=" + hex(r.regs.values[i]) +
                  " written by " + spec_.partition(*w).name,
              e);
          break;
        }
      }
      break;
    }
    case EventKind::PartFault:
      if (!fault_frame_) {
        fault_frame_ = e.tick / spec_.schedule.major_frame();
        fault_seq_ = e.seq;
      }
      break;
    default:
      break;
  }

  exercise(e);
  violations_.insert(violations_.end(), out.begin(), out.end());
  return out;
}

void Monitor::check_memory(const TraceEvent& e, std::vector<Violation>& out) {
  const auto& m = e.as<MemAccessInfo>();
  if (!m.region) return;
  const auto& region = spec_.region(*m.region);
  if (region.space == AddressSpace::Kernel) {
    if (m.access == Access::Write) {
      add(out, PropertyId::SpKern, {e.seq}, spec_.partition(e.actor).name + " wrote kernel address " + hex(m.addr), e);
    }
    return;
  }
  if (!region.owner || *region.owner == e.actor || spec_.is_test(*region.owner)) return;
  if (granted(region.id, e.actor, m.access)) return;
  const auto& owner = spec_.partition(*region.owner).name;
  if (m.access == Access::Write) {
    add(out, PropertyId::SpInt, {e.seq},
        spec_.partition(e.actor).name + " wrote " + hex(m.addr) + " in " + region.name + " owned by " + owner, e);
  } else {
    add(out, PropertyId::SpConf, {e.seq},
        spec_.partition(e.actor).name + " read " + hex(m.addr) + " in " + region.name + " owned by " + owner, e);
  }
}

void Monitor::check_call(const TraceEvent& e, std::vector<Violation>& out) {
  const auto& c = e.as<CallInfo>();
  if (c.surface != Surface::Pv) return;
  const auto op = static_cast<Hypercall>(c.op);
  if (c.status == Status::Ok && (op == Hypercall::MemMap || op == Hypercall::MemUnmap) && c.args.size() >= 2 &&
      c.args[0] < spec_.regions.size()) {
    const RegionId r{static_cast<std::uint32_t>(c.args[0])};
    const PartitionId target{static_cast<std::uint32_t>(c.args[1])};
    const auto& region = spec_.region(r);
    if (region.space == AddressSpace::User && region.owner == e.actor) {
      auto& list = grants_[r];
      if (op == Hypercall::MemMap) {
        const Grant g{target, c.args[2] == 1 ? Access::Read : Access::Write};
        if (std::find(list.begin(), list.end(), g) == list.end()) list.push_back(g);
      } else {
        std::erase_if(list, [&](const Grant& g) { return g.partition == target; });
      }
    }
  }
  auto bound = spec_.wcet.find(c.op);
  if (bound != spec_.wcet.end() && c.duration > bound->second && !c.aborted) {
    add(out, PropertyId::TpWcet, {e.seq},
        spec_.partition(e.actor).name + " call " + std::to_string(c.op) + " ran " + std::to_string(c.duration) +
            " ticks, bound " + std::to_string(bound->second),
        e);
  }
}

void Monitor::check_switch(const TraceEvent& e, std::vector<Violation>& out) {
  const auto& s = e.as<SwitchInfo>();
  last_switch_seq_[e.actor] = e.seq;
  if (s.from) last_switch_seq_[*s.from] = e.seq;
  if (!s.from || spec_.is_test(e.actor)) return;
  const auto& schedule = spec_.schedule;
  const Tick pos = e.tick % schedule.major_frame();
  std::size_t idx = schedule.slot_at(pos);
  if (schedule.slots[idx].partition != e.actor) {
    add(out, PropertyId::TpSlot, {e.seq}, spec_.partition(e.actor).name + " switched in outside its slot", e);
    return;
  }
  while (idx > 0 && schedule.slots[idx - 1].partition == e.actor) --idx;
  const Tick deviation = pos - schedule.slot_start(idx);
  if (deviation > config_.thresholds.slot_jitter) {
    add(out, PropertyId::TpSlot, {e.seq},
        spec_.partition(e.actor).name + " slot started " + std::to_string(deviation) + " ticks late", e);
  }
}

void Monitor::close_frames(std::uint64_t upto, std::vector<Violation>& out) {
  for (; checked_frames_ < upto; ++checked_frames_) check_frame(checked_frames_, out);
}

void Monitor::check_frame(std::uint64_t f, std::vector<Violation>& out) {
  const auto& cells = ledger_.frame(f);
  TraceEvent anchor;
  anchor.tick = (f + 1) * spec_.schedule.major_frame();
  anchor.seq = last_seq_.value_or(0);

  for (const auto& p : spec_.partitions) {
    if (p.is_test()) continue;
    const Tick nominal = spec_.schedule.ticks_for(p.id);
    if (nominal == 0) continue;
    auto it = cells.find(p.id);
    const Tick active = it == cells.end() ? 0 : it->second.active;
    if (active < nominal) {
      auto sw = last_switch_seq_.find(p.id);
      anchor.actor = p.id;
      add(out, PropertyId::TpSlot, {sw == last_switch_seq_.end() ? anchor.seq : sw->second},
          p.name + " ran " + std::to_string(active) + " of " + std::to_string(nominal) + " ticks in frame " +
              std::to_string(f),
          anchor);
    }
  }

  if (!fault_frame_ || f < *fault_frame_ || !config_.baseline) return;
  const auto& baseline = *config_.baseline;
  if (f >= baseline.frames) return;
  for (const auto& [p, pb] : baseline.partitions) {
    auto it = cells.find(p);
    anchor.actor = p;
    const auto& expected = pb.checksums[f];
    const std::optional<Word> got = it == cells.end() ? std::nullopt : it->second.checksum;
    if (expected && got != expected) {
      add(out, PropertyId::FtCont, {fault_seq_},
          spec_.partition(p).name + (got ? " checksum deviates" : " checksum missing") + " in frame " +
              std::to_string(f),
          anchor);
      continue;
    }
    const Tick active = it == cells.end() ? 0 : it->second.active;
    const double floor = (1.0 - config_.thresholds.degradation) * static_cast<double>(pb.active_ticks[f]);
    if (static_cast<double>(active) < floor) {
      add(out, PropertyId::FtCont, {fault_seq_},
          spec_.partition(p).name + " active ticks fell to " + std::to_string(active) + " in frame " +
              std::to_string(f),
          anchor);
    }
  }
}

void Monitor::exercise(const TraceEvent& e) {
  switch (e.kind) {
    case EventKind::SchedSwitch: {
      const auto& s = e.as<SwitchInfo>();
      if (s.from && spec_.is_test(*s.from)) exercised_.insert(Mechanism::T2);
      return;
    }
    case EventKind::RegSnapshot: {
      const auto& r = e.as<RegisterInfo>();
      if (r.from && spec_.is_test(*r.from)) exercised_.insert(Mechanism::T1);
      return;
    }
    default:
      break;
  }
  if (!spec_.is_test(e.actor)) return;
  switch (e.kind) {
    case EventKind::MemRead:
    case EventKind::MemWrite:
    case EventKind::MemDenied: {
      const auto& m = e.as<MemAccessInfo>();
      if (!m.region) break;
      const auto& region = spec_.region(*m.region);
      if (region.space == AddressSpace::Kernel) {
        exercised_.insert(Mechanism::M2);
      } else if (region.owner != e.actor) {
        exercised_.insert(Mechanism::M1);
      }
      break;
    }
    case EventKind::DeviceAccess:
      exercised_.insert(Mechanism::M3);
      exercised_.insert(Mechanism::T4);
      break;
    case EventKind::Alloc:
    case EventKind::AllocDenied:
      exercised_.insert(Mechanism::M4);
      break;
    case EventKind::Hypercall:
    case EventKind::Trap: {
      const auto& c = e.as<CallInfo>();
      if (find_entry(c.surface, c.op) != nullptr) surface_ops_.insert({c.surface, c.op});
      if (c.surface == Surface::Pv && spec_.wcet.contains(c.op)) exercised_.insert(Mechanism::T3);
      break;
    }
    default:
      break;
  }
}

MonitorReport Monitor::finalize(Tick end_tick) {
  std::vector<Violation> out;
  if (!finalized_) {
    finalized_ = true;
    ledger_.finish(end_tick);
    close_frames(ledger_.complete_frames(), out);
  }

  MonitorReport report;
  std::optional<CovertMetrics> covert;
  if (config_.covert_receiver) {
    std::vector<std::uint8_t> bits;
    std::vector<Tick> latencies;
    std::vector<std::uint64_t> seqs;
    for (std::uint64_t f = 0; f < ledger_.complete_frames(); ++f) {
      const auto& cells = ledger_.frame(f);
      auto it = cells.find(*config_.covert_receiver);
      if (it == cells.end() || !it->second.latency) continue;
      bits.push_back(ledger_.test_busy(f) ? 1 : 0);
      latencies.push_back(*it->second.latency);
      seqs.push_back(it->second.latency_seq);
    }
    if (bits.size() >= kCovertMinSymbols) {
      covert = CovertMetrics{bits.size(), estimate_capacity(bits, latencies), decode_accuracy(bits, latencies)};
      if (covert->capacity > config_.thresholds.covert_capacity) {
        TraceEvent anchor;
        anchor.seq = seqs.front();
        anchor.tick = end_tick;
        anchor.actor = *config_.covert_receiver;
        seqs.resize(std::min(seqs.size(), kMaxEvidence));
        char buf[96];
        std::snprintf(buf, sizeof buf, "device latency carries %.4f bits/symbol over %zu frames", covert->capacity,
                      bits.size());
        add(out, PropertyId::TpCovert, seqs, buf, anchor);
      }
    }
  }
  violations_.insert(violations_.end(), out.begin(), out.end());

  report.violations = violations_;
  for (auto p : config_.enabled) {
    report.passed[p] = std::none_of(violations_.begin(), violations_.end(),
                                    [&](const Violation& v) { return v.property == p; });
  }
  report.exercised = exercised_;
  report.surface_ops = surface_ops_;
  report.covert = covert;
  report.events = events_;
  return report;
}

MonitorReport evaluate(const SystemSpec& spec, const MonitorConfig& config, const std::vector<TraceEvent>& trace,
                       Tick end_tick) {
  Monitor m(spec, config);
  for (const auto& e : trace) m.observe(e);
  return m.finalize(end_tick);
}

// --- covert capacity --------------------------------------------------------

std::vector<std::uint8_t> decode_bits(const std::vector<Tick>& latencies) {
  std::vector<std::uint8_t> out;
  if (latencies.empty()) return out;
  auto sorted = latencies;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const Tick median = *mid;
  const bool any_above = std::any_of(latencies.begin(), latencies.end(), [&](Tick t) { return t > median; });
  for (auto t : latencies) out.push_back(any_above ? (t > median ? 1 : 0) : (t >= median ? 1 : 0));
  return out;
}

double estimate_capacity(const std::vector<std::uint8_t>& bits, const std::vector<Tick>& latencies) {
  if (bits.empty() || bits.size() != latencies.size()) {
    throw LengthMismatch("capacity estimate needs equal, non-empty inputs (" + std::to_string(bits.size()) + " vs " +
                         std::to_string(latencies.size()) + ")");
  }
  const auto y = decode_bits(latencies);
  double joint[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < bits.size(); ++i) joint[bits[i] ? 1 : 0][y[i]] += 1.0;
  const double n = static_cast<double>(bits.size());
  double mi = 0.0;
  for (int b = 0; b < 2; ++b) {
    for (int v = 0; v < 2; ++v) {
      if (joint[b][v] == 0) continue;
      const double pb = (joint[b][0] + joint[b][1]) / n;
      const double pv = (joint[0][v] + joint[1][v]) / n;
      const double pj = joint[b][v] / n;
      mi += pj * std::log2(pj / (pb * pv));
    }
  }
  return std::clamp(mi, 0.0, 1.0);
}

double decode_accuracy(const std::vector<std::uint8_t>& bits, const std::vector<Tick>& latencies) {
  if (bits.empty() || bits.size() != latencies.size()) {
    throw LengthMismatch("accuracy needs equal, non-empty inputs");
  }
  const auto y = decode_bits(latencies);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) hits += (bits[i] ? 1 : 0) == y[i];
  return static_cast<double>(hits) / static_cast<double>(bits.size());
}

}  // namespace isoforge
