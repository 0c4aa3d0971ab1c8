#include <doctest.h>

#include <json.hpp>

#include "isoforge/campaign.hpp"
#include "isoforge/vm_interface.hpp"
#include "isoforge/workloads.hpp"
#include "support.hpp"

using namespace isoforge;
using isoforge::testing::of_kind;

namespace {

constexpr PartitionId T_PV{0}, R1{1}, T_HW{2}, R2{3};

std::uint32_t op(Hypercall h) { return static_cast<std::uint32_t>(h); }
std::uint32_t op(TrapReason r) { return static_cast<std::uint32_t>(r); }

CallRecord pv(SystemState& st, PartitionId actor, Hypercall h, std::vector<Word> args) {
  return dispatch_pv(st, actor, op(h), args);
}

CallRecord hw(SystemState& st, PartitionId actor, TrapReason r, std::vector<Word> args) {
  return dispatch_hwfv(st, actor, op(r), args);
}

Address region_base(const SystemSpec& spec, std::string_view name) { return spec.region(*spec.find_region(name)).base; }

}  // namespace

TEST_CASE("catalog sizes and stability") {
  CHECK(list_surface(Surface::Pv).size() == 10);
  CHECK(list_surface(Surface::Hwfv).size() == 6);
  CHECK(full_surface().size() == 16);
  const auto a = export_catalog();
  const auto b = export_catalog();
  CHECK(a == b);
  CHECK(nlohmann::json::accept(a));
  for (auto kind : {Surface::Pv, Surface::Hwfv}) {
    const auto& entries = list_surface(kind);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      CHECK(entries[i].id == i);
      CHECK(entries[i].arity() <= 4);
    }
  }
  CHECK(find_entry(Surface::Pv, "COPY")->id == 8);
  CHECK(find_entry(Surface::Hwfv, "CONTROL_REG")->id == 5);
  CHECK(find_entry(Surface::Pv, "NOPE") == nullptr);
}

TEST_CASE("declared cost: COPY is ceil(len/64), everything else 1") {
  const std::vector<Word> copy640{0, 0, 640}, copy1{0, 0, 1}, copy65{0, 0, 65};
  CHECK(declared_cost(Surface::Pv, op(Hypercall::Copy), copy640) == 10);
  CHECK(declared_cost(Surface::Pv, op(Hypercall::Copy), copy1) == 1);
  CHECK(declared_cost(Surface::Pv, op(Hypercall::Copy), copy65) == 2);
  const std::vector<Word> one{8192};
  CHECK(declared_cost(Surface::Pv, op(Hypercall::Alloc), one) == 1);
}

TEST_CASE("ALLOC under quota succeeds") {
  auto st = boot(builtin_testbed());
  const auto r = pv(st, T_PV, Hypercall::Alloc, {8192});
  CHECK(r.ok());
  CHECK_FALSE(of_kind(st.trace, EventKind::Alloc).empty());
  CHECK(st.trace.back().kind == EventKind::Hypercall);
}

TEST_CASE("IPC only on configured channels") {
  auto st = boot(builtin_testbed());
  CHECK(pv(st, T_PV, Hypercall::IpcSend, {T_HW.value, 1}).ok());
  CHECK(pv(st, T_PV, Hypercall::IpcSend, {R2.value, 1}).status == Status::Eperm);
}

TEST_CASE("COPY beyond its WCET bound aborts with ETIME") {
  // wcet(COPY) = 5, ceil(640/64) = 10 > 5: the call stops after 5 ticks worth
  // of words (5 * 64 bytes) and reports ETIME.
  const auto spec = builtin_testbed();
  REQUIRE(spec.wcet.at(op(Hypercall::Copy)) == 5);
  auto st = boot(spec);
  const Address own = region_base(spec, "tpv_ram");
  const auto r = pv(st, T_PV, Hypercall::Copy, {own + 0x400, own, 640});
  CHECK(r.status == Status::Etime);
  CHECK(r.duration == 5);
  const auto aborts = of_kind(st.trace, EventKind::WcetAbort);
  REQUIRE(aborts.size() == 1);
  CHECK(aborts[0].as<WcetInfo>().demanded == 10);
  CHECK(of_kind(st.trace, EventKind::MemWrite).size() == 5 * 64 / 8);

  auto bad = boot(seed_defect(spec, DefectId::T3));
  const auto r2 = pv(bad, T_PV, Hypercall::Copy, {own + 0x400, own, 640});
  CHECK(r2.ok());
  CHECK(r2.duration == 10);
  CHECK(of_kind(bad.trace, EventKind::WcetAbort).empty());
}

TEST_CASE("malformed calls are EINVAL and wrong surface is EPERM") {
  auto st = boot(builtin_testbed());
  CHECK(dispatch_pv(st, T_PV, 99, std::vector<Word>{}).status == Status::Einval);
  CHECK(pv(st, T_PV, Hypercall::Alloc, {}).status == Status::Einval);
  CHECK(pv(st, T_PV, Hypercall::Alloc, {1, 2}).status == Status::Einval);
  CHECK(dispatch_hwfv(st, T_HW, 42, std::vector<Word>{}).status == Status::Einval);
  CHECK(pv(st, T_HW, Hypercall::Yield, {}).status == Status::Eperm);
  CHECK(hw(st, T_PV, TrapReason::InfoQuery, {}).status == Status::Eperm);
  CHECK(pv(st, R1, Hypercall::Yield, {}).ok());
}

TEST_CASE("HWFV traps") {
  const auto spec = builtin_testbed();
  SUBCASE("MMIO write into a foreign MMIO region is denied") {
    auto st = boot(spec);
    CHECK(hw(st, T_HW, TrapReason::MmioWrite, {region_base(spec, "r2_mmio"), 1}).status == Status::Eperm);
    CHECK(hw(st, T_HW, TrapReason::MmioWrite, {region_base(spec, "thw_mmio"), 1}).ok());
  }
  SUBCASE("MMIO on RAM faults") {
    auto st = boot(spec);
    CHECK(hw(st, T_HW, TrapReason::MmioRead, {region_base(spec, "thw_ram")}).status == Status::Efault);
  }
  SUBCASE("HALT removes the partition from dispatch") {
    auto st = boot(spec);
    CHECK(hw(st, T_HW, TrapReason::Halt, {}).ok());
    CHECK(st.is_halted(T_HW));
    const auto faults = of_kind(st.trace, EventKind::PartFault);
    REQUIRE(faults.size() == 1);
    CHECK(faults[0].as<FaultInfo>().kind == FaultKind::Halt);
  }
  SUBCASE("CONTROL_REG is denied, and mutates kernel memory under D-M2") {
    auto st = boot(spec);
    CHECK(hw(st, T_HW, TrapReason::ControlReg, {0, 0x1234}).status == Status::Eperm);
    auto bad = boot(seed_defect(spec, DefectId::M2));
    CHECK(hw(bad, T_HW, TrapReason::ControlReg, {0, 0x1234}).ok());
    CHECK(bad.memory_words.at(region_base(spec, "kernel")) == 0x1234);
  }
}

TEST_CASE("MEM_MAP grants follow the owner policy") {
  const auto spec = builtin_testbed();
  auto st = boot(spec);
  const auto r1_ram = spec.find_region("r1_ram")->value;
  const auto tpv_ram = spec.find_region("tpv_ram")->value;
  const auto kernel = spec.find_region("kernel")->value;
  CHECK(pv(st, T_PV, Hypercall::MemMap, {r1_ram, T_PV.value, 2}).status == Status::Eperm);
  CHECK(pv(st, T_PV, Hypercall::MemMap, {kernel, T_PV.value, 2}).status == Status::Eperm);
  CHECK(pv(st, T_PV, Hypercall::MemMap, {tpv_ram, R1.value, 1}).ok());
  CHECK(st.may_access(spec.region(RegionId{tpv_ram}), R1, Access::Read));
  CHECK(pv(st, T_PV, Hypercall::MemUnmap, {tpv_ram, R1.value}).ok());
  CHECK_FALSE(st.may_access(spec.region(RegionId{tpv_ram}), R1, Access::Read));
}

TEST_CASE("total robustness over the cross product of argument domains") {
  // Every combination of domain values (plus one value beyond each bound) for
  // every operation and actor returns a status, and the hypervisor invariants
  // still hold afterwards.
  const auto spec = builtin_testbed();
  const auto layout = make_fuzz_layout(spec);
  std::size_t calls = 0;
  for (const auto& entry : full_surface()) {
    for (PartitionId actor : {T_PV, T_HW, R1}) {
      auto st = boot(spec);
      std::vector<std::vector<Word>> values;
      for (const auto& d : entry.args) {
        auto v = domain_values(d, layout, entry.surface);
        if (v.size() > 6) v.resize(6);
        if (d.max != ~Word{0}) v.push_back(d.max + 1);
        values.push_back(std::move(v));
      }
      std::vector<std::size_t> idx(values.size(), 0);
      for (bool more = true; more;) {
        std::vector<Word> args;
        for (std::size_t i = 0; i < idx.size(); ++i) args.push_back(values[i][idx[i]]);
        const auto rec = entry.surface == Surface::Pv ? dispatch_pv(st, actor, entry.id, args)
                                                      : dispatch_hwfv(st, actor, entry.id, args);
        CHECK(rec.duration >= 1);
        ++calls;
        more = false;
        for (std::size_t i = 0; i < idx.size(); ++i) {
          if (++idx[i] < values[i].size()) {
            more = true;
            break;
          }
          idx[i] = 0;
        }
      }
      for (const auto& p : st.spec.partitions) CHECK(st.alloc_used.at(p.id) <= p.memory_quota);
      for (const auto& e : of_kind(st.trace, EventKind::MemWrite)) {
        const auto& r = st.spec.region(*e.as<MemAccessInfo>().region);
        CHECK(r.space == AddressSpace::User);
        CHECK(st.may_access(r, e.actor, Access::Write));
      }
    }
  }
  CHECK(calls > 1000);
}
