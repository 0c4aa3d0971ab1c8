#include <doctest.h>

#include "isoforge/campaign.hpp"
#include "isoforge/executor.hpp"
#include "isoforge/workloads.hpp"
#include "support.hpp"

using namespace isoforge;
using isoforge::testing::mini_spec;
using isoforge::testing::of_kind;

namespace {

constexpr PartitionId T_PV{0}, R1{1};

TestCase program(PartitionId target, std::string_view text) {
  auto tc = parse_script(text);
  tc.target = target;
  return tc;
}

std::vector<TraceEvent> calls_by(const std::vector<TraceEvent>& trace, PartitionId p) {
  std::vector<TraceEvent> out;
  for (const auto& e : trace) {
    if ((e.kind == EventKind::Hypercall || e.kind == EventKind::Trap) && e.actor == p) out.push_back(e);
  }
  return out;
}

}  // namespace

TEST_CASE("one call per active tick") {
  auto spec = mini_spec({4, 4});
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.add_program(program(PartitionId{0}, "pv YIELD\npv YIELD\npv YIELD\npv YIELD\npv YIELD\npv YIELD\n"));
  execute_plan(st, plan, 2, nullptr);
  const auto calls = calls_by(st.trace, PartitionId{0});
  REQUIRE(calls.size() == 6);
  // Slot 0 covers ticks 0..3 of each 8-tick frame.
  const std::vector<Tick> expect{0, 1, 2, 3, 8, 9};
  for (std::size_t i = 0; i < calls.size(); ++i) CHECK(calls[i].tick == expect[i]);
}

TEST_CASE("waits count ticks or frames") {
  auto spec = mini_spec({4, 4});
  SUBCASE("ticks") {
    auto st = boot(spec);
    ExecutionPlan plan;
    plan.add_program(program(PartitionId{0}, "wait 2\npv INFO\n"));
    execute_plan(st, plan, 1, nullptr);
    const auto calls = calls_by(st.trace, PartitionId{0});
    REQUIRE(calls.size() == 1);
    CHECK(calls[0].tick == 2);
  }
  SUBCASE("ticks spanning a foreign slot") {
    auto st = boot(spec);
    ExecutionPlan plan;
    plan.add_program(program(PartitionId{0}, "wait 5\npv INFO\n"));
    execute_plan(st, plan, 2, nullptr);
    const auto calls = calls_by(st.trace, PartitionId{0});
    REQUIRE(calls.size() == 1);
    CHECK(calls[0].tick == 8);
  }
  SUBCASE("frames") {
    auto st = boot(spec);
    ExecutionPlan plan;
    plan.add_program(program(PartitionId{1}, "wait 2 frames\npv INFO\n"));
    execute_plan(st, plan, 3, nullptr);
    const auto calls = calls_by(st.trace, PartitionId{1});
    REQUIRE(calls.size() == 1);
    CHECK(calls[0].tick == 2 * 8 + 4);
  }
}

TEST_CASE("the sink sees every event once, in order") {
  const auto spec = builtin_testbed();
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.workloads = bind_workloads(spec);
  plan.add_program(program(T_PV, "pv ALLOC 64\npv COPY 0x10400 0x10000 640\ninject crash\n"));
  std::vector<TraceEvent> seen;
  execute_plan(st, plan, 3, [&](const TraceEvent& e) { seen.push_back(e); });
  REQUIRE(seen.size() == st.trace.size());
  CHECK(std::equal(seen.begin(), seen.end(), st.trace.begin()));
  for (std::size_t i = 1; i < seen.size(); ++i) {
    CHECK(seen[i].seq == seen[i - 1].seq + 1);
    CHECK(seen[i].tick >= seen[i - 1].tick);
  }
}

TEST_CASE("a program replaces the partition's workload") {
  const auto spec = builtin_testbed();
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.workloads = bind_workloads(spec);
  REQUIRE(plan.workloads.contains(R1));
  plan.add_program(program(R1, "pv INFO\n"));
  execute_plan(st, plan, 3, nullptr);
  const auto calls = calls_by(st.trace, R1);
  REQUIRE(calls.size() == 1);
  CHECK(calls[0].as<CallInfo>().op == static_cast<std::uint32_t>(Hypercall::Info));
}

TEST_CASE("crash halts the program and the partition") {
  const auto spec = builtin_testbed();
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.add_program(program(T_PV, "inject crash\npv INFO\npv INFO\n"));
  Runner runner(st, plan);
  runner.run_frames(2, nullptr);
  CHECK(st.is_halted(T_PV));
  CHECK(calls_by(st.trace, T_PV).empty());
  CHECK(runner.programs_done());
}

TEST_CASE("a leak repeats once per frame") {
  auto spec = mini_spec({4, 4});
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.add_program(program(PartitionId{0}, "inject leak 1000\n"));
  execute_plan(st, plan, 5, nullptr);
  const auto allocs = of_kind(st.trace, EventKind::Alloc);
  const auto fixed = spec.static_bytes(PartitionId{0});
  REQUIRE(allocs.size() == 5);
  for (std::size_t f = 0; f < allocs.size(); ++f) {
    CHECK(allocs[f].tick / 8 == f);
    CHECK(allocs[f].as<AllocInfo>().used_after == fixed + 1000 * (f + 1));
  }
}

TEST_CASE("register and memory corruption act on the target only") {
  auto spec = mini_spec({4, 4});
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.add_program(program(PartitionId{0}, "inject reg_corrupt 2 0xBEEF\ninject mem_corrupt 0x20000 7\n"));
  execute_plan(st, plan, 1, nullptr);
  CHECK(st.saved_contexts.at(PartitionId{0}).values[2] == 0xBEEF);
  CHECK(st.saved_contexts.at(PartitionId{1}).values[2] == 0);
  CHECK(of_kind(st.trace, EventKind::MemDenied).size() == 1);
  CHECK(of_kind(st.trace, EventKind::MemWrite).empty());
}

TEST_CASE("greedy takes effect at the end of the slot") {
  auto spec = seed_defect(mini_spec({4, 4}), DefectId::T2);
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.add_program(program(PartitionId{0}, "greedy 2\n"));
  execute_plan(st, plan, 1, nullptr);
  const auto overruns = of_kind(st.trace, EventKind::SlotOverrun);
  REQUIRE(overruns.size() == 1);
  CHECK(overruns[0].as<OverrunInfo>().extra == 2);
  CHECK(overruns[0].as<OverrunInfo>().delayed == PartitionId{1});
}

TEST_CASE("execution is deterministic") {
  const auto spec = builtin_testbed();
  auto once = [&] {
    auto st = boot(spec);
    ExecutionPlan plan;
    plan.workloads = bind_workloads(spec);
    plan.add_program(program(T_PV, "pv ALLOC 4096\ndev busy\nwait 1 frames\ndev idle\n"));
    execute_plan(st, plan, 4, nullptr);
    return digest_of(st.trace);
  };
  CHECK(once() == once());
}
