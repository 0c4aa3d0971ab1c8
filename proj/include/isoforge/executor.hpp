#pragma once

// Interprets test-case step programs and representative workloads on top of
// the hypervisor model, one tick at a time.

#include <functional>
#include <map>

#include "isoforge/hv_model.hpp"
#include "isoforge/workloads.hpp"

namespace isoforge {

struct ExecutionPlan {
  // A program bound to a partition replaces that partition's workload.
  std::map<PartitionId, TestCase> programs;
  std::map<PartitionId, Workload> workloads;

  void add_program(const TestCase& tc) { programs.insert_or_assign(tc.target, tc); }
};

// Workloads bound to every regular partition that names a profile in `role`.
// Throws UnknownProfile.
std::map<PartitionId, Workload> bind_workloads(const SystemSpec& spec);

using EventSink = std::function<void(const TraceEvent&)>;

class Runner {
 public:
  Runner(SystemState& state, ExecutionPlan plan);

  // Runs whole major frames; every new trace event is passed to `sink` in
  // sequence order.
  void run_frames(std::uint64_t frames, const EventSink& sink);
  // True once every program has executed its last step.
  bool programs_done() const;

 private:
  struct Program {
    TestCase tc;
    std::size_t pc = 0;
    bool waiting = false;
    std::uint64_t until = 0;
  };

  void step_partition(PartitionId p);
  void step_program(Program& prog, PartitionId p);
  void execute(const Step& step, PartitionId p);
  void drain(const EventSink& sink);

  SystemState& state_;
  std::map<PartitionId, Program> programs_;
  std::map<PartitionId, Workload> workloads_;
  std::map<PartitionId, std::uint64_t> last_frame_;
  std::map<PartitionId, std::uint64_t> leaks_;
  std::size_t drained_ = 0;
};

// Boots nothing; runs `plan` on an already booted state for `frames` frames.
void execute_plan(SystemState& state, const ExecutionPlan& plan, std::uint64_t frames, const EventSink& sink);

}  // namespace isoforge
