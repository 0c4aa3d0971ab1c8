#include "isoforge/executor.hpp"

namespace isoforge {

std::map<PartitionId, Workload> bind_workloads(const SystemSpec& spec) {
  std::map<PartitionId, Workload> out;
  for (const auto& p : spec.partitions) {
    if (!p.is_test() && !p.role.empty()) out.emplace(p.id, representative(p.role));
  }
  return out;
}

Runner::Runner(SystemState& state, ExecutionPlan plan) : state_(state), workloads_(std::move(plan.workloads)) {
  for (auto& [p, tc] : plan.programs) programs_.emplace(p, Program{std::move(tc)});
}

bool Runner::programs_done() const {
  for (const auto& [p, prog] : programs_) {
    if (prog.pc < prog.tc.steps.size() && !state_.is_halted(p)) return false;
  }
  return true;
}

void Runner::run_frames(std::uint64_t frames, const EventSink& sink) {
  const Tick total = frames * state_.spec.schedule.major_frame();
  for (Tick i = 0; i < total; ++i) {
    const PartitionId p = state_.active;
    if (!state_.is_halted(p)) step_partition(p);
    drain(sink);
    advance(state_, 1);
  }
  drain(sink);
}

void Runner::drain(const EventSink& sink) {
  for (; drained_ < state_.trace.size(); ++drained_) {
    if (sink) sink(state_.trace[drained_]);
  }
}

void Runner::step_partition(PartitionId p) {
  const std::uint64_t frame = state_.frame();
  auto last = last_frame_.find(p);
  if (last == last_frame_.end() || last->second != frame) {
    last_frame_[p] = frame;
    if (auto leak = leaks_.find(p); leak != leaks_.end()) alloc_memory(state_, p, leak->second);
    auto wl = workloads_.find(p);
    if (wl != workloads_.end() && !programs_.contains(p)) wl->second.run_frame(state_, p, frame);
  }
  if (auto prog = programs_.find(p); prog != programs_.end()) step_program(prog->second, p);
}

// At most one non-wait step per tick; a satisfied wait falls through to the
// next step in the same tick.
void Runner::step_program(Program& prog, PartitionId p) {
  const auto& steps = prog.tc.steps;
  while (prog.pc < steps.size() && !state_.is_halted(p)) {
    const Step& step = steps[prog.pc];
    if (const auto* w = std::get_if<Wait>(&step)) {
      const std::uint64_t now = w->frames ? state_.frame() : state_.tick;
      if (!prog.waiting) {
        prog.waiting = true;
        prog.until = now + w->count;
      }
      if (now < prog.until) return;
      prog.waiting = false;
      ++prog.pc;
      continue;
    }
    ++prog.pc;
    execute(step, p);
    return;
  }
}

void Runner::execute(const Step& step, PartitionId p) {
  if (const auto* c = std::get_if<PvCall>(&step)) {
    dispatch_pv(state_, p, c->id, c->args);
  } else if (const auto* t = std::get_if<HwfvTrap>(&step)) {
    dispatch_hwfv(state_, p, t->reason, t->payload);
  } else if (const auto* f = std::get_if<InjectFault>(&step)) {
    switch (f->kind) {
      case FaultKind::Crash:
      case FaultKind::Halt:
        halt_partition(state_, p, FaultKind::Crash);
        break;
      case FaultKind::MemCorrupt:
        state_.emit(EventKind::PartFault, p, FaultInfo{f->kind, f->a});
        write_word(state_, p, f->a, f->b);
        break;
      case FaultKind::RegCorrupt:
        state_.emit(EventKind::PartFault, p, FaultInfo{f->kind, f->a});
        set_register(state_, p, static_cast<std::size_t>(f->a), f->b);
        break;
      case FaultKind::Leak:
        state_.emit(EventKind::PartFault, p, FaultInfo{f->kind, f->a});
        leaks_[p] = f->a;
        alloc_memory(state_, p, f->a);
        break;
    }
  } else if (const auto* g = std::get_if<SetGreedy>(&step)) {
    state_.greedy[p] = g->extra;
  } else if (const auto* d = std::get_if<DevPulse>(&step)) {
    device_access(state_, p, d->busy ? state_.spec.device.pulse_busy_ticks : 0);
  }
}

void execute_plan(SystemState& state, const ExecutionPlan& plan, std::uint64_t frames, const EventSink& sink) {
  Runner runner(state, plan);
  runner.run_frames(frames, sink);
}

}  // namespace isoforge
