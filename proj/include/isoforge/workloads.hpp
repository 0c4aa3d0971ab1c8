#pragma once

// Stimulus generation for test partitions and representative workloads for
// regular partitions. Every generator is a pure function of its inputs.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "isoforge/hv_model.hpp"
#include "isoforge/vm_interface.hpp"

namespace isoforge {

struct PvCall {
  std::uint32_t id = 0;
  std::vector<Word> args;
  friend bool operator==(const PvCall&, const PvCall&) = default;
};

struct HwfvTrap {
  std::uint32_t reason = 0;
  std::vector<Word> payload;
  friend bool operator==(const HwfvTrap&, const HwfvTrap&) = default;
};

// crash | mem_corrupt(addr, value) | reg_corrupt(index, value) | leak(bytes per frame)
struct InjectFault {
  FaultKind kind = FaultKind::Crash;
  Word a = 0;
  Word b = 0;
  friend bool operator==(const InjectFault&, const InjectFault&) = default;
};

struct Wait {
  std::uint64_t count = 0;
  bool frames = false;  // count is in major frames rather than ticks
  friend bool operator==(const Wait&, const Wait&) = default;
};

struct SetGreedy {
  Tick extra = 0;
  friend bool operator==(const SetGreedy&, const SetGreedy&) = default;
};

struct DevPulse {
  bool busy = false;
  friend bool operator==(const DevPulse&, const DevPulse&) = default;
};

using Step = std::variant<PvCall, HwfvTrap, InjectFault, Wait, SetGreedy, DevPulse>;

struct TestCase {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  Technique technique = Technique::Scripted;
  std::vector<Step> steps;
  PartitionId target;
  friend bool operator==(const TestCase&, const TestCase&) = default;
};

// Frames needed for every step of `tc` to get a chance to run.
std::uint64_t required_frames(const TestCase& tc, const SystemSpec& spec);

// --- scripted tests ---------------------------------------------------------

// Line-oriented script; one step per non-empty line, '#' starts a comment.
//   pv <NAME|id> <args...>     hwfv <REASON|id> <args...>
//   inject crash | inject mem_corrupt <addr> <value> | inject reg_corrupt <idx> <value> | inject leak <bytes>
//   wait <ticks> | wait <n> frames     greedy <ticks>     dev busy|idle
// Throws ParseError.
TestCase parse_script(std::string_view text);
std::string render_script(const std::vector<Step>& steps);
std::string render_step(const Step& step);

// --- fuzzing ----------------------------------------------------------------

enum class FuzzPolicy : std::uint8_t { Sweep, Random, Malformed };
std::string_view to_string(FuzzPolicy p);
std::optional<FuzzPolicy> parse_fuzz_policy(std::string_view text);

struct FuzzTarget {
  PartitionId actor;
  // own, foreign regular, foreign test, kernel, own MMIO, foreign MMIO,
  // unmapped, last word of own memory
  std::vector<Address> addresses;
};

// Concrete values behind each argument domain for one system layout.
struct FuzzLayout {
  std::optional<FuzzTarget> pv;
  std::optional<FuzzTarget> hwfv;
  std::uint32_t partitions = 0;
  std::uint32_t regions = 0;

  const std::optional<FuzzTarget>& target(Surface s) const { return s == Surface::Pv ? pv : hwfv; }
};

FuzzLayout make_fuzz_layout(const SystemSpec& spec);
std::vector<Word> domain_values(const ArgDomain& domain, const FuzzLayout& layout, Surface surface);

inline constexpr std::size_t kDefaultStepsPerCase = 8;

std::vector<TestCase> gen_fuzz(std::uint64_t seed, const std::vector<SurfaceEntry>& catalog, FuzzPolicy policy,
                               std::size_t n, const FuzzLayout& layout,
                               std::size_t steps_per_case = kDefaultStepsPerCase);

// --- fault injection --------------------------------------------------------

struct FaultPlan {
  std::vector<FaultKind> kinds;
  std::vector<PartitionId> targets;
  std::vector<std::uint64_t> frames;
  std::uint64_t leak_bytes = 1024;
  // mem_corrupt target; defaults to the first region owned by a regular partition.
  std::optional<Address> corrupt_addr;
  Word corrupt_value = 0xBADC0FFEE;
  std::size_t reg_index = 0;
  Word reg_value = 0xCAFE;
};

// One case per (kind, target, frame). Throws PlanTargetsRegularPartition.
std::vector<TestCase> gen_fault_plan(std::uint64_t seed, const FaultPlan& plan, const SystemSpec& spec);

// --- covert channel probes --------------------------------------------------

struct CovertPair {
  TestCase sender;
  TestCase receiver;
  std::vector<std::uint8_t> sent_bits;
};

CovertPair covert_pair(std::uint64_t seed, std::size_t n_bits, PartitionId sender, PartitionId receiver);

// --- representative workloads -----------------------------------------------

enum class WorkloadProfile : std::uint8_t { PeriodicCompute, MemoryToucher, DeviceClient };
std::string_view to_string(WorkloadProfile p);
// Throws UnknownProfile.
WorkloadProfile parse_profile(std::string_view name);

// A regular partition's per-frame behaviour. Each frame it does its work,
// leaves a value in its registers and publishes a checksum via CONSOLE_WRITE.
class Workload {
 public:
  explicit Workload(WorkloadProfile profile) : profile_(profile) {}

  WorkloadProfile profile() const noexcept { return profile_; }
  Word run_frame(SystemState& state, PartitionId self, std::uint64_t frame) const;

 private:
  WorkloadProfile profile_;
};

// Throws UnknownProfile.
Workload representative(std::string_view profile);

Word mix64(Word x);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace isoforge
