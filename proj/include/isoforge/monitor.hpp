#pragma once

// External run-time isolation monitor. Consumes a trace stream event by event
// and reports property violations tagged with the mechanism they implicate.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "isoforge/executor.hpp"
#include "isoforge/hv_model.hpp"

namespace isoforge {

enum class PropertyId : std::uint8_t { SpInt, SpConf, SpKern, SpQuota, TpSlot, TpWcet, TpResid, TpCovert, FtCont };

inline constexpr std::array<PropertyId, 9> kAllProperties = {
    PropertyId::SpInt,  PropertyId::SpConf,  PropertyId::SpKern,   PropertyId::SpQuota, PropertyId::TpSlot,
    PropertyId::TpWcet, PropertyId::TpResid, PropertyId::TpCovert, PropertyId::FtCont};

std::string_view to_string(PropertyId p);
std::optional<PropertyId> parse_property(std::string_view text);
// Empty for FT-CONT, which is tagged "fault-isolation" instead.
MechanismSet mechanisms_of(PropertyId p);
std::string tag_of(PropertyId p);

struct PartitionBaseline {
  std::vector<std::optional<Word>> checksums;  // per frame
  std::vector<Tick> active_ticks;               // per frame
  std::vector<std::optional<Tick>> latencies;   // first device latency per frame
  friend bool operator==(const PartitionBaseline&, const PartitionBaseline&) = default;
};

struct BaselineMetrics {
  std::uint64_t frames = 0;
  std::map<PartitionId, PartitionBaseline> partitions;
  friend bool operator==(const BaselineMetrics&, const BaselineMetrics&) = default;
};

// Throws SpecHasDefects.
BaselineMetrics capture_baseline(const SystemSpec& spec, const std::map<PartitionId, Workload>& workloads,
                                 std::uint64_t frames);

struct Thresholds {
  Tick slot_jitter = 1;
  double degradation = 0.2;
  double covert_capacity = 0.05;
};

struct MonitorConfig {
  std::set<PropertyId> enabled{kAllProperties.begin(), kAllProperties.end()};
  Thresholds thresholds;
  std::optional<BaselineMetrics> baseline;
  // Partition whose per-frame device latency is the covert-channel output.
  // Defaults to the first regular partition running device_client.
  std::optional<PartitionId> covert_receiver;
};

// Throws ConfigError when a threshold is out of range.
void validate(const MonitorConfig& config);

struct Violation {
  PropertyId property = PropertyId::SpInt;
  std::vector<std::uint64_t> evidence;  // trace seq numbers
  std::string detail;
  Tick tick = 0;
  PartitionId partition;

  MechanismSet mechanisms() const { return mechanisms_of(property); }
  std::string tag() const { return tag_of(property); }
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct CovertMetrics {
  std::size_t symbols = 0;
  double capacity = 0.0;
  double accuracy = 0.0;
  friend bool operator==(const CovertMetrics&, const CovertMetrics&) = default;
};

struct MonitorReport {
  std::vector<Violation> violations;
  std::map<PropertyId, bool> passed;  // enabled properties only
  MechanismSet exercised;
  std::set<std::pair<Surface, std::uint32_t>> surface_ops;
  std::optional<CovertMetrics> covert;
  std::uint64_t events = 0;

  bool clean() const { return violations.empty(); }
  std::size_t count(PropertyId p) const;
  friend bool operator==(const MonitorReport&, const MonitorReport&) = default;
};

// Per-frame bookkeeping over a trace: who was active for how long, the first
// checksum each partition published and its first device latency.
class FrameLedger {
 public:
  explicit FrameLedger(const SystemSpec& spec);

  void observe(const TraceEvent& e);
  // Closes the open interval at `end_tick`.
  void finish(Tick end_tick);

  struct Cell {
    Tick active = 0;
    std::optional<Word> checksum;
    std::optional<Tick> latency;
    std::uint64_t latency_seq = 0;
    bool test_busy = false;  // a test partition put busy work on the device
  };

  // Frames wholly before `tick`'s frame (or all when finished).
  std::uint64_t complete_frames() const { return complete_; }
  const std::map<PartitionId, Cell>& frame(std::uint64_t f) const;
  bool test_busy(std::uint64_t f) const;
  std::uint64_t frames_seen() const { return frames_.size(); }

 private:
  void credit(PartitionId p, Tick from, Tick to);
  std::map<PartitionId, Cell>& cell_frame(std::uint64_t f);

  const SystemSpec* spec_;
  Tick frame_len_;
  std::vector<std::map<PartitionId, Cell>> frames_;
  std::vector<bool> busy_;
  std::optional<PartitionId> active_;
  Tick since_ = 0;
  std::uint64_t complete_ = 0;
};

class Monitor {
 public:
  Monitor(const SystemSpec& spec, MonitorConfig config);

  // Throws OutOfOrderEvent when seq does not increase or time goes backwards.
  std::vector<Violation> observe(const TraceEvent& e);
  MonitorReport finalize(Tick end_tick);

 private:
  bool on(PropertyId p) const { return config_.enabled.contains(p); }
  void add(std::vector<Violation>& out, PropertyId p, std::vector<std::uint64_t> evidence, std::string detail,
           const TraceEvent& e);
  void check_memory(const TraceEvent& e, std::vector<Violation>& out);
  void check_call(const TraceEvent& e, std::vector<Violation>& out);
  void check_switch(const TraceEvent& e, std::vector<Violation>& out);
  void close_frames(std::uint64_t upto, std::vector<Violation>& out);
  void check_frame(std::uint64_t f, std::vector<Violation>& out);
  bool granted(RegionId r, PartitionId p, Access a) const;
  void exercise(const TraceEvent& e);

  const SystemSpec& spec_;
  MonitorConfig config_;
  FrameLedger ledger_;
  std::vector<Violation> violations_;
  std::map<RegionId, std::vector<Grant>> grants_;
  std::optional<std::uint64_t> last_seq_;
  Tick last_tick_ = 0;
  std::uint64_t checked_frames_ = 0;
  std::optional<std::uint64_t> fault_frame_;
  std::uint64_t fault_seq_ = 0;
  std::map<PartitionId, std::uint64_t> last_switch_seq_;
  std::uint64_t events_ = 0;
  MechanismSet exercised_;
  std::set<std::pair<Surface, std::uint32_t>> surface_ops_;
  bool finalized_ = false;
};

// Batch form of observe-then-finalize.
MonitorReport evaluate(const SystemSpec& spec, const MonitorConfig& config, const std::vector<TraceEvent>& trace,
                       Tick end_tick);

// Plug-in mutual information I(B;Y) in bits, Y = latency thresholded at its
// median. Throws LengthMismatch.
double estimate_capacity(const std::vector<std::uint8_t>& bits, const std::vector<Tick>& latencies);
std::vector<std::uint8_t> decode_bits(const std::vector<Tick>& latencies);
double decode_accuracy(const std::vector<std::uint8_t>& bits, const std::vector<Tick>& latencies);

}  // namespace isoforge
