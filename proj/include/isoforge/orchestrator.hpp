#pragma once

// Campaign runner: plans cases from the configured techniques, runs each one
// on a freshly restored system next to the regular workloads, monitors it and
// keeps the results in case-id order.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isoforge/campaign.hpp"
#include "isoforge/certmap.hpp"
#include "isoforge/monitor.hpp"

namespace isoforge {

struct PlannedCase {
  std::uint64_t id = 0;
  Technique technique = Technique::Fuzz;
  std::uint64_t seed = 0;
  std::vector<TestCase> programs;  // one per partition it drives
  std::uint64_t frames = 1;
  std::optional<PartitionId> covert_receiver;
  std::vector<std::uint8_t> sent_bits;
};

std::vector<PlannedCase> plan_cases(const Campaign& campaign);

enum class CaseStatus : std::uint8_t { Completed, HvReset };
std::string_view to_string(CaseStatus s);

struct CaseResult {
  PlannedCase planned;
  CaseStatus status = CaseStatus::Completed;
  std::string error;
  std::string trace_digest;
  std::string state_digest;
  std::uint64_t events = 0;
  Tick end_tick = 0;
  MonitorReport report;
  // Stored trace; empty past the campaign trace cap.
  std::vector<TraceEvent> trace;
  bool trace_truncated = false;
};

struct CampaignResults {
  Campaign campaign;
  std::vector<CaseResult> cases;
  std::string boot_digest;
  double wall_seconds = 0.0;  // metadata only; never part of the evidence

  std::size_t violation_count() const;
  // Digest over every case's trace digest, state digest and report.
  std::string digest() const;
};

// The campaign spec with no defects; used for baselines.
SystemSpec defect_free_twin(const SystemSpec& spec);

// Runs one planned case against `boot`. Exceptions from the model are caught
// and recorded as an hv_reset status.
CaseResult run_case(const Campaign& campaign, const Snapshot& boot, const BaselineMetrics& baseline,
                    const PlannedCase& planned);

struct RunOptions {
  std::optional<std::size_t> parallelism;  // overrides the campaign value
};

CampaignResults run_campaign(const Campaign& campaign, const RunOptions& options = {});

// Aggregate certification coverage for a set of results.
CoverageInput coverage_input(const CampaignResults& results);

// --- results log --------------------------------------------------------------

// NDJSON: campaign, boot, then per case its events, violations, a case record
// and a reset marker, then a summary.
void write_results_log(const CampaignResults& results, std::ostream& out);
// Rebuilds results (without traces) from a log. Throws SchemaError.
CampaignResults read_results_log(std::istream& in);

nlohmann::json report_to_json(const MonitorReport& r);
MonitorReport report_from_json(const nlohmann::json& j);

struct ReplayOutcome {
  bool found = false;
  bool matches = false;
  std::string stored_digest;
  std::string replayed_digest;
};

// Re-executes a stored case from the campaign echo in the log.
ReplayOutcome replay_case(std::istream& log, std::uint64_t case_id);

}  // namespace isoforge
