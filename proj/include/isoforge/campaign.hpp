#pragma once

// Campaign documents: the testbed description, monitor configuration and the
// list of techniques to run. JSON in, validated Campaign out.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isoforge/hv_model.hpp"
#include "isoforge/monitor.hpp"
#include "isoforge/workloads.hpp"

namespace isoforge {

struct FuzzParams {
  FuzzPolicy policy = FuzzPolicy::Sweep;
  std::size_t steps_per_case = kDefaultStepsPerCase;
  // Empty: both surfaces.
  std::optional<Surface> surface;
};

struct FaultParams {
  FaultPlan plan;
};

struct ScriptParams {
  std::vector<std::string> scripts;
  PartitionId target;
};

struct CovertParams {
  std::size_t n_bits = 64;
  PartitionId sender;
  PartitionId receiver;
};

struct TechniqueConfig {
  Technique technique = Technique::Fuzz;
  std::uint64_t seed = 0;
  std::uint64_t count = 1;
  FuzzParams fuzz;
  FaultParams fault;
  ScriptParams script;
  CovertParams covert;
};

inline constexpr std::uint64_t kDefaultTraceCap = 1'000'000;
inline constexpr std::uint64_t kDefaultFramesPerCase = 4;

struct Campaign {
  SystemSpec spec;
  MonitorConfig monitor;
  std::vector<TechniqueConfig> techniques;
  std::uint64_t frames_per_case = kDefaultFramesPerCase;
  std::size_t parallelism = 1;
  std::uint64_t trace_cap = kDefaultTraceCap;
};

// Five partitions (two test, three regular), one device and a kernel region.
SystemSpec builtin_testbed();

nlohmann::json system_to_json(const SystemSpec& spec);
// Throws SchemaError, UnknownDefect, UnknownProfile.
SystemSpec system_from_json(const nlohmann::json& j, const std::string& path = "system");

// Throws SchemaError, UnknownDefect, UnknownProfile.
Campaign load_campaign(const nlohmann::json& doc);
Campaign load_campaign_text(std::string_view text);
// Normalised document; loading it again yields the same campaign. Execution
// parallelism is left out so that it cannot change any recorded result.
nlohmann::json campaign_to_json(const Campaign& c);
// Also throws ConfigError when the file cannot be read.
Campaign load_campaign_file(const std::filesystem::path& path);

}  // namespace isoforge
