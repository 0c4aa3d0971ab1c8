#pragma once

// Evidence package for a finished campaign. The machine document is the
// single source; the text rendering is produced from it.

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "isoforge/orchestrator.hpp"

namespace isoforge {

enum class EvidenceFormat : std::uint8_t { Human, Machine };
std::string_view to_string(EvidenceFormat f);
std::optional<EvidenceFormat> parse_evidence_format(std::string_view text);

// Sorted keys, floats rounded to six decimals, no wall-clock or parallelism.
nlohmann::json evidence_document(const CampaignResults& results);

// Text form of an evidence document.
std::string render_human(const nlohmann::json& doc);

std::string emit_evidence(const CampaignResults& results, EvidenceFormat format);

}  // namespace isoforge
