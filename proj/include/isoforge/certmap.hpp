#pragma once

// Certification mappings: isolation clauses in standards, mechanisms to
// functional requirements, and testing techniques to assurance requirements.
// Loaded once from the fixture files compiled into the library.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "isoforge/types.hpp"

namespace isoforge {

enum class IsolationProperty : std::uint8_t { Spatial, Temporal, Fault };
std::string_view to_string(IsolationProperty p);
std::optional<IsolationProperty> parse_isolation_property(std::string_view text);

struct SfrEntry {
  std::string ref;
  std::string name;
  MechanismSet mechanisms;
};

struct SarTechnique {
  Technique technique;
  bool implemented = false;
};

struct SarEntry {
  std::string ref;
  std::string name;
  std::string listed;  // technique column as written
  std::vector<SarTechnique> techniques;
  std::string note;
};

struct StandardCell {
  std::string detail;
  std::string locator;
};

struct StandardRow {
  std::string standard;
  std::string title;
  std::string scope;
  std::array<StandardCell, 3> cells;  // spatial, temporal, fault
};

struct StandardRef {
  std::string standard;
  std::string scope;
  IsolationProperty property = IsolationProperty::Spatial;
  std::string detail;
  std::string locator;
};

enum class FixtureId : std::uint8_t { Standards, SfrMapping, SarMapping };
inline constexpr std::array<FixtureId, 3> kAllFixtures = {FixtureId::Standards, FixtureId::SfrMapping,
                                                          FixtureId::SarMapping};
std::string_view fixture_name(FixtureId id);  // file stem under data/certmap
std::string_view fixture_text(FixtureId id);  // embedded bytes

class CertMap {
 public:
  // Throws SchemaError on malformed fixtures.
  CertMap(std::string_view standards, std::string_view sfrs, std::string_view sars);

  const std::vector<SfrEntry>& sfrs() const { return sfrs_; }
  const std::vector<SarEntry>& sars() const { return sars_; }
  const std::vector<StandardRow>& standards() const { return standards_; }

  // Throws UnknownSfr.
  const SfrEntry& sfr(std::string_view ref) const;
  MechanismSet mechanisms_for_sfr(std::string_view ref) const { return sfr(ref).mechanisms; }
  std::vector<std::string> sfrs_for_mechanism(Mechanism m) const;
  MechanismSet unmapped_mechanisms() const;

  // Throws UnknownSar.
  const SarEntry& sar(std::string_view ref) const;
  const std::vector<SarTechnique>& techniques_for_sar(std::string_view ref) const { return sar(ref).techniques; }

  // `standard` matches the short name ("DO-178C") or the full title.
  // Throws UnknownStandard.
  StandardRef standard_refs(std::string_view standard, IsolationProperty property) const;

  // Serialises one data set back to fixture form.
  std::string render(FixtureId id) const;

 private:
  std::vector<StandardRow> standards_;
  std::vector<SfrEntry> sfrs_;
  std::vector<SarEntry> sars_;
};

// The mappings shipped with the library.
const CertMap& builtin_certmap();

// "fuzz", "penetration(not implemented)".
std::string describe(const SarTechnique& t);

// --- coverage ---------------------------------------------------------------

enum class SfrStatus : std::uint8_t { Supported, Refuted, Untested };
std::string_view to_string(SfrStatus s);

struct EvidenceRef {
  std::uint64_t case_id = 0;
  std::uint64_t seq = 0;
  friend auto operator<=>(const EvidenceRef&, const EvidenceRef&) = default;
};

struct ViolationTag {
  MechanismSet mechanisms;
  EvidenceRef where;
};

struct CoverageInput {
  MechanismSet exercised;
  std::vector<ViolationTag> violations;
  std::set<Technique> techniques_run;
  std::size_t surface_ops_used = 0;
  std::size_t surface_ops_total = 0;
};

struct SfrCoverage {
  std::string ref;
  SfrStatus status = SfrStatus::Untested;
  MechanismSet violated;
  MechanismSet missing;  // mechanisms not exercised
  std::vector<EvidenceRef> evidence;
};

struct SarCoverage {
  std::string ref;
  bool exercised = false;
  std::vector<Technique> ran;
};

struct CoverageReport {
  std::vector<SfrCoverage> sfrs;
  std::vector<SarCoverage> sars;
  double tsfi_fraction = 0.0;
  std::size_t surface_ops_used = 0;
  std::size_t surface_ops_total = 0;

  const SfrCoverage& sfr(std::string_view ref) const;
  const SarCoverage& sar(std::string_view ref) const;
};

inline constexpr std::size_t kMaxEvidencePerSfr = 8;

CoverageReport coverage(const CertMap& map, const CoverageInput& input);

}  // namespace isoforge
