#include "isoforge/certmap.hpp"

#include <algorithm>

#include <json.hpp>

#include "isoforge/errors.hpp"

namespace isoforge {

namespace fixtures {
extern const std::string_view kStandards;
extern const std::string_view kSfrMapping;
extern const std::string_view kSarMapping;
}  // namespace fixtures

using ojson = nlohmann::ordered_json;

std::string_view to_string(IsolationProperty p) {
  switch (p) {
    case IsolationProperty::Spatial: return "spatial";
    case IsolationProperty::Temporal: return "temporal";
    case IsolationProperty::Fault: return "fault";
  }
  return "?";
}

std::optional<IsolationProperty> parse_isolation_property(std::string_view text) {
  for (auto p : {IsolationProperty::Spatial, IsolationProperty::Temporal, IsolationProperty::Fault}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

std::string_view to_string(SfrStatus s) {
  switch (s) {
    case SfrStatus::Supported: return "supported";
    case SfrStatus::Refuted: return "refuted";
    case SfrStatus::Untested: return "untested";
  }
  return "?";
}

std::string_view fixture_name(FixtureId id) {
  switch (id) {
    case FixtureId::Standards: return "standards";
    case FixtureId::SfrMapping: return "sfr_mapping";
    case FixtureId::SarMapping: return "sar_mapping";
  }
  return "?";
}

std::string_view fixture_text(FixtureId id) {
  switch (id) {
    case FixtureId::Standards: return fixtures::kStandards;
    case FixtureId::SfrMapping: return fixtures::kSfrMapping;
    case FixtureId::SarMapping: return fixtures::kSarMapping;
  }
  return {};
}

std::string describe(const SarTechnique& t) {
  std::string out(to_string(t.technique));
  if (!t.implemented) out += "(not implemented)";
  return out;
}

namespace {

constexpr std::array<IsolationProperty, 3> kProperties = {IsolationProperty::Spatial, IsolationProperty::Temporal,
                                                          IsolationProperty::Fault};

ojson parse_doc(std::string_view text, const std::string& name) {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(name, e.what());
  }
}

std::string str(const ojson& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string()) {
    throw SchemaError(path + "." + key, "expected a string");
  }
  return j.at(key).get<std::string>();
}

const ojson& arr(const ojson& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array()) {
    throw SchemaError(path + "." + key, "expected an array");
  }
  return j.at(key);
}

}  // namespace

CertMap::CertMap(std::string_view standards, std::string_view sfrs, std::string_view sars) {
  const auto sdoc = parse_doc(standards, "standards");
  const auto& srows = arr(sdoc, "standards", "standards");
  for (std::size_t i = 0; i < srows.size(); ++i) {
    const auto path = "standards[" + std::to_string(i) + "]";
    const auto& r = srows[i];
    StandardRow row;
    row.standard = str(r, "standard", path);
    row.title = str(r, "title", path);
    row.scope = str(r, "scope", path);
    for (std::size_t k = 0; k < kProperties.size(); ++k) {
      const std::string key(to_string(kProperties[k]));
      if (!r.contains(key)) throw SchemaError(path + "." + key, "missing cell");
      row.cells[k] = {str(r.at(key), "detail", path + "." + key), str(r.at(key), "locator", path + "." + key)};
    }
    standards_.push_back(std::move(row));
  }

  const auto fdoc = parse_doc(sfrs, "sfr_mapping");
  const auto& frows = arr(fdoc, "sfrs", "sfr_mapping");
  for (std::size_t i = 0; i < frows.size(); ++i) {
    const auto path = "sfrs[" + std::to_string(i) + "]";
    SfrEntry e{str(frows[i], "ref", path), str(frows[i], "class", path), {}};
    for (const auto& m : arr(frows[i], "mechanisms", path)) {
      auto mech = m.is_string() ? parse_mechanism(m.get<std::string>()) : std::nullopt;
      if (!mech) throw SchemaError(path + ".mechanisms", "unknown mechanism " + m.dump());
      e.mechanisms.insert(*mech);
    }
    if (e.mechanisms.empty()) throw SchemaError(path + ".mechanisms", "must not be empty");
    sfrs_.push_back(std::move(e));
  }

  const auto adoc = parse_doc(sars, "sar_mapping");
  const auto& arows = arr(adoc, "sars", "sar_mapping");
  for (std::size_t i = 0; i < arows.size(); ++i) {
    const auto path = "sars[" + std::to_string(i) + "]";
    const auto& r = arows[i];
    SarEntry e{str(r, "ref", path), str(r, "requirement", path), str(r, "listed", path), {}, {}};
    for (const auto& t : arr(r, "techniques", path)) {
      auto tech = t.is_string() ? parse_technique(t.get<std::string>()) : std::nullopt;
      if (!tech) throw SchemaError(path + ".techniques", "unknown technique " + t.dump());
      e.techniques.push_back({*tech, implemented(*tech)});
    }
    if (e.techniques.empty()) throw SchemaError(path + ".techniques", "must not be empty");
    if (r.contains("note")) e.note = str(r, "note", path);
    sars_.push_back(std::move(e));
  }
}

const CertMap& builtin_certmap() {
  static const CertMap map(fixture_text(FixtureId::Standards), fixture_text(FixtureId::SfrMapping),
                           fixture_text(FixtureId::SarMapping));
  return map;
}

const SfrEntry& CertMap::sfr(std::string_view ref) const {
  for (const auto& e : sfrs_) {
    if (e.ref == ref) return e;
  }
  throw UnknownSfr(std::string(ref));
}

std::vector<std::string> CertMap::sfrs_for_mechanism(Mechanism m) const {
  std::vector<std::string> out;
  for (const auto& e : sfrs_) {
    if (e.mechanisms.contains(m)) out.push_back(e.ref);
  }
  return out;
}

MechanismSet CertMap::unmapped_mechanisms() const {
  MechanismSet out;
  for (auto m : kAllMechanisms) {
    if (sfrs_for_mechanism(m).empty()) out.insert(m);
  }
  return out;
}

const SarEntry& CertMap::sar(std::string_view ref) const {
  for (const auto& e : sars_) {
    if (e.ref == ref) return e;
  }
  throw UnknownSar(std::string(ref));
}

StandardRef CertMap::standard_refs(std::string_view standard, IsolationProperty property) const {
  for (const auto& row : standards_) {
    if (row.standard == standard || row.title == standard) {
      const auto& cell = row.cells[static_cast<std::size_t>(property)];
      return StandardRef{row.standard, row.scope, property, cell.detail, cell.locator};
    }
  }
  throw UnknownStandard("'" + std::string(standard) + "'");
}

std::string CertMap::render(FixtureId id) const {
  ojson doc;
  doc["version"] = 1;
  switch (id) {
    case FixtureId::Standards: {
      auto rows = ojson::array();
      for (const auto& r : standards_) {
        ojson j;
        j["standard"] = r.standard;
        j["title"] = r.title;
        j["scope"] = r.scope;
        for (std::size_t k = 0; k < kProperties.size(); ++k) {
          j[std::string(to_string(kProperties[k]))] = ojson{{"detail", r.cells[k].detail}, {"locator", r.cells[k].locator}};
        }
        rows.push_back(std::move(j));
      }
      doc["standards"] = std::move(rows);
      break;
    }
    case FixtureId::SfrMapping: {
      auto rows = ojson::array();
      for (const auto& e : sfrs_) {
        ojson j;
        j["ref"] = e.ref;
        j["class"] = e.name;
        auto ms = ojson::array();
        for (auto m : e.mechanisms.items()) ms.push_back(to_string(m));
        j["mechanisms"] = std::move(ms);
        rows.push_back(std::move(j));
      }
      doc["sfrs"] = std::move(rows);
      break;
    }
    case FixtureId::SarMapping: {
      auto rows = ojson::array();
      for (const auto& e : sars_) {
        ojson j;
        j["ref"] = e.ref;
        j["requirement"] = e.name;
        j["listed"] = e.listed;
        auto ts = ojson::array();
        for (const auto& t : e.techniques) ts.push_back(to_string(t.technique));
        j["techniques"] = std::move(ts);
        if (!e.note.empty()) j["note"] = e.note;
        rows.push_back(std::move(j));
      }
      doc["sars"] = std::move(rows);
      break;
    }
  }
  return doc.dump(2) + "\n";
}

// --- coverage ---------------------------------------------------------------

const SfrCoverage& CoverageReport::sfr(std::string_view ref) const {
  for (const auto& s : sfrs) {
    if (s.ref == ref) return s;
  }
  throw UnknownSfr(std::string(ref));
}

const SarCoverage& CoverageReport::sar(std::string_view ref) const {
  for (const auto& s : sars) {
    if (s.ref == ref) return s;
  }
  throw UnknownSar(std::string(ref));
}

CoverageReport coverage(const CertMap& map, const CoverageInput& input) {
  CoverageReport report;
  for (const auto& e : map.sfrs()) {
    SfrCoverage c;
    c.ref = e.ref;
    for (const auto& v : input.violations) {
      if (!v.mechanisms.intersects(e.mechanisms)) continue;
      for (auto m : e.mechanisms.items()) {
        if (v.mechanisms.contains(m)) c.violated.insert(m);
      }
      if (c.evidence.size() < kMaxEvidencePerSfr) c.evidence.push_back(v.where);
    }
    for (auto m : e.mechanisms.items()) {
      if (!input.exercised.contains(m)) c.missing.insert(m);
    }
    // The covert-capacity requirement only has evidence behind it once a
    // covert probe measured the channel.
    const bool needs_probe = e.ref == "FMT_IFF.3.1" && !input.techniques_run.contains(Technique::CovertProbe);
    if (!c.violated.empty()) {
      c.status = SfrStatus::Refuted;
    } else if (c.missing.empty() && !needs_probe) {
      c.status = SfrStatus::Supported;
    }
    report.sfrs.push_back(std::move(c));
  }

  for (const auto& e : map.sars()) {
    SarCoverage c;
    c.ref = e.ref;
    for (const auto& t : e.techniques) {
      if (t.implemented && input.techniques_run.contains(t.technique)) c.ran.push_back(t.technique);
    }
    c.exercised = !c.ran.empty();
    report.sars.push_back(std::move(c));
  }

  report.surface_ops_used = input.surface_ops_used;
  report.surface_ops_total = input.surface_ops_total;
  report.tsfi_fraction = input.surface_ops_total == 0
                             ? 0.0
                             : static_cast<double>(input.surface_ops_used) / static_cast<double>(input.surface_ops_total);
  return report;
}

}  // namespace isoforge
