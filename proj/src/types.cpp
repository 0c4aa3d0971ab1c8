#include "isoforge/types.hpp"

#include "isoforge/errors.hpp"

namespace isoforge {

std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::M1: return "M1";
    case Mechanism::M2: return "M2";
    case Mechanism::M3: return "M3";
    case Mechanism::M4: return "M4";
    case Mechanism::T1: return "T1";
    case Mechanism::T2: return "T2";
    case Mechanism::T3: return "T3";
    case Mechanism::T4: return "T4";
  }
  return "?";
}

std::string_view describe(Mechanism m) {
  switch (m) {
    case Mechanism::M1: return "Access control to user-space memory";
    case Mechanism::M2: return "Access control to kernel-space memory";
    case Mechanism::M3: return "Access control to hardware resources";
    case Mechanism::M4: return "Static memory allocation";
    case Mechanism::T1: return "CPU registers reuse";
    case Mechanism::T2: return "Cyclical scheduler";
    case Mechanism::T3: return "Worst-case execution time";
    case Mechanism::T4: return "Temporal normalization";
  }
  return "?";
}

std::optional<Mechanism> parse_mechanism(std::string_view text) {
  for (auto m : kAllMechanisms) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

std::vector<Mechanism> MechanismSet::items() const {
  std::vector<Mechanism> out;
  for (auto m : kAllMechanisms) {
    if (contains(m)) out.push_back(m);
  }
  return out;
}

std::string MechanismSet::to_string() const {
  std::string out;
  for (auto m : items()) {
    if (!out.empty()) out += ',';
    out += isoforge::to_string(m);
  }
  return out;
}

std::string_view to_string(DefectId d) {
  switch (d) {
    case DefectId::M1W: return "D-M1W";
    case DefectId::M1R: return "D-M1R";
    case DefectId::M2: return "D-M2";
    case DefectId::M3: return "D-M3";
    case DefectId::M4: return "D-M4";
    case DefectId::T1: return "D-T1";
    case DefectId::T2: return "D-T2";
    case DefectId::T3: return "D-T3";
    case DefectId::T4: return "D-T4";
  }
  return "?";
}

std::string_view describe(DefectId d) {
  switch (d) {
    case DefectId::M1W: return "cross-partition user-space writes are not checked";
    case DefectId::M1R: return "cross-partition user-space reads are not checked";
    case DefectId::M2: return "guest access to kernel-space memory is not checked";
    case DefectId::M3: return "device windows are not enforced and contention is visible";
    case DefectId::M4: return "allocation quotas are not enforced";
    case DefectId::T1: return "registers are neither cleared nor reloaded on context switch";
    case DefectId::T2: return "greedy partitions may overrun their slot";
    case DefectId::T3: return "hypercalls are not aborted at their WCET bound";
    case DefectId::T4: return "device latency is not normalized";
  }
  return "?";
}

Mechanism mechanism_of(DefectId d) {
  switch (d) {
    case DefectId::M1W:
    case DefectId::M1R: return Mechanism::M1;
    case DefectId::M2: return Mechanism::M2;
    case DefectId::M3: return Mechanism::M3;
    case DefectId::M4: return Mechanism::M4;
    case DefectId::T1: return Mechanism::T1;
    case DefectId::T2: return Mechanism::T2;
    case DefectId::T3: return Mechanism::T3;
    case DefectId::T4: return Mechanism::T4;
  }
  return Mechanism::M1;
}

DefectId parse_defect(std::string_view text) {
  for (auto d : kAllDefects) {
    if (to_string(d) == text) return d;
  }
  throw UnknownDefect(std::string(text));
}

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::Fuzz: return "fuzz";
    case Technique::FaultInjection: return "fault_injection";
    case Technique::Scripted: return "scripted";
    case Technique::CovertProbe: return "covert_probe";
    case Technique::Penetration: return "penetration";
    case Technique::SymbolicExecution: return "symbolic_execution";
    case Technique::Taint: return "taint";
  }
  return "?";
}

std::optional<Technique> parse_technique(std::string_view text) {
  for (auto t : kAllTechniques) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

}  // namespace isoforge
