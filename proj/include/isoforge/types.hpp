#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace isoforge {

using Tick = std::uint64_t;
using Address = std::uint64_t;
using Word = std::uint64_t;

struct PartitionId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const PartitionId&, const PartitionId&) = default;
};

struct RegionId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const RegionId&, const RegionId&) = default;
};

// The eight partitioning mechanisms: memory (M1-M4) and temporal (T1-T4).
enum class Mechanism : std::uint8_t { M1, M2, M3, M4, T1, T2, T3, T4 };

inline constexpr std::array<Mechanism, 8> kAllMechanisms = {
    Mechanism::M1, Mechanism::M2, Mechanism::M3, Mechanism::M4,
    Mechanism::T1, Mechanism::T2, Mechanism::T3, Mechanism::T4};

std::string_view to_string(Mechanism m);
std::string_view describe(Mechanism m);
std::optional<Mechanism> parse_mechanism(std::string_view text);

// Small value-type set over Mechanism, ordered M1..T4 when iterated.
class MechanismSet {
 public:
  constexpr MechanismSet() = default;
  constexpr MechanismSet(std::initializer_list<Mechanism> ms) {
    for (auto m : ms) insert(m);
  }

  constexpr void insert(Mechanism m) { bits_ |= bit(m); }
  constexpr void insert(MechanismSet other) { bits_ |= other.bits_; }
  constexpr bool contains(Mechanism m) const { return (bits_ & bit(m)) != 0; }
  constexpr bool intersects(MechanismSet other) const { return (bits_ & other.bits_) != 0; }
  constexpr bool includes(MechanismSet other) const { return (bits_ & other.bits_) == other.bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  std::vector<Mechanism> items() const;
  std::string to_string() const;  // "M1,M2"; "" when empty

  friend constexpr bool operator==(MechanismSet, MechanismSet) = default;

 private:
  static constexpr std::uint16_t bit(Mechanism m) { return std::uint16_t(1u << static_cast<unsigned>(m)); }
  std::uint16_t bits_ = 0;
};

// Seedable ground-truth mutants. Each one disables exactly one enforcement
// point; D-M1W and D-M1R split M1 into its write and read halves.
enum class DefectId : std::uint8_t { M1W, M1R, M2, M3, M4, T1, T2, T3, T4 };

inline constexpr std::array<DefectId, 9> kAllDefects = {
    DefectId::M1W, DefectId::M1R, DefectId::M2, DefectId::M3, DefectId::M4,
    DefectId::T1,  DefectId::T2,  DefectId::T3, DefectId::T4};

std::string_view to_string(DefectId d);
std::string_view describe(DefectId d);
Mechanism mechanism_of(DefectId d);
// Throws UnknownDefect.
DefectId parse_defect(std::string_view text);

// Testing techniques. The last three are catalogued for requirement mapping
// but have no generator here.
enum class Technique : std::uint8_t { Fuzz, FaultInjection, Scripted, CovertProbe, Penetration, SymbolicExecution, Taint };

inline constexpr std::array<Technique, 7> kAllTechniques = {
    Technique::Fuzz,        Technique::FaultInjection,    Technique::Scripted, Technique::CovertProbe,
    Technique::Penetration, Technique::SymbolicExecution, Technique::Taint};

std::string_view to_string(Technique t);
std::optional<Technique> parse_technique(std::string_view text);
constexpr bool implemented(Technique t) {
  return t == Technique::Fuzz || t == Technique::FaultInjection || t == Technique::Scripted ||
         t == Technique::CovertProbe;
}

}  // namespace isoforge
