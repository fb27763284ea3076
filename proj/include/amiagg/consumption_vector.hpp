#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <gmpxx.h>
#include "json.hpp"

namespace amiagg {

enum class Appliance : std::uint8_t {
  kWaterHeater = 0,
  kDryer = 1,
  kEvCharger = 2,
  kHvac = 3,
  kUncontrollable = 4,
};

enum class Level : std::uint8_t { kLow = 0, kMedium = 1, kHigh = 2 };

inline constexpr std::size_t kControllableAppliances = 4;
inline constexpr std::size_t kLevels = 3;
inline constexpr std::size_t kCells = kControllableAppliances * kLevels + 1;
inline constexpr std::size_t kFieldCount = 2 * kCells;  // 26

inline constexpr std::array<Appliance, kControllableAppliances> kControllable = {
    Appliance::kWaterHeater, Appliance::kDryer, Appliance::kEvCharger,
    Appliance::kHvac};
inline constexpr std::array<Level, kLevels> kAllLevels = {Level::kLow, Level::kMedium,
                                                          Level::kHigh};

std::string_view ToString(Appliance a);
std::string_view ToString(Level l);
std::optional<Appliance> ParseAppliance(std::string_view s);
std::optional<Level> ParseLevel(std::string_view s);

struct CodecConfig {
  unsigned count_bits = 8;
  unsigned consumption_bits = 16;
  std::uint64_t n_max = 255;

  /// Throws InvalidConfig unless widths are in (0, 63] and
  /// n_max <= 2^count_bits - 1.
  void Validate() const;

  std::uint64_t count_capacity() const { return (std::uint64_t{1} << count_bits) - 1; }
  std::uint64_t consumption_capacity() const {
    return (std::uint64_t{1} << consumption_bits) - 1;
  }
  std::uint64_t field_capacity(std::size_t field) const {
    return field % 2 == 0 ? count_capacity() : consumption_capacity();
  }
  unsigned field_bits(std::size_t field) const {
    return field % 2 == 0 ? count_bits : consumption_bits;
  }
  unsigned total_bits() const { return kCells * (count_bits + consumption_bits); }
  /// Bit offset of a field's least-significant bit in the packed integer.
  unsigned field_offset(std::size_t field) const;

  /// Stable identifier of the layout, hex. Both endpoints must agree on it.
  std::string Fingerprint() const;

  friend bool operator==(const CodecConfig&, const CodecConfig&) = default;
};

struct ApplianceReading {
  Appliance appliance = Appliance::kWaterHeater;
  bool on = false;
  Level level = Level::kLow;           // ignored when off or uncontrollable
  std::uint64_t consumption = 0;       // power units

  static ApplianceReading Off(Appliance a) { return {a, false, Level::kLow, 0}; }
  static ApplianceReading On(Appliance a, Level l, std::uint64_t c) {
    return {a, true, l, c};
  }
  static ApplianceReading Uncontrollable(std::uint64_t c) {
    return {Appliance::kUncontrollable, true, Level::kLow, c};
  }

  friend bool operator==(const ApplianceReading&, const ApplianceReading&) = default;
};

/// Twenty-six non-negative fields in wire order: for each controllable
/// appliance (water heater, dryer, EV charger, HVAC), for each level (low,
/// medium, high), a (count, consumption) pair; then the uncontrollable
/// (count, consumption) pair.
class ConsumptionVector {
 public:
  struct Cell {
    std::uint64_t count = 0;
    std::uint64_t consumption = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
  };

  ConsumptionVector() = default;

  static std::size_t CellIndex(Appliance a, Level l);
  static std::size_t UncontrollableCell() { return kCells - 1; }
  static std::string FieldName(std::size_t field);

  Cell cell(Appliance a, Level l) const;
  Cell uncontrollable() const;
  void set_cell(Appliance a, Level l, Cell c);
  void set_uncontrollable(Cell c);

  const std::array<std::uint64_t, kFieldCount>& fields() const { return fields_; }
  std::uint64_t field(std::size_t i) const { return fields_.at(i); }
  void set_field(std::size_t i, std::uint64_t v) { fields_.at(i) = v; }

  bool IsZero() const;

  friend bool operator==(const ConsumptionVector&, const ConsumptionVector&) = default;

 private:
  std::array<std::uint64_t, kFieldCount> fields_{};
};

/// One meter's vector. The uncontrollable group always gets count 1 and the
/// sum of every uncontrollable reading supplied. Throws ConsumptionOverflow,
/// or InvalidArgument for a repeated controllable appliance.
ConsumptionVector Encode(const std::vector<ApplianceReading>& readings,
                         const CodecConfig& cfg);

/// Inverse of Encode for single-meter vectors: one reading per controllable
/// appliance in declared order, then one uncontrollable reading.
std::vector<ApplianceReading> Decode(const ConsumptionVector& v);

/// Fields are laid out most-significant-first in declared order, count
/// before consumption. Throws ValueOutOfRange if a field exceeds its width.
mpz_class Pack(const ConsumptionVector& v, const CodecConfig& cfg);
/// Throws ValueOutOfRange if x >= 2^total_bits or x < 0.
ConsumptionVector Unpack(const mpz_class& x, const CodecConfig& cfg);

/// Field-wise sum. Throws FieldOverflow if any field exceeds its capacity.
ConsumptionVector VecAdd(const ConsumptionVector& a, const ConsumptionVector& b,
                         const CodecConfig& cfg);

nlohmann::json ToJson(const ConsumptionVector& v);
ConsumptionVector VectorFromJson(const nlohmann::json& j);

}  // namespace amiagg
