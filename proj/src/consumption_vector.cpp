#include "amiagg/consumption_vector.hpp"

#include <algorithm>
#include <climits>

#include "amiagg/bytes.hpp"
#include "amiagg/error.hpp"
#include "amiagg/group.hpp"

namespace amiagg {

static_assert(sizeof(unsigned long) * CHAR_BIT >= 64,
              "field values are moved through GMP as unsigned long");

std::string_view ToString(Appliance a) {
  switch (a) {
    case Appliance::kWaterHeater: return "water_heater";
    case Appliance::kDryer: return "dryer";
    case Appliance::kEvCharger: return "ev_charger";
    case Appliance::kHvac: return "hvac";
    case Appliance::kUncontrollable: return "uncontrollable";
  }
  return "?";
}

std::string_view ToString(Level l) {
  switch (l) {
    case Level::kLow: return "low";
    case Level::kMedium: return "medium";
    case Level::kHigh: return "high";
  }
  return "?";
}

std::optional<Appliance> ParseAppliance(std::string_view s) {
  for (Appliance a : {Appliance::kWaterHeater, Appliance::kDryer,
                      Appliance::kEvCharger, Appliance::kHvac,
                      Appliance::kUncontrollable}) {
    if (ToString(a) == s) return a;
  }
  return std::nullopt;
}

std::optional<Level> ParseLevel(std::string_view s) {
  for (Level l : kAllLevels) {
    if (ToString(l) == s) return l;
  }
  return std::nullopt;
}

void CodecConfig::Validate() const {
  if (count_bits == 0 || consumption_bits == 0 || count_bits > 63 ||
      consumption_bits > 63) {
    throw ProtocolError(ErrorCode::kInvalidConfig, "field widths must be in [1, 63]");
  }
  if (n_max == 0 || n_max > count_capacity()) {
    throw ProtocolError(ErrorCode::kInvalidConfig,
                        "n_max must be in [1, 2^count_bits - 1]");
  }
}

unsigned CodecConfig::field_offset(std::size_t field) const {
  unsigned offset = 0;
  for (std::size_t f = field + 1; f < kFieldCount; ++f) offset += field_bits(f);
  return offset;
}

std::string CodecConfig::Fingerprint() const {
  Bytes buf;
  Append(buf, AsBytes("amiagg-codec-v1"));
  AppendBE(buf, count_bits, 1);
  AppendBE(buf, consumption_bits, 1);
  AppendBE(buf, n_max, 8);
  const Digest d = HashDigest(buf);
  return ToHex(ByteView(d).first(8));
}

std::size_t ConsumptionVector::CellIndex(Appliance a, Level l) {
  if (a == Appliance::kUncontrollable) return UncontrollableCell();
  return static_cast<std::size_t>(a) * kLevels + static_cast<std::size_t>(l);
}

std::string ConsumptionVector::FieldName(std::size_t field) {
  const std::size_t cell = field / 2;
  const char* sub = field % 2 == 0 ? "count" : "consumption";
  if (cell == UncontrollableCell()) return std::string("uncontrollable.") + sub;
  const auto a = static_cast<Appliance>(cell / kLevels);
  const auto l = static_cast<Level>(cell % kLevels);
  return std::string(ToString(a)) + "." + std::string(ToString(l)) + "." + sub;
}

ConsumptionVector::Cell ConsumptionVector::cell(Appliance a, Level l) const {
  const std::size_t c = CellIndex(a, l);
  return {fields_[2 * c], fields_[2 * c + 1]};
}

ConsumptionVector::Cell ConsumptionVector::uncontrollable() const {
  return cell(Appliance::kUncontrollable, Level::kLow);
}

void ConsumptionVector::set_cell(Appliance a, Level l, Cell c) {
  const std::size_t i = CellIndex(a, l);
  fields_[2 * i] = c.count;
  fields_[2 * i + 1] = c.consumption;
}

void ConsumptionVector::set_uncontrollable(Cell c) {
  set_cell(Appliance::kUncontrollable, Level::kLow, c);
}

bool ConsumptionVector::IsZero() const {
  return std::all_of(fields_.begin(), fields_.end(),
                     [](std::uint64_t f) { return f == 0; });
}

ConsumptionVector Encode(const std::vector<ApplianceReading>& readings,
                         const CodecConfig& cfg) {
  cfg.Validate();
  const std::uint64_t cap = cfg.consumption_capacity();
  ConsumptionVector v;
  std::array<bool, kControllableAppliances> seen{};
  std::uint64_t uncontrollable_sum = 0;
  for (const ApplianceReading& r : readings) {
    if (r.consumption > cap) {
      throw ProtocolError(ErrorCode::kConsumptionOverflow,
                          std::string(ToString(r.appliance)) + " consumption " +
                              std::to_string(r.consumption) + " exceeds field width");
    }
    if (r.appliance == Appliance::kUncontrollable) {
      uncontrollable_sum += r.consumption;
      if (uncontrollable_sum > cap) {
        throw ProtocolError(ErrorCode::kConsumptionOverflow,
                            "summed uncontrollable consumption exceeds field width");
      }
      continue;
    }
    const auto idx = static_cast<std::size_t>(r.appliance);
    if (seen[idx]) {
      throw ProtocolError(ErrorCode::kInvalidArgument,
                          std::string("duplicate reading for ") +
                              std::string(ToString(r.appliance)));
    }
    seen[idx] = true;
    if (r.on) v.set_cell(r.appliance, r.level, {1, r.consumption});
  }
  v.set_uncontrollable({1, uncontrollable_sum});
  return v;
}

std::vector<ApplianceReading> Decode(const ConsumptionVector& v) {
  std::vector<ApplianceReading> out;
  for (Appliance a : kControllable) {
    ApplianceReading r = ApplianceReading::Off(a);
    for (Level l : kAllLevels) {
      const auto c = v.cell(a, l);
      if (c.count > 0) r = ApplianceReading::On(a, l, c.consumption);
    }
    out.push_back(r);
  }
  out.push_back(ApplianceReading::Uncontrollable(v.uncontrollable().consumption));
  return out;
}

mpz_class Pack(const ConsumptionVector& v, const CodecConfig& cfg) {
  mpz_class x = 0;
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    const std::uint64_t value = v.field(f);
    if (value > cfg.field_capacity(f)) {
      throw ProtocolError(ErrorCode::kValueOutOfRange,
                          ConsumptionVector::FieldName(f) + " exceeds its width");
    }
    x <<= cfg.field_bits(f);
    x += static_cast<unsigned long>(value);
  }
  return x;
}

ConsumptionVector Unpack(const mpz_class& x, const CodecConfig& cfg) {
  if (x < 0 || mpz_sizeinbase(x.get_mpz_t(), 2) > cfg.total_bits()) {
    throw ProtocolError(ErrorCode::kValueOutOfRange, "packed value exceeds layout width");
  }
  ConsumptionVector v;
  mpz_class rest = x;
  for (std::size_t f = kFieldCount; f-- > 0;) {
    const unsigned bits = cfg.field_bits(f);
    mpz_class low;
    mpz_fdiv_r_2exp(low.get_mpz_t(), rest.get_mpz_t(), bits);
    v.set_field(f, mpz_get_ui(low.get_mpz_t()));
    rest >>= bits;
  }
  return v;
}

ConsumptionVector VecAdd(const ConsumptionVector& a, const ConsumptionVector& b,
                         const CodecConfig& cfg) {
  ConsumptionVector out;
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    const std::uint64_t cap = cfg.field_capacity(f);
    if (a.field(f) > cap || b.field(f) > cap || a.field(f) > cap - b.field(f)) {
      throw ProtocolError(ErrorCode::kFieldOverflow,
                          ConsumptionVector::FieldName(f) + " sum exceeds capacity " +
                              std::to_string(cap));
    }
    out.set_field(f, a.field(f) + b.field(f));
  }
  return out;
}

nlohmann::json ToJson(const ConsumptionVector& v) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    j[ConsumptionVector::FieldName(f)] = v.field(f);
  }
  return j;
}

ConsumptionVector VectorFromJson(const nlohmann::json& j) {
  ConsumptionVector v;
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    const std::string name = ConsumptionVector::FieldName(f);
    if (j.contains(name)) v.set_field(f, j.at(name).get<std::uint64_t>());
  }
  return v;
}

}  // namespace amiagg
