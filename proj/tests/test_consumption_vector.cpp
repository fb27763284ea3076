#include <gtest/gtest.h>

#include "amiagg/consumption_vector.hpp"
#include "amiagg/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace amiagg;

namespace {

std::vector<ApplianceReading> ExampleReadings() {
  return {ApplianceReading::On(Appliance::kWaterHeater, Level::kMedium, 25),
          ApplianceReading::Off(Appliance::kDryer),
          ApplianceReading::On(Appliance::kEvCharger, Level::kLow, 12),
          ApplianceReading::On(Appliance::kHvac, Level::kHigh, 35),
          ApplianceReading::Uncontrollable(125)};
}

std::vector<ApplianceReading> RandomMeter(const CodecConfig& cfg, Rng& rng) {
  std::vector<ApplianceReading> out;
  for (Appliance a : kControllable) {
    if (rng.UniformBelow(2)) {
      out.push_back(ApplianceReading::On(a, static_cast<Level>(rng.UniformBelow(3)),
                                         rng.UniformBelow(cfg.consumption_capacity() + 1)));
    } else {
      out.push_back(ApplianceReading::Off(a));
    }
  }
  out.push_back(ApplianceReading::Uncontrollable(rng.UniformBelow(cfg.consumption_capacity() + 1)));
  return out;
}

TEST(Encode, WorkedExample) {
  const CodecConfig cfg;
  const ConsumptionVector v = Encode(ExampleReadings(), cfg);
  std::array<std::uint64_t, kFieldCount> want{};
  // water_heater.medium, ev_charger.low, hvac.high, uncontrollable
  want[2] = 1, want[3] = 25;
  want[12] = 1, want[13] = 12;
  want[22] = 1, want[23] = 35;
  want[24] = 1, want[25] = 125;
  EXPECT_EQ(v.fields(), want);
  EXPECT_EQ(v.cell(Appliance::kHvac, Level::kHigh), (ConsumptionVector::Cell{1, 35}));
  EXPECT_EQ(ConsumptionVector::FieldName(3), "water_heater.medium.consumption");
  EXPECT_EQ(ConsumptionVector::FieldName(24), "uncontrollable.count");
}

TEST(Encode, AllOffStillCountsTheMeter) {
  std::vector<ApplianceReading> r;
  for (Appliance a : kControllable) r.push_back(ApplianceReading::Off(a));
  r.push_back(ApplianceReading::Uncontrollable(0));
  const ConsumptionVector v = Encode(r, CodecConfig{});
  for (std::size_t f = 0; f < 24; ++f) EXPECT_EQ(v.field(f), 0u);
  EXPECT_EQ(v.uncontrollable(), (ConsumptionVector::Cell{1, 0}));
}

TEST(Encode, UncontrollableReadingsAreSummed) {
  const ConsumptionVector v =
      Encode({ApplianceReading::Uncontrollable(100), ApplianceReading::Uncontrollable(25)},
             CodecConfig{});
  EXPECT_EQ(v.uncontrollable(), (ConsumptionVector::Cell{1, 125}));
}

TEST(Encode, Errors) {
  const CodecConfig cfg;
  EXPECT_PROTOCOL_ERROR(
      Encode({ApplianceReading::On(Appliance::kDryer, Level::kLow, 65536)}, cfg),
      ErrorCode::kConsumptionOverflow);
  EXPECT_NO_THROW(Encode({ApplianceReading::On(Appliance::kDryer, Level::kLow, 65535)}, cfg));
  EXPECT_PROTOCOL_ERROR(Encode({ApplianceReading::Off(Appliance::kDryer),
                                ApplianceReading::Off(Appliance::kDryer)},
                               cfg),
                        ErrorCode::kInvalidArgument);
}

TEST(Encode, RoundTripAndWellFormed) {
  const CodecConfig cfg;
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto readings = RandomMeter(cfg, rng);
    const ConsumptionVector v = Encode(readings, cfg);
    // Decode canonicalizes: off readings lose nothing, so equality is exact.
    ASSERT_EQ(Decode(v), readings);
    for (Appliance a : kControllable) {
      int on = 0;
      for (Level l : kAllLevels) on += v.cell(a, l).count;
      ASSERT_LE(on, 1);
    }
  }
}

TEST(Pack, Basics) {
  const CodecConfig cfg;
  EXPECT_EQ(cfg.total_bits(), 312u);
  EXPECT_EQ(Pack(ConsumptionVector{}, cfg), 0);
  ConsumptionVector v;
  v.set_field(25, 5);
  EXPECT_EQ(Pack(v, cfg), 5);
  v.set_field(24, 1);
  EXPECT_EQ(Pack(v, cfg), mpz_class(1) << 16 | 5);
  EXPECT_EQ(cfg.field_offset(25), 0u);
  EXPECT_EQ(cfg.field_offset(0), 312u - 8u);
}

TEST(Pack, WorkedExampleMatchesShiftAndOr) {
  const CodecConfig cfg;
  const ConsumptionVector v = Encode(ExampleReadings(), cfg);
  EXPECT_EQ(Pack(v, cfg), oracle::Pack(v.fields(), 8, 16));
  EXPECT_EQ(Unpack(Pack(v, cfg), cfg), v);
}

TEST(Pack, Errors) {
  const CodecConfig cfg;
  ConsumptionVector v;
  v.set_field(0, 256);
  EXPECT_PROTOCOL_ERROR(Pack(v, cfg), ErrorCode::kValueOutOfRange);
  EXPECT_PROTOCOL_ERROR(Unpack(mpz_class(1) << 312, cfg), ErrorCode::kValueOutOfRange);
  EXPECT_PROTOCOL_ERROR(Unpack(mpz_class(-1), cfg), ErrorCode::kValueOutOfRange);
}

TEST(Pack, ExhaustiveRoundTripAtTinyWidths) {
  // Every value in every field position at (2, 3) bits, plus random vectors.
  const CodecConfig cfg{2, 3, 3};
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    for (std::uint64_t x = 0; x <= cfg.field_capacity(f); ++x) {
      ConsumptionVector v;
      v.set_field(f, x);
      const mpz_class packed = Pack(v, cfg);
      ASSERT_EQ(packed, oracle::Pack(v.fields(), 2, 3));
      ASSERT_EQ(Unpack(packed, cfg), v);
    }
  }
  Rng rng(2);
  for (int i = 0; i < 20000; ++i) {
    ConsumptionVector v;
    for (std::size_t f = 0; f < kFieldCount; ++f) {
      v.set_field(f, rng.UniformBelow(cfg.field_capacity(f) + 1));
    }
    ASSERT_EQ(Unpack(Pack(v, cfg), cfg), v);
  }
}

TEST(VecAdd, IdentityAndDoubling) {
  const CodecConfig cfg;
  const ConsumptionVector v = Encode(ExampleReadings(), cfg);
  EXPECT_EQ(VecAdd(v, ConsumptionVector{}, cfg), v);
  const ConsumptionVector d = VecAdd(v, v, cfg);
  for (std::size_t f = 0; f < kFieldCount; ++f) EXPECT_EQ(d.field(f), 2 * v.field(f));
  EXPECT_EQ(d.cell(Appliance::kWaterHeater, Level::kMedium), (ConsumptionVector::Cell{2, 50}));
  EXPECT_EQ(Unpack(Pack(v, cfg) + Pack(v, cfg), cfg), d);
}

TEST(VecAdd, CountCapacityBoundary) {
  const CodecConfig cfg;
  ConsumptionVector one;
  one.set_field(0, 1);
  ConsumptionVector acc;
  for (int i = 0; i < 255; ++i) acc = VecAdd(acc, one, cfg);
  EXPECT_EQ(acc.field(0), 255u);
  EXPECT_PROTOCOL_ERROR(VecAdd(acc, one, cfg), ErrorCode::kFieldOverflow);
}

TEST(VecAdd, PackedSumHomomorphism) {
  const CodecConfig cfg;
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.UniformBelow(cfg.n_max);
    ConsumptionVector sum;
    mpz_class packed_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<ApplianceReading> r;
      for (Appliance a : kControllable) {
        r.push_back(rng.UniformBelow(2)
                        ? ApplianceReading::On(a, static_cast<Level>(rng.UniformBelow(3)),
                                               rng.UniformBelow(257))
                        : ApplianceReading::Off(a));
      }
      r.push_back(ApplianceReading::Uncontrollable(rng.UniformBelow(257)));
      const ConsumptionVector v = Encode(r, cfg);
      sum = VecAdd(sum, v, cfg);
      packed_sum += Pack(v, cfg);
    }
    ASSERT_EQ(packed_sum, Pack(sum, cfg));
  }
}

TEST(CodecConfig, Validation) {
  EXPECT_NO_THROW((CodecConfig{8, 16, 255}.Validate()));
  EXPECT_PROTOCOL_ERROR((CodecConfig{8, 16, 256}.Validate()), ErrorCode::kInvalidConfig);
  EXPECT_PROTOCOL_ERROR((CodecConfig{0, 16, 0}.Validate()), ErrorCode::kInvalidConfig);
  EXPECT_NE(CodecConfig{}.Fingerprint(), (CodecConfig{8, 15, 255}.Fingerprint()));
}

TEST(Json, RoundTrip) {
  const ConsumptionVector v = Encode(ExampleReadings(), CodecConfig{});
  const auto j = ToJson(v);
  EXPECT_EQ(j["hvac.high.consumption"], 35);
  EXPECT_EQ(VectorFromJson(j), v);
}

}  // namespace
