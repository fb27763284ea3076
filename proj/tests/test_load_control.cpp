#include <gtest/gtest.h>

#include <algorithm>

#include "amiagg/load_control.hpp"
#include "support.hpp"

using namespace amiagg;

namespace {

RecoveredTotal ExampleTotal(int meters) {
  const CodecConfig cfg;
  const auto v = Encode({ApplianceReading::On(Appliance::kWaterHeater, Level::kMedium, 25),
                         ApplianceReading::Off(Appliance::kDryer),
                         ApplianceReading::On(Appliance::kEvCharger, Level::kLow, 12),
                         ApplianceReading::On(Appliance::kHvac, Level::kHigh, 35),
                         ApplianceReading::Uncontrollable(125)},
                        cfg);
  ConsumptionVector sum;
  for (int i = 0; i < meters; ++i) sum = VecAdd(sum, v, cfg);
  return {sum, static_cast<std::size_t>(meters)};
}

using Cell = AggregateView::Cell;

TEST(Interpret, ZeroVector) {
  const AggregateView view = InterpretAggregate({});
  EXPECT_EQ(view, AggregateView{});
}

TEST(Interpret, SingleExample) {
  const AggregateView view = InterpretAggregate(ExampleTotal(1));
  EXPECT_EQ(view.at(Appliance::kHvac, Level::kHigh), (Cell{1, 35}));
  EXPECT_EQ(view.at(Appliance::kDryer, Level::kLow), (Cell{0, 0}));
  EXPECT_EQ(view.reporting_meters, 1u);
}

TEST(Interpret, DoubledExample) {
  const AggregateView view = InterpretAggregate(ExampleTotal(2));
  EXPECT_EQ(view.at(Appliance::kHvac, Level::kHigh), (Cell{2, 70}));
  EXPECT_EQ(view.at(Appliance::kWaterHeater, Level::kMedium), (Cell{2, 50}));
  EXPECT_EQ(view.at(Appliance::kEvCharger, Level::kLow), (Cell{2, 24}));
  EXPECT_EQ(view.reporting_meters, 2u);
  EXPECT_EQ(view.uncontrollable_consumption, 250u);
  EXPECT_EQ(view.ControllableConsumption(), 144u);
}

TEST(Plan, RequiredZero) {
  const auto req = PlanReduction(InterpretAggregate(ExampleTotal(1)), 0);
  EXPECT_EQ(req.Total(), 0u);
  EXPECT_EQ(req.target, 0u);
}

TEST(Plan, WaterfallTraces) {
  const AggregateView view = InterpretAggregate(ExampleTotal(1));
  const auto r20 = PlanReduction(view, 20);
  EXPECT_EQ(r20.at(Appliance::kHvac, Level::kHigh), 20u);
  EXPECT_EQ(r20.LevelTotal(Level::kMedium), 0u);
  EXPECT_EQ(r20.LevelTotal(Level::kLow), 0u);

  const auto r70 = PlanReduction(view, 70);
  EXPECT_EQ(r70.LevelTotal(Level::kHigh), 35u);
  EXPECT_EQ(r70.LevelTotal(Level::kMedium), 25u);
  EXPECT_EQ(r70.LevelTotal(Level::kLow), 10u);
  EXPECT_EQ(r70.at(Appliance::kEvCharger, Level::kLow), 10u);
  EXPECT_EQ(r70.target, 70u);
}

TEST(Plan, ProportionalSplitWithTieToEarlierAppliance) {
  AggregateView view;
  view.at(Appliance::kWaterHeater, Level::kHigh) = {1, 10};
  view.at(Appliance::kDryer, Level::kHigh) = {1, 10};
  const auto req = PlanReduction(view, 5);
  EXPECT_EQ(req.at(Appliance::kWaterHeater, Level::kHigh), 3u);
  EXPECT_EQ(req.at(Appliance::kDryer, Level::kHigh), 2u);
}

TEST(Plan, InsufficientLoadCarriesMaximalRequest) {
  const AggregateView view = InterpretAggregate(ExampleTotal(1));
  try {
    PlanReduction(view, 73);
    FAIL() << "expected InsufficientLoadError";
  } catch (const InsufficientLoadError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientControllableLoad);
    EXPECT_EQ(e.maximal_request().Total(), 72u);
    EXPECT_EQ(e.maximal_request().units, PlanReduction(view, 72).units);
  }
}

AggregateView RandomView(Rng& rng) {
  AggregateView view;
  for (auto& row : view.controllable) {
    for (auto& cell : row) {
      if (rng.UniformBelow(3) == 0) continue;
      cell.meters_on = 1 + rng.UniformBelow(50);
      cell.total_consumption = rng.UniformBelow(1000);
    }
  }
  view.reporting_meters = 50;
  return view;
}

TEST(Plan, PolicyProperties) {
  Rng rng(1);
  for (int i = 0; i < 5000; ++i) {
    const AggregateView view = RandomView(rng);
    const std::uint64_t available = view.ControllableConsumption();
    const std::uint64_t required = rng.UniformBelow(available + 200);
    ReductionRequest req;
    try {
      req = PlanReduction(view, required);
      ASSERT_LE(required, available);
    } catch (const InsufficientLoadError& e) {
      ASSERT_GT(required, available);
      req = e.maximal_request();
    }
    ASSERT_EQ(req.Total(), std::min(required, available));
    bool drained_above = true;  // every cell in the higher levels fully asked
    for (Level l : {Level::kHigh, Level::kMedium, Level::kLow}) {
      if (req.LevelTotal(l) > 0) {
        ASSERT_TRUE(drained_above);
      }
      for (Appliance a : kControllable) {
        ASSERT_LE(req.at(a, l), view.at(a, l).total_consumption);
        drained_above = drained_above && req.at(a, l) == view.at(a, l).total_consumption;
      }
    }
  }
}

TEST(Seal, RoundTripTamperAndWrongKey) {
  const auto req = PlanReduction(InterpretAggregate(ExampleTotal(1)), 70);
  Digest key{}, other{};
  key[0] = 1;
  other[0] = 2;
  const Bytes sealed = SealRequest(req, key);
  EXPECT_EQ(sealed, SealRequest(req, key));
  EXPECT_EQ(OpenRequest(sealed, key), req);
  for (std::size_t i = 0; i < sealed.size(); ++i) {
    Bytes bad = sealed;
    bad[i] ^= 0x20;
    EXPECT_PROTOCOL_ERROR(OpenRequest(bad, key), ErrorCode::kIntegrityFailure);
  }
  EXPECT_PROTOCOL_ERROR(OpenRequest(sealed, other), ErrorCode::kIntegrityFailure);
  EXPECT_PROTOCOL_ERROR(OpenRequest(Bytes(10), key), ErrorCode::kIntegrityFailure);
}

TEST(Seal, DownlinkKeyFollowsRound) {
  const SessionKeySchedule s =
      DeriveSchedule({MakeToyGroup()->generator(), 1, 0, 1'700'000'000}, 3);
  EXPECT_EQ(DownlinkKey(s, 1), DownlinkKey(s, 1));
  EXPECT_NE(DownlinkKey(s, 1), DownlinkKey(s, 2));
}

TEST(Json, RequestListsCells) {
  const auto j = ToJson(PlanReduction(InterpretAggregate(ExampleTotal(1)), 20));
  EXPECT_EQ(j["target"], 20);
}

}  // namespace
