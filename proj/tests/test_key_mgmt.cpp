#include <gtest/gtest.h>

#include <set>

#include "amiagg/key_mgmt.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace amiagg;

namespace {

constexpr NodeId kSm = 17;
constexpr NodeId kUtil = 0xFFFFFFFFFFFFFFFFull;
constexpr Timestamp kNow = 1'700'000'000;

struct Fixture {
  GroupPtr group;
  Rng rng;
  KeyPair sm, utility;
  KeyRegistry registry;
  ReplayCache cache;

  explicit Fixture(GroupProfile profile = GroupProfile::kToy, std::uint64_t seed = 1)
      : group(MakeGroup(profile)), rng(seed) {
    sm = GenerateKeyPair(*group, rng);
    utility = GenerateKeyPair(*group, rng);
    registry[kSm] = sm.pk;
    registry[kUtil] = utility.pk;
  }

  ProcessedRequest Process(const KeyEstablishRequest& req, Timestamp now = kNow) {
    return ProcessRequest(*group, req, registry, utility, kUtil, now,
                          kDefaultFreshnessWindow, cache, rng);
  }
};

// Re-signs a frame's body after fields were set by hand.
template <typename Msg, typename EncodeFn>
void Resign(const Group& g, const KeyPair& kp, Msg& msg, EncodeFn encode) {
  msg.signature = Sign(g, kp, {});  // placeholder of the right size
  const Bytes frame = encode(g, msg);
  const ByteView body = ByteView(frame).first(frame.size() - SignatureSize(g));
  msg.signature = Sign(g, kp, body);
}

TEST(KeyAgreement, BothSidesDeriveTheSameSeed) {
  for (GroupProfile profile : {GroupProfile::kToy, GroupProfile::kProduction}) {
    Fixture f(profile);
    const PendingRequest pending = BuildRequest(*f.group, f.sm, kSm, kNow, f.rng);
    EXPECT_EQ(pending.request.ephemeral_point,
              f.group->ScalarMulBase(pending.ephemeral_secret));
    const auto req = DecodeRequest(*f.group, EncodeRequest(*f.group, pending.request));
    const auto processed = f.Process(req);
    const auto reply = DecodeReply(*f.group, EncodeReply(*f.group, processed.reply));
    const SeedKey sm_seed = Finalize(*f.group, reply, pending, f.registry, kNow + 1,
                                     kDefaultFreshnessWindow);
    EXPECT_EQ(sm_seed.value, processed.seed.value);
    EXPECT_EQ(processed.reply.confirmation_tag, ConfirmationTag(processed.seed.value));
    EXPECT_EQ(DeriveSchedule(sm_seed, 8), DeriveSchedule(processed.seed, 8));
  }
}

TEST(KeyAgreement, SeededRequestIsReproducible) {
  Fixture a, b;
  const auto ra = BuildRequest(*a.group, a.sm, kSm, kNow, a.rng);
  const auto rb = BuildRequest(*b.group, b.sm, kSm, kNow, b.rng);
  EXPECT_EQ(EncodeRequest(*a.group, ra.request), EncodeRequest(*b.group, rb.request));
  Fixture c(GroupProfile::kToy, 2);
  c.sm = a.sm;
  const auto rc = BuildRequest(*c.group, c.sm, kSm, kNow, c.rng);
  EXPECT_NE(rc.request.ephemeral_point, ra.request.ephemeral_point);
}

TEST(KeyAgreement, ToySeedIsProductOfEphemerals) {
  Fixture f;
  const Group& g = *f.group;
  // Meter side with k_iu = 2, utility side with k_ui = 3.
  PendingRequest pending;
  pending.ephemeral_secret = g.MakeScalar(2u);
  pending.request = {kSm, g.ScalarMulBase(pending.ephemeral_secret), kNow, {}};
  Resign(g, f.sm, pending.request, EncodeRequest);

  const auto processed = f.Process(pending.request);
  EXPECT_EQ(processed.seed.value,
            g.ScalarMul(g.MakeScalar(2u), processed.reply.ephemeral_point));

  KeyEstablishReply reply;
  reply.utility_id = kUtil;
  reply.ephemeral_point = g.ScalarMulBase(g.MakeScalar(3u));
  reply.timestamp = kNow;
  reply.confirmation_tag = ConfirmationTag(g.ScalarMulBase(g.MakeScalar(6u)));
  Resign(g, f.utility, reply, EncodeReply);
  const SeedKey seed = Finalize(g, reply, pending, f.registry, kNow, kDefaultFreshnessWindow);
  EXPECT_EQ(seed.value, g.ScalarMulBase(g.MakeScalar(6u)));
}

TEST(KeyAgreement, ExhaustiveToyAgreement) {
  // Every ephemeral pair in a tiny group: a*(bP) == b*(aP).
  const GroupPtr g = MakeToyGroup(251);
  for (std::uint64_t a = 1; a < 251; ++a) {
    const auto aP = g->ScalarMulBase(g->MakeScalar(a));
    for (std::uint64_t b = 1; b < 251; b += 3) {
      const auto bP = g->ScalarMulBase(g->MakeScalar(b));
      ASSERT_EQ(g->ScalarMul(g->MakeScalar(a), bP), g->ScalarMul(g->MakeScalar(b), aP));
    }
  }
}

TEST(ProcessRequest, Rejections) {
  Fixture f;
  const Group& g = *f.group;
  {
    auto p = BuildRequest(g, f.sm, kSm, kNow - kDefaultFreshnessWindow - 1, f.rng);
    EXPECT_PROTOCOL_ERROR(f.Process(p.request), ErrorCode::kStaleTimestamp);
  }
  {
    auto p = BuildRequest(g, f.sm, kSm, kNow - kDefaultFreshnessWindow, f.rng);
    EXPECT_NO_THROW(f.Process(p.request));  // exactly at the boundary
  }
  {
    auto p = BuildRequest(g, f.sm, kSm, kNow, f.rng);
    Bytes frame = EncodeRequest(g, p.request);
    frame.back() ^= 1;
    EXPECT_PROTOCOL_ERROR(f.Process(DecodeRequest(g, frame)), ErrorCode::kBadSignature);
  }
  {
    auto p = BuildRequest(g, f.sm, 999, kNow, f.rng);
    EXPECT_PROTOCOL_ERROR(f.Process(p.request), ErrorCode::kUnknownSender);
  }
  {
    auto p = BuildRequest(g, f.sm, kSm, kNow + 5, f.rng);
    EXPECT_NO_THROW(f.Process(p.request));
    EXPECT_PROTOCOL_ERROR(f.Process(p.request), ErrorCode::kReplayedRequest);
  }
}

TEST(ProcessRequest, EveryFlippedRequestBitIsRejected) {
  Fixture f;
  const Group& g = *f.group;
  const auto p = BuildRequest(g, f.sm, kSm, kNow, f.rng);
  const Bytes frame = EncodeRequest(g, p.request);
  for (std::size_t bit = 0; bit < frame.size() * 8; ++bit) {
    Bytes bad = frame;
    bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    bool rejected = false;
    try {
      f.Process(DecodeRequest(g, bad));
    } catch (const ProtocolError&) {
      rejected = true;
    }
    EXPECT_TRUE(rejected) << "bit " << bit;
  }
}

TEST(Finalize, Rejections) {
  Fixture f;
  const Group& g = *f.group;
  const auto pending = BuildRequest(g, f.sm, kSm, kNow, f.rng);
  const auto processed = f.Process(pending.request);
  {
    KeyEstablishReply bad = processed.reply;
    bad.confirmation_tag[0] ^= 1;
    Resign(g, f.utility, bad, EncodeReply);
    EXPECT_PROTOCOL_ERROR(Finalize(g, bad, pending, f.registry, kNow, 60),
                          ErrorCode::kConfirmationMismatch);
  }
  {
    KeyEstablishReply bad = processed.reply;
    bad.confirmation_tag[0] ^= 1;  // not re-signed
    EXPECT_PROTOCOL_ERROR(Finalize(g, bad, pending, f.registry, kNow, 60),
                          ErrorCode::kBadSignature);
  }
  {
    EXPECT_PROTOCOL_ERROR(Finalize(g, processed.reply, pending, f.registry, kNow + 61, 60),
                          ErrorCode::kStaleTimestamp);
  }
  {
    // A reply from another session carries a tag for another key.
    const auto other = BuildRequest(g, f.sm, kSm, kNow + 1, f.rng);
    EXPECT_PROTOCOL_ERROR(Finalize(g, processed.reply, other, f.registry, kNow, 60),
                          ErrorCode::kConfirmationMismatch);
  }
}

TEST(Frames, LayoutIsByteExact) {
  Fixture f;
  const Group& g = *f.group;
  const auto p = BuildRequest(g, f.sm, kSm, kNow, f.rng);
  const Bytes frame = EncodeRequest(g, p.request);
  ASSERT_EQ(frame.size(), 1 + 8 + g.element_size() + 8 + SignatureSize(g));
  EXPECT_EQ(frame[0], 0x01);
  ByteReader r(frame);
  r.ReadU8();
  EXPECT_EQ(r.ReadBE(8), kSm);
  EXPECT_EQ(GroupElement(r.Take(g.element_size())), p.request.ephemeral_point);
  EXPECT_EQ(r.ReadBE(8), kNow);

  const auto processed = f.Process(p.request);
  const Bytes reply = EncodeReply(g, processed.reply);
  ASSERT_EQ(reply.size(), 1 + 8 + g.element_size() + 8 + 32 + SignatureSize(g));
  EXPECT_EQ(reply[0], 0x02);
  EXPECT_PROTOCOL_ERROR(DecodeRequest(g, ByteView(frame).first(10)), ErrorCode::kMalformedFrame);
}

TEST(Schedule, MatchesIndependentChainOracle) {
  Fixture f;
  Rng rng(5);
  for (std::size_t t : {0u, 1u, 2u, 7u}) {
    SeedKey seed{f.group->ScalarMulBase(f.group->RandomNonzeroScalar(rng)), kSm, kUtil, kNow};
    const SessionKeySchedule s = DeriveSchedule(seed, t);
    const auto want = oracle::Schedule(seed.value, kSm, kUtil, t);
    ASSERT_EQ(s.size(), t + 1);
    for (std::size_t j = 0; j <= t; ++j) EXPECT_EQ(s.key(j), want[j]) << "t=" << t << " j=" << j;
  }
}

TEST(Schedule, KeysPairwiseDistinct) {
  const GroupPtr g = MakeProductionGroup();
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    SeedKey seed{g->ScalarMulBase(g->RandomNonzeroScalar(rng)), kSm, kUtil, kNow};
    const auto s = DeriveSchedule(seed, 64);
    EXPECT_EQ(std::set<Digest>(s.keys().begin(), s.keys().end()).size(), 65u);
  }
}

TEST(Schedule, ExhaustionAndCursor) {
  const GroupPtr g = MakeToyGroup();
  SessionKeySchedule s = DeriveSchedule({g->generator(), kSm, kUtil, kNow}, 2);
  EXPECT_EQ(s.ClaimRound(), 0u);
  EXPECT_EQ(s.ClaimRound(), 1u);
  EXPECT_EQ(s.ClaimRound(), 2u);
  EXPECT_PROTOCOL_ERROR(s.ClaimRound(), ErrorCode::kScheduleExhausted);
  EXPECT_PROTOCOL_ERROR(MaskForRound(*g, s, 3, 0), ErrorCode::kScheduleExhausted);
}

TEST(MaskForRound, DeterministicAndMatchesDefinition) {
  const GroupPtr g = MakeToyGroup();
  const auto s = DeriveSchedule({g->generator(), kSm, kUtil, kNow}, 4);
  for (std::uint32_t field = 0; field < 26; ++field) {
    Bytes data(s.key(3).begin(), s.key(3).end());
    oracle::PutBE(data, field, 4);
    EXPECT_EQ(MaskForRound(*g, s, 3, field), g->HashToScalar("mask", data));
    EXPECT_EQ(MaskForRound(*g, s, 3, field), MaskForRound(*g, s, 3, field));
  }
}

TEST(MaskForRound, FieldMasksDistinctInToyGroup) {
  const GroupPtr g = MakeToyGroup();
  Rng rng(7);
  int seeds_with_collision = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = DeriveSchedule(
        {g->ScalarMulBase(g->RandomNonzeroScalar(rng)), kSm, kUtil, kNow}, 1);
    std::set<mpz_class> seen;
    for (std::uint32_t f = 0; f < 26; ++f) seen.insert(MaskForRound(*g, s, 0, f).value());
    seeds_with_collision += seen.size() != 26;
  }
  // Birthday bound over q = 65521 with 26 draws: about 0.5% per seed.
  EXPECT_LE(seeds_with_collision, 3);
}

TEST(ReplayCache, ForgetsOutsideWindow) {
  ReplayCache cache;
  EXPECT_TRUE(cache.Insert(1, 100, 100, 60));
  EXPECT_FALSE(cache.Insert(1, 100, 120, 60));
  EXPECT_TRUE(cache.Insert(2, 100, 120, 60));
  EXPECT_TRUE(cache.Insert(1, 200, 200, 60));
  EXPECT_EQ(cache.size(), 1u);
}

}  // namespace
