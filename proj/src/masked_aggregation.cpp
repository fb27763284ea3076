#include "amiagg/masked_aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "amiagg/error.hpp"
#include "internal.hpp"

namespace amiagg {

struct AggregateStateAccess {
  static std::set<NodeId>& contributors(AggregateState& s) { return s.contributors_; }
  static mpz_class& scalar(AggregateState& s) { return s.scalar_payload_; }
  static std::vector<GroupElement>& group(AggregateState& s) { return s.group_payload_; }
};

std::string_view ToString(MaskMode mode) {
  return mode == MaskMode::kScalar ? "scalar" : "group";
}

void MaskingContext::Validate(MaskMode mode) const {
  if (!group) throw ProtocolError(ErrorCode::kInvalidConfig, "no group configured");
  cfg.Validate();
  if (mode == MaskMode::kGroup) {
    const mpz_class widest(static_cast<unsigned long>(
        std::max(cfg.count_capacity(), cfg.consumption_capacity())));
    if (widest >= group->order()) {
      throw ProtocolError(ErrorCode::kInvalidConfig,
                          "group mode needs every field capacity below the group "
                          "order; shrink the codec widths or use a larger group");
    }
  }
}

std::size_t MaskingContext::payload_bytes(MaskMode mode) const {
  return mode == MaskMode::kScalar ? scalar_payload_bytes()
                                   : kFieldCount * group->element_size();
}

FieldMasks RoundMasks(const Group& group, const SessionKeySchedule& schedule,
                      std::size_t round) {
  FieldMasks masks;
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    masks[f] = MaskForRound(group, schedule, round, static_cast<std::uint32_t>(f));
  }
  return masks;
}

namespace {


mpz_class ModPow2(const mpz_class& x, unsigned bits) {
  mpz_class r;
  mpz_fdiv_r_2exp(r.get_mpz_t(), x.get_mpz_t(), bits);
  return r;
}

// Σ_f mask_f · 2^offset_f, as a plain integer. Each mask is a full-width
// scalar, so it covers its own field and spills upward; everything cancels
// exactly at the utility.
mpz_class EmbedMasks(const CodecConfig& cfg, const std::array<mpz_class, kFieldCount>& masks) {
  mpz_class total = 0;
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    total += masks[f] << cfg.field_offset(f);
  }
  return total;
}

void AppendPayload(const MaskingContext& ctx, Bytes& out, MaskMode mode,
                   const mpz_class& scalar, const std::vector<GroupElement>& points) {
  if (mode == MaskMode::kScalar) {
    Append(out, detail::MpzToBytes(scalar, ctx.scalar_payload_bytes()));
  } else {
    for (const GroupElement& e : points) Append(out, e.bytes());
  }
}

void ReadPayload(const MaskingContext& ctx, ByteReader& r, MaskMode mode,
                 mpz_class& scalar, std::vector<GroupElement>& points) {
  if (mode == MaskMode::kScalar) {
    scalar = detail::MpzFromBytes(r.Take(ctx.scalar_payload_bytes()));
    if (mpz_sizeinbase(scalar.get_mpz_t(), 2) > ctx.cfg.total_bits() && scalar != 0) {
      throw ProtocolError(ErrorCode::kMalformedFrame, "scalar payload too wide");
    }
    return;
  }
  points.clear();
  points.reserve(kFieldCount);
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    auto e = ctx.group->Decode(r.Take(ctx.group->element_size()));
    if (!e) throw ProtocolError(ErrorCode::kMalformedFrame, "invalid group element");
    points.push_back(*e);
  }
}

MaskMode ParseMode(std::uint8_t b) {
  if (b == static_cast<std::uint8_t>(MaskMode::kScalar)) return MaskMode::kScalar;
  if (b == static_cast<std::uint8_t>(MaskMode::kGroup)) return MaskMode::kGroup;
  throw ProtocolError(ErrorCode::kMalformedFrame, "unknown masking mode");
}

Bytes ReportBody(const MaskingContext& ctx, const MaskedReport& report) {
  Bytes out;
  AppendU8(out, static_cast<std::uint8_t>(FrameType::kMeterReport));
  AppendU8(out, static_cast<std::uint8_t>(report.mode));
  AppendBE(out, report.sender, 8);
  AppendBE(out, report.round, 4);
  AppendPayload(ctx, out, report.mode, report.scalar_payload, report.group_payload);
  AppendBE(out, report.timestamp, 8);
  return out;
}

// Splits off and checks the trailing digest; everything wrong with a frame
// surfaces as IntegrityFailure.
ByteView VerifiedBody(ByteView frame) {
  if (frame.size() < sizeof(Digest)) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "frame shorter than its digest");
  }
  ByteView body = frame.first(frame.size() - sizeof(Digest));
  const Digest expected = HashDigest(body);
  if (!std::equal(expected.begin(), expected.end(), frame.end() - sizeof(Digest))) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "digest mismatch");
  }
  return body;
}

void CheckFresh(const MaskingContext& ctx, Timestamp ts, Timestamp now) {
  const Timestamp age = now >= ts ? now - ts : ts - now;
  if (age > ctx.freshness_window) {
    throw ProtocolError(ErrorCode::kStaleReport,
                        "report timestamp outside freshness window");
  }
}

}  // namespace

Bytes EncodeReport(const MaskingContext& ctx, const MaskedReport& report) {
  Bytes out = ReportBody(ctx, report);
  Append(out, report.integrity_digest);
  return out;
}

MaskedReport DecodeReport(const MaskingContext& ctx, ByteView frame) {
  ByteView body = VerifiedBody(frame);
  try {
    ByteReader r(body);
    if (r.ReadU8() != static_cast<std::uint8_t>(FrameType::kMeterReport)) {
      throw ProtocolError(ErrorCode::kMalformedFrame, "not a meter report");
    }
    MaskedReport report;
    report.mode = ParseMode(r.ReadU8());
    report.sender = r.ReadBE(8);
    report.round = static_cast<std::uint32_t>(r.ReadBE(4));
    ReadPayload(ctx, r, report.mode, report.scalar_payload, report.group_payload);
    report.timestamp = r.ReadBE(8);
    if (r.remaining() != 0) throw ProtocolError(ErrorCode::kMalformedFrame, "trailing bytes");
    std::copy(frame.end() - sizeof(Digest), frame.end(), report.integrity_digest.begin());
    return report;
  } catch (const ProtocolError& e) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, e.what());
  }
}

MaskedReport MakeReportWithMasks(const MaskingContext& ctx, const ConsumptionVector& v,
                                 const FieldMasks& masks, NodeId sender,
                                 std::uint32_t round, MaskMode mode, Timestamp now) {
  ctx.Validate(mode);
  const Group& group = *ctx.group;
  MaskedReport report;
  report.sender = sender;
  report.round = round;
  report.mode = mode;
  report.timestamp = now;
  if (mode == MaskMode::kScalar) {
    std::array<mpz_class, kFieldCount> raw;
    for (std::size_t f = 0; f < kFieldCount; ++f) raw[f] = masks[f].value();
    report.scalar_payload =
        ModPow2(Pack(v, ctx.cfg) + EmbedMasks(ctx.cfg, raw), ctx.cfg.total_bits());
  } else {
    Pack(v, ctx.cfg);  // width check
    report.group_payload.reserve(kFieldCount);
    for (std::size_t f = 0; f < kFieldCount; ++f) {
      const Scalar covered = group.Add(group.MakeScalar(v.field(f)), masks[f]);
      report.group_payload.push_back(group.ScalarMulBase(covered));
    }
  }
  report.integrity_digest = HashDigest(ReportBody(ctx, report));
  return report;
}

MaskedReport MakeReport(const MaskingContext& ctx, const ConsumptionVector& v,
                        const SessionKeySchedule& schedule, NodeId sender,
                        std::uint32_t round, MaskMode mode, Timestamp now) {
  const FieldMasks masks = RoundMasks(*ctx.group, schedule, round);
  return MakeReportWithMasks(ctx, v, masks, sender, round, mode, now);
}

AggregateState::AggregateState(const MaskingContext& ctx, MaskMode mode,
                               std::uint32_t round)
    : mode_(mode), round_(round), scalar_payload_(0) {
  ctx.Validate(mode);
  if (mode == MaskMode::kGroup) {
    group_payload_.assign(kFieldCount, ctx.group->identity());
  }
}

namespace {

void CheckCompatible(const AggregateState& acc, MaskMode mode, std::uint32_t round) {
  if (mode != acc.mode()) {
    throw ProtocolError(ErrorCode::kModeMismatch, "masking modes differ");
  }
  if (round != acc.round()) {
    throw ProtocolError(ErrorCode::kRoundMismatch,
                        "round " + std::to_string(round) + " folded into round " +
                            std::to_string(acc.round()));
  }
}

void AddPayload(const MaskingContext& ctx, AggregateState& acc, const mpz_class& scalar,
                const std::vector<GroupElement>& points) {
  if (acc.mode() == MaskMode::kScalar) {
    mpz_class& s = AggregateStateAccess::scalar(acc);
    s = ModPow2(s + scalar, ctx.cfg.total_bits());
    return;
  }
  auto& mine = AggregateStateAccess::group(acc);
  const GroupElement& zero = ctx.group->identity();
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    // A fresh accumulator is all identity; skip the no-op adds.
    if (mine[f] == zero) {
      mine[f] = points[f];
    } else if (points[f] != zero) {
      mine[f] = ctx.group->PointAdd(mine[f], points[f]);
    }
  }
}

void CheckCapacity(const MaskingContext& ctx, std::size_t contributors) {
  if (contributors > ctx.cfg.n_max) {
    throw ProtocolError(ErrorCode::kFieldOverflow,
                        "more than n_max = " + std::to_string(ctx.cfg.n_max) +
                            " contributors");
  }
}

}  // namespace

AggregateState Fold(const MaskingContext& ctx, AggregateState acc,
                    const MaskedReport& report, Timestamp now) {
  CheckCompatible(acc, report.mode, report.round);
  if (acc.contributors().contains(report.sender)) {
    throw ProtocolError(ErrorCode::kDuplicateContributor,
                        "meter " + std::to_string(report.sender) + " already folded");
  }
  if (report.mode == MaskMode::kGroup && report.group_payload.size() != kFieldCount) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "wrong group payload length");
  }
  if (HashDigest(ReportBody(ctx, report)) != report.integrity_digest) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, "report digest mismatch");
  }
  CheckFresh(ctx, report.timestamp, now);
  CheckCapacity(ctx, acc.contributors().size() + 1);
  AddPayload(ctx, acc, report.scalar_payload, report.group_payload);
  AggregateStateAccess::contributors(acc).insert(report.sender);
  return acc;
}

AggregateState Merge(const MaskingContext& ctx, AggregateState acc,
                     const AggregateState& child) {
  CheckCompatible(acc, child.mode(), child.round());
  for (NodeId id : child.contributors()) {
    if (acc.contributors().contains(id)) {
      throw ProtocolError(ErrorCode::kDuplicateContributor,
                          "meter " + std::to_string(id) + " already folded");
    }
  }
  CheckCapacity(ctx, acc.contributors().size() + child.contributors().size());
  AddPayload(ctx, acc, child.scalar_payload(), child.group_payload());
  AggregateStateAccess::contributors(acc).insert(child.contributors().begin(),
                                                 child.contributors().end());
  return acc;
}

namespace {

Bytes AggregateBody(const MaskingContext& ctx, const AggregateState& state,
                    NodeId sender, Timestamp now) {
  Bytes out;
  AppendU8(out, static_cast<std::uint8_t>(FrameType::kAggregate));
  AppendU8(out, static_cast<std::uint8_t>(state.mode()));
  AppendBE(out, sender, 8);
  AppendBE(out, state.round(), 4);
  AppendPayload(ctx, out, state.mode(), state.scalar_payload(), state.group_payload());
  AppendBE(out, state.contributors().size(), 4);
  for (NodeId id : state.contributors()) AppendBE(out, id, 8);
  AppendBE(out, now, 8);
  return out;
}

}  // namespace

Bytes EncodeAggregateState(const MaskingContext& ctx, const AggregateState& state,
                           NodeId sender, Timestamp now) {
  Bytes out = AggregateBody(ctx, state, sender, now);
  Append(out, HashDigest(out));
  return out;
}

AggregateState DecodeAggregateState(const MaskingContext& ctx, ByteView frame,
                                    NodeId* sender, Timestamp* timestamp) {
  ByteView body = VerifiedBody(frame);
  try {
    ByteReader r(body);
    if (r.ReadU8() != static_cast<std::uint8_t>(FrameType::kAggregate)) {
      throw ProtocolError(ErrorCode::kMalformedFrame, "not an aggregate frame");
    }
    const MaskMode mode = ParseMode(r.ReadU8());
    const NodeId from = r.ReadBE(8);
    const auto round = static_cast<std::uint32_t>(r.ReadBE(4));
    AggregateState state(ctx, mode, round);
    ReadPayload(ctx, r, mode, AggregateStateAccess::scalar(state),
                AggregateStateAccess::group(state));
    const std::uint64_t count = r.ReadBE(4);
    if (count > r.remaining() / 8) {
      throw ProtocolError(ErrorCode::kMalformedFrame, "contributor list truncated");
    }
    for (std::uint64_t i = 0; i < count; ++i) {
      if (!AggregateStateAccess::contributors(state).insert(r.ReadBE(8)).second) {
        throw ProtocolError(ErrorCode::kMalformedFrame, "duplicate contributor id");
      }
    }
    const Timestamp ts = r.ReadBE(8);
    if (r.remaining() != 0) throw ProtocolError(ErrorCode::kMalformedFrame, "trailing bytes");
    if (sender) *sender = from;
    if (timestamp) *timestamp = ts;
    return state;
  } catch (const ProtocolError& e) {
    throw ProtocolError(ErrorCode::kIntegrityFailure, e.what());
  }
}

namespace {

const FieldMasks& MasksFor(const Group& group,
                           const std::map<NodeId, SessionKeySchedule>& schedules,
                           NodeId id, std::uint32_t round, FieldMasks& scratch) {
  auto it = schedules.find(id);
  if (it == schedules.end()) {
    throw ProtocolError(ErrorCode::kMissingSchedule,
                        "no session keys for meter " + std::to_string(id));
  }
  scratch = RoundMasks(group, it->second, round);
  return scratch;
}

}  // namespace

CoverSums PrecomputeCovers(const MaskingContext& ctx,
                           const std::map<NodeId, SessionKeySchedule>& schedules,
                           std::uint32_t round) {
  CoverSums out;
  out.round = round;
  out.sums.fill(0);
  FieldMasks scratch;
  for (const auto& [id, schedule] : schedules) {
    const FieldMasks& masks = MasksFor(*ctx.group, schedules, id, round, scratch);
    for (std::size_t f = 0; f < kFieldCount; ++f) out.sums[f] += masks[f].value();
    out.covered.insert(id);
  }
  return out;
}

RecoveredTotal Unmask(const MaskingContext& ctx, const AggregateState& acc,
                      const std::map<NodeId, SessionKeySchedule>& schedules) {
  CoverSums none;
  none.round = acc.round();
  none.sums.fill(0);
  return Unmask(ctx, acc, schedules, none);
}

RecoveredTotal Unmask(const MaskingContext& ctx, const AggregateState& acc,
                      const std::map<NodeId, SessionKeySchedule>& schedules,
                      const CoverSums& covers, const ResidualDecoder* decoder) {
  ctx.Validate(acc.mode());
  const Group& group = *ctx.group;
  if (covers.round != acc.round()) {
    throw ProtocolError(ErrorCode::kRoundMismatch, "cover sums are for round " +
                                                       std::to_string(covers.round));
  }

  // Batch cover removal: sum every contributor's masks first, subtract once.
  std::array<mpz_class, kFieldCount> mask_sums = covers.sums;
  FieldMasks scratch;
  for (NodeId id : covers.covered) {
    if (acc.contributors().contains(id)) continue;
    const FieldMasks& masks = MasksFor(group, schedules, id, acc.round(), scratch);
    for (std::size_t f = 0; f < kFieldCount; ++f) mask_sums[f] -= masks[f].value();
  }
  for (NodeId id : acc.contributors()) {
    if (covers.covered.contains(id)) continue;
    const FieldMasks& masks = MasksFor(group, schedules, id, acc.round(), scratch);
    for (std::size_t f = 0; f < kFieldCount; ++f) mask_sums[f] += masks[f].value();
  }

  RecoveredTotal out;
  out.contributing_meters = acc.contributors().size();
  if (acc.mode() == MaskMode::kScalar) {
    const unsigned bits = ctx.cfg.total_bits();
    const mpz_class residual =
        ModPow2(acc.scalar_payload() - EmbedMasks(ctx.cfg, mask_sums), bits);
    out.total = Unpack(residual, ctx.cfg);
    return out;
  }

  std::optional<ResidualDecoder> local;
  if (!decoder) decoder = &local.emplace(ctx);
  for (std::size_t f = 0; f < kFieldCount; ++f) {
    const Scalar cover = group.MakeScalar(mask_sums[f]);
    const GroupElement residual =
        group.PointSub(acc.group_payload()[f], group.ScalarMulBase(cover));
    const auto value = decoder->solver(f).Solve(residual);
    if (!value) {
      throw ProtocolError(ErrorCode::kDLRecoveryFailure,
                          ConsumptionVector::FieldName(f) +
                              " residual outside its bound; a cover is missing or "
                              "extra, or the field overflowed");
    }
    out.total.set_field(f, *value);
  }
  return out;
}

std::size_t GroupElementHash::operator()(const GroupElement& e) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (std::uint8_t b : e.bytes()) h = (h ^ b) * 1099511628211ull;
  return h;
}

BabyStepGiantStep::BabyStepGiantStep(const Group& group, std::uint64_t bound,
                                     std::uint64_t baby_steps)
    : group_(group), bound_(bound) {
  if (baby_steps == 0) {
    step_ = static_cast<std::uint64_t>(std::ceil(std::sqrt(static_cast<double>(bound) + 1)));
    while (step_ * step_ < bound + 1) ++step_;
  } else {
    step_ = std::min(baby_steps, bound + 1);
  }
  baby_.reserve(step_);
  GroupElement current = group.identity();
  for (std::uint64_t j = 0; j < step_; ++j) {
    baby_.emplace(current, j);
    current = group.PointAdd(current, group.generator());
  }
  giant_stride_ = current;  // step * P
}

std::optional<std::uint64_t> BabyStepGiantStep::Solve(const GroupElement& target) const {
  GroupElement gamma = target;
  const std::uint64_t giants = max_giant_steps();
  for (std::uint64_t i = 0; i < giants; ++i) {
    if (auto it = baby_.find(gamma); it != baby_.end()) {
      const std::uint64_t x = i * step_ + it->second;
      if (x <= bound_) return x;
      return std::nullopt;
    }
    gamma = group_.PointSub(gamma, giant_stride_);
  }
  return std::nullopt;
}

ResidualDecoder::ResidualDecoder(const MaskingContext& ctx, std::uint64_t baby_steps)
    : group_(ctx.group),
      count_(*group_, ctx.cfg.count_capacity(), baby_steps),
      consumption_(*group_, ctx.cfg.consumption_capacity(), baby_steps) {}

std::uint64_t BoundedDlog(const Group& group, const GroupElement& target,
                          std::uint64_t bound) {
  const auto x = BabyStepGiantStep(group, bound).Solve(target);
  if (!x) {
    throw ProtocolError(ErrorCode::kNotFound,
                        "no discrete log within bound " + std::to_string(bound));
  }
  return *x;
}

}  // namespace amiagg
