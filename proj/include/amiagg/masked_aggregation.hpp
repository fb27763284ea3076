#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include <gmpxx.h>

#include "amiagg/bytes.hpp"
#include "amiagg/consumption_vector.hpp"
#include "amiagg/group.hpp"
#include "amiagg/key_mgmt.hpp"

namespace amiagg {

enum class MaskMode : std::uint8_t {
  // One masked integer mod 2^L, L = packed width.
  kScalar = 1,
  // One group element (r_f + k_f)P per field.
  kGroup = 2,
};

std::string_view ToString(MaskMode mode);

/// Parameters every participant in one aggregation shares.
struct MaskingContext {
  GroupPtr group;
  CodecConfig cfg;
  Timestamp freshness_window = kDefaultFreshnessWindow;

  /// Group mode recovers fields by bounded discrete log, which is only
  /// unambiguous when every field capacity is below the group order.
  /// Throws InvalidConfig otherwise.
  void Validate(MaskMode mode) const;

  std::size_t scalar_payload_bytes() const { return (cfg.total_bits() + 7) / 8; }
  std::size_t payload_bytes(MaskMode mode) const;
};

using FieldMasks = std::array<Scalar, kFieldCount>;

/// Cover scalars for all 26 fields of one round.
FieldMasks RoundMasks(const Group& group, const SessionKeySchedule& schedule,
                      std::size_t round);

struct MaskedReport {
  NodeId sender = 0;
  std::uint32_t round = 0;
  MaskMode mode = MaskMode::kScalar;
  mpz_class scalar_payload;                 // scalar mode
  std::vector<GroupElement> group_payload;  // group mode, kFieldCount entries
  Timestamp timestamp = 0;
  Digest integrity_digest{};
};

// Meter report frame:
//   [0x10][1 mode][8 sender][4 round][payload][8 timestamp][32 digest]
// payload is ceil(L/8) big-endian bytes in scalar mode, or kFieldCount
// element encodings in group mode. The digest is SHA-256 over every byte
// before it.
Bytes EncodeReport(const MaskingContext& ctx, const MaskedReport& report);
/// Any length, digest or structural problem is reported as IntegrityFailure.
MaskedReport DecodeReport(const MaskingContext& ctx, ByteView frame);

MaskedReport MakeReport(const MaskingContext& ctx, const ConsumptionVector& v,
                        const SessionKeySchedule& schedule, NodeId sender,
                        std::uint32_t round, MaskMode mode, Timestamp now);

/// Same as MakeReport with caller-chosen covers. Used by tests and the
/// collusion probe to construct reports with known masks.
MaskedReport MakeReportWithMasks(const MaskingContext& ctx, const ConsumptionVector& v,
                                 const FieldMasks& masks, NodeId sender,
                                 std::uint32_t round, MaskMode mode, Timestamp now);

/// Running in-network sum held by one tree node.
class AggregateState {
 public:
  AggregateState(const MaskingContext& ctx, MaskMode mode, std::uint32_t round);

  MaskMode mode() const { return mode_; }
  std::uint32_t round() const { return round_; }
  const std::set<NodeId>& contributors() const { return contributors_; }
  const mpz_class& scalar_payload() const { return scalar_payload_; }
  const std::vector<GroupElement>& group_payload() const { return group_payload_; }

  friend bool operator==(const AggregateState&, const AggregateState&) = default;

 private:
  friend struct AggregateStateAccess;

  MaskMode mode_;
  std::uint32_t round_;
  std::set<NodeId> contributors_;
  mpz_class scalar_payload_;
  std::vector<GroupElement> group_payload_;
};

/// Adds one verified, fresh report. Throws ModeMismatch, RoundMismatch,
/// DuplicateContributor, IntegrityFailure, StaleReport, or FieldOverflow
/// when the contributor count would exceed n_max.
AggregateState Fold(const MaskingContext& ctx, AggregateState acc,
                    const MaskedReport& report, Timestamp now);

/// Combines a child's partial aggregate. Contributor sets must be disjoint.
AggregateState Merge(const MaskingContext& ctx, AggregateState acc,
                     const AggregateState& child);

// Aggregate uplink frame:
//   [0x11][1 mode][8 sender][4 round][payload][4 count][8 id]*count
//   [8 timestamp][32 digest]
Bytes EncodeAggregateState(const MaskingContext& ctx, const AggregateState& state,
                           NodeId sender, Timestamp now);
AggregateState DecodeAggregateState(const MaskingContext& ctx, ByteView frame,
                                    NodeId* sender = nullptr,
                                    Timestamp* timestamp = nullptr);

struct RecoveredTotal {
  ConsumptionVector total;
  std::size_t contributing_meters = 0;
  friend bool operator==(const RecoveredTotal&, const RecoveredTotal&) = default;
};

/// Per-field cover totals for one round over a set of meters, as plain
/// integers. Covers depend only on the schedules, so the utility can sum
/// them before any report arrives.
struct CoverSums {
  std::uint32_t round = 0;
  std::set<NodeId> covered;
  std::array<mpz_class, kFieldCount> sums{};
};

CoverSums PrecomputeCovers(const MaskingContext& ctx,
                           const std::map<NodeId, SessionKeySchedule>& schedules,
                           std::uint32_t round);

/// Utility side: subtracts every contributor's covers in one batch and
/// decodes the residual. Throws MissingSchedule or, in group mode,
/// DLRecoveryFailure when a residual falls outside its field bound.
RecoveredTotal Unmask(const MaskingContext& ctx, const AggregateState& acc,
                      const std::map<NodeId, SessionKeySchedule>& schedules);

struct GroupElementHash {
  std::size_t operator()(const GroupElement& e) const noexcept;
};

/// Baby-step giant-step solver for x*P = Q with 0 <= x <= bound. The
/// baby-step table is built once and can be reused across queries. A
/// baby_steps of 0 picks ceil(sqrt(bound + 1)); larger tables trade memory
/// for fewer giant steps per query.
class BabyStepGiantStep {
 public:
  BabyStepGiantStep(const Group& group, std::uint64_t bound, std::uint64_t baby_steps = 0);

  std::optional<std::uint64_t> Solve(const GroupElement& target) const;
  std::uint64_t bound() const { return bound_; }
  std::uint64_t baby_steps() const { return step_; }
  std::uint64_t max_giant_steps() const { return (bound_ + step_) / step_; }

 private:
  const Group& group_;
  std::uint64_t bound_;
  std::uint64_t step_;
  GroupElement giant_stride_;  // step * P
  std::unordered_map<GroupElement, std::uint64_t, GroupElementHash> baby_;
};

inline constexpr std::uint64_t kDefaultBabySteps = 4096;

/// Group-mode residual decoder with one solver per field width. Holds the
/// group alive; build once per community and reuse every round.
class ResidualDecoder {
 public:
  explicit ResidualDecoder(const MaskingContext& ctx,
                           std::uint64_t baby_steps = kDefaultBabySteps);
  const BabyStepGiantStep& solver(std::size_t field) const {
    return field % 2 == 0 ? count_ : consumption_;
  }

 private:
  GroupPtr group_;
  BabyStepGiantStep count_;
  BabyStepGiantStep consumption_;
};

/// Same, starting from precomputed sums and reusing a decoder when given.
/// Meters that were expected but did not report have their covers taken
/// back out; RoundMismatch if the sums belong to another round.
RecoveredTotal Unmask(const MaskingContext& ctx, const AggregateState& acc,
                      const std::map<NodeId, SessionKeySchedule>& schedules,
                      const CoverSums& covers, const ResidualDecoder* decoder = nullptr);

/// One-shot bounded discrete log. Throws NotFound.
std::uint64_t BoundedDlog(const Group& group, const GroupElement& target,
                          std::uint64_t bound);

}  // namespace amiagg
