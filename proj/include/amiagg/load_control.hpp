#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "amiagg/bytes.hpp"
#include "amiagg/consumption_vector.hpp"
#include "amiagg/error.hpp"
#include "amiagg/group.hpp"
#include "amiagg/masked_aggregation.hpp"
#include "json.hpp"

namespace amiagg {

/// Community-level picture the utility gets after unmasking.
struct AggregateView {
  struct Cell {
    std::uint64_t meters_on = 0;
    std::uint64_t total_consumption = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
  };
  std::array<std::array<Cell, kLevels>, kControllableAppliances> controllable{};
  std::uint64_t reporting_meters = 0;
  std::uint64_t uncontrollable_consumption = 0;

  const Cell& at(Appliance a, Level l) const {
    return controllable[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)];
  }
  Cell& at(Appliance a, Level l) {
    return controllable[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)];
  }
  std::uint64_t LevelConsumption(Level l) const;
  std::uint64_t ControllableConsumption() const;

  friend bool operator==(const AggregateView&, const AggregateView&) = default;
};

AggregateView InterpretAggregate(const RecoveredTotal& total);

/// Level-targeted reduction broadcast to the whole community.
struct ReductionRequest {
  std::array<std::array<std::uint64_t, kLevels>, kControllableAppliances> units{};
  std::uint64_t target = 0;

  std::uint64_t at(Appliance a, Level l) const {
    return units[static_cast<std::size_t>(a)][static_cast<std::size_t>(l)];
  }
  std::uint64_t LevelTotal(Level l) const;
  std::uint64_t Total() const;

  friend bool operator==(const ReductionRequest&, const ReductionRequest&) = default;
};

/// Thrown by PlanReduction when the community cannot shed the required load;
/// carries the largest request that could be made.
class InsufficientLoadError : public ProtocolError {
 public:
  InsufficientLoadError(const std::string& what, ReductionRequest maximal)
      : ProtocolError(ErrorCode::kInsufficientControllableLoad, what),
        maximal_(maximal) {}
  const ReductionRequest& maximal_request() const { return maximal_; }

 private:
  ReductionRequest maximal_;
};

/// Waterfall over levels: High is drained first, then Medium, and Low only
/// when High and Medium together fall short. Within a level, the amount is
/// split across appliances in proportion to their consumption using
/// largest-remainder rounding, ties going to the earlier appliance.
ReductionRequest PlanReduction(const AggregateView& view, std::uint64_t required);

nlohmann::json ToJson(const ReductionRequest& req);
nlohmann::json ToJson(const AggregateView& view);

// Sealed downlink frame:
//   [0x30][12 nonce][ciphertext][32 tag]
// ciphertext = ChaCha20(key, nonce) over the 12 cells and target as 8-byte
// big-endian integers; tag = SHA-256(key || nonce || ciphertext). The nonce
// is derived from the key and plaintext, so sealing is deterministic.
Bytes SealRequest(const ReductionRequest& req, const Digest& key);
/// Throws IntegrityFailure on a bad tag (tampering or wrong key).
ReductionRequest OpenRequest(ByteView sealed, const Digest& key);

/// Downlink key for one round, derived from that round's session key.
Digest DownlinkKey(const SessionKeySchedule& schedule, std::size_t round);

}  // namespace amiagg
