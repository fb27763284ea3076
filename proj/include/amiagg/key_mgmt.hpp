#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "amiagg/bytes.hpp"
#include "amiagg/group.hpp"
#include "amiagg/rng.hpp"

namespace amiagg {

using NodeId = std::uint64_t;
using Timestamp = std::uint64_t;  // seconds since epoch

inline constexpr Timestamp kDefaultFreshnessWindow = 60;

/// Static public-key registry issued by the trusted authority.
using KeyRegistry = std::map<NodeId, GroupElement>;

// Frame type bytes shared by every wire format in the library.
enum class FrameType : std::uint8_t {
  kKeyRequest = 0x01,
  kKeyReply = 0x02,
  kMeterReport = 0x10,
  kAggregate = 0x11,
  kPaillierReport = 0x20,
  kPaillierAggregate = 0x21,
  kSealedRequest = 0x30,
};

struct KeyEstablishRequest {
  NodeId sm_id = 0;
  GroupElement ephemeral_point;
  Timestamp timestamp = 0;
  Signature signature;
};

struct KeyEstablishReply {
  NodeId utility_id = 0;
  GroupElement ephemeral_point;
  Timestamp timestamp = 0;
  Digest confirmation_tag{};
  Signature signature;
};

struct SeedKey {
  GroupElement value;
  NodeId sm_id = 0;
  NodeId utility_id = 0;
  Timestamp established_at = 0;
};

// Frame layout (big-endian integers):
//   request: [0x01][8 sm_id][element][8 timestamp][signature]
//   reply:   [0x02][8 utility_id][element][8 timestamp][32 tag][signature]
// The signature is Schnorr over every byte that precedes it, and is encoded
// as [element commitment][scalar response].
Bytes EncodeRequest(const Group& group, const KeyEstablishRequest& req);
KeyEstablishRequest DecodeRequest(const Group& group, ByteView frame);
Bytes EncodeReply(const Group& group, const KeyEstablishReply& reply);
KeyEstablishReply DecodeReply(const Group& group, ByteView frame);

/// Meter-side state between sending a request and receiving the reply.
struct PendingRequest {
  Scalar ephemeral_secret;
  KeyEstablishRequest request;
};

PendingRequest BuildRequest(const Group& group, const KeyPair& sm_keypair,
                            NodeId sm_id, Timestamp now, Rng& rng);

/// Remembers (sender, timestamp) pairs seen within the freshness window so
/// a captured request cannot be replayed while it is still fresh.
class ReplayCache {
 public:
  /// Returns false if the pair was already present.
  bool Insert(NodeId sender, Timestamp ts, Timestamp now, Timestamp window);
  std::size_t size() const { return seen_.size(); }

 private:
  std::set<std::pair<NodeId, Timestamp>> seen_;
};

struct ProcessedRequest {
  SeedKey seed;
  KeyEstablishReply reply;
};

/// Utility side. Throws UnknownSender, StaleTimestamp, BadSignature or
/// ReplayedRequest; nothing is returned (no reply is sent) on rejection.
ProcessedRequest ProcessRequest(const Group& group, const KeyEstablishRequest& req,
                                const KeyRegistry& registry,
                                const KeyPair& utility_keypair, NodeId utility_id,
                                Timestamp now, Timestamp freshness_window,
                                ReplayCache& replay_cache, Rng& rng);

/// Meter side. Checks freshness and the utility's signature, derives the seed
/// key and matches the confirmation tag before accepting it.
SeedKey Finalize(const Group& group, const KeyEstablishReply& reply,
                 const PendingRequest& pending, const KeyRegistry& registry,
                 Timestamp now, Timestamp freshness_window);

/// hash_digest(K || 0x01)
Digest ConfirmationTag(const GroupElement& seed_key);

/// t+1 one-time round keys, keys[j] = F_j xor B_{t-j}, where
/// F_0 = H(K || id_sm), B_0 = H(K || id_utility) and each later link hashes
/// the previous one.
class SessionKeySchedule {
 public:
  SessionKeySchedule() = default;
  explicit SessionKeySchedule(std::vector<Digest> keys)
      : keys_(std::move(keys)) {}

  std::size_t chain_length() const { return keys_.empty() ? 0 : keys_.size() - 1; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<Digest>& keys() const { return keys_; }

  /// Throws ScheduleExhausted for round > t.
  const Digest& key(std::size_t round) const;

  std::size_t cursor() const { return cursor_; }
  /// Claims the next unused round index. Throws ScheduleExhausted once all
  /// t+1 keys are spent; a fresh agreement run is then required.
  std::size_t ClaimRound();

  friend bool operator==(const SessionKeySchedule& a, const SessionKeySchedule& b) {
    return a.keys_ == b.keys_;
  }

 private:
  std::vector<Digest> keys_;
  std::size_t cursor_ = 0;
};

SessionKeySchedule DeriveSchedule(const SeedKey& seed, std::size_t chain_length);

/// Per-field cover scalar: hash_to_scalar("mask", keys[round] || field_index).
Scalar MaskForRound(const Group& group, const SessionKeySchedule& schedule,
                    std::size_t round, std::uint32_t field_index);

/// Short hex fingerprint of a schedule, for logs and CLI output.
std::string ScheduleFingerprint(const SessionKeySchedule& schedule);

}  // namespace amiagg
