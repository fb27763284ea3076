#include "amiagg/key_mgmt.hpp"

#include <algorithm>

#include "amiagg/error.hpp"

namespace amiagg {

namespace {

Bytes RequestBody(const KeyEstablishRequest& req) {
  Bytes out;
  AppendU8(out, static_cast<std::uint8_t>(FrameType::kKeyRequest));
  AppendBE(out, req.sm_id, 8);
  Append(out, req.ephemeral_point.bytes());
  AppendBE(out, req.timestamp, 8);
  return out;
}

Bytes ReplyBody(const KeyEstablishReply& reply) {
  Bytes out;
  AppendU8(out, static_cast<std::uint8_t>(FrameType::kKeyReply));
  AppendBE(out, reply.utility_id, 8);
  Append(out, reply.ephemeral_point.bytes());
  AppendBE(out, reply.timestamp, 8);
  Append(out, reply.confirmation_tag);
  return out;
}

GroupElement ReadElement(const Group& group, ByteReader& r) {
  auto e = group.Decode(r.Take(group.element_size()));
  if (!e) throw ProtocolError(ErrorCode::kMalformedFrame, "invalid group element");
  return *e;
}

Signature ReadSignature(const Group& group, ByteReader& r) {
  auto sig = DecodeSignature(group, r.Take(SignatureSize(group)));
  // A signature that does not even decode cannot verify.
  if (!sig) throw ProtocolError(ErrorCode::kBadSignature, "undecodable signature");
  return *sig;
}

void ExpectType(ByteReader& r, FrameType type) {
  if (r.ReadU8() != static_cast<std::uint8_t>(type)) {
    throw ProtocolError(ErrorCode::kMalformedFrame, "unexpected frame type");
  }
}

bool IsFresh(Timestamp ts, Timestamp now, Timestamp window) {
  const Timestamp age = now >= ts ? now - ts : ts - now;
  return age <= window;
}

}  // namespace

Bytes EncodeRequest(const Group& group, const KeyEstablishRequest& req) {
  Bytes out = RequestBody(req);
  Append(out, EncodeSignature(group, req.signature));
  return out;
}

KeyEstablishRequest DecodeRequest(const Group& group, ByteView frame) {
  ByteReader r(frame);
  ExpectType(r, FrameType::kKeyRequest);
  KeyEstablishRequest req;
  req.sm_id = r.ReadBE(8);
  req.ephemeral_point = ReadElement(group, r);
  req.timestamp = r.ReadBE(8);
  req.signature = ReadSignature(group, r);
  if (r.remaining() != 0) throw ProtocolError(ErrorCode::kMalformedFrame, "trailing bytes");
  return req;
}

Bytes EncodeReply(const Group& group, const KeyEstablishReply& reply) {
  Bytes out = ReplyBody(reply);
  Append(out, EncodeSignature(group, reply.signature));
  return out;
}

KeyEstablishReply DecodeReply(const Group& group, ByteView frame) {
  ByteReader r(frame);
  ExpectType(r, FrameType::kKeyReply);
  KeyEstablishReply reply;
  reply.utility_id = r.ReadBE(8);
  reply.ephemeral_point = ReadElement(group, r);
  reply.timestamp = r.ReadBE(8);
  ByteView tag = r.Take(reply.confirmation_tag.size());
  std::copy(tag.begin(), tag.end(), reply.confirmation_tag.begin());
  reply.signature = ReadSignature(group, r);
  if (r.remaining() != 0) throw ProtocolError(ErrorCode::kMalformedFrame, "trailing bytes");
  return reply;
}

PendingRequest BuildRequest(const Group& group, const KeyPair& sm_keypair,
                            NodeId sm_id, Timestamp now, Rng& rng) {
  PendingRequest pending;
  pending.ephemeral_secret = group.RandomNonzeroScalar(rng);
  pending.request.sm_id = sm_id;
  pending.request.ephemeral_point = group.ScalarMulBase(pending.ephemeral_secret);
  pending.request.timestamp = now;
  pending.request.signature = Sign(group, sm_keypair, RequestBody(pending.request));
  return pending;
}

bool ReplayCache::Insert(NodeId sender, Timestamp ts, Timestamp now,
                         Timestamp window) {
  std::erase_if(seen_, [&](const auto& entry) {
    return !IsFresh(entry.second, now, window);
  });
  return seen_.emplace(sender, ts).second;
}

Digest ConfirmationTag(const GroupElement& seed_key) {
  Bytes buf(seed_key.bytes().begin(), seed_key.bytes().end());
  buf.push_back(0x01);
  return HashDigest(buf);
}

ProcessedRequest ProcessRequest(const Group& group, const KeyEstablishRequest& req,
                                const KeyRegistry& registry,
                                const KeyPair& utility_keypair, NodeId utility_id,
                                Timestamp now, Timestamp freshness_window,
                                ReplayCache& replay_cache, Rng& rng) {
  auto it = registry.find(req.sm_id);
  if (it == registry.end()) {
    throw ProtocolError(ErrorCode::kUnknownSender,
                        "meter " + std::to_string(req.sm_id) + " not registered");
  }
  if (!IsFresh(req.timestamp, now, freshness_window)) {
    throw ProtocolError(ErrorCode::kStaleTimestamp, "request outside freshness window");
  }
  if (!Verify(group, it->second, RequestBody(req), req.signature)) {
    throw ProtocolError(ErrorCode::kBadSignature, "request signature invalid");
  }
  if (!group.Decode(req.ephemeral_point.bytes()) ||
      req.ephemeral_point == group.identity()) {
    throw ProtocolError(ErrorCode::kMalformedFrame, "degenerate ephemeral point");
  }
  // Only authenticated requests reach the cache, so forgeries cannot evict
  // or pre-empt legitimate entries.
  if (!replay_cache.Insert(req.sm_id, req.timestamp, now, freshness_window)) {
    throw ProtocolError(ErrorCode::kReplayedRequest,
                        "duplicate request within freshness window");
  }

  const Scalar utility_secret = group.RandomNonzeroScalar(rng);
  ProcessedRequest out;
  out.seed.value = group.ScalarMul(utility_secret, req.ephemeral_point);
  out.seed.sm_id = req.sm_id;
  out.seed.utility_id = utility_id;
  out.seed.established_at = now;

  out.reply.utility_id = utility_id;
  out.reply.ephemeral_point = group.ScalarMulBase(utility_secret);
  out.reply.timestamp = now;
  out.reply.confirmation_tag = ConfirmationTag(out.seed.value);
  out.reply.signature = Sign(group, utility_keypair, ReplyBody(out.reply));
  return out;
}

SeedKey Finalize(const Group& group, const KeyEstablishReply& reply,
                 const PendingRequest& pending, const KeyRegistry& registry,
                 Timestamp now, Timestamp freshness_window) {
  auto it = registry.find(reply.utility_id);
  if (it == registry.end()) {
    throw ProtocolError(ErrorCode::kUnknownSender, "utility not registered");
  }
  if (!IsFresh(reply.timestamp, now, freshness_window)) {
    throw ProtocolError(ErrorCode::kStaleTimestamp, "reply outside freshness window");
  }
  if (!Verify(group, it->second, ReplyBody(reply), reply.signature)) {
    throw ProtocolError(ErrorCode::kBadSignature, "reply signature invalid");
  }
  SeedKey seed;
  seed.value = group.ScalarMul(pending.ephemeral_secret, reply.ephemeral_point);
  seed.sm_id = pending.request.sm_id;
  seed.utility_id = reply.utility_id;
  seed.established_at = reply.timestamp;
  if (ConfirmationTag(seed.value) != reply.confirmation_tag) {
    throw ProtocolError(ErrorCode::kConfirmationMismatch,
                        "derived seed key does not match the utility's");
  }
  return seed;
}

const Digest& SessionKeySchedule::key(std::size_t round) const {
  if (round >= keys_.size()) {
    throw ProtocolError(ErrorCode::kScheduleExhausted,
                        "round " + std::to_string(round) + " beyond chain length " +
                            std::to_string(chain_length()));
  }
  return keys_[round];
}

std::size_t SessionKeySchedule::ClaimRound() {
  if (cursor_ >= keys_.size()) {
    throw ProtocolError(ErrorCode::kScheduleExhausted, "all session keys used");
  }
  return cursor_++;
}

namespace {

std::vector<Digest> HashChain(const GroupElement& seed, NodeId id, std::size_t t) {
  Bytes head(seed.bytes().begin(), seed.bytes().end());
  AppendBE(head, id, 8);
  std::vector<Digest> chain;
  chain.reserve(t + 1);
  chain.push_back(HashDigest(head));
  for (std::size_t j = 1; j <= t; ++j) chain.push_back(HashDigest(chain.back()));
  return chain;
}

}  // namespace

SessionKeySchedule DeriveSchedule(const SeedKey& seed, std::size_t chain_length) {
  const auto forward = HashChain(seed.value, seed.sm_id, chain_length);
  const auto backward = HashChain(seed.value, seed.utility_id, chain_length);
  std::vector<Digest> keys(chain_length + 1);
  for (std::size_t j = 0; j <= chain_length; ++j) {
    for (std::size_t b = 0; b < keys[j].size(); ++b) {
      keys[j][b] = forward[j][b] ^ backward[chain_length - j][b];
    }
  }
  return SessionKeySchedule(std::move(keys));
}

Scalar MaskForRound(const Group& group, const SessionKeySchedule& schedule,
                    std::size_t round, std::uint32_t field_index) {
  const Digest& key = schedule.key(round);
  Bytes buf(key.begin(), key.end());
  AppendBE(buf, field_index, 4);
  return group.HashToScalar("mask", buf);
}

std::string ScheduleFingerprint(const SessionKeySchedule& schedule) {
  Bytes all;
  for (const Digest& k : schedule.keys()) Append(all, k);
  const Digest d = HashDigest(all);
  return ToHex(ByteView(d).first(8));
}

}  // namespace amiagg
