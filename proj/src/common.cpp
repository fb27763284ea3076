#include <cstdio>

#include <sodium.h>

#include "amiagg/bytes.hpp"
#include "amiagg/error.hpp"
#include "amiagg/op_counters.hpp"
#include "amiagg/rng.hpp"
#include "internal.hpp"

namespace amiagg {

std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMalformedFrame: return "MalformedFrame";
    case ErrorCode::kStaleTimestamp: return "StaleTimestamp";
    case ErrorCode::kBadSignature: return "BadSignature";
    case ErrorCode::kUnknownSender: return "UnknownSender";
    case ErrorCode::kReplayedRequest: return "ReplayedRequest";
    case ErrorCode::kConfirmationMismatch: return "ConfirmationMismatch";
    case ErrorCode::kScheduleExhausted: return "ScheduleExhausted";
    case ErrorCode::kConsumptionOverflow: return "ConsumptionOverflow";
    case ErrorCode::kValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::kFieldOverflow: return "FieldOverflow";
    case ErrorCode::kDuplicateContributor: return "DuplicateContributor";
    case ErrorCode::kIntegrityFailure: return "IntegrityFailure";
    case ErrorCode::kStaleReport: return "StaleReport";
    case ErrorCode::kModeMismatch: return "ModeMismatch";
    case ErrorCode::kRoundMismatch: return "RoundMismatch";
    case ErrorCode::kMissingSchedule: return "MissingSchedule";
    case ErrorCode::kDLRecoveryFailure: return "DLRecoveryFailure";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kPlaintextOutOfRange: return "PlaintextOutOfRange";
    case ErrorCode::kMalformedCiphertext: return "MalformedCiphertext";
    case ErrorCode::kInsufficientControllableLoad:
      return "InsufficientControllableLoad";
    case ErrorCode::kPreconditionViolation: return "PreconditionViolation";
    case ErrorCode::kGroundTruthMismatch: return "GroundTruthMismatch";
  }
  return "Unknown";
}

std::string ToHex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

OpCounts& ThreadOpCounts() {
  thread_local OpCounts counts;
  return counts;
}

namespace detail {

void EnsureSodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace detail

Rng::Rng(std::uint64_t seed) {
  detail::EnsureSodium();
  std::uint8_t seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  crypto_generichash(key_.data(), key_.size(), seed_bytes, sizeof seed_bytes,
                     reinterpret_cast<const unsigned char*>("amiagg-rng"), 10);
}

void Rng::Refill() {
  std::uint8_t nonce[crypto_stream_chacha20_NONCEBYTES] = {};
  buffer_.fill(0);
  crypto_stream_chacha20_xor_ic(buffer_.data(), buffer_.data(), buffer_.size(),
                                nonce, block_counter_++, key_.data());
  buffer_pos_ = 0;
}

void Rng::Fill(std::span<std::uint8_t> out) {
  for (std::uint8_t& b : out) {
    if (buffer_pos_ == buffer_.size()) Refill();
    b = buffer_[buffer_pos_++];
  }
}

std::uint64_t Rng::NextU64() {
  std::uint8_t b[8];
  Fill(b);
  std::uint64_t v = 0;
  for (std::uint8_t x : b) v = (v << 8) | x;
  return v;
}

std::uint64_t Rng::UniformBelow(std::uint64_t bound) {
  if (bound == 0) throw ProtocolError(ErrorCode::kInvalidArgument, "empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = max() - (max() % bound);
  for (;;) {
    std::uint64_t v = NextU64();
    if (v < limit) return v % bound;
  }
}

mpz_class Rng::UniformBelow(const mpz_class& bound) {
  if (bound <= 0) throw ProtocolError(ErrorCode::kInvalidArgument, "empty range");
  const std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  const std::size_t nbytes = (bits + 7) / 8;
  Bytes buf(nbytes);
  for (;;) {
    Fill(buf);
    if (bits % 8 != 0) buf[0] &= static_cast<std::uint8_t>((1u << (bits % 8)) - 1);
    mpz_class v;
    mpz_import(v.get_mpz_t(), buf.size(), 1, 1, 1, 0, buf.data());
    if (v < bound) return v;
  }
}

Rng Rng::Fork() { return Rng(NextU64()); }

}  // namespace amiagg

namespace amiagg::detail {

Bytes MpzToBytes(const mpz_class& v, std::size_t width) {
  if (v < 0) throw ProtocolError(ErrorCode::kValueOutOfRange, "negative integer");
  const std::size_t needed = v == 0 ? 0 : (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
  if (needed > width) {
    throw ProtocolError(ErrorCode::kValueOutOfRange, "integer wider than field");
  }
  Bytes out(width, 0);
  std::size_t count = 0;
  mpz_export(out.data() + (width - needed), &count, 1, 1, 1, 0, v.get_mpz_t());
  return out;
}

mpz_class MpzFromBytes(ByteView bytes) {
  mpz_class v;
  if (!bytes.empty()) mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  return v;
}

}  // namespace amiagg::detail
