#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <gmpxx.h>

#include "amiagg/bytes.hpp"
#include "amiagg/rng.hpp"

namespace amiagg {

enum class GroupProfile { kToy, kProduction };

std::string_view ToString(GroupProfile profile);

/// Element of Z_q. Always held reduced; construct through Group::MakeScalar
/// or the group's arithmetic helpers.
class Scalar {
 public:
  Scalar() = default;
  explicit Scalar(mpz_class value) : value_(std::move(value)) {}

  const mpz_class& value() const { return value_; }
  bool IsZero() const { return value_ == 0; }

  friend bool operator==(const Scalar& a, const Scalar& b) {
    return a.value_ == b.value_;
  }

 private:
  mpz_class value_ = 0;
};

/// Canonical encoding of a group element. Equal elements have equal bytes,
/// so comparison and hashing operate on the encoding directly.
class GroupElement {
 public:
  static constexpr std::size_t kMaxSize = 32;

  GroupElement() = default;
  explicit GroupElement(ByteView encoding);

  ByteView bytes() const { return {data_.data(), size_}; }
  std::size_t size() const { return size_; }

  friend bool operator==(const GroupElement& a, const GroupElement& b) {
    return a.size_ == b.size_ && a.data_ == b.data_;
  }
  friend auto operator<=>(const GroupElement& a, const GroupElement& b) {
    return std::lexicographical_compare_three_way(
        a.data_.begin(), a.data_.begin() + a.size_, b.data_.begin(),
        b.data_.begin() + b.size_);
  }

 private:
  std::array<std::uint8_t, kMaxSize> data_{};
  std::size_t size_ = 0;
};

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256. The fixed-length digest used for chain links, key confirmation
/// and frame integrity.
Digest HashDigest(ByteView data);

/// Prime-order additive group, written additively regardless of the
/// underlying representation.
///
/// Wire encodings are fixed length per profile: elements are
/// element_size() bytes, scalars are scalar_size() bytes big-endian.
class Group {
 public:
  virtual ~Group() = default;

  virtual GroupProfile profile() const = 0;
  virtual std::string name() const = 0;

  const mpz_class& order() const { return order_; }
  const GroupElement& generator() const { return generator_; }
  const GroupElement& identity() const { return identity_; }
  std::size_t element_size() const { return identity_.size(); }
  std::size_t scalar_size() const { return scalar_size_; }

  GroupElement PointAdd(const GroupElement& a, const GroupElement& b) const;
  GroupElement PointSub(const GroupElement& a, const GroupElement& b) const;
  GroupElement Negate(const GroupElement& a) const;
  GroupElement ScalarMul(const Scalar& k, const GroupElement& a) const;
  GroupElement ScalarMulBase(const Scalar& k) const;

  /// Returns nullopt for anything that is not the canonical encoding of a
  /// subgroup element.
  virtual std::optional<GroupElement> Decode(ByteView bytes) const = 0;

  Scalar MakeScalar(const mpz_class& v) const;
  Scalar MakeScalar(std::uint64_t v) const;
  Scalar Add(const Scalar& a, const Scalar& b) const;
  Scalar Sub(const Scalar& a, const Scalar& b) const;
  Scalar Mul(const Scalar& a, const Scalar& b) const;
  Scalar Neg(const Scalar& a) const;
  /// Uniform in [1, q).
  Scalar RandomNonzeroScalar(Rng& rng) const;

  /// Domain-separated hash into Z_q. 512 bits of SHA-512 output are reduced
  /// mod q, so the bias is below 2^-250 for either profile.
  Scalar HashToScalar(std::string_view domain_tag, ByteView data) const;

  Bytes EncodeScalar(const Scalar& s) const;
  std::optional<Scalar> DecodeScalar(ByteView bytes) const;

 protected:
  Group(mpz_class order, GroupElement generator, GroupElement identity,
        std::size_t scalar_size)
      : order_(std::move(order)),
        generator_(generator),
        identity_(identity),
        scalar_size_(scalar_size) {}

  virtual GroupElement AddImpl(const GroupElement& a,
                               const GroupElement& b) const = 0;
  virtual GroupElement NegateImpl(const GroupElement& a) const = 0;
  virtual GroupElement MulImpl(const Scalar& k, const GroupElement& a) const = 0;
  virtual GroupElement MulBaseImpl(const Scalar& k) const {
    return MulImpl(k, generator_);
  }

 private:
  mpz_class order_;
  GroupElement generator_;
  GroupElement identity_;
  std::size_t scalar_size_;
};

using GroupPtr = std::shared_ptr<const Group>;

inline constexpr std::uint32_t kDefaultToyOrder = 65521;

/// Order-q subgroup of Z_p^* with p = c*q + 1, q < 2^16. Small enough to
/// enumerate exhaustively in tests; elements encode as 4 big-endian bytes.
GroupPtr MakeToyGroup(std::uint32_t q = kDefaultToyOrder);

/// Ristretto255 (prime order 2^252 + 27742317777372353535851937790883648493)
/// via libsodium. 32-byte elements.
GroupPtr MakeProductionGroup();

GroupPtr MakeGroup(GroupProfile profile,
                   std::uint32_t toy_order = kDefaultToyOrder);

struct KeyPair {
  Scalar sk;
  GroupElement pk;
};

KeyPair GenerateKeyPair(const Group& group, Rng& rng);

/// Schnorr signature (R, s) with R = rP, s = r + H("sig", R||pk||m) * sk.
/// The nonce r is derived deterministically from sk and the message.
struct Signature {
  GroupElement commitment;
  Scalar response;
};

Signature Sign(const Group& group, const KeyPair& signer, ByteView message);
bool Verify(const Group& group, const GroupElement& pk, ByteView message,
            const Signature& sig);

Bytes EncodeSignature(const Group& group, const Signature& sig);
std::optional<Signature> DecodeSignature(const Group& group, ByteView bytes);
inline std::size_t SignatureSize(const Group& group) {
  return group.element_size() + group.scalar_size();
}

// E_k / D_k: ChaCha20 keystream keyed by a 32-byte digest. XOR stream, so
// the same call decrypts.
inline constexpr std::size_t kStreamNonceSize = 12;
Bytes StreamCrypt(const Digest& key, ByteView nonce, ByteView data);

}  // namespace amiagg
