#include "amiagg/group.hpp"

#include <algorithm>
#include <cstring>

#include <sodium.h>

#include "amiagg/error.hpp"
#include "amiagg/op_counters.hpp"
#include "internal.hpp"

namespace amiagg {

std::string_view ToString(GroupProfile profile) {
  return profile == GroupProfile::kToy ? "toy" : "production";
}

GroupElement::GroupElement(ByteView encoding) {
  if (encoding.size() > kMaxSize) {
    throw ProtocolError(ErrorCode::kMalformedFrame, "group element too long");
  }
  std::copy(encoding.begin(), encoding.end(), data_.begin());
  size_ = encoding.size();
}

Digest HashDigest(ByteView data) {
  Digest out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

// ---------------------------------------------------------------------------
// Group: profile-independent parts.

GroupElement Group::PointAdd(const GroupElement& a, const GroupElement& b) const {
  ++ThreadOpCounts().point_adds;
  return AddImpl(a, b);
}

GroupElement Group::PointSub(const GroupElement& a, const GroupElement& b) const {
  ++ThreadOpCounts().point_adds;
  return AddImpl(a, NegateImpl(b));
}

GroupElement Group::Negate(const GroupElement& a) const { return NegateImpl(a); }

GroupElement Group::ScalarMul(const Scalar& k, const GroupElement& a) const {
  ++ThreadOpCounts().scalar_muls;
  return MulImpl(k, a);
}

GroupElement Group::ScalarMulBase(const Scalar& k) const {
  ++ThreadOpCounts().scalar_muls;
  return MulBaseImpl(k);
}

Scalar Group::MakeScalar(const mpz_class& v) const {
  mpz_class r;
  mpz_mod(r.get_mpz_t(), v.get_mpz_t(), order_.get_mpz_t());
  return Scalar(std::move(r));
}

Scalar Group::MakeScalar(std::uint64_t v) const {
  mpz_class m;
  mpz_import(m.get_mpz_t(), 1, 1, sizeof v, 0, 0, &v);
  return MakeScalar(m);
}

Scalar Group::Add(const Scalar& a, const Scalar& b) const {
  mpz_class r = a.value() + b.value();
  if (r >= order_) r -= order_;
  return Scalar(std::move(r));
}

Scalar Group::Sub(const Scalar& a, const Scalar& b) const {
  mpz_class r = a.value() - b.value();
  if (r < 0) r += order_;
  return Scalar(std::move(r));
}

Scalar Group::Mul(const Scalar& a, const Scalar& b) const {
  return MakeScalar(mpz_class(a.value() * b.value()));
}

Scalar Group::Neg(const Scalar& a) const {
  return a.IsZero() ? a : Scalar(mpz_class(order_ - a.value()));
}

Scalar Group::RandomNonzeroScalar(Rng& rng) const {
  return Scalar(mpz_class(rng.UniformBelow(mpz_class(order_ - 1)) + 1));
}

Scalar Group::HashToScalar(std::string_view domain_tag, ByteView data) const {
  if (domain_tag.size() > 255) {
    throw ProtocolError(ErrorCode::kInvalidArgument, "domain tag too long");
  }
  crypto_hash_sha512_state st;
  crypto_hash_sha512_init(&st);
  const std::uint8_t tag_len = static_cast<std::uint8_t>(domain_tag.size());
  crypto_hash_sha512_update(&st, &tag_len, 1);
  crypto_hash_sha512_update(
      &st, reinterpret_cast<const unsigned char*>(domain_tag.data()),
      domain_tag.size());
  crypto_hash_sha512_update(&st, data.data(), data.size());
  std::uint8_t wide[crypto_hash_sha512_BYTES];
  crypto_hash_sha512_final(&st, wide);
  return MakeScalar(detail::MpzFromBytes(wide));
}

Bytes Group::EncodeScalar(const Scalar& s) const {
  return detail::MpzToBytes(s.value(), scalar_size_);
}

std::optional<Scalar> Group::DecodeScalar(ByteView bytes) const {
  if (bytes.size() != scalar_size_) return std::nullopt;
  mpz_class v = detail::MpzFromBytes(bytes);
  if (v >= order_) return std::nullopt;
  return Scalar(std::move(v));
}

namespace {

// ---------------------------------------------------------------------------
// Toy profile: order-q subgroup of Z_p^*, group operation written additively.

bool IsPrime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

std::uint64_t PowMod(std::uint64_t base, std::uint64_t exp, std::uint64_t mod) {
  std::uint64_t result = 1 % mod;
  base %= mod;
  while (exp > 0) {
    if (exp & 1) result = result * base % mod;
    base = base * base % mod;
    exp >>= 1;
  }
  return result;
}

GroupElement EncodeU32(std::uint32_t v) {
  const std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24),
                             static_cast<std::uint8_t>(v >> 16),
                             static_cast<std::uint8_t>(v >> 8),
                             static_cast<std::uint8_t>(v)};
  return GroupElement(ByteView(b, 4));
}

std::uint32_t DecodeU32(const GroupElement& e) {
  ByteView b = e.bytes();
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | b[3];
}

struct ToyParams {
  std::uint32_t q;
  std::uint32_t p;
  std::uint32_t g;
};

ToyParams FindToyParams(std::uint32_t q) {
  if (q < 3 || q >= (1u << 16) || !IsPrime(q)) {
    throw ProtocolError(ErrorCode::kInvalidConfig,
                        "toy group order must be an odd prime below 2^16");
  }
  std::uint64_t cofactor = 2;
  while (!IsPrime(cofactor * q + 1)) cofactor += 2;
  const std::uint64_t p = cofactor * q + 1;
  for (std::uint64_t h = 2;; ++h) {
    const std::uint64_t g = PowMod(h, cofactor, p);
    if (g != 1) {
      return {q, static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(g)};
    }
  }
}

class ToyGroup final : public Group {
 public:
  explicit ToyGroup(const ToyParams& params)
      : Group(mpz_class(params.q), EncodeU32(params.g), EncodeU32(1), 2),
        p_(params.p) {}

  GroupProfile profile() const override { return GroupProfile::kToy; }
  std::string name() const override {
    return "toy(q=" + order().get_str() + ",p=" + std::to_string(p_) + ")";
  }

  std::optional<GroupElement> Decode(ByteView bytes) const override {
    if (bytes.size() != 4) return std::nullopt;
    GroupElement e(bytes);
    const std::uint32_t v = DecodeU32(e);
    if (v == 0 || v >= p_) return std::nullopt;
    if (PowMod(v, order().get_ui(), p_) != 1) return std::nullopt;
    return e;
  }

 protected:
  GroupElement AddImpl(const GroupElement& a, const GroupElement& b) const override {
    return EncodeU32(static_cast<std::uint32_t>(
        std::uint64_t{DecodeU32(a)} * DecodeU32(b) % p_));
  }
  GroupElement NegateImpl(const GroupElement& a) const override {
    // Inverse in Z_p^* via Fermat.
    return EncodeU32(static_cast<std::uint32_t>(PowMod(DecodeU32(a), p_ - 2, p_)));
  }
  GroupElement MulImpl(const Scalar& k, const GroupElement& a) const override {
    return EncodeU32(
        static_cast<std::uint32_t>(PowMod(DecodeU32(a), k.value().get_ui(), p_)));
  }

 private:
  std::uint32_t p_;
};

// ---------------------------------------------------------------------------
// Production profile: ristretto255. libsodium scalars are little-endian.

using Le32 = std::array<std::uint8_t, 32>;

Le32 ToLittleEndian(const Scalar& k) {
  Bytes be = detail::MpzToBytes(k.value(), 32);
  Le32 le;
  std::reverse_copy(be.begin(), be.end(), le.begin());
  return le;
}

mpz_class RistrettoOrder() {
  return (mpz_class(1) << 252) +
         mpz_class("27742317777372353535851937790883648493");
}

GroupElement RistrettoBase() {
  Le32 one{};
  one[0] = 1;
  std::uint8_t out[32];
  detail::EnsureSodium();
  crypto_scalarmult_ristretto255_base(out, one.data());
  return GroupElement(ByteView(out, 32));
}

class RistrettoGroup final : public Group {
 public:
  RistrettoGroup()
      : Group(RistrettoOrder(), RistrettoBase(), GroupElement(Bytes(32, 0)), 32) {}

  GroupProfile profile() const override { return GroupProfile::kProduction; }
  std::string name() const override { return "ristretto255"; }

  std::optional<GroupElement> Decode(ByteView bytes) const override {
    if (bytes.size() != 32) return std::nullopt;
    if (crypto_core_ristretto255_is_valid_point(bytes.data()) != 1) {
      return std::nullopt;
    }
    return GroupElement(bytes);
  }

 protected:
  GroupElement AddImpl(const GroupElement& a, const GroupElement& b) const override {
    std::uint8_t out[32];
    if (crypto_core_ristretto255_add(out, a.bytes().data(), b.bytes().data()) != 0) {
      throw ProtocolError(ErrorCode::kInvalidArgument, "invalid ristretto255 point");
    }
    return GroupElement(ByteView(out, 32));
  }
  GroupElement NegateImpl(const GroupElement& a) const override {
    std::uint8_t out[32];
    if (crypto_core_ristretto255_sub(out, identity().bytes().data(),
                                     a.bytes().data()) != 0) {
      throw ProtocolError(ErrorCode::kInvalidArgument, "invalid ristretto255 point");
    }
    return GroupElement(ByteView(out, 32));
  }
  GroupElement MulImpl(const Scalar& k, const GroupElement& a) const override {
    const Le32 le = ToLittleEndian(k);
    std::uint8_t out[32];
    // libsodium reports an identity result as failure.
    if (crypto_scalarmult_ristretto255(out, le.data(), a.bytes().data()) != 0) {
      return identity();
    }
    return GroupElement(ByteView(out, 32));
  }
  GroupElement MulBaseImpl(const Scalar& k) const override {
    const Le32 le = ToLittleEndian(k);
    std::uint8_t out[32];
    if (crypto_scalarmult_ristretto255_base(out, le.data()) != 0) {
      return identity();
    }
    return GroupElement(ByteView(out, 32));
  }
};

}  // namespace

GroupPtr MakeToyGroup(std::uint32_t q) {
  return std::make_shared<ToyGroup>(FindToyParams(q));
}

GroupPtr MakeProductionGroup() {
  detail::EnsureSodium();
  return std::make_shared<RistrettoGroup>();
}

GroupPtr MakeGroup(GroupProfile profile, std::uint32_t toy_order) {
  return profile == GroupProfile::kToy ? MakeToyGroup(toy_order)
                                       : MakeProductionGroup();
}

// ---------------------------------------------------------------------------
// Keys and signatures.

KeyPair GenerateKeyPair(const Group& group, Rng& rng) {
  Scalar sk = group.RandomNonzeroScalar(rng);
  GroupElement pk = group.ScalarMulBase(sk);
  return {std::move(sk), pk};
}

namespace {

Scalar Challenge(const Group& group, const GroupElement& commitment,
                 const GroupElement& pk, ByteView message) {
  Bytes buf;
  Append(buf, commitment.bytes());
  Append(buf, pk.bytes());
  Append(buf, message);
  return group.HashToScalar("sig", buf);
}

}  // namespace

Signature Sign(const Group& group, const KeyPair& signer, ByteView message) {
  Bytes nonce_input = group.EncodeScalar(signer.sk);
  Append(nonce_input, message);
  Scalar r = group.HashToScalar("sig-nonce", nonce_input);
  if (r.IsZero()) r = group.MakeScalar(1);
  const GroupElement commitment = group.ScalarMulBase(r);
  const Scalar c = Challenge(group, commitment, signer.pk, message);
  return {commitment, group.Add(r, group.Mul(c, signer.sk))};
}

bool Verify(const Group& group, const GroupElement& pk, ByteView message,
            const Signature& sig) {
  if (!group.Decode(pk.bytes()) || !group.Decode(sig.commitment.bytes())) {
    return false;
  }
  if (sig.response.value() < 0 || sig.response.value() >= group.order()) {
    return false;
  }
  const Scalar c = Challenge(group, sig.commitment, pk, message);
  const GroupElement lhs = group.ScalarMulBase(sig.response);
  const GroupElement rhs =
      group.PointAdd(sig.commitment, group.ScalarMul(c, pk));
  return lhs == rhs;
}

Bytes EncodeSignature(const Group& group, const Signature& sig) {
  Bytes out(sig.commitment.bytes().begin(), sig.commitment.bytes().end());
  Append(out, group.EncodeScalar(sig.response));
  return out;
}

std::optional<Signature> DecodeSignature(const Group& group, ByteView bytes) {
  if (bytes.size() != SignatureSize(group)) return std::nullopt;
  auto commitment = group.Decode(bytes.first(group.element_size()));
  auto response = group.DecodeScalar(bytes.subspan(group.element_size()));
  if (!commitment || !response) return std::nullopt;
  return Signature{*commitment, *response};
}

Bytes StreamCrypt(const Digest& key, ByteView nonce, ByteView data) {
  if (nonce.size() != kStreamNonceSize) {
    throw ProtocolError(ErrorCode::kInvalidArgument, "stream nonce must be 12 bytes");
  }
  detail::EnsureSodium();
  Bytes out(data.size());
  crypto_stream_chacha20_ietf_xor(out.data(), data.data(), data.size(),
                                  nonce.data(), key.data());
  return out;
}

}  // namespace amiagg
