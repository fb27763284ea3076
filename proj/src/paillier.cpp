#include "amiagg/paillier.hpp"

#include "amiagg/error.hpp"
#include "amiagg/op_counters.hpp"
#include "internal.hpp"

namespace amiagg {

namespace {

// Random prime with exactly `bits` bits and the top two bits set, so the
// product of two such primes has exactly 2*bits bits.
mpz_class RandomPrime(std::size_t bits, Rng& rng) {
  const mpz_class top = mpz_class(3) << (bits - 2);
  for (;;) {
    mpz_class candidate = rng.UniformBelow(mpz_class(mpz_class(1) << bits));
    candidate |= top;
    candidate |= 1;
    mpz_class prime;
    mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
    if (mpz_sizeinbase(prime.get_mpz_t(), 2) == bits) return prime;
  }
}

void PowMod(mpz_class& out, const mpz_class& base, const mpz_class& exp,
            const mpz_class& mod) {
  ++ThreadOpCounts().modexps;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
}

}  // namespace

PaillierKeypair PaillierKeygen(std::size_t bits, Rng& rng) {
  if (bits < 64 || bits % 2 != 0) {
    throw ProtocolError(ErrorCode::kInvalidConfig,
                        "Paillier modulus must be an even bit length >= 64");
  }
  for (;;) {
    const mpz_class p = RandomPrime(bits / 2, rng);
    const mpz_class q = RandomPrime(bits / 2, rng);
    if (p == q) continue;
    const mpz_class n = p * q;
    const mpz_class phi = (p - 1) * (q - 1);
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;

    PaillierKeypair kp;
    kp.pk.n = n;
    kp.pk.g = n + 1;
    kp.pk.n_squared = n * n;
    mpz_lcm(kp.sk.lambda.get_mpz_t(), mpz_class(p - 1).get_mpz_t(),
            mpz_class(q - 1).get_mpz_t());
    if (mpz_invert(kp.sk.mu.get_mpz_t(), kp.sk.lambda.get_mpz_t(), n.get_mpz_t()) == 0) {
      continue;
    }
    return kp;
  }
}

PaillierCiphertext PaillierEncrypt(const PaillierPublicKey& pk, const mpz_class& m,
                                   Rng& rng) {
  if (m < 0 || m >= pk.n) {
    throw ProtocolError(ErrorCode::kPlaintextOutOfRange, "plaintext not in [0, N)");
  }
  mpz_class zeta;
  for (;;) {
    zeta = rng.UniformBelow(pk.n);
    if (zeta == 0) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), zeta.get_mpz_t(), pk.n.get_mpz_t());
    if (g == 1) break;
  }
  // G^m = (1 + N)^m = 1 + mN (mod N^2).
  mpz_class gm = m * pk.n + 1;
  mpz_class rn;
  PowMod(rn, zeta, pk.n, pk.n_squared);
  PaillierCiphertext c;
  c.value = gm * rn % pk.n_squared;
  return c;
}

PaillierCiphertext PaillierAdd(const PaillierPublicKey& pk,
                               const PaillierCiphertext& a,
                               const PaillierCiphertext& b) {
  return {a.value * b.value % pk.n_squared};
}

mpz_class PaillierDecrypt(const PaillierPrivateKey& sk, const PaillierPublicKey& pk,
                          const PaillierCiphertext& c) {
  if (c.value <= 0 || c.value >= pk.n_squared) {
    throw ProtocolError(ErrorCode::kMalformedCiphertext, "ciphertext not in [1, N^2)");
  }
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), c.value.get_mpz_t(), pk.n.get_mpz_t());
  if (g != 1) {
    throw ProtocolError(ErrorCode::kMalformedCiphertext, "ciphertext not coprime to N");
  }
  mpz_class u;
  PowMod(u, c.value, sk.lambda, pk.n_squared);
  mpz_class l = (u - 1) / pk.n;
  return l * sk.mu % pk.n;
}

Bytes EncodeCiphertext(const PaillierPublicKey& pk, const PaillierCiphertext& c) {
  return detail::MpzToBytes(c.value, pk.ciphertext_bytes());
}

PaillierCiphertext DecodeCiphertext(const PaillierPublicKey& pk, ByteView bytes) {
  if (bytes.size() != pk.ciphertext_bytes()) {
    throw ProtocolError(ErrorCode::kMalformedFrame, "ciphertext length mismatch");
  }
  return {detail::MpzFromBytes(bytes)};
}

}  // namespace amiagg
