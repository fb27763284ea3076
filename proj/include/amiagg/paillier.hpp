#pragma once

#include <cstddef>

#include <gmpxx.h>

#include "amiagg/bytes.hpp"
#include "amiagg/rng.hpp"

namespace amiagg {

// Paillier with G = N + 1 and mu = lambda^-1 mod N.

struct PaillierPublicKey {
  mpz_class n;
  mpz_class g;         // n + 1
  mpz_class n_squared;

  std::size_t modulus_bits() const { return mpz_sizeinbase(n.get_mpz_t(), 2); }
  /// Serialized ciphertext length: twice the modulus byte length.
  std::size_t ciphertext_bytes() const { return 2 * ((modulus_bits() + 7) / 8); }
};

struct PaillierPrivateKey {
  mpz_class lambda;  // lcm(p-1, q-1)
  mpz_class mu;      // lambda^-1 mod n
};

struct PaillierCiphertext {
  mpz_class value;
  friend bool operator==(const PaillierCiphertext& a, const PaillierCiphertext& b) {
    return a.value == b.value;
  }
};

struct PaillierKeypair {
  PaillierPublicKey pk;
  PaillierPrivateKey sk;
};

/// N has exactly `bits` significant bits. bits must be even and >= 64.
PaillierKeypair PaillierKeygen(std::size_t bits, Rng& rng);

/// Throws PlaintextOutOfRange unless 0 <= m < N.
PaillierCiphertext PaillierEncrypt(const PaillierPublicKey& pk, const mpz_class& m,
                                   Rng& rng);

/// (a * b) mod N^2; decrypts to the plaintext sum mod N.
PaillierCiphertext PaillierAdd(const PaillierPublicKey& pk,
                               const PaillierCiphertext& a,
                               const PaillierCiphertext& b);

/// Throws MalformedCiphertext when c is out of [1, N^2) or shares a factor
/// with N.
mpz_class PaillierDecrypt(const PaillierPrivateKey& sk, const PaillierPublicKey& pk,
                          const PaillierCiphertext& c);

/// Big-endian, exactly pk.ciphertext_bytes() long.
Bytes EncodeCiphertext(const PaillierPublicKey& pk, const PaillierCiphertext& c);
PaillierCiphertext DecodeCiphertext(const PaillierPublicKey& pk, ByteView bytes);

}  // namespace amiagg
