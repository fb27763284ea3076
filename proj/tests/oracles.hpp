// Reference computations the tests compare the library against. Each one is
// written from the definitions, without calling the code under test.
#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "amiagg/consumption_vector.hpp"
#include "amiagg/group.hpp"

namespace oracle {

inline bool IsPrime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

inline std::uint64_t MulMod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t PowMod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  for (b %= m; e; e >>= 1, b = MulMod(b, b, m))
    if (e & 1) r = MulMod(r, b, m);
  return r;
}

// Toy group elements are residues mod p; p = c*q + 1 for the least even c
// giving a prime.
struct ToyModel {
  std::uint64_t q, p, g;

  explicit ToyModel(const amiagg::Group& group) {
    q = group.order().get_ui();
    std::uint64_t c = 2;
    while (!IsPrime(c * q + 1)) c += 2;
    p = c * q + 1;
    g = Value(group.generator());
  }
  static std::uint64_t Value(const amiagg::GroupElement& e) {
    std::uint64_t v = 0;
    for (std::uint8_t b : e.bytes()) v = (v << 8) | b;
    return v;
  }
  // k*P in additive notation is g^k mod p.
  std::uint64_t Mul(std::uint64_t k) const { return PowMod(g, k % q, p); }
};

inline std::array<std::uint8_t, 32> Sha256(const std::vector<std::uint8_t>& in) {
  std::array<std::uint8_t, 32> out{};
  crypto_hash_sha256(out.data(), in.data(), in.size());
  return out;
}

inline void PutBE(std::vector<std::uint8_t>& out, std::uint64_t v, int width) {
  for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// keys[j] = F_j xor B_{t-j}; F_0 = H(K || id_sm), B_0 = H(K || id_u).
inline std::vector<std::array<std::uint8_t, 32>> Schedule(
    const amiagg::GroupElement& seed, std::uint64_t sm, std::uint64_t utility,
    std::size_t t) {
  std::vector<std::uint8_t> f_in(seed.bytes().begin(), seed.bytes().end());
  std::vector<std::uint8_t> b_in = f_in;
  PutBE(f_in, sm, 8);
  PutBE(b_in, utility, 8);
  std::vector<std::array<std::uint8_t, 32>> f{Sha256(f_in)}, b{Sha256(b_in)};
  for (std::size_t j = 1; j <= t; ++j) {
    f.push_back(Sha256({f.back().begin(), f.back().end()}));
    b.push_back(Sha256({b.back().begin(), b.back().end()}));
  }
  std::vector<std::array<std::uint8_t, 32>> keys(t + 1);
  for (std::size_t j = 0; j <= t; ++j)
    for (int i = 0; i < 32; ++i) keys[j][i] = f[j][i] ^ b[t - j][i];
  return keys;
}

// Shift-and-or packing, most significant field first.
inline mpz_class Pack(const std::array<std::uint64_t, amiagg::kFieldCount>& fields,
                      unsigned count_bits, unsigned consumption_bits) {
  mpz_class x = 0;
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const unsigned w = f % 2 == 0 ? count_bits : consumption_bits;
    x <<= w;
    x |= mpz_class(std::to_string(fields[f]));
  }
  return x;
}

}  // namespace oracle
