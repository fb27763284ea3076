#include <gtest/gtest.h>

#include "amiagg/consumption_vector.hpp"
#include "amiagg/paillier.hpp"
#include "support.hpp"

using namespace amiagg;

namespace {

mpz_class RandomBelow(const mpz_class& bound, Rng& rng) {
  Bytes buf((mpz_sizeinbase(bound.get_mpz_t(), 2) + 7) / 8 + 8);
  rng.Fill(buf);
  mpz_class x;
  mpz_import(x.get_mpz_t(), buf.size(), 1, 1, 1, 0, buf.data());
  return x % bound;
}

class Paillier : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    Rng rng(100);
    kp_ = new PaillierKeypair(PaillierKeygen(128, rng));
  }
  static void TearDownTestSuite() { delete kp_; }
  static PaillierKeypair* kp_;
  const PaillierPublicKey& pk() const { return kp_->pk; }
  const PaillierPrivateKey& sk() const { return kp_->sk; }
};
PaillierKeypair* Paillier::kp_ = nullptr;

TEST(PaillierKeygen, SeededKeygenIsReproducible) {
  Rng a(7), b(7);
  const auto k1 = PaillierKeygen(64, a);
  const auto k2 = PaillierKeygen(64, b);
  EXPECT_EQ(k1.pk.n, k2.pk.n);
  EXPECT_EQ(k1.sk.lambda, k2.sk.lambda);
}

TEST(PaillierKeygen, ModulusHasRequestedSize) {
  Rng rng(8);
  for (std::size_t bits : {64u, 96u, 128u, 256u}) {
    const auto kp = PaillierKeygen(bits, rng);
    EXPECT_EQ(kp.pk.modulus_bits(), bits);
    EXPECT_EQ(kp.pk.g, kp.pk.n + 1);
    EXPECT_EQ(kp.pk.n_squared, kp.pk.n * kp.pk.n);
  }
  EXPECT_PROTOCOL_ERROR(PaillierKeygen(63, rng), ErrorCode::kInvalidConfig);
  EXPECT_PROTOCOL_ERROR(PaillierKeygen(32, rng), ErrorCode::kInvalidConfig);
}

TEST_F(Paillier, RoundTrip) {
  Rng rng(1);
  EXPECT_EQ(PaillierDecrypt(sk(), pk(), PaillierEncrypt(pk(), 0, rng)), 0);
  EXPECT_EQ(PaillierDecrypt(sk(), pk(), PaillierEncrypt(pk(), pk().n - 1, rng)), pk().n - 1);
  for (int i = 0; i < 100; ++i) {
    const mpz_class m = RandomBelow(pk().n, rng);
    ASSERT_EQ(PaillierDecrypt(sk(), pk(), PaillierEncrypt(pk(), m, rng)), m);
  }
}

TEST_F(Paillier, EncryptionIsProbabilistic) {
  Rng rng(2);
  const auto c1 = PaillierEncrypt(pk(), 5, rng);
  const auto c2 = PaillierEncrypt(pk(), 5, rng);
  EXPECT_NE(c1, c2);
  EXPECT_EQ(PaillierDecrypt(sk(), pk(), c1), 5);
  EXPECT_EQ(PaillierDecrypt(sk(), pk(), c2), 5);
}

TEST_F(Paillier, PlaintextRange) {
  Rng rng(3);
  EXPECT_PROTOCOL_ERROR(PaillierEncrypt(pk(), pk().n, rng), ErrorCode::kPlaintextOutOfRange);
  EXPECT_PROTOCOL_ERROR(PaillierEncrypt(pk(), -1, rng), ErrorCode::kPlaintextOutOfRange);
}

TEST_F(Paillier, Homomorphism) {
  Rng rng(4);
  const auto sum = PaillierAdd(pk(), PaillierEncrypt(pk(), 25, rng), PaillierEncrypt(pk(), 12, rng));
  EXPECT_EQ(PaillierDecrypt(sk(), pk(), sum), 37);

  auto acc = PaillierEncrypt(pk(), 1, rng);
  for (int i = 1; i < 255; ++i) acc = PaillierAdd(pk(), acc, PaillierEncrypt(pk(), 1, rng));
  EXPECT_EQ(PaillierDecrypt(sk(), pk(), acc), 255);

  for (int i = 0; i < 200; ++i) {
    const mpz_class a = RandomBelow(pk().n, rng), b = RandomBelow(pk().n, rng);
    const auto c = PaillierAdd(pk(), PaillierEncrypt(pk(), a, rng), PaillierEncrypt(pk(), b, rng));
    ASSERT_EQ(PaillierDecrypt(sk(), pk(), c), mpz_class((a + b) % pk().n));
  }
}

TEST_F(Paillier, MalformedCiphertexts) {
  EXPECT_PROTOCOL_ERROR(PaillierDecrypt(sk(), pk(), {0}), ErrorCode::kMalformedCiphertext);
  EXPECT_PROTOCOL_ERROR(PaillierDecrypt(sk(), pk(), {pk().n_squared}),
                        ErrorCode::kMalformedCiphertext);
  EXPECT_PROTOCOL_ERROR(PaillierDecrypt(sk(), pk(), {pk().n}), ErrorCode::kMalformedCiphertext);
  EXPECT_EQ(PaillierDecrypt(sk(), pk(), {1}), 0);
}

TEST_F(Paillier, CiphertextEncoding) {
  Rng rng(5);
  const auto c = PaillierEncrypt(pk(), 99, rng);
  const Bytes enc = EncodeCiphertext(pk(), c);
  EXPECT_EQ(enc.size(), pk().ciphertext_bytes());
  EXPECT_EQ(enc.size(), 32u);
  EXPECT_EQ(DecodeCiphertext(pk(), enc), c);
  EXPECT_PROTOCOL_ERROR(DecodeCiphertext(pk(), Bytes(enc.size() - 1)), ErrorCode::kMalformedFrame);
}

TEST(PaillierPacked, SummedPackedVectorsUnpackToFieldSums) {
  // A 512-bit modulus holds the full 312-bit packed vector.
  Rng rng(6);
  const auto kp = PaillierKeygen(512, rng);
  const CodecConfig cfg;
  ConsumptionVector truth;
  PaillierCiphertext acc{1};
  for (int i = 0; i < 10; ++i) {
    std::vector<ApplianceReading> r;
    for (Appliance a : kControllable) {
      r.push_back(ApplianceReading::On(a, static_cast<Level>(rng.UniformBelow(3)),
                                       rng.UniformBelow(257)));
    }
    r.push_back(ApplianceReading::Uncontrollable(rng.UniformBelow(257)));
    const auto v = Encode(r, cfg);
    truth = VecAdd(truth, v, cfg);
    acc = PaillierAdd(kp.pk, acc, PaillierEncrypt(kp.pk, Pack(v, cfg), rng));
  }
  EXPECT_EQ(Unpack(PaillierDecrypt(kp.sk, kp.pk, acc), cfg), truth);
}

}  // namespace
