#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "agke/crypto_suite.hpp"

using namespace agke;

namespace {

struct Fixture : ::testing::Test {
  GroupParams params = preset_group("test64");
  std::mt19937_64 rng{77};
  ManufacturerKeyPair acme = ManufacturerKeyPair::generate("acme", rng);
  ManufacturerKeyPair globex = ManufacturerKeyPair::generate("globex", rng);
  QuerierKeyPair querier = QuerierKeyPair::generate(rng);

  GroupElement power(const Exponent& e) { return mod_exp(GroupElement::generator(params), e, params); }
};

// Stand-in scheme: the "signature" is an HMAC under a key equal to the
// public key. Insecure, but it satisfies the round-trip contract.
struct MacScheme {
  static constexpr std::size_t seed_size = 16;
  static RawKeyPair keypair_from_seed(ByteView seed) {
    Bytes k(seed.begin(), seed.end());
    return {k, k};
  }
  static Bytes sign(ByteView key, ByteView msg) {
    auto d = hmac_sha256(key, msg);
    return Bytes(d.begin(), d.end());
  }
  static bool verify(ByteView key, ByteView msg, ByteView sig) {
    auto d = hmac_sha256(key, msg);
    return sig.size() == d.size() && std::equal(d.begin(), d.end(), sig.begin());
  }
};
static_assert(SignatureScheme<MacScheme>);

}  // namespace

using ContributionExponent = Fixture;

TEST_F(ContributionExponent, SameManufacturerSameSessionAgrees) {
  auto sid = SessionId::random(rng);
  ManufacturerKeyPair copy = acme;  // a second device of the same manufacturer
  EXPECT_EQ(derive_contribution_exponent(acme, sid, params),
            derive_contribution_exponent(copy, sid, params));
}

TEST_F(ContributionExponent, DistinctSessionsGiveDistinctExponents) {
  for (int i = 0; i < 100; ++i) {
    auto a = SessionId::random(rng);
    auto b = SessionId::random(rng);
    ASSERT_NE(a, b);
    EXPECT_NE(derive_contribution_exponent(acme, a, params),
              derive_contribution_exponent(acme, b, params));
  }
}

TEST_F(ContributionExponent, DistinctManufacturersGiveDistinctExponents) {
  auto sid = SessionId::random(rng);
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) {
    auto kp = ManufacturerKeyPair::generate("m" + std::to_string(i), rng);
    auto r = derive_contribution_exponent(kp, sid, params);
    EXPECT_TRUE(seen.insert(r.value().get_str()).second);
  }
}

TEST_F(ContributionExponent, CountsAsOneHash) {
  OpCounts c;
  derive_contribution_exponent(acme, SessionId::random(rng), params, &c);
  EXPECT_EQ(c, (OpCounts{0, 1, 0}));
}

using ContributionSignature = Fixture;

TEST_F(ContributionSignature, RoundTripAndBinding) {
  auto sid = SessionId::random(rng);
  auto z = power(derive_contribution_exponent(acme, sid, params));
  OpCounts c;
  auto sig = sign_contribution(acme, sid, z, params, &c);
  EXPECT_TRUE(verify_contribution(acme.public_key, sid, z, sig, params, &c));
  EXPECT_EQ(c.sig, 2u);

  EXPECT_FALSE(verify_contribution(globex.public_key, sid, z, sig, params));

  // A neighbouring z value, when it happens to be a member.
  BigInt z_flipped_value = z.value() ^ 1;
  if (is_subgroup_member(z_flipped_value, params)) {
    auto zf = GroupElement::from_value(z_flipped_value, params);
    EXPECT_FALSE(verify_contribution(acme.public_key, sid, zf, sig, params));
  }
  auto z_other = mod_exp(z, Exponent::from_value(2, params), params);
  EXPECT_FALSE(verify_contribution(acme.public_key, sid, z_other, sig, params));

  auto other_sid = SessionId::random(rng);
  EXPECT_FALSE(verify_contribution(acme.public_key, other_sid, z, sig, params));

  auto tampered = sig;
  tampered.bytes[0] ^= 0x01;
  EXPECT_FALSE(verify_contribution(acme.public_key, sid, z, tampered, params));
}

TEST_F(ContributionSignature, DeterministicAcrossDevices) {
  auto sid = SessionId::random(rng);
  auto z = power(derive_contribution_exponent(acme, sid, params));
  ManufacturerKeyPair copy = acme;
  EXPECT_EQ(sign_contribution(acme, sid, z, params), sign_contribution(copy, sid, z, params));
}

TEST_F(ContributionSignature, PayloadIsLengthPrefixed) {
  auto sid = SessionId::random(rng);
  auto payload = contribution_payload(sid, GroupElement::generator(params), params);
  Bytes head = {0, 0, 0, 7, 'c', 'o', 'n', 't', 'r', 'i', 'b', 0, 0, 0, 16};
  ASSERT_GE(payload.size(), head.size());
  EXPECT_TRUE(std::equal(head.begin(), head.end(), payload.begin()));
  EXPECT_EQ(payload.size(), 4 + 7 + 4 + 16 + 4 + params.element_width());
}

TEST_F(ContributionSignature, PluggableScheme) {
  auto kp = ManufacturerKeyPair::generate<MacScheme>("mac", rng);
  auto sid = SessionId::random(rng);
  auto z = GroupElement::generator(params);
  auto sig = sign_contribution<MacScheme>(kp, sid, z, params);
  EXPECT_TRUE(verify_contribution<MacScheme>(kp.public_key, sid, z, sig, params));
  EXPECT_FALSE(verify_contribution<MacScheme>(kp.public_key, SessionId::random(rng), z, sig, params));
}

using BroadcastSignature = Fixture;

TEST_F(BroadcastSignature, RoundTripTamperAndWrongKey) {
  auto sid = SessionId::random(rng);
  BroadcastBody body{sid, sid, power(random_exponent(params, rng)), {}};
  for (int i = 0; i < 3; ++i) {
    MaskBytes y{Bytes(params.exponent_width())};
    fill_random(rng, y.bytes);
    body.slots.push_back({power(random_exponent(params, rng)), y});
  }
  auto sig = sign_broadcast(querier, body, params);
  EXPECT_TRUE(verify_broadcast(querier.public_key, body, sig, params));

  auto tampered = body;
  tampered.slots[1].y.bytes[3] ^= 0x40;
  EXPECT_FALSE(verify_broadcast(querier.public_key, tampered, sig, params));

  auto reanchored = body;
  reanchored.anchor_sid = SessionId::random(rng);
  EXPECT_FALSE(verify_broadcast(querier.public_key, reanchored, sig, params));

  EXPECT_FALSE(verify_broadcast(acme.public_key, body, sig, params));
}

using SharedKeyDerivation = Fixture;

TEST_F(SharedKeyDerivation, DeterministicAndWellFormed) {
  auto r = random_exponent(params, rng);
  auto sid = SessionId::random(rng);
  std::vector<MaskBytes> ys(4, MaskBytes{Bytes(params.exponent_width())});
  for (auto& y : ys) fill_random(rng, y.bytes);
  OpCounts c;
  auto a = compute_shared_key(r, ys, sid, params, &c);
  auto b = compute_shared_key(r, ys, sid, params);
  EXPECT_EQ(a, b);
  EXPECT_EQ(c.hash, 1u);
  ASSERT_EQ(a.bytes.size(), params.exponent_width());
  EXPECT_NO_THROW(decode_exponent(MaskBytes{a.bytes}, params));
}

TEST_F(SharedKeyDerivation, OrderOfMasksMatters) {
  auto r = random_exponent(params, rng);
  auto sid = SessionId::random(rng);
  std::vector<MaskBytes> ys(5, MaskBytes{Bytes(params.exponent_width())});
  for (auto& y : ys) fill_random(rng, y.bytes);
  auto base = compute_shared_key(r, ys, sid, params);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    auto perm = ys;
    std::shuffle(perm.begin(), perm.end(), rng);
    if (perm == ys) continue;
    ++checked;
    EXPECT_NE(compute_shared_key(r, perm, sid, params), base);
  }
  EXPECT_GT(checked, 90);
}

TEST_F(SharedKeyDerivation, SessionIdMatters) {
  std::vector<MaskBytes> ys(2, MaskBytes{Bytes(params.exponent_width())});
  for (auto& y : ys) fill_random(rng, y.bytes);
  auto r = random_exponent(params, rng);
  for (int i = 0; i < 100; ++i) {
    auto s1 = SessionId::random(rng);
    auto s2 = SessionId::random(rng);
    EXPECT_NE(compute_shared_key(r, ys, s1, params), compute_shared_key(r, ys, s2, params));
  }
}

TEST_F(SharedKeyDerivation, EmptyMasksRejected) {
  std::vector<MaskBytes> none;
  try {
    compute_shared_key(random_exponent(params, rng), none, SessionId::random(rng), params);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_input);
  }
}

TEST(SessionIdTest, RandomAndParse) {
  std::mt19937_64 rng(1);
  auto a = SessionId::random(rng);
  auto b = SessionId::random(rng);
  EXPECT_NE(a, b);
  EXPECT_EQ(SessionId::from_bytes(from_hex(a.hex())), a);
  EXPECT_THROW(SessionId::from_bytes(Bytes(15)), Error);
}
