#include <random>
#include <set>

#include <gtest/gtest.h>

#include "agke/algebra.hpp"
#include "oracles.hpp"

using namespace agke;

namespace {

GroupParams toy() { return preset_group("toy23"); }

Exponent exp_of(long v, const GroupParams& params) { return Exponent::from_value(v, params); }

template <class F>
void expect_errc(Errc code, F&& f) {
  try {
    f();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(GroupParamsTest, FourBitSearchMatchesBruteForce) {
  auto expected = oracle::safe_prime_groups(4, 32);
  ASSERT_EQ(expected.size(), 1u);
  auto [p, q, g] = expected.front();
  EXPECT_EQ(std::make_tuple(p, q, g), std::make_tuple(23u, 11u, 2u));

  for (std::uint64_t seed : {1u, 2u, 99u}) {
    std::mt19937_64 rng(seed);
    auto params = generate_group_params(4, rng);
    EXPECT_EQ(params.p(), 23);
    EXPECT_EQ(params.q(), 11);
    EXPECT_EQ(params.g(), 2);
  }
}

TEST(GroupParamsTest, SmallBitLengthsAgreeWithEnumeration) {
  for (unsigned bits = 3; bits <= 9; ++bits) {
    auto all = oracle::safe_prime_groups(bits, std::uint64_t{1} << (bits + 2));
    std::set<std::uint64_t> qs;
    for (auto [p, q, g] : all) qs.insert(q);
    std::mt19937_64 rng(bits);
    auto params = generate_group_params(bits, rng);
    EXPECT_TRUE(qs.contains(params.q().get_ui())) << bits;
    for (auto [p, q, g] : all) {
      if (q == params.q().get_ui()) {
        EXPECT_EQ(params.g().get_ui(), g);
      }
    }
  }
}

TEST(GroupParamsTest, DeterministicUnderSeedAndValid) {
  std::mt19937_64 a(7), b(7);
  auto pa = generate_group_params(8, a);
  auto pb = generate_group_params(8, b);
  EXPECT_EQ(pa, pb);
  EXPECT_EQ(pa.p(), 2 * pa.q() + 1);
  EXPECT_EQ(powm(pa.g(), pa.q(), pa.p()), 1);
  EXPECT_NE(pa.g(), 1);
  EXPECT_EQ(pa.exponent_width(), 1u);
  EXPECT_EQ(bit_length(pa.q()), 8u);
}

TEST(GroupParamsTest, SixtyFourBitGroup) {
  std::mt19937_64 rng(123);
  auto params = generate_group_params(64, rng);
  EXPECT_EQ(bit_length(params.q()), 64u);
  EXPECT_EQ(params.exponent_width(), 8u);
  EXPECT_EQ(params.element_width(), 9u);
  EXPECT_TRUE(is_subgroup_member(params.g(), params));
}

TEST(GroupParamsTest, SearchExhaustion) {
  std::mt19937_64 rng(1);
  expect_errc(Errc::parameter_search_exhausted, [&] { generate_group_params(1, rng); });
  expect_errc(Errc::parameter_search_exhausted, [&] { generate_group_params(0, rng); });
}

TEST(GroupParamsTest, RejectsInvalidTriples) {
  expect_errc(Errc::invalid_params, [] { GroupParams::make(23, 12, 2); });
  expect_errc(Errc::invalid_params, [] { GroupParams::make(27, 13, 2); });
  expect_errc(Errc::invalid_params, [] { GroupParams::make(23, 11, 5); });  // order 22
  expect_errc(Errc::invalid_params, [] { GroupParams::make(23, 11, 1); });
  expect_errc(Errc::invalid_params, [] { GroupParams::make(23, 11, 22); });
}

TEST(GroupParamsTest, Presets) {
  auto t = preset_group("test64");
  EXPECT_EQ(bit_length(t.q()), 64u);
  auto big = preset_group("rfc3526-2048");
  EXPECT_EQ(bit_length(big.p()), 2048u);
  EXPECT_EQ(big.exponent_width(), 256u);
  expect_errc(Errc::config, [] { preset_group("nope"); });
}

TEST(GroupParamsTest, JsonRoundTripAndErrors) {
  auto t = preset_group("test64");
  EXPECT_EQ(params_from_json(params_to_json(t)), t);
  auto j = params_to_json(toy());
  EXPECT_EQ(j["p"], "23");
  expect_errc(Errc::config, [] { params_from_json({{"p", "23"}, {"q", "11"}}); });
  expect_errc(Errc::config, [] { params_from_json({{"p", 23}, {"q", "11"}, {"g", "2"}}); });
  expect_errc(Errc::config, [] { params_from_json({{"p", "-23"}, {"q", "11"}, {"g", "2"}}); });
  expect_errc(Errc::config, [] { params_from_json({{"p", "25"}, {"q", "12"}, {"g", "2"}}); });
}

TEST(ModExpTest, WorkedValues) {
  auto params = toy();
  EXPECT_EQ(oracle::naive_pow(2, 5, 23), 9u);
  EXPECT_EQ(mod_exp(BigInt(2), exp_of(5, params), params), 9);
  EXPECT_EQ(mod_exp(BigInt(17), exp_of(1, params), params), 17);
  EXPECT_EQ(oracle::naive_pow(8, 4, 23), 2u);
  EXPECT_EQ(mod_exp(BigInt(8), exp_of(4, params), params), 2);
  EXPECT_EQ(mod_exp(BigInt(16), exp_of(3, params), params), 2);
}

TEST(ModExpTest, AgreesWithRepeatedMultiplication) {
  auto params = toy();
  for (std::uint64_t base = 1; base <= 22; ++base)
    for (std::uint64_t e = 1; e <= 10; ++e)
      EXPECT_EQ(mod_exp(BigInt(base), exp_of(e, params), params).get_ui(),
                oracle::naive_pow(base, e, 23));
}

TEST(ModExpTest, BaseOutsideRange) {
  auto params = toy();
  expect_errc(Errc::out_of_range, [&] { mod_exp(BigInt(0), exp_of(2, params), params); });
  expect_errc(Errc::out_of_range, [&] { mod_exp(BigInt(23), exp_of(2, params), params); });
}

TEST(ModExpTest, CountsExponentiations) {
  auto params = toy();
  OpCounts c;
  mod_exp(GroupElement::generator(params), exp_of(3, params), params, &c);
  mod_exp(BigInt(5), exp_of(3, params), params, &c);
  EXPECT_EQ(c, (OpCounts{2, 0, 0}));
}

TEST(ModExpTest, CommutativityAndClosureProperty) {
  std::mt19937_64 rng(2024);
  for (const auto& params : {toy(), preset_group("test64")}) {
    auto g = GroupElement::generator(params);
    for (int trial = 0; trial < 500; ++trial) {
      auto a = random_exponent(params, rng);
      auto b = random_exponent(params, rng);
      auto ga = mod_exp(g, a, params);
      auto gab = mod_exp(ga, b, params);
      auto gba = mod_exp(mod_exp(g, b, params), a, params);
      EXPECT_EQ(gab, gba);
      EXPECT_TRUE(is_subgroup_member(gab.value(), params));
    }
  }
}

TEST(SubgroupTest, Membership) {
  auto params = toy();
  EXPECT_EQ(oracle::naive_pow(5, 11, 23), 22u);
  EXPECT_TRUE(is_subgroup_member(16, params));
  EXPECT_FALSE(is_subgroup_member(5, params));
  EXPECT_TRUE(is_subgroup_member(1, params));
  EXPECT_FALSE(is_subgroup_member(0, params));
  EXPECT_FALSE(is_subgroup_member(23, params));
  EXPECT_FALSE(is_subgroup_member(22, params));  // order 2
  for (std::uint64_t v = 1; v < 23; ++v)
    EXPECT_EQ(is_subgroup_member(v, params), oracle::naive_pow(v, 11, 23) == 1);
}

TEST(SubgroupTest, DecodeRejectsNonMembers) {
  auto params = toy();
  expect_errc(Errc::subgroup_violation, [&] { decode_element(Bytes{5}, params); });
  expect_errc(Errc::malformed, [&] { decode_element(Bytes{0, 16}, params); });
  EXPECT_EQ(decode_element(Bytes{16}, params).value(), 16);
}

TEST(HashToExponentTest, RangeAndDeterminism) {
  auto params = preset_group("test64");
  Bytes in = {1, 2, 3};
  auto a = hash_to_exponent(HashLabel::mask, in, params);
  auto b = hash_to_exponent(HashLabel::mask, in, params);
  EXPECT_EQ(a, b);
  EXPECT_GE(a.value(), 1);
  EXPECT_LT(a.value(), params.q());
}

TEST(HashToExponentTest, LabelsSeparateDomains) {
  auto params = preset_group("test64");
  std::mt19937_64 rng(5);
  int differing = 0;
  for (int i = 0; i < 100; ++i) {
    Bytes in(24);
    fill_random(rng, in);
    auto m = hash_to_exponent(HashLabel::mask, in, params);
    auto k = hash_to_exponent(HashLabel::group_key, in, params);
    auto c = hash_to_exponent(HashLabel::contribution, in, params);
    differing += (m != k) && (k != c) && (m != c);
  }
  EXPECT_GT(differing, 0);
  EXPECT_EQ(differing, 100);
}

TEST(HashToExponentTest, NeverZeroEvenInTinyGroup) {
  // q = 11: a zero residue shows up for ~1 in 11 inputs, so the counter
  // loop is exercised thousands of times here.
  auto params = toy();
  std::mt19937_64 rng(11);
  OpCounts c;
  std::set<unsigned long> seen;
  for (int i = 0; i < 100000; ++i) {
    Bytes in(8);
    fill_random(rng, in);
    auto e = hash_to_exponent(HashLabel::mask, in, params, &c);
    ASSERT_GE(e.value(), 1);
    ASSERT_LE(e.value(), 10);
    seen.insert(e.value().get_ui());
  }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(c.hash, 100000u);
}

TEST(EncodingTest, FixedWidthExamples) {
  auto params = toy();
  auto m = encode_fixed(exp_of(9, params), params);
  EXPECT_EQ(m.bytes, Bytes{0x09});
  EXPECT_EQ(decode_exponent(m, params).value(), 9);
  expect_errc(Errc::out_of_range, [&] { decode_exponent(MaskBytes{{0x00}}, params); });
  expect_errc(Errc::out_of_range, [&] { decode_exponent(MaskBytes{{0x0B}}, params); });
  expect_errc(Errc::length_mismatch, [&] { decode_exponent(MaskBytes{{0, 1}}, params); });
}

TEST(EncodingTest, ExhaustiveRoundTripBelowTwoToSixteen) {
  std::mt19937_64 rng(16);
  auto params = generate_group_params(15, rng);
  ASSERT_LT(params.q(), 1 << 16);
  const auto q = params.q().get_ui();
  for (unsigned long v = 1; v < q; ++v) {
    auto e = exp_of(static_cast<long>(v), params);
    auto m = encode_fixed(e, params);
    ASSERT_EQ(m.bytes.size(), 2u);
    ASSERT_EQ(decode_exponent(m, params), e);
  }
}

TEST(EncodingTest, ElementsAreBigEndianPadded) {
  auto params = preset_group("test64");
  auto g = GroupElement::generator(params);
  auto b = encode_element(g, params);
  ASSERT_EQ(b.size(), 9u);
  EXPECT_EQ(b.back(), 2);
  EXPECT_EQ(std::count(b.begin(), b.end(), 0), 8);
  EXPECT_EQ(decode_element(b, params), g);
}

TEST(XorMaskTest, Properties) {
  MaskBytes a{{0x0F}}, b{{0x09}};
  EXPECT_EQ(xor_mask(a, b).bytes, Bytes{0x06});
  EXPECT_EQ(xor_mask(a, a).bytes, Bytes{0x00});
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    MaskBytes r{Bytes(8)}, h{Bytes(8)};
    fill_random(rng, r.bytes);
    fill_random(rng, h.bytes);
    EXPECT_EQ(xor_mask(xor_mask(r, h), h), r);
  }
  expect_errc(Errc::length_mismatch, [] { xor_mask(MaskBytes{{1}}, MaskBytes{{1, 2}}); });
}
