#pragma once

#include <concepts>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>

#include <gmpxx.h>
#include <nlohmann/json.hpp>

#include "agke/bytes.hpp"
#include "agke/digest.hpp"
#include "agke/error.hpp"
#include "agke/metrics.hpp"

namespace agke {

using BigInt = mpz_class;

// Random sources must deliver full-width words so byte extraction is
// reproducible for a given seed.
template <class R>
concept RandomEngine = std::uniform_random_bit_generator<std::remove_reference_t<R>> &&
                       (std::remove_reference_t<R>::min() == 0) &&
                       (std::remove_reference_t<R>::max() ==
                        std::numeric_limits<typename std::remove_reference_t<R>::result_type>::max());

template <RandomEngine Rng>
void fill_random(Rng& rng, std::span<std::uint8_t> out) {
  using word = typename Rng::result_type;
  constexpr std::size_t bytes_per_word = std::numeric_limits<word>::digits / 8;
  std::size_t i = 0;
  while (i < out.size()) {
    word w = rng();
    for (std::size_t k = 0; k < bytes_per_word && i < out.size(); ++k, ++i) {
      out[i] = static_cast<std::uint8_t>(w & 0xff);
      w >>= 8;
    }
  }
}

inline std::size_t bit_length(const BigInt& v) {
  return sgn(v) == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
}

inline BigInt from_be_bytes(ByteView data) {
  BigInt out;
  if (!data.empty()) mpz_import(out.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
  return out;
}

// Big-endian, left-padded with zeros to exactly `width` bytes.
inline Bytes to_be_bytes(const BigInt& v, std::size_t width) {
  if (sgn(v) < 0) throw Error(Errc::out_of_range, "negative integer");
  std::size_t needed = (bit_length(v) + 7) / 8;
  if (needed > width) throw Error(Errc::out_of_range, "integer wider than field");
  Bytes out(width, 0);
  std::size_t written = 0;
  if (needed > 0)
    mpz_export(out.data() + (width - needed), &written, 1, 1, 1, 0, v.get_mpz_t());
  return out;
}

inline bool is_probable_prime(const BigInt& n) {
  // 64 Miller-Rabin rounds after GMP's trial division; error < 2^-128.
  return mpz_probab_prime_p(n.get_mpz_t(), 64) > 0;
}

inline BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

/// A safe-prime group: p = 2q + 1 with p, q prime, and g generating the
/// subgroup G_q of order q. Instances are only obtainable through
/// validating factories, so holding one means the invariants hold.
class GroupParams {
 public:
  static GroupParams make(BigInt p, BigInt q, BigInt g) {
    if (p != 2 * q + 1) throw Error(Errc::invalid_params, "p != 2q + 1");
    if (q < 2 || !is_probable_prime(q)) throw Error(Errc::invalid_params, "q is not prime");
    if (!is_probable_prime(p)) throw Error(Errc::invalid_params, "p is not prime");
    if (g < 2 || g > p - 2) throw Error(Errc::invalid_params, "g outside [2, p-2]");
    if (powm(g, q, p) != 1) throw Error(Errc::invalid_params, "g does not generate G_q");
    return GroupParams(std::move(p), std::move(q), std::move(g));
  }

  const BigInt& p() const noexcept { return p_; }
  const BigInt& q() const noexcept { return q_; }
  const BigInt& g() const noexcept { return g_; }

  std::size_t exponent_width() const noexcept { return exponent_width_; }
  std::size_t element_width() const noexcept { return element_width_; }

  friend bool operator==(const GroupParams& a, const GroupParams& b) {
    return a.p_ == b.p_ && a.q_ == b.q_ && a.g_ == b.g_;
  }

 private:
  GroupParams(BigInt p, BigInt q, BigInt g)
      : p_(std::move(p)),
        q_(std::move(q)),
        g_(std::move(g)),
        exponent_width_((bit_length(q_) + 7) / 8),
        element_width_((bit_length(p_) + 7) / 8) {}

  BigInt p_, q_, g_;
  std::size_t exponent_width_;
  std::size_t element_width_;
};

inline bool is_subgroup_member(const BigInt& value, const GroupParams& params) {
  if (value < 1 || value > params.p() - 1) return false;
  return powm(value, params.q(), params.p()) == 1;
}

/// Searches for a safe-prime group whose q has exactly `q_bit_length`
/// bits, drawing candidates from `rng`. The generator is the smallest
/// integer >= 2 that lies in G_q, so the result depends only on (p, q).
template <RandomEngine Rng>
GroupParams generate_group_params(std::size_t q_bit_length, Rng& rng) {
  if (q_bit_length == 0) throw Error(Errc::parameter_search_exhausted, "q_bit_length is zero");
  const std::size_t attempts = 1000 + 100 * q_bit_length * q_bit_length;
  Bytes buf((q_bit_length + 7) / 8);
  const unsigned spare_bits = static_cast<unsigned>(buf.size() * 8 - q_bit_length);
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    fill_random(rng, buf);
    buf[0] &= static_cast<std::uint8_t>(0xff >> spare_bits);
    buf[0] |= static_cast<std::uint8_t>(0x80 >> spare_bits);
    buf[buf.size() - 1] |= 1;
    BigInt q = from_be_bytes(buf);
    if (!is_probable_prime(q)) continue;
    BigInt p = 2 * q + 1;
    if (!is_probable_prime(p)) continue;
    for (BigInt h = 2; h <= p - 2; ++h) {
      if (powm(h, q, p) == 1) return GroupParams::make(p, q, h);
    }
  }
  throw Error(Errc::parameter_search_exhausted,
              "no safe prime with " + std::to_string(q_bit_length) + "-bit q found");
}

/// Element of Z_q^*, i.e. an integer in [1, q-1].
class Exponent {
 public:
  static Exponent from_value(BigInt v, const GroupParams& params) {
    if (v < 1 || v >= params.q()) throw Error(Errc::out_of_range, "exponent outside [1, q-1]");
    return Exponent(std::move(v));
  }

  const BigInt& value() const noexcept { return value_; }

  friend bool operator==(const Exponent&, const Exponent&) = default;

 private:
  explicit Exponent(BigInt v) : value_(std::move(v)) {}
  BigInt value_;
};

/// Uniform (up to 2^-64 bias) element of Z_q^*.
template <RandomEngine Rng>
Exponent random_exponent(const GroupParams& params, Rng& rng) {
  Bytes buf(params.exponent_width() + 8);
  fill_random(rng, buf);
  BigInt v = from_be_bytes(buf) % BigInt(params.q() - 1) + 1;
  return Exponent::from_value(std::move(v), params);
}

/// Member of the order-q subgroup G_q.
class GroupElement {
 public:
  static GroupElement from_value(BigInt v, const GroupParams& params) {
    if (!is_subgroup_member(v, params)) throw Error(Errc::subgroup_violation);
    return GroupElement(std::move(v));
  }

  static GroupElement generator(const GroupParams& params) { return GroupElement(params.g()); }

  const BigInt& value() const noexcept { return value_; }

  friend bool operator==(const GroupElement&, const GroupElement&) = default;

 private:
  friend GroupElement mod_exp(const GroupElement&, const Exponent&, const GroupParams&, OpCounts*);
  explicit GroupElement(BigInt v) : value_(std::move(v)) {}
  BigInt value_;
};

/// base^exponent mod p for any base in [1, p-1].
inline BigInt mod_exp(const BigInt& base, const Exponent& exponent, const GroupParams& params,
                      OpCounts* meter = nullptr) {
  if (base < 1 || base > params.p() - 1) throw Error(Errc::out_of_range, "base outside [1, p-1]");
  detail::count_exp(meter);
  return powm(base, exponent.value(), params.p());
}

/// Subgroup-closed exponentiation.
inline GroupElement mod_exp(const GroupElement& base, const Exponent& exponent,
                            const GroupParams& params, OpCounts* meter = nullptr) {
  detail::count_exp(meter);
  return GroupElement(powm(base.value(), exponent.value(), params.p()));
}

/// Fixed-width byte string the size of an encoded exponent, used as an
/// XOR mask. No range constraint applies.
struct MaskBytes {
  Bytes bytes;
  friend bool operator==(const MaskBytes&, const MaskBytes&) = default;
};

inline MaskBytes encode_fixed(const Exponent& e, const GroupParams& params) {
  return {to_be_bytes(e.value(), params.exponent_width())};
}

inline Exponent decode_exponent(const MaskBytes& m, const GroupParams& params) {
  if (m.bytes.size() != params.exponent_width())
    throw Error(Errc::length_mismatch, "mask width differs from exponent width");
  return Exponent::from_value(from_be_bytes(m.bytes), params);
}

inline MaskBytes xor_mask(const MaskBytes& a, const MaskBytes& b) {
  if (a.bytes.size() != b.bytes.size()) throw Error(Errc::length_mismatch);
  MaskBytes out{Bytes(a.bytes.size())};
  for (std::size_t i = 0; i < a.bytes.size(); ++i) out.bytes[i] = a.bytes[i] ^ b.bytes[i];
  return out;
}

inline Bytes encode_element(const GroupElement& e, const GroupParams& params) {
  return to_be_bytes(e.value(), params.element_width());
}

inline GroupElement decode_element(ByteView data, const GroupParams& params) {
  if (data.size() != params.element_width())
    throw Error(Errc::malformed, "group element has wrong width");
  return GroupElement::from_value(from_be_bytes(data), params);
}

// Domain-separation labels for hashing into Z_q^*.
enum class HashLabel { contribution, mask, group_key };

constexpr std::string_view to_string(HashLabel label) noexcept {
  switch (label) {
    case HashLabel::contribution: return "tds-contrib";
    case HashLabel::mask: return "mask";
    case HashLabel::group_key: return "group-key";
  }
  return "";
}

/// Maps bytes into Z_q^*: SHA-256 over (label, counter, block, input),
/// expanded in counter mode to 16 bytes past the exponent width, read
/// big-endian and reduced mod q. A zero residue bumps the counter.
inline Exponent hash_to_exponent(HashLabel label, ByteView input, const GroupParams& params,
                                 OpCounts* meter = nullptr) {
  const std::size_t want = params.exponent_width() + 16;
  Bytes label_field;
  append_field(label_field, to_string(label));
  for (unsigned counter = 0; counter < 255; ++counter) {
    Bytes stream;
    stream.reserve(want + 32);
    for (std::uint32_t block = 0; stream.size() < want; ++block) {
      Bytes prefix = label_field;
      prefix.push_back(static_cast<std::uint8_t>(counter));
      append_u32(prefix, block);
      auto d = Sha256().update(prefix).update(input).finish();
      append(stream, d);
    }
    BigInt v = from_be_bytes(ByteView(stream).first(want)) % params.q();
    if (v != 0) {
      detail::count_hash(meter);
      return Exponent::from_value(std::move(v), params);
    }
  }
  throw Error(Errc::internal_failure, "hash_to_exponent: counter exhausted");
}

// --- presets and JSON ---------------------------------------------------

inline GroupParams preset_group(std::string_view name);

inline nlohmann::json params_to_json(const GroupParams& params) {
  return {{"p", params.p().get_str()}, {"q", params.q().get_str()}, {"g", params.g().get_str()}};
}

inline BigInt parse_decimal(const std::string& s, const char* field) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw Error(Errc::config, std::string(field) + ": expected a decimal string");
  return BigInt(s, 10);
}

inline GroupParams params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::config, "group: expected an object");
  for (const char* k : {"p", "q", "g"}) {
    if (!j.contains(k) || !j.at(k).is_string())
      throw Error(Errc::config, std::string("group.") + k + ": expected a decimal string");
  }
  try {
    return GroupParams::make(parse_decimal(j.at("p").get<std::string>(), "group.p"),
                             parse_decimal(j.at("q").get<std::string>(), "group.q"),
                             parse_decimal(j.at("g").get<std::string>(), "group.g"));
  } catch (const Error& e) {
    if (e.code() == Errc::config) throw;
    throw Error(Errc::config, std::string("group: ") + e.what());
  }
}

inline GroupParams preset_group(std::string_view name) {
  if (name == "toy23") return GroupParams::make(23, 11, 2);
  if (name == "test64") {
    return GroupParams::make(BigInt("25678688697455273783", 10), BigInt("12839344348727636891", 10), 2);
  }
  if (name == "rfc3526-2048") {
    BigInt p(
        "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
        "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
        "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
        "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
        "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
        "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
        "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
        "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
        "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9"
        "DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
        "15728E5A8AACAA68FFFFFFFFFFFFFFFF",
        16);
    BigInt q = (p - 1) / 2;
    return GroupParams::make(p, q, 2);
  }
  throw Error(Errc::config, "unknown group preset '" + std::string(name) + "'");
}

}  // namespace agke
