#pragma once

#include <array>
#include <compare>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include <sodium.h>

#include "agke/algebra.hpp"
#include "agke/bytes.hpp"
#include "agke/digest.hpp"
#include "agke/metrics.hpp"

namespace agke {

struct RawKeyPair {
  Bytes private_key;
  Bytes public_key;
};

// Any deterministic signature scheme over byte strings.
template <class S>
concept SignatureScheme = requires(ByteView seed, ByteView key, ByteView msg, ByteView sig) {
  { S::seed_size } -> std::convertible_to<std::size_t>;
  { S::keypair_from_seed(seed) } -> std::same_as<RawKeyPair>;
  { S::sign(key, msg) } -> std::same_as<Bytes>;
  { S::verify(key, msg, sig) } -> std::same_as<bool>;
};

struct Ed25519 {
  static constexpr std::size_t seed_size = crypto_sign_SEEDBYTES;

  static RawKeyPair keypair_from_seed(ByteView seed) {
    detail::ensure_sodium();
    if (seed.size() != seed_size) throw Error(Errc::length_mismatch, "ed25519 seed");
    RawKeyPair kp{Bytes(crypto_sign_SECRETKEYBYTES), Bytes(crypto_sign_PUBLICKEYBYTES)};
    crypto_sign_seed_keypair(kp.public_key.data(), kp.private_key.data(), seed.data());
    return kp;
  }

  static Bytes sign(ByteView private_key, ByteView message) {
    detail::ensure_sodium();
    if (private_key.size() != crypto_sign_SECRETKEYBYTES)
      throw Error(Errc::length_mismatch, "ed25519 private key");
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), private_key.data());
    return sig;
  }

  static bool verify(ByteView public_key, ByteView message, ByteView sig) {
    detail::ensure_sodium();
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES || sig.size() != crypto_sign_BYTES)
      return false;
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(),
                                       public_key.data()) == 0;
  }
};

static_assert(SignatureScheme<Ed25519>);

/// Key material shared by every TDS of one manufacturer.
struct ManufacturerKeyPair {
  std::string manufacturer_id;
  Bytes private_key;
  Bytes public_key;

  template <SignatureScheme S = Ed25519, RandomEngine Rng>
  static ManufacturerKeyPair generate(std::string id, Rng& rng) {
    Bytes seed(S::seed_size);
    fill_random(rng, seed);
    auto raw = S::keypair_from_seed(seed);
    sodium_memzero(seed.data(), seed.size());
    return {std::move(id), std::move(raw.private_key), std::move(raw.public_key)};
  }

  friend bool operator==(const ManufacturerKeyPair&, const ManufacturerKeyPair&) = default;
};

struct QuerierKeyPair {
  Bytes private_key;
  Bytes public_key;

  template <SignatureScheme S = Ed25519, RandomEngine Rng>
  static QuerierKeyPair generate(Rng& rng) {
    Bytes seed(S::seed_size);
    fill_random(rng, seed);
    auto raw = S::keypair_from_seed(seed);
    sodium_memzero(seed.data(), seed.size());
    return {std::move(raw.private_key), std::move(raw.public_key)};
  }
};

struct SessionId {
  static constexpr std::size_t size = 16;
  std::array<std::uint8_t, size> bytes{};

  template <RandomEngine Rng>
  static SessionId random(Rng& rng) {
    SessionId sid;
    fill_random(rng, sid.bytes);
    return sid;
  }

  static SessionId from_bytes(ByteView data) {
    if (data.size() != size) throw Error(Errc::malformed, "session id must be 16 bytes");
    SessionId sid;
    std::copy(data.begin(), data.end(), sid.bytes.begin());
    return sid;
  }

  ByteView view() const noexcept { return bytes; }
  std::string hex() const { return to_hex(bytes); }

  friend auto operator<=>(const SessionId&, const SessionId&) = default;
};

struct Signature {
  Bytes bytes;
  friend bool operator==(const Signature&, const Signature&) = default;
};

/// The group session key: a fixed-width encoding of an element of Z_q^*.
struct SharedKey {
  Bytes bytes;
  std::string hex() const { return to_hex(bytes); }
  friend bool operator==(const SharedKey&, const SharedKey&) = default;
};

struct Slot {
  GroupElement z;
  MaskBytes y;
};

/// Everything a broadcast signature covers. `anchor_sid` names the
/// session whose SID the slot contributions were derived from; it equals
/// `sid` for a base session and stays fixed across join re-keys.
struct BroadcastBody {
  SessionId sid;
  SessionId anchor_sid;
  GroupElement z0;
  std::vector<Slot> slots;
};

// --- payload framing ----------------------------------------------------

inline Bytes contribution_payload(const SessionId& sid, const GroupElement& z,
                                  const GroupParams& params) {
  Bytes out;
  append_field(out, std::string_view("contrib"));
  append_field(out, sid.view());
  append_field(out, encode_element(z, params));
  return out;
}

inline Bytes broadcast_payload(const BroadcastBody& body, const GroupParams& params) {
  Bytes out;
  append_field(out, std::string_view("bcast"));
  append_field(out, body.sid.view());
  append_field(out, body.anchor_sid.view());
  append_field(out, encode_element(body.z0, params));
  append_u32(out, static_cast<std::uint32_t>(body.slots.size()));
  for (const auto& slot : body.slots) {
    append_field(out, encode_element(slot.z, params));
    append_field(out, slot.y.bytes);
  }
  return out;
}

// --- contribution derivation ------------------------------------------

/// r_i for a manufacturer and session: HMAC-SHA256 keyed by a key derived
/// from the manufacturer's private key, mapped into Z_q^*. Depends only on
/// (private key, SID), so every device of the manufacturer agrees.
inline Exponent derive_contribution_exponent(const ManufacturerKeyPair& keypair,
                                             const SessionId& sid, const GroupParams& params,
                                             OpCounts* meter = nullptr) {
  Bytes kdf_input;
  append_field(kdf_input, std::string_view("mac-key"));
  append_field(kdf_input, keypair.private_key);
  auto mac_key = Sha256().update(kdf_input).finish();
  auto tag = hmac_sha256(mac_key, sid.view());
  sodium_memzero(mac_key.data(), mac_key.size());
  detail::count_hash(meter);
  return hash_to_exponent(HashLabel::contribution, tag, params);
}

/// H_2(x || SID) as a fixed-width mask.
inline MaskBytes derive_mask(const GroupElement& x, const SessionId& sid,
                             const GroupParams& params, OpCounts* meter = nullptr) {
  Bytes input = encode_element(x, params);
  append(input, sid.view());
  return encode_fixed(hash_to_exponent(HashLabel::mask, input, params, meter), params);
}

/// SK = H_2(r || y_1 || ... || y_m || SID). All fields are fixed width.
inline SharedKey compute_shared_key(const Exponent& r, std::span<const MaskBytes> ys,
                                    const SessionId& sid, const GroupParams& params,
                                    OpCounts* meter = nullptr) {
  if (ys.empty()) throw Error(Errc::empty_input, "compute_shared_key: no masks");
  Bytes input = encode_fixed(r, params).bytes;
  for (const auto& y : ys) {
    if (y.bytes.size() != params.exponent_width()) throw Error(Errc::length_mismatch, "mask");
    append(input, y.bytes);
  }
  append(input, sid.view());
  auto k = hash_to_exponent(HashLabel::group_key, input, params, meter);
  return {encode_fixed(k, params).bytes};
}

// --- signatures --------------------------------------------------------

template <SignatureScheme S = Ed25519>
Signature sign_contribution(const ManufacturerKeyPair& keypair, const SessionId& sid,
                            const GroupElement& z, const GroupParams& params,
                            OpCounts* meter = nullptr) {
  detail::count_sig(meter);
  return {S::sign(keypair.private_key, contribution_payload(sid, z, params))};
}

template <SignatureScheme S = Ed25519>
bool verify_contribution(ByteView public_key, const SessionId& sid, const GroupElement& z,
                         const Signature& sig, const GroupParams& params,
                         OpCounts* meter = nullptr) {
  detail::count_sig(meter);
  return S::verify(public_key, contribution_payload(sid, z, params), sig.bytes);
}

template <SignatureScheme S = Ed25519>
Signature sign_broadcast(const QuerierKeyPair& keypair, const BroadcastBody& body,
                         const GroupParams& params, OpCounts* meter = nullptr) {
  detail::count_sig(meter);
  return {S::sign(keypair.private_key, broadcast_payload(body, params))};
}

template <SignatureScheme S = Ed25519>
bool verify_broadcast(ByteView public_key, const BroadcastBody& body, const Signature& sig,
                      const GroupParams& params, OpCounts* meter = nullptr) {
  detail::count_sig(meter);
  return S::verify(public_key, broadcast_payload(body, params), sig.bytes);
}

}  // namespace agke
