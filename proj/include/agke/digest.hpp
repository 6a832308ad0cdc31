#pragma once

#include <array>
#include <cstdint>

#include <sodium.h>

#include "agke/bytes.hpp"
#include "agke/error.hpp"

namespace agke {

using Digest = std::array<std::uint8_t, crypto_hash_sha256_BYTES>;

namespace detail {

inline void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw Error(Errc::internal_failure, "libsodium initialisation failed");
}

}  // namespace detail

// Incremental SHA-256.
class Sha256 {
 public:
  Sha256() {
    detail::ensure_sodium();
    crypto_hash_sha256_init(&state_);
  }

  Sha256& update(ByteView data) {
    crypto_hash_sha256_update(&state_, data.data(), data.size());
    return *this;
  }

  Digest finish() {
    Digest out{};
    crypto_hash_sha256_final(&state_, out.data());
    return out;
  }

 private:
  crypto_hash_sha256_state state_{};
};

inline Digest hmac_sha256(ByteView key, ByteView message) {
  detail::ensure_sodium();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, message.data(), message.size());
  Digest out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

}  // namespace agke
