#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agke/algebra.hpp"
#include "agke/crypto_suite.hpp"
#include "agke/metrics.hpp"

namespace agke {

/// Round 1, TDS -> SSI -> Querier.
struct ContributionMessage {
  SessionId sid;
  GroupElement z;
  Signature sig;
  Bytes manufacturer_public_key;
};

/// Round 2, Querier -> SSI -> TDSs. Slots are strictly ascending by the
/// canonical encoding of z.
struct BroadcastMessage {
  BroadcastBody body;
  Signature sig;
};

// --- codecs ------------------------------------------------------------

inline Bytes encode(const ContributionMessage& m, const GroupParams& params) {
  Bytes out;
  append_field(out, m.sid.view());
  append_field(out, encode_element(m.z, params));
  append_field(out, m.sig.bytes);
  append_field(out, m.manufacturer_public_key);
  return out;
}

inline ContributionMessage decode_contribution(ByteView data, const GroupParams& params) {
  FieldReader in(data);
  auto sid = SessionId::from_bytes(in.field());
  auto z = decode_element(in.field(), params);
  auto sig_view = in.field();
  auto pk_view = in.field();
  in.expect_done();
  return {sid, std::move(z), Signature{Bytes(sig_view.begin(), sig_view.end())},
          Bytes(pk_view.begin(), pk_view.end())};
}

inline Bytes encode(const BroadcastMessage& m, const GroupParams& params) {
  Bytes slots;
  append_u32(slots, static_cast<std::uint32_t>(m.body.slots.size()));
  for (const auto& s : m.body.slots) {
    append_field(slots, encode_element(s.z, params));
    append_field(slots, s.y.bytes);
  }
  Bytes out;
  append_field(out, m.body.sid.view());
  append_field(out, m.body.anchor_sid.view());
  append_field(out, encode_element(m.body.z0, params));
  append_field(out, slots);
  append_field(out, m.sig.bytes);
  return out;
}

inline BroadcastMessage decode_broadcast(ByteView data, const GroupParams& params) {
  FieldReader in(data);
  auto sid = SessionId::from_bytes(in.field());
  auto anchor = SessionId::from_bytes(in.field());
  auto z0 = decode_element(in.field(), params);
  FieldReader slot_in(in.field());
  auto sig_view = in.field();
  in.expect_done();

  auto count = slot_in.u32();
  std::vector<Slot> slots;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto z = decode_element(slot_in.field(), params);
    auto y = slot_in.field();
    if (y.size() != params.exponent_width()) throw Error(Errc::malformed, "mask width");
    slots.push_back({std::move(z), MaskBytes{Bytes(y.begin(), y.end())}});
  }
  slot_in.expect_done();
  return {{sid, anchor, std::move(z0), std::move(slots)},
          Signature{Bytes(sig_view.begin(), sig_view.end())}};
}

inline nlohmann::json to_json(const ContributionMessage& m, const GroupParams& params) {
  return {{"type", "contribution"},
          {"sid", m.sid.hex()},
          {"z", to_hex(encode_element(m.z, params))},
          {"sig", to_hex(m.sig.bytes)},
          {"manufacturer_public_key", to_hex(m.manufacturer_public_key)}};
}

inline nlohmann::json to_json(const BroadcastMessage& m, const GroupParams& params) {
  auto slots = nlohmann::json::array();
  for (const auto& s : m.body.slots)
    slots.push_back({{"z", to_hex(encode_element(s.z, params))}, {"y", to_hex(s.y.bytes)}});
  return {{"type", "broadcast"},
          {"sid", m.body.sid.hex()},
          {"anchor_sid", m.body.anchor_sid.hex()},
          {"z0", to_hex(encode_element(m.body.z0, params))},
          {"slots", std::move(slots)},
          {"sig", to_hex(m.sig.bytes)}};
}

namespace detail {
inline Bytes hex_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw Error(Errc::malformed, std::string("missing hex field '") + key + "'");
  return from_hex(j.at(key).get<std::string>());
}
}  // namespace detail

inline ContributionMessage contribution_from_json(const nlohmann::json& j,
                                                  const GroupParams& params) {
  return {SessionId::from_bytes(detail::hex_field(j, "sid")),
          decode_element(detail::hex_field(j, "z"), params),
          Signature{detail::hex_field(j, "sig")}, detail::hex_field(j, "manufacturer_public_key")};
}

inline BroadcastMessage broadcast_from_json(const nlohmann::json& j, const GroupParams& params) {
  if (!j.contains("slots") || !j.at("slots").is_array())
    throw Error(Errc::malformed, "missing 'slots' array");
  std::vector<Slot> slots;
  for (const auto& s : j.at("slots")) {
    auto y = detail::hex_field(s, "y");
    if (y.size() != params.exponent_width()) throw Error(Errc::malformed, "mask width");
    slots.push_back({decode_element(detail::hex_field(s, "z"), params), MaskBytes{std::move(y)}});
  }
  return {{SessionId::from_bytes(detail::hex_field(j, "sid")),
           SessionId::from_bytes(detail::hex_field(j, "anchor_sid")),
           decode_element(detail::hex_field(j, "z0"), params), std::move(slots)},
          Signature{detail::hex_field(j, "sig")}};
}

/// True iff slot z encodings are strictly ascending (sorted, no duplicates).
inline bool slots_canonical(const std::vector<Slot>& slots, const GroupParams& params) {
  for (std::size_t i = 1; i < slots.size(); ++i) {
    if (!(encode_element(slots[i - 1].z, params) < encode_element(slots[i].z, params)))
      return false;
  }
  return true;
}

// --- TDS ---------------------------------------------------------------

/// One trusted device. Single owner: no concurrent calls on one instance.
class TdsState {
 public:
  explicit TdsState(ManufacturerKeyPair keypair) : keypair_(std::move(keypair)) {}

  /// Round 1. Each SID is answered at most once over the device's life.
  ContributionMessage contribute(const SessionId& sid, const GroupParams& params) {
    if (seen_sids_.contains(sid)) throw Error(Errc::stale_sid, sid.hex());
    seen_sids_.insert(sid);
    const auto& own = own_contribution(sid, params);
    auto sig = sign_contribution(keypair_, sid, own.z, params, &counts_);
    return {sid, own.z, std::move(sig), keypair_.public_key};
  }

  /// Round 2. Works whether or not this device contributed in round 1, as
  /// long as some device of the same manufacturer did.
  SharedKey derive_key(const BroadcastMessage& broadcast, ByteView querier_public_key,
                       const GroupParams& params) {
    const auto& body = broadcast.body;
    if (!verify_broadcast(querier_public_key, body, broadcast.sig, params, &counts_))
      throw Error(Errc::bad_broadcast_signature);
    if (!slots_canonical(body.slots, params))
      throw Error(Errc::malformed, "broadcast slots not strictly sorted");
    if (auto it = derived_keys_.find(body.sid); it != derived_keys_.end()) return it->second;

    const auto& own = own_contribution(body.anchor_sid, params);
    auto slot = std::find_if(body.slots.begin(), body.slots.end(),
                             [&](const Slot& s) { return s.z == own.z; });
    if (slot == body.slots.end())
      throw Error(Errc::manufacturer_not_represented, keypair_.manufacturer_id);

    auto x = mod_exp(body.z0, own.r, params, &counts_);
    auto unmasked = xor_mask(slot->y, derive_mask(x, body.sid, params, &counts_));
    std::optional<Exponent> r;
    try {
      r = decode_exponent(unmasked, params);
    } catch (const Error&) {
      throw Error(Errc::mask_decode_failure);
    }

    std::vector<MaskBytes> ys;
    ys.reserve(body.slots.size());
    for (const auto& s : body.slots) ys.push_back(s.y);
    auto key = compute_shared_key(*r, ys, body.sid, params, &counts_);
    derived_keys_.emplace(body.sid, key);
    return key;
  }

  bool has_seen(const SessionId& sid) const { return seen_sids_.contains(sid); }

  std::optional<SharedKey> key_for(const SessionId& sid) const {
    auto it = derived_keys_.find(sid);
    if (it == derived_keys_.end()) return std::nullopt;
    return it->second;
  }

  const ManufacturerKeyPair& keypair() const noexcept { return keypair_; }

  const OpCounts& counts() const noexcept { return counts_; }
  void reset_counts() noexcept { counts_ = {}; }

 private:
  struct Contribution {
    Exponent r;
    GroupElement z;
  };

  // r_i and z_i for a SID, computed at most once per device.
  const Contribution& own_contribution(const SessionId& sid, const GroupParams& params) {
    if (auto it = contributions_.find(sid); it != contributions_.end()) return it->second;
    auto r = derive_contribution_exponent(keypair_, sid, params, &counts_);
    auto z = mod_exp(GroupElement::generator(params), r, params, &counts_);
    return contributions_.emplace(sid, Contribution{std::move(r), std::move(z)}).first->second;
  }

  ManufacturerKeyPair keypair_;
  std::set<SessionId> seen_sids_;
  std::map<SessionId, SharedKey> derived_keys_;
  std::map<SessionId, Contribution> contributions_;
  OpCounts counts_;
};

// --- Querier -----------------------------------------------------------

/// One Querier session. Single owner; `finalize` may run once.
class QuerierSession {
 public:
  struct Member {
    GroupElement z;
    Bytes public_key;
  };

  template <RandomEngine Rng>
  static QuerierSession open(QuerierKeyPair keypair, const GroupParams& params, Rng& rng) {
    auto sid = SessionId::random(rng);
    auto r0 = random_exponent(params, rng);
    auto r = random_exponent(params, rng);
    return open_with(std::move(keypair), sid, sid, std::move(r0), std::move(r), params);
  }

  /// Opens a session with caller-chosen secrets.
  static QuerierSession open_with(QuerierKeyPair keypair, const SessionId& sid,
                                  const SessionId& anchor_sid, Exponent r0, Exponent r,
                                  const GroupParams& params) {
    OpCounts counts;
    auto z0 = mod_exp(GroupElement::generator(params), r0, params, &counts);
    return QuerierSession(std::move(keypair), sid, anchor_sid, std::move(r0), std::move(r),
                          std::move(z0), counts);
  }

  /// Round 2: dedup by z, verify every surviving signature (abort on the
  /// first failure), mask r for each slot and sign the broadcast.
  const BroadcastMessage& finalize(std::span<const ContributionMessage> contributions,
                                   const GroupParams& params) {
    if (broadcast_) throw Error(Errc::internal_failure, "session already finalized");
    members_ = accept_contributions(contributions, anchor_sid_, params, &counts_);
    build(params);
    return *broadcast_;
  }

  /// Adds a manufacturer that contributed under the anchor SID. The new
  /// session has a fresh SID, r0 and r; old devices keep their r_i.
  template <RandomEngine Rng>
  QuerierSession rekey_join(const ContributionMessage& joiner, const GroupParams& params,
                            Rng& rng) const {
    require_finalized();
    auto sid = SessionId::random(rng);
    auto r0 = random_exponent(params, rng);
    auto r = random_exponent(params, rng);
    auto next = open_with(keypair_, sid, anchor_sid_, std::move(r0), std::move(r), params);

    if (joiner.sid != anchor_sid_) throw Error(Errc::wrong_sid, joiner.sid.hex());
    auto key = encode_element(joiner.z, params);
    if (members_.contains(key))
      throw Error(Errc::duplicate_manufacturer, to_hex(joiner.manufacturer_public_key));
    if (!verify_contribution(joiner.manufacturer_public_key, joiner.sid, joiner.z, joiner.sig,
                             params, &next.counts_))
      throw Error(Errc::bad_signature, to_hex(joiner.manufacturer_public_key));

    next.members_ = members_;
    next.members_.emplace(std::move(key), Member{joiner.z, joiner.manufacturer_public_key});
    next.build(params);
    return next;
  }

  /// Removes the manufacturer whose slot is `leaving_z` by running a fresh
  /// session among the rest. `collect(sid)` gathers round-1 contributions
  /// for the new SID; any from the departed manufacturer are discarded.
  template <RandomEngine Rng, class Collector>
    requires std::invocable<Collector&, const SessionId&>
  QuerierSession rekey_leave(const GroupElement& leaving_z, Collector&& collect,
                             const GroupParams& params, Rng& rng) const {
    require_finalized();
    auto it = members_.find(encode_element(leaving_z, params));
    if (it == members_.end()) throw Error(Errc::unknown_leaver);
    if (members_.size() == 1) throw Error(Errc::empty_group);
    const Bytes departed = it->second.public_key;

    auto next = open(keypair_, params, rng);
    std::vector<ContributionMessage> gathered = collect(next.sid_);
    std::erase_if(gathered, [&](const ContributionMessage& c) {
      return c.manufacturer_public_key == departed;
    });
    if (gathered.empty()) throw Error(Errc::empty_group);
    next.finalize(gathered, params);
    return next;
  }

  const SessionId& sid() const noexcept { return sid_; }
  const SessionId& anchor_sid() const noexcept { return anchor_sid_; }
  const GroupElement& z0() const noexcept { return z0_; }
  const QuerierKeyPair& keypair() const noexcept { return keypair_; }
  const std::optional<BroadcastMessage>& broadcast() const noexcept { return broadcast_; }
  const std::optional<SharedKey>& shared_key() const noexcept { return shared_key_; }
  std::size_t slot_count() const noexcept { return members_.size(); }
  const OpCounts& counts() const noexcept { return counts_; }

  std::vector<Member> members() const {
    std::vector<Member> out;
    for (const auto& [_, m] : members_) out.push_back(m);
    return out;
  }

  // Session secrets, exposed for invariant checks in the harness.
  const Exponent& secret_r() const noexcept { return r_; }
  const Exponent& secret_r0() const noexcept { return r0_; }

 private:
  QuerierSession(QuerierKeyPair keypair, const SessionId& sid, const SessionId& anchor,
                 Exponent r0, Exponent r, GroupElement z0, OpCounts counts)
      : keypair_(std::move(keypair)),
        sid_(sid),
        anchor_sid_(anchor),
        r0_(std::move(r0)),
        r_(std::move(r)),
        z0_(std::move(z0)),
        counts_(counts) {}

  static std::map<Bytes, Member> accept_contributions(
      std::span<const ContributionMessage> contributions, const SessionId& expected_sid,
      const GroupParams& params, OpCounts* meter) {
    if (contributions.empty()) throw Error(Errc::empty_contributions);
    // Canonical order first so the survivor of each z is independent of
    // arrival order.
    std::vector<std::pair<Bytes, const ContributionMessage*>> ordered;
    ordered.reserve(contributions.size());
    for (const auto& c : contributions) {
      if (c.sid != expected_sid) throw Error(Errc::wrong_sid, c.sid.hex());
      ordered.emplace_back(encode(c, params), &c);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::map<Bytes, Member> members;
    std::vector<const ContributionMessage*> survivors;
    for (const auto& [_, c] : ordered) {
      auto key = encode_element(c->z, params);
      if (members.contains(key)) continue;
      members.emplace(std::move(key), Member{c->z, c->manufacturer_public_key});
      survivors.push_back(c);
    }
    for (const auto* c : survivors) {
      if (!verify_contribution(c->manufacturer_public_key, c->sid, c->z, c->sig, params, meter))
        throw Error(Errc::bad_signature, to_hex(c->manufacturer_public_key));
    }
    return members;
  }

  void build(const GroupParams& params) {
    const auto r_bytes = encode_fixed(r_, params);
    BroadcastBody body{sid_, anchor_sid_, z0_, {}};
    std::vector<MaskBytes> ys;
    for (const auto& [_, m] : members_) {
      auto x = mod_exp(m.z, r0_, params, &counts_);
      auto y = xor_mask(derive_mask(x, sid_, params, &counts_), r_bytes);
      ys.push_back(y);
      body.slots.push_back({m.z, std::move(y)});
    }
    shared_key_ = compute_shared_key(r_, ys, sid_, params, &counts_);
    auto sig = sign_broadcast(keypair_, body, params, &counts_);
    broadcast_ = BroadcastMessage{std::move(body), std::move(sig)};
  }

  void require_finalized() const {
    if (!broadcast_) throw Error(Errc::internal_failure, "session not finalized");
  }

  QuerierKeyPair keypair_;
  SessionId sid_;
  SessionId anchor_sid_;
  Exponent r0_;
  Exponent r_;
  GroupElement z0_;
  std::map<Bytes, Member> members_;
  std::optional<BroadcastMessage> broadcast_;
  std::optional<SharedKey> shared_key_;
  OpCounts counts_;
};

}  // namespace agke
