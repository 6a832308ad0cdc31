#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agke/protocol.hpp"

namespace agke {

struct Connectivity {
  bool online_round1 = true;
  bool online_round2 = true;
  std::uint64_t fetch_delay = 0;     // ticks after the broadcast before a late fetch
  std::uint64_t response_delay = 0;  // ticks before a round-1 answer reaches the SSI

  friend bool operator==(const Connectivity&, const Connectivity&) = default;
};

/// Per-device connectivity, indexed like the fleet.
class ConnectivitySchedule {
 public:
  ConnectivitySchedule() = default;
  explicit ConnectivitySchedule(std::vector<Connectivity> devices) : devices_(std::move(devices)) {}

  static ConnectivitySchedule all_online(std::size_t n) {
    return ConnectivitySchedule(std::vector<Connectivity>(n));
  }

  const Connectivity& operator[](std::size_t i) const { return devices_.at(i); }
  Connectivity& operator[](std::size_t i) { return devices_.at(i); }
  std::size_t size() const noexcept { return devices_.size(); }

  // A usable schedule has at least one device online for round 1.
  bool valid() const {
    return std::any_of(devices_.begin(), devices_.end(),
                       [](const Connectivity& c) { return c.online_round1; });
  }

  std::vector<std::size_t> round1_devices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < devices_.size(); ++i)
      if (devices_[i].online_round1) out.push_back(i);
    return out;
  }

 private:
  std::vector<Connectivity> devices_;
};

struct Device {
  std::string id;
  TdsState state;

  const std::string& manufacturer_id() const { return state.keypair().manufacturer_id; }
};

// --- transcript --------------------------------------------------------

namespace message_type {
inline constexpr std::string_view contribution = "contribution";
inline constexpr std::string_view broadcast = "broadcast";
inline constexpr std::string_view deliver = "deliver";
inline constexpr std::string_view fetch = "fetch";
inline constexpr std::string_view reject = "reject";
inline constexpr std::string_view miss = "miss";
}  // namespace message_type

inline constexpr std::string_view kQuerier = "querier";
inline constexpr std::string_view kSsi = "ssi";

struct TranscriptEntry {
  std::uint64_t tick = 0;
  std::string session;
  std::string from;
  std::string to;
  std::string type;
  Bytes payload;

  bool is_protocol() const {
    return type == message_type::contribution || type == message_type::broadcast;
  }

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

/// Totally ordered log of everything the SSI relayed or stored.
class SessionTranscript {
 public:
  void append(TranscriptEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }

  /// Direction changes of protocol traffic within one session: each
  /// maximal run of TDS-to-Querier or Querier-to-TDS messages is a round.
  std::uint64_t round_count(std::string_view session) const {
    std::uint64_t rounds = 0;
    std::optional<bool> upstream;
    for (const auto& e : entries_) {
      if (e.session != session || !e.is_protocol()) continue;
      bool up = e.type == message_type::contribution;
      if (!upstream || *upstream != up) ++rounds;
      upstream = up;
    }
    return rounds;
  }

  std::vector<const TranscriptEntry*> session_entries(std::string_view session) const {
    std::vector<const TranscriptEntry*> out;
    for (const auto& e : entries_)
      if (e.session == session) out.push_back(&e);
    return out;
  }

  static nlohmann::json entry_to_json(const TranscriptEntry& e) {
    return {{"tick", e.tick},       {"session", e.session}, {"from", e.from},
            {"to", e.to},           {"type", e.type},       {"payload", to_hex(e.payload)}};
  }

  // One JSON object per line, keys in sorted order.
  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) {
      out += entry_to_json(e).dump();
      out += '\n';
    }
    return out;
  }

  static SessionTranscript from_jsonl(std::string_view text) {
    SessionTranscript t;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        t.append({j.at("tick").get<std::uint64_t>(), j.at("session").get<std::string>(),
                  j.at("from").get<std::string>(), j.at("to").get<std::string>(),
                  j.at("type").get<std::string>(), from_hex(j.at("payload").get<std::string>())});
      } catch (const std::exception& e) {
        throw Error(Errc::malformed, "transcript line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    return t;
  }

 private:
  std::vector<TranscriptEntry> entries_;
};

/// Broadcasts parked on the SSI for devices that fetch later.
class BroadcastStore {
 public:
  void put(const SessionId& sid, Bytes encoded) {
    if (store_.contains(sid)) throw Error(Errc::duplicate_sid, sid.hex());
    store_.emplace(sid, std::move(encoded));
  }

  const Bytes& get(const SessionId& sid) const {
    auto it = store_.find(sid);
    if (it == store_.end()) throw Error(Errc::unknown_sid, sid.hex());
    return it->second;
  }

  bool contains(const SessionId& sid) const { return store_.contains(sid); }

 private:
  std::map<SessionId, Bytes> store_;
};

// --- simulator ----------------------------------------------------------

struct CollectionResult {
  std::vector<ContributionMessage> contributions;  // arrival order
  std::vector<std::size_t> contributors;           // device index per contribution
  std::vector<std::pair<std::size_t, Errc>> rejected;
  std::vector<std::size_t> missed;  // answered after the collection closed
};

struct DeliveryOutcome {
  std::size_t device = 0;
  bool late = false;
  std::uint64_t tick = 0;
  std::optional<SharedKey> key;
  std::optional<Errc> error;
};

/// Honest-but-curious relay. Every message passes through one logical
/// queue, so the transcript is totally ordered; the SSI never alters what
/// it relays.
class Ssi {
 public:
  Ssi(GroupParams params, std::uint64_t shuffle_seed)
      : params_(std::move(params)), rng_(shuffle_seed) {}

  /// Round 1 for the devices online in `schedule`.
  CollectionResult run_collection(std::span<Device> fleet, const ConnectivitySchedule& schedule,
                                  const SessionId& sid, std::string_view session,
                                  std::optional<std::uint64_t> timeout = std::nullopt) {
    return collect_from(fleet, schedule.round1_devices(), schedule, sid, session, timeout);
  }

  /// Round 1 for an explicit participant list. Arrival order is a seeded
  /// shuffle of the participants; stale SIDs are logged and skipped.
  CollectionResult collect_from(std::span<Device> fleet, std::vector<std::size_t> participants,
                                const ConnectivitySchedule& schedule, const SessionId& sid,
                                std::string_view session,
                                std::optional<std::uint64_t> timeout = std::nullopt) {
    for (std::size_t i = participants.size(); i > 1; --i)
      std::swap(participants[i - 1], participants[rng_() % i]);

    CollectionResult result;
    for (auto idx : participants) {
      auto& device = fleet[idx];
      if (timeout && idx < schedule.size() && schedule[idx].response_delay > *timeout) {
        log(session, device.id, kSsi, message_type::miss, Bytes(sid.bytes.begin(), sid.bytes.end()));
        result.missed.push_back(idx);
        continue;
      }
      try {
        auto msg = device.state.contribute(sid, params_);
        log(session, device.id, kQuerier, message_type::contribution, encode(msg, params_));
        result.contributions.push_back(std::move(msg));
        result.contributors.push_back(idx);
      } catch (const Error& e) {
        if (e.code() != Errc::stale_sid) throw;
        log(session, device.id, kSsi, message_type::reject,
            Bytes(sid.bytes.begin(), sid.bytes.end()));
        result.rejected.emplace_back(idx, e.code());
      }
    }
    return result;
  }

  /// Round 2: store the broadcast, hand it to round-2-online devices at
  /// once and let the rest fetch it after their delay.
  std::vector<DeliveryOutcome> deliver_broadcast(const BroadcastMessage& broadcast,
                                                 std::span<Device> fleet,
                                                 const ConnectivitySchedule& schedule,
                                                 ByteView querier_public_key,
                                                 std::string_view session) {
    const auto& sid = broadcast.body.sid;
    auto bytes = encode(broadcast, params_);
    store_.put(sid, bytes);
    log(session, std::string(kQuerier), kSsi, message_type::broadcast, std::move(bytes));
    const std::uint64_t stored_at = tick_;

    std::vector<std::size_t> immediate, late;
    for (std::size_t i = 0; i < fleet.size(); ++i)
      (schedule[i].online_round2 ? immediate : late).push_back(i);
    std::stable_sort(late.begin(), late.end(), [&](std::size_t a, std::size_t b) {
      return schedule[a].fetch_delay < schedule[b].fetch_delay;
    });

    std::vector<DeliveryOutcome> outcomes;
    auto derive = [&](std::size_t idx, bool is_late) {
      const auto& stored = store_.get(sid);
      DeliveryOutcome out{idx, is_late, tick_, std::nullopt, std::nullopt};
      try {
        auto received = decode_broadcast(stored, params_);
        out.key = fleet[idx].state.derive_key(received, querier_public_key, params_);
      } catch (const Error& e) {
        out.error = e.code();
      }
      outcomes.push_back(std::move(out));
    };

    for (auto idx : immediate) {
      log(session, std::string(kSsi), fleet[idx].id, message_type::deliver,
          Bytes(sid.bytes.begin(), sid.bytes.end()));
      derive(idx, false);
    }
    for (auto idx : late) {
      tick_ = std::max(tick_, stored_at + schedule[idx].fetch_delay);
      auto fetched = fetch_broadcast(sid);
      log(session, fleet[idx].id, kSsi, message_type::fetch,
          Bytes(sid.bytes.begin(), sid.bytes.end()));
      if (encode(fetched, params_) != store_.get(sid))
        throw Error(Errc::internal_failure, "stored broadcast changed");
      derive(idx, true);
    }
    return outcomes;
  }

  BroadcastMessage fetch_broadcast(const SessionId& sid) const {
    return decode_broadcast(store_.get(sid), params_);
  }

  /// Every protocol message the SSI saw in `session`, in order. Duplicates
  /// are kept: identical contributions from same-manufacturer devices are
  /// distinct observations.
  std::vector<Bytes> adversary_view(std::string_view session) const {
    std::vector<Bytes> view;
    for (const auto* e : transcript_.session_entries(session))
      if (e->is_protocol()) view.push_back(e->payload);
    return view;
  }

  const SessionTranscript& transcript() const noexcept { return transcript_; }
  const BroadcastStore& store() const noexcept { return store_; }
  const GroupParams& params() const noexcept { return params_; }
  std::uint64_t tick() const noexcept { return tick_; }

 private:
  void log(std::string_view session, std::string from, std::string_view to,
           std::string_view type, Bytes payload) {
    transcript_.append({tick_++, std::string(session), std::move(from), std::string(to),
                        std::string(type), std::move(payload)});
  }

  GroupParams params_;
  std::mt19937_64 rng_;
  SessionTranscript transcript_;
  BroadcastStore store_;
  std::uint64_t tick_ = 0;
};

}  // namespace agke
