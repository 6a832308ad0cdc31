#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "agke/protocol.hpp"
#include "agke/ssi_sim.hpp"

namespace agke {

// --- scenario configuration ---------------------------------------------

struct ManufacturerSpec {
  std::string id;
  std::size_t device_count = 1;
};

enum class EventKind { open_session, rekey_join, rekey_leave, replay_sid };

constexpr std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::open_session: return "open_session";
    case EventKind::rekey_join: return "rekey_join";
    case EventKind::rekey_leave: return "rekey_leave";
    case EventKind::replay_sid: return "replay_sid";
  }
  return "";
}

struct EventSpec {
  EventKind kind = EventKind::open_session;
  std::string manufacturer_id;  // join/leave only
};

struct GroupPreset {
  std::string name;
};
struct GroupBits {
  std::size_t q_bit_length = 64;
};
using GroupSpec = std::variant<GroupPreset, GroupParams, GroupBits>;

struct ScenarioConfig {
  std::uint64_t seed = 0;
  GroupSpec group = GroupPreset{"test64"};
  std::vector<ManufacturerSpec> manufacturers;
  Connectivity default_connectivity;
  std::map<std::string, Connectivity> device_connectivity;
  std::vector<EventSpec> events;
  std::optional<std::uint64_t> collection_timeout;

  static ScenarioConfig from_json(const nlohmann::json& j);
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& field, const std::string& what) {
  throw Error(Errc::config, field + ": " + what);
}

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key,
                                     const std::string& path) {
  if (!j.is_object() || !j.contains(key)) config_error(path + key, "missing");
  return j.at(key);
}

inline std::uint64_t as_uint(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    config_error(field, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline bool as_bool(const nlohmann::json& j, const std::string& field) {
  if (!j.is_boolean()) config_error(field, "expected a boolean");
  return j.get<bool>();
}

inline std::string as_string(const nlohmann::json& j, const std::string& field) {
  if (!j.is_string() || j.get<std::string>().empty()) config_error(field, "expected a non-empty string");
  return j.get<std::string>();
}

inline Connectivity parse_connectivity(const nlohmann::json& j, Connectivity base,
                                       const std::string& path) {
  if (!j.is_object()) config_error(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    const auto field = path + "." + key;
    if (key == "online_round1") base.online_round1 = as_bool(value, field);
    else if (key == "online_round2") base.online_round2 = as_bool(value, field);
    else if (key == "fetch_delay") base.fetch_delay = as_uint(value, field);
    else if (key == "response_delay") base.response_delay = as_uint(value, field);
    else config_error(field, "unknown key");
  }
  return base;
}

}  // namespace detail

inline ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) config_error("config", "expected a JSON object");
  ScenarioConfig cfg;
  cfg.seed = as_uint(require(j, "seed", ""), "seed");

  const auto& group = require(j, "group", "");
  if (!group.is_object()) config_error("group", "expected an object");
  if (group.contains("preset")) {
    auto name = as_string(group.at("preset"), "group.preset");
    try {
      (void)preset_group(name);
    } catch (const Error& e) {
      config_error("group.preset", e.detail());
    }
    cfg.group = GroupPreset{name};
  } else if (group.contains("q_bit_length")) {
    auto bits = as_uint(group.at("q_bit_length"), "group.q_bit_length");
    if (bits < 2 || bits > 4096) config_error("group.q_bit_length", "must be in [2, 4096]");
    cfg.group = GroupBits{static_cast<std::size_t>(bits)};
  } else {
    cfg.group = params_from_json(group);
  }

  const auto& mans = require(j, "manufacturers", "");
  if (!mans.is_array() || mans.empty()) config_error("manufacturers", "expected a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < mans.size(); ++i) {
    const auto path = "manufacturers[" + std::to_string(i) + "]";
    ManufacturerSpec m;
    m.id = as_string(require(mans[i], "id", path + "."), path + ".id");
    if (!ids.insert(m.id).second) config_error(path + ".id", "duplicate manufacturer id");
    m.device_count = as_uint(require(mans[i], "device_count", path + "."), path + ".device_count");
    if (m.device_count < 1) config_error(path + ".device_count", "must be >= 1");
    cfg.manufacturers.push_back(std::move(m));
  }

  std::set<std::string> device_ids;
  for (const auto& m : cfg.manufacturers)
    for (std::size_t d = 0; d < m.device_count; ++d) device_ids.insert(m.id + "-" + std::to_string(d));

  if (j.contains("schedule")) {
    const auto& sched = j.at("schedule");
    if (!sched.is_object()) config_error("schedule", "expected an object");
    if (sched.contains("default"))
      cfg.default_connectivity = parse_connectivity(sched.at("default"), {}, "schedule.default");
    if (sched.contains("devices")) {
      const auto& devs = sched.at("devices");
      if (!devs.is_object()) config_error("schedule.devices", "expected an object");
      for (const auto& [id, value] : devs.items()) {
        const auto path = "schedule.devices." + id;
        if (!device_ids.contains(id)) config_error(path, "unknown device id");
        cfg.device_connectivity[id] = parse_connectivity(value, cfg.default_connectivity, path);
      }
    }
    for (const auto& [key, _] : sched.items())
      if (key != "default" && key != "devices") config_error("schedule." + key, "unknown key");
  }

  if (j.contains("collection_timeout_ticks"))
    cfg.collection_timeout = as_uint(j.at("collection_timeout_ticks"), "collection_timeout_ticks");

  const auto& events = require(j, "events", "");
  if (!events.is_array() || events.empty()) config_error("events", "expected a non-empty array");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto path = "events[" + std::to_string(i) + "]";
    const auto type = as_string(require(events[i], "type", path + "."), path + ".type");
    EventSpec e;
    if (type == "open_session") e.kind = EventKind::open_session;
    else if (type == "rekey_join") e.kind = EventKind::rekey_join;
    else if (type == "rekey_leave") e.kind = EventKind::rekey_leave;
    else if (type == "replay_sid") e.kind = EventKind::replay_sid;
    else config_error(path + ".type", "unknown event type '" + type + "'");
    if (e.kind == EventKind::rekey_join || e.kind == EventKind::rekey_leave) {
      e.manufacturer_id =
          as_string(require(events[i], "manufacturer_id", path + "."), path + ".manufacturer_id");
      if (!ids.contains(e.manufacturer_id))
        config_error(path + ".manufacturer_id", "unknown manufacturer '" + e.manufacturer_id + "'");
    }
    cfg.events.push_back(std::move(e));
  }
  return cfg;
}

// Seeds for independent random streams derived from one scenario seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline GroupParams resolve_group(const GroupSpec& spec, std::uint64_t seed) {
  if (auto* p = std::get_if<GroupPreset>(&spec)) return preset_group(p->name);
  if (auto* g = std::get_if<GroupParams>(&spec)) return *g;
  std::mt19937_64 rng(splitmix64(seed ^ 0x67726f7570ULL));
  return generate_group_params(std::get<GroupBits>(spec).q_bit_length, rng);
}

// --- per-event reports ----------------------------------------------------

struct DeviceReport {
  std::string id;
  std::string manufacturer;
  bool contributed = false;
  bool late = false;
  std::string outcome;  // "key" or an error name
  std::optional<SharedKey> key;
};

struct EventReport {
  std::size_t index = 0;
  EventKind kind = EventKind::open_session;
  std::string session;
  std::optional<SessionId> sid;
  std::optional<SessionId> anchor_sid;
  std::size_t slots = 0;
  std::uint64_t rounds = 0;
  std::string verdict;
  std::optional<SharedKey> shared_key;
  std::vector<DeviceReport> devices;
  std::map<std::string, OpCounts> counts;  // participant -> ops this session
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// A fleet, a Querier and an SSI driven through a sequence of sessions.
/// Every session is checked against the protocol's invariants and any
/// failure is recorded as a named violation on the event report.
class Harness {
 public:
  Harness(GroupParams params, const std::vector<ManufacturerSpec>& manufacturers,
          const std::function<Connectivity(const std::string&)>& connectivity, std::uint64_t seed,
          std::optional<std::uint64_t> collection_timeout = std::nullopt)
      : params_(params),
        querier_rng_(splitmix64(seed ^ 0x7175657269ULL)),
        ssi_(params, splitmix64(seed ^ 0x737369ULL)),
        timeout_(collection_timeout) {
    std::mt19937_64 key_rng(splitmix64(seed ^ 0x6b657973ULL));
    querier_keys_ = QuerierKeyPair::generate(key_rng);
    std::vector<Connectivity> sched;
    for (const auto& m : manufacturers) {
      auto kp = ManufacturerKeyPair::generate(m.id, key_rng);
      manufacturer_keys_.emplace(m.id, kp);
      for (std::size_t d = 0; d < m.device_count; ++d) {
        auto id = m.id + "-" + std::to_string(d);
        sched.push_back(connectivity(id));
        fleet_.push_back(Device{std::move(id), TdsState(kp)});
      }
    }
    schedule_ = ConnectivitySchedule(std::move(sched));
  }

  static Harness from_config(const ScenarioConfig& cfg) {
    auto params = resolve_group(cfg.group, cfg.seed);
    auto conn = [&](const std::string& id) {
      auto it = cfg.device_connectivity.find(id);
      return it == cfg.device_connectivity.end() ? cfg.default_connectivity : it->second;
    };
    return Harness(std::move(params), cfg.manufacturers, conn, cfg.seed, cfg.collection_timeout);
  }

  EventReport run_event(const EventSpec& e) {
    switch (e.kind) {
      case EventKind::open_session: return open_session();
      case EventKind::rekey_join: return rekey_join(e.manufacturer_id);
      case EventKind::rekey_leave: return rekey_leave(e.manufacturer_id);
      case EventKind::replay_sid: return replay_sid();
    }
    throw Error(Errc::internal_failure, "unhandled event");
  }

  /// Base session over the scheduled round-1 devices.
  EventReport open_session() {
    auto report = begin(EventKind::open_session);
    reset_counts();
    auto session = QuerierSession::open(querier_keys_, params_, querier_rng_);
    auto collected = ssi_.run_collection(fleet_, schedule_, session.sid(), report.session, timeout_);
    if (collected.contributions.empty()) {
      report.verdict = "no-contributions";
      report.violations.push_back("collection: no device online in round 1");
      return finish(std::move(report));
    }
    session.finalize(collected.contributions, params_);
    last_contributors_ = collected.contributors;
    settle(report, session, collected.contributors);
    check_counts(report, collected.contributors);
    current_ = std::move(session);
    return finish(std::move(report));
  }

  /// Adds `manufacturer_id` to the current group via its first device.
  EventReport rekey_join(const std::string& manufacturer_id) {
    auto report = begin(EventKind::rekey_join);
    if (!current_) throw Error(Errc::config, event_field() + ": rekey_join needs an open session");
    if (represented(manufacturer_id))
      throw Error(Errc::config, event_field() + ".manufacturer_id: '" + manufacturer_id +
                                    "' is already in the group");
    reset_counts();
    auto joiner = first_device(manufacturer_id);
    auto collected = ssi_.collect_from(fleet_, {joiner}, schedule_, current_->anchor_sid(),
                                       report.session);
    if (collected.contributions.size() != 1) {
      report.verdict = "join-failed";
      report.violations.push_back("rekey_join: joining device did not contribute");
      return finish(std::move(report));
    }
    try {
      auto next = current_->rekey_join(collected.contributions.front(), params_, querier_rng_);
      settle(report, next, collected.contributors);
      if (next.slot_count() != current_->slot_count() + 1)
        report.violations.push_back("rekey_join: slot count is not m+1");
      if (next.shared_key() == current_->shared_key())
        report.violations.push_back("rekey_join: new key equals previous key");
      current_ = std::move(next);
      last_contributors_.push_back(joiner);
    } catch (const Error& e) {
      report.verdict = std::string(to_string(e.code()));
      report.violations.push_back("rekey_join: " + std::string(e.what()));
    }
    return finish(std::move(report));
  }

  /// Re-keys the group without `manufacturer_id`.
  EventReport rekey_leave(const std::string& manufacturer_id) {
    auto report = begin(EventKind::rekey_leave);
    if (!current_) throw Error(Errc::config, event_field() + ": rekey_leave needs an open session");
    auto leaving = member_z(manufacturer_id);
    if (!leaving)
      throw Error(Errc::config, event_field() + ".manufacturer_id: '" + manufacturer_id +
                                    "' is not in the group");
    reset_counts();
    std::set<std::string> remaining;
    for (const auto& m : current_->members())
      if (auto id = manufacturer_of(m.public_key); id && *id != manufacturer_id) remaining.insert(*id);

    std::vector<std::size_t> contributors;
    auto collect = [&](const SessionId& sid) {
      std::vector<std::size_t> participants;
      for (const auto& id : remaining) {
        auto online = devices_of(id, true);
        if (online.empty()) online.push_back(first_device(id));
        participants.insert(participants.end(), online.begin(), online.end());
      }
      auto collected = ssi_.collect_from(fleet_, participants, schedule_, sid, report.session, timeout_);
      contributors = collected.contributors;
      return collected.contributions;
    };
    try {
      auto next = current_->rekey_leave(*leaving, collect, params_, querier_rng_);
      last_contributors_ = contributors;
      settle(report, next, contributors);
      if (next.shared_key() == current_->shared_key())
        report.violations.push_back("rekey_leave: new key equals previous key");
      for (const auto& d : report.devices) {
        if (d.manufacturer == manufacturer_id && d.outcome != "manufacturer-not-represented")
          report.violations.push_back("rekey_leave: departed device " + d.id + " derived a key");
      }
      current_ = std::move(next);
    } catch (const Error& e) {
      report.verdict = std::string(to_string(e.code()));
      report.violations.push_back("rekey_leave: " + std::string(e.what()));
    }
    return finish(std::move(report));
  }

  /// Re-sends the current anchor SID to every device that answered it.
  EventReport replay_sid() {
    auto report = begin(EventKind::replay_sid);
    if (!current_) throw Error(Errc::config, event_field() + ": replay_sid needs an open session");
    report.sid = current_->anchor_sid();
    report.anchor_sid = current_->anchor_sid();
    auto collected = ssi_.collect_from(fleet_, last_contributors_, schedule_,
                                       current_->anchor_sid(), report.session);
    std::map<std::size_t, std::string> outcome;
    for (auto idx : collected.contributors) outcome[idx] = "accepted";
    for (auto [idx, code] : collected.rejected) outcome[idx] = std::string(to_string(code));
    for (auto [idx, what] : outcome) {
      report.devices.push_back({fleet_[idx].id, fleet_[idx].manufacturer_id(), false, false, what, {}});
      if (what != "stale-sid")
        report.violations.push_back("replay: " + fleet_[idx].id + " accepted a replayed SID");
    }
    report.verdict = report.violations.empty() ? "rejected" : "accepted-replay";
    return finish(std::move(report));
  }

  const GroupParams& params() const noexcept { return params_; }
  std::vector<Device>& fleet() noexcept { return fleet_; }
  const std::vector<Device>& fleet() const noexcept { return fleet_; }
  ConnectivitySchedule& schedule() noexcept { return schedule_; }
  const Ssi& ssi() const noexcept { return ssi_; }
  const QuerierKeyPair& querier_keys() const noexcept { return querier_keys_; }
  const std::optional<QuerierSession>& current() const noexcept { return current_; }
  const std::vector<EventReport>& reports() const noexcept { return reports_; }
  const ManufacturerKeyPair& manufacturer_keys(const std::string& id) const {
    return manufacturer_keys_.at(id);
  }

 private:
  EventReport begin(EventKind kind) {
    EventReport r;
    r.index = reports_.size();
    r.kind = kind;
    r.session = "e" + std::to_string(r.index);
    return r;
  }

  EventReport finish(EventReport r) {
    reports_.push_back(r);
    return r;
  }

  std::string event_field() const { return "events[" + std::to_string(reports_.size()) + "]"; }

  void reset_counts() {
    for (auto& d : fleet_) d.state.reset_counts();
  }

  std::size_t first_device(const std::string& manufacturer_id) const {
    for (std::size_t i = 0; i < fleet_.size(); ++i)
      if (fleet_[i].manufacturer_id() == manufacturer_id) return i;
    throw Error(Errc::config, "unknown manufacturer '" + manufacturer_id + "'");
  }

  std::vector<std::size_t> devices_of(const std::string& manufacturer_id, bool round1_only) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fleet_.size(); ++i)
      if (fleet_[i].manufacturer_id() == manufacturer_id &&
          (!round1_only || schedule_[i].online_round1))
        out.push_back(i);
    return out;
  }

  std::optional<std::string> manufacturer_of(const Bytes& public_key) const {
    for (const auto& [id, kp] : manufacturer_keys_)
      if (kp.public_key == public_key) return id;
    return std::nullopt;
  }

  std::optional<GroupElement> member_z(const std::string& manufacturer_id) const {
    const auto& pk = manufacturer_keys_.at(manufacturer_id).public_key;
    for (const auto& m : current_->members())
      if (m.public_key == pk) return m.z;
    return std::nullopt;
  }

  bool represented(const std::string& manufacturer_id) const { return member_z(manufacturer_id).has_value(); }

  // Delivers a finalized session's broadcast and checks every invariant
  // that must hold for it.
  void settle(EventReport& report, const QuerierSession& session,
              const std::vector<std::size_t>& contributors) {
    const auto& broadcast = *session.broadcast();
    const auto& key = *session.shared_key();
    report.sid = session.sid();
    report.anchor_sid = session.anchor_sid();
    report.slots = session.slot_count();
    report.shared_key = key;

    auto outcomes = ssi_.deliver_broadcast(broadcast, fleet_, schedule_,
                                           querier_keys_.public_key, report.session);

    std::set<std::string> members;
    for (const auto& m : session.members())
      if (auto id = manufacturer_of(m.public_key)) members.insert(*id);
    std::set<std::size_t> contributed(contributors.begin(), contributors.end());

    bool agree = true;
    for (const auto& o : outcomes) {
      const auto& dev = fleet_[o.device];
      DeviceReport d{dev.id, dev.manufacturer_id(), contributed.contains(o.device), o.late, "", o.key};
      d.outcome = o.key ? "key" : std::string(to_string(*o.error));
      const bool expect_key = members.contains(dev.manufacturer_id());
      if (expect_key && !(o.key && *o.key == key)) {
        agree = false;
        report.violations.push_back("key agreement: " + dev.id + " -> " + d.outcome);
      }
      if (!expect_key && d.outcome != "manufacturer-not-represented") {
        agree = false;
        report.violations.push_back("key agreement: unrepresented " + dev.id + " -> " + d.outcome);
      }
      report.devices.push_back(std::move(d));
      report.counts[dev.id] = dev.state.counts();
    }
    report.counts[std::string(kQuerier)] = session.counts();
    report.verdict = agree ? "agree" : "disagree";

    std::set<Bytes> contributing_keys;
    for (auto idx : contributors) contributing_keys.insert(fleet_[idx].state.keypair().public_key);
    if (report.kind != EventKind::rekey_join && contributing_keys.size() != report.slots)
      report.violations.push_back("dedup cardinality: slots != distinct contributing manufacturers");

    if (!slots_canonical(broadcast.body.slots, params_))
      report.violations.push_back("slot order: broadcast slots not strictly sorted");

    check_chain(report, session);

    report.rounds = ssi_.transcript().round_count(report.session);
    if (report.rounds != 2)
      report.violations.push_back("round count: " + std::to_string(report.rounds) + " != 2");

    const auto r_bytes = encode_fixed(session.secret_r(), params_).bytes;
    for (const auto& msg : ssi_.adversary_view(report.session)) {
      if (contains_run(msg, key.bytes))
        report.violations.push_back("adversary view: shared key visible to the SSI");
      if (contains_run(msg, r_bytes))
        report.violations.push_back("adversary view: r visible to the SSI");
    }
  }

  // Every slot, unmasked with its own manufacturer's r_i, yields the
  // Querier's r.
  void check_chain(EventReport& report, const QuerierSession& session) const {
    const auto& body = session.broadcast()->body;
    const auto r_bytes = encode_fixed(session.secret_r(), params_);
    for (const auto& slot : body.slots) {
      std::optional<std::string> owner;
      for (const auto& [id, kp] : manufacturer_keys_) {
        auto r_i = derive_contribution_exponent(kp, body.anchor_sid, params_);
        if (mod_exp(GroupElement::generator(params_), r_i, params_) == slot.z) {
          auto x = mod_exp(body.z0, r_i, params_);
          auto v = xor_mask(slot.y, derive_mask(x, body.sid, params_));
          if (v != r_bytes) report.violations.push_back("contributiveness: slot of " + id + " unmasks to a different r");
          owner = id;
          break;
        }
      }
      if (!owner) report.violations.push_back("contributiveness: slot with no known manufacturer");
    }
  }

  void check_counts(EventReport& report, const std::vector<std::size_t>& contributors) {
    std::set<std::size_t> contributed(contributors.begin(), contributors.end());
    for (const auto& d : report.devices) {
      if (d.outcome != "key") continue;
      const auto& got = report.counts.at(d.id);
      const bool full = std::any_of(contributed.begin(), contributed.end(),
                                    [&](std::size_t i) { return fleet_[i].id == d.id; });
      const OpCounts want = full ? OpCounts{2, 3, 2} : OpCounts{2, 3, 1};
      if (got != want)
        report.violations.push_back("op counts: " + d.id + " measured " + to_string(got) +
                                    ", expected " + to_string(want));
    }
    const auto m = static_cast<std::uint64_t>(report.slots);
    if (report.counts.at(std::string(kQuerier)) != OpCounts{m + 1, m + 1, m + 1})
      report.violations.push_back("op counts: querier measured " +
                                  to_string(report.counts.at(std::string(kQuerier))));
  }

  GroupParams params_;
  std::mt19937_64 querier_rng_;
  Ssi ssi_;
  std::optional<std::uint64_t> timeout_;
  QuerierKeyPair querier_keys_;
  std::map<std::string, ManufacturerKeyPair> manufacturer_keys_;
  std::vector<Device> fleet_;
  ConnectivitySchedule schedule_;
  std::optional<QuerierSession> current_;
  std::vector<std::size_t> last_contributors_;
  std::vector<EventReport> reports_;
};

/// Runs one base session and returns each participant's operation counts.
inline std::map<std::string, OpCounts> instrumented_session(Harness& harness) {
  return harness.open_session().counts;
}

}  // namespace agke
