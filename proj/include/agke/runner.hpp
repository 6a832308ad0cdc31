#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "agke/harness.hpp"
#include "agke/metrics.hpp"

namespace agke {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitViolation = 2 };

struct RunOptions {
  std::optional<std::filesystem::path> out_dir = std::filesystem::path("out");
  std::optional<std::uint64_t> seed;
  std::optional<std::string> group_preset;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  nlohmann::json summary;
  std::string transcript;
  std::string metrics_csv;
  std::string report_text;
};

namespace detail {

inline nlohmann::json counts_json(const OpCounts& c) {
  return {{"exp", c.exp}, {"hash", c.hash}, {"sig", c.sig}};
}

inline nlohmann::json event_json(const EventReport& r) {
  nlohmann::json devices = nlohmann::json::array();
  for (const auto& d : r.devices) {
    devices.push_back({{"id", d.id},
                       {"manufacturer", d.manufacturer},
                       {"contributed", d.contributed},
                       {"late", d.late},
                       {"outcome", d.outcome}});
  }
  nlohmann::json ops = nlohmann::json::object();
  for (const auto& [who, c] : r.counts) ops[who] = counts_json(c);
  nlohmann::json e = {{"index", r.index},
                      {"type", std::string(to_string(r.kind))},
                      {"session", r.session},
                      {"m", r.slots},
                      {"rounds", r.rounds},
                      {"verdict", r.verdict},
                      {"devices", std::move(devices)},
                      {"ops", std::move(ops)},
                      {"violations", r.violations}};
  e["sid"] = r.sid ? nlohmann::json(r.sid->hex()) : nlohmann::json(nullptr);
  e["anchor_sid"] = r.anchor_sid ? nlohmann::json(r.anchor_sid->hex()) : nlohmann::json(nullptr);
  e["shared_key"] = r.shared_key ? nlohmann::json(r.shared_key->hex()) : nlohmann::json(nullptr);
  return e;
}

// Cost comparison from the first base session with a fully
// participating device.
inline CostReport metrics_from(const std::vector<EventReport>& reports) {
  for (const auto& r : reports) {
    if (r.kind != EventKind::open_session) continue;
    for (const auto& d : r.devices) {
      if (d.contributed && d.outcome == "key") {
        return cost_report(r.counts.at(d.id), r.rounds,
                             QuerierCost{r.counts.at(std::string(kQuerier)), r.slots});
      }
    }
  }
  return cost_report(OpCounts{}, 0);
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::config, "cannot write " + path.string());
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::config, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Executes every event of a scenario. Artifacts are written to
/// `options.out_dir` when set: transcript.jsonl, summary.json,
/// metrics.csv and report.txt.
inline RunResult run_scenario(const nlohmann::json& config_json, const RunOptions& options = {}) {
  RunResult result;
  ScenarioConfig cfg;
  try {
    cfg = ScenarioConfig::from_json(config_json);
    if (options.seed) cfg.seed = *options.seed;
    if (options.group_preset) {
      (void)preset_group(*options.group_preset);
      cfg.group = GroupPreset{*options.group_preset};
    }
  } catch (const Error& e) {
    result.exit_code = kExitConfig;
    result.message = e.what();
    return result;
  }

  std::optional<Harness> harness;
  try {
    harness.emplace(Harness::from_config(cfg));
    for (const auto& e : cfg.events) harness->run_event(e);
  } catch (const Error& e) {
    result.exit_code = e.code() == Errc::config ? kExitConfig : kExitViolation;
    result.message = e.what();
    if (!harness) return result;
  }

  bool ok = result.exit_code == kExitOk;
  nlohmann::json events = nlohmann::json::array();
  for (const auto& r : harness->reports()) {
    events.push_back(detail::event_json(r));
    if (!r.ok() && ok) {
      ok = false;
      result.exit_code = kExitViolation;
      result.message = r.violations.front();
    }
  }
  auto table = detail::metrics_from(harness->reports());

  result.summary = {{"schema", 1},
                    {"seed", cfg.seed},
                    {"group", params_to_json(harness->params())},
                    {"querier_public_key", to_hex(harness->querier_keys().public_key)},
                    {"events", std::move(events)},
                    {"ok", ok}};
  result.transcript = harness->ssi().transcript().to_jsonl();
  result.metrics_csv = table.to_csv();
  result.report_text = table.to_text();

  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    detail::write_file(*options.out_dir / "transcript.jsonl", result.transcript);
    detail::write_file(*options.out_dir / "summary.json", result.summary.dump(2) + "\n");
    detail::write_file(*options.out_dir / "metrics.csv", result.metrics_csv);
    detail::write_file(*options.out_dir / "report.txt", result.report_text);
  }
  return result;
}

inline RunResult run_scenario_file(const std::filesystem::path& config_path,
                                   const RunOptions& options = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(config_path));
  } catch (const nlohmann::json::exception& e) {
    return {kExitConfig, std::string("config: ") + e.what(), {}, {}, {}, {}};
  } catch (const Error& e) {
    return {kExitConfig, e.what(), {}, {}, {}, {}};
  }
  return run_scenario(j, options);
}

struct VerifyResult {
  int exit_code = kExitOk;
  std::string message;
};

/// Re-checks a finished run from its artifacts alone: round counts, slot
/// order, signatures, slot counts, replay rejection and the absence of
/// each shared key from everything the SSI saw.
inline VerifyResult verify_artifacts(std::string_view transcript_text,
                                     const nlohmann::json& summary) {
  auto fail = [](const std::string& what) { return VerifyResult{kExitViolation, what}; };
  try {
    if (summary.value("schema", 0) != 1) return fail("summary schema: expected 1");
    auto params = params_from_json(summary.at("group"));
    auto querier_pk = from_hex(summary.at("querier_public_key").get<std::string>());
    auto transcript = SessionTranscript::from_jsonl(transcript_text);

    for (const auto& ev : summary.at("events")) {
      const auto session = ev.at("session").get<std::string>();
      const auto where = " (event " + std::to_string(ev.at("index").get<std::size_t>()) + ")";
      const auto type = ev.at("type").get<std::string>();
      if (!ev.at("violations").empty()) return fail("summary reports violations" + where);

      if (type == "replay_sid") {
        for (const auto& d : ev.at("devices"))
          if (d.at("outcome") != "stale-sid") return fail("replay accepted" + where);
        for (const auto* e : transcript.session_entries(session))
          if (e->is_protocol()) return fail("replay produced protocol traffic" + where);
        continue;
      }

      if (transcript.round_count(session) != 2) return fail("round count" + where);

      const auto sid = SessionId::from_bytes(from_hex(ev.at("sid").get<std::string>()));
      const auto anchor = SessionId::from_bytes(from_hex(ev.at("anchor_sid").get<std::string>()));
      std::optional<BroadcastMessage> broadcast;
      for (const auto* e : transcript.session_entries(session)) {
        if (e->type == message_type::broadcast) {
          if (broadcast) return fail("multiple broadcasts" + where);
          try {
            broadcast = decode_broadcast(e->payload, params);
          } catch (const Error&) {
            return fail("broadcast malformed" + where);
          }
        } else if (e->type == message_type::contribution) {
          std::optional<ContributionMessage> c;
          try {
            c = decode_contribution(e->payload, params);
          } catch (const Error&) {
            return fail("contribution malformed" + where);
          }
          if (c->sid != anchor) return fail("contribution session id" + where);
          if (!verify_contribution(c->manufacturer_public_key, c->sid, c->z, c->sig, params))
            return fail("contribution signature invalid" + where);
        }
      }
      if (!broadcast) return fail("missing broadcast" + where);
      if (broadcast->body.sid != sid || broadcast->body.anchor_sid != anchor)
        return fail("broadcast session id" + where);
      if (!slots_canonical(broadcast->body.slots, params)) return fail("slot order" + where);
      if (!verify_broadcast(querier_pk, broadcast->body, broadcast->sig, params))
        return fail("broadcast signature invalid" + where);
      if (broadcast->body.slots.size() != ev.at("m").get<std::size_t>())
        return fail("slot count" + where);

      const auto key = from_hex(ev.at("shared_key").get<std::string>());
      for (const auto& e : transcript.entries())
        if (e.is_protocol() && contains_run(e.payload, key))
          return fail("shared key exposed" + where);
    }
  } catch (const Error& e) {
    return fail(std::string("artifacts unreadable: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(std::string("artifacts unreadable: ") + e.what());
  }
  return {};
}

inline VerifyResult verify_files(const std::filesystem::path& transcript_path,
                                 const std::filesystem::path& summary_path) {
  try {
    auto transcript = detail::read_file(transcript_path);
    auto summary = nlohmann::json::parse(detail::read_file(summary_path));
    return verify_artifacts(transcript, summary);
  } catch (const nlohmann::json::exception& e) {
    return {kExitViolation, std::string("artifacts unreadable: ") + e.what()};
  } catch (const Error& e) {
    return {kExitViolation, std::string("artifacts unreadable: ") + e.what()};
  }
}

}  // namespace agke
