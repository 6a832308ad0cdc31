#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agke {

enum class Errc {
  parameter_search_exhausted,
  invalid_params,
  internal_failure,
  out_of_range,
  length_mismatch,
  empty_input,
  malformed,
  stale_sid,
  bad_signature,
  wrong_sid,
  subgroup_violation,
  empty_contributions,
  bad_broadcast_signature,
  manufacturer_not_represented,
  mask_decode_failure,
  duplicate_manufacturer,
  unknown_leaver,
  empty_group,
  unknown_sid,
  duplicate_sid,
  config,
};

// Stable kebab-case names; these appear in summaries and transcripts.
constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::parameter_search_exhausted: return "parameter-search-exhausted";
    case Errc::invalid_params: return "invalid-params";
    case Errc::internal_failure: return "internal-failure";
    case Errc::out_of_range: return "out-of-range";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::empty_input: return "empty-input";
    case Errc::malformed: return "malformed";
    case Errc::stale_sid: return "stale-sid";
    case Errc::bad_signature: return "bad-signature";
    case Errc::wrong_sid: return "wrong-sid";
    case Errc::subgroup_violation: return "subgroup-violation";
    case Errc::empty_contributions: return "empty-contributions";
    case Errc::bad_broadcast_signature: return "bad-broadcast-signature";
    case Errc::manufacturer_not_represented: return "manufacturer-not-represented";
    case Errc::mask_decode_failure: return "mask-decode-failure";
    case Errc::duplicate_manufacturer: return "duplicate-manufacturer";
    case Errc::unknown_leaver: return "unknown-leaver";
    case Errc::empty_group: return "empty-group";
    case Errc::unknown_sid: return "unknown-sid";
    case Errc::duplicate_sid: return "duplicate-sid";
    case Errc::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail = {})
      : std::runtime_error(detail.empty() ? std::string(to_string(code))
                                          : std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace agke
