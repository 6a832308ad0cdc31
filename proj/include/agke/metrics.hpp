#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace agke {

/// Operation counts for one participant over one session.
///
/// `exp` counts modular exponentiations, `hash` counts logical hash/MAC
/// evaluations, `sig` counts signature operations (sign and verify alike).
/// A keyed contribution derivation counts as one hash even though it runs
/// a KDF, an HMAC and a hash-to-exponent internally; the rejection loop
/// inside hash-to-exponent is likewise part of a single evaluation.
struct OpCounts {
  std::uint64_t exp = 0;
  std::uint64_t hash = 0;
  std::uint64_t sig = 0;

  OpCounts& operator+=(const OpCounts& o) noexcept {
    exp += o.exp;
    hash += o.hash;
    sig += o.sig;
    return *this;
  }

  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

inline std::string to_string(const OpCounts& c) {
  std::ostringstream os;
  os << c.exp << "T_exp + " << c.hash << "T_H + " << c.sig << "T_sig";
  return os.str();
}

namespace detail {
inline void count_exp(OpCounts* meter) noexcept {
  if (meter) ++meter->exp;
}
inline void count_hash(OpCounts* meter) noexcept {
  if (meter) ++meter->hash;
}
inline void count_sig(OpCounts* meter) noexcept {
  if (meter) ++meter->sig;
}
}  // namespace detail

// Per-TDS costs published for the four compared protocols. Only P is
// implemented here; the other rows are static reference data.
struct CostRow {
  std::string protocol;
  std::string rounds;
  std::string exp;
  std::string hash;
  std::string sig;
  std::string source;  // "measured" or "paper-reference"
  std::string cost;    // symbolic cost column
  bool mismatch = false;
};

struct CostReport {
  std::vector<CostRow> rows;
  bool mismatch = false;

  std::string to_csv() const {
    std::ostringstream os;
    os << "protocol,rounds,exp,hash,sig,source\n";
    for (const auto& r : rows) {
      os << '"' << r.protocol << '"' << ',' << r.rounds << ',' << r.exp << ',' << r.hash << ','
         << r.sig << ',' << r.source << '\n';
    }
    return os.str();
  }

  std::string to_text() const {
    std::vector<std::string> headers = {"protocol", "rounds", "cost on each TDS", "source", ""};
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows)
      cells.push_back({r.protocol, r.rounds, r.cost, r.source, r.mismatch ? "MISMATCH" : ""});
    std::vector<std::size_t> width(headers.size());
    for (std::size_t i = 0; i < headers.size(); ++i) width[i] = headers[i].size();
    for (const auto& row : cells)
      for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::ostringstream os;
    auto emit = [&](const std::vector<std::string>& row) {
      std::string line;
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::ostringstream cell;
        cell << std::left << std::setw(static_cast<int>(width[i])) << row[i];
        line += cell.str();
        if (i + 1 < row.size()) line += "  ";
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      os << line << '\n';
    };
    emit(headers);
    for (const auto& row : cells) emit(row);
    return os.str();
  }
};

struct QuerierCost {
  OpCounts counts;
  std::size_t slots = 0;
};

inline CostReport cost_report(const OpCounts& measured_tds, std::uint64_t measured_rounds,
                                  std::optional<QuerierCost> querier = std::nullopt) {
  static constexpr OpCounts kReferenceP{2, 3, 2};
  static constexpr std::uint64_t kReferenceRounds = 2;

  CostReport report;
  CostRow measured{"P",
                     std::to_string(measured_rounds),
                     std::to_string(measured_tds.exp),
                     std::to_string(measured_tds.hash),
                     std::to_string(measured_tds.sig),
                     "measured",
                     to_string(measured_tds)};
  measured.mismatch = measured_tds != kReferenceP || measured_rounds != kReferenceRounds;
  report.mismatch = measured.mismatch;
  report.rows.push_back(measured);
  report.rows.push_back({"P", "2", "2", "3", "2", "paper-reference", "2T_exp + 3T_H + 2T_sig"});
  report.rows.push_back({"P_B", "2", "2", "1", "1", "paper-reference", "2T_exp + T_H + T_sig"});
  report.rows.push_back({"P_W", "2", "2", "2", "0", "paper-reference", "2T_exp + 2T_H"});
  report.rows.push_back({"P + C-MACON_P", "4", "2", "3", "m+3", "paper-reference",
                         "2T_exp + 3T_H + (m+3)T_sig + mT_per + mT_psf"});
  if (querier) {
    report.rows.push_back({"Querier (derived, no paper reference, m=" +
                               std::to_string(querier->slots) + ")",
                           std::to_string(measured_rounds), std::to_string(querier->counts.exp),
                           std::to_string(querier->counts.hash),
                           std::to_string(querier->counts.sig), "measured",
                           to_string(querier->counts)});
  }
  return report;
}

}  // namespace agke
