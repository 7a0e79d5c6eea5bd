#pragma once

#include <string>
#include <vector>

#include "relperc/csv.hpp"

namespace relperc::oracles {

/// Identity checks must close to this absolute gap.
inline constexpr double kIdentityTolerance = 1e-12;

struct OracleReport {
  std::string check;
  std::string instance;
  double lhs = 0.0;
  double rhs = 0.0;
  /// Identities: |lhs - rhs|. Inequalities: the slack (negative when violated).
  double gap = 0.0;
  bool holds = false;

  const char* verdict() const { return holds ? "holds" : "violated"; }
};

inline OracleReport identity_report(std::string check, std::string instance, double lhs, double rhs) {
  const double gap = std::abs(lhs - rhs);
  return {std::move(check), std::move(instance), lhs, rhs, gap, gap < kIdentityTolerance};
}

/// lhs <= rhs up to the identity tolerance.
inline OracleReport inequality_report(std::string check, std::string instance, double lhs, double rhs) {
  const double slack = rhs - lhs;
  return {std::move(check), std::move(instance), lhs, rhs, slack, slack > -kIdentityTolerance};
}

inline CsvTable report_table(const std::vector<OracleReport>& reports) {
  CsvTable t;
  t.header = {"check", "instance", "lhs", "rhs", "gap", "verdict"};
  for (const auto& r : reports) {
    t.rows.push_back({r.check, sanitize_token(r.instance), format_number(r.lhs), format_number(r.rhs),
                      format_number(r.gap), r.verdict()});
  }
  return t;
}

}  // namespace relperc::oracles
