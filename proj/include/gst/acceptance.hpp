#pragma once

// The acceptance suite run by `validate` and by the acceptance test binary.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gst {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::size_t ntraj = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

inline constexpr int kCriterionCount = 12;

/// Runs one criterion (1..12). Informational reports go to info when set.
CriterionResult run_criterion(int id, const AcceptanceOptions& opts, std::ostream* info = nullptr);
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream* info = nullptr);

/// "[PASS] 3 witness anchors (0.01 s): detail"
std::string format_result(const CriterionResult& r);

}  // namespace gst
