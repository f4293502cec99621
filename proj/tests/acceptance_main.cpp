#include <iostream>

#include "gst/acceptance.hpp"

int main() {
  gst::AcceptanceOptions opts;
  int failed = 0;
  for (int id = 1; id <= gst::kCriterionCount; ++id) {
    const gst::CriterionResult r = gst::run_criterion(id, opts, &std::cout);
    std::cout << gst::format_result(r) << std::endl;
    if (!r.passed) ++failed;
  }
  std::cout << (gst::kCriterionCount - failed) << "/" << gst::kCriterionCount << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
