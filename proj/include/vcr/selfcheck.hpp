#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vcr/tensor.hpp"

namespace vcr {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst error (or the checked quantity)
  double tolerance = 0.0;
  std::string detail;
};

struct SelfcheckOptions {
  std::uint64_t seed = 42;
  // Implementation under test for the variance map; replaced by tests to
  // confirm the identity check catches a faulty version.
  std::function<Tensor(const Tensor&, const Tensor&)> variance_map_impl;
};

std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& options = {});

// "PASS  name  measured=... tol=...  detail"
std::string format_check(const CheckResult& r);

}  // namespace vcr
