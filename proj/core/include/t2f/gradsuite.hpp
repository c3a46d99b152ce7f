#pragma once

#include <string>
#include <vector>

#include "t2f/gradcheck.hpp"

namespace t2f {

struct SuiteCheck {
  std::string name;
  GradCheckResult worst;  // over all elements of all inputs checked
  double seconds = 0;

  bool ok(double tol) const { return worst.ok(tol); }
};

// Central finite differences against every registered pull closure. Covers
// each elementwise, shape, reduction, linear, and convolution primitive on
// small dense inputs, both loss heads, and finally the composed generator
// and discriminator at 16x16, differentiated with respect to every
// parameter tensor and every network input. Runs in 64-bit regardless of
// the global precision mode; finite differences in 32-bit cannot separate
// a correct gradient from a subtly wrong one.
std::vector<SuiteCheck> gradient_suite();

}  // namespace t2f
