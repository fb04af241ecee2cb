#pragma once

#include <span>

namespace psi {

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_std(std::span<const double> values);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Welch's unpaired two-sided t-test. Each sample needs at least 2 values.
/// With zero variance in both samples: p = 1 for equal means, 0 otherwise.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace psi
