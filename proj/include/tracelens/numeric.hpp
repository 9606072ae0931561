#pragma once

#include <vector>

namespace tracelens {

/// Ordinary least-squares slope of y against x; 0 with fewer than two
/// distinct x values.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Linear-interpolated quantile of unsorted values, q in [0,1]. Empty
/// input returns 0.
double quantile(std::vector<double> values, double q);

double median(std::vector<double> values);

}  // namespace tracelens
