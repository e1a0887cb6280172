#pragma once

#include <vector>

namespace roadgen {

/// Natural cubic smoothing spline (Reinsch's construction): among all C2
/// functions f with sum_i (y_i - f(x_i))^2 <= budget, returns the one
/// minimizing the integrated squared second derivative, sampled at the
/// sites x. budget = 0 interpolates; a budget at or above the straight
/// line's residual returns the least-squares line.
///
/// x must be strictly increasing and the same length as y.
std::vector<double> smoothing_spline_fit(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         double budget);

}  // namespace roadgen
