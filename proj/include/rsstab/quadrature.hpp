#pragma once

#include <functional>

namespace rsstab {

struct QuadratureOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-14;
    int max_depth = 48;
};

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;  // sum of |Richardson corrections| over accepted panels
    long evaluations = 0;
};

// Adaptive composite Simpson on [a, b]. A panel is accepted when its
// two-half refinement changes the estimate by at most 15·tol, where tol is
// split between halves. Throws QuadratureNonConvergence when a panel would
// need more than `max_depth` bisections or the integrand is not finite.
QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureOptions& options = {});

}  // namespace rsstab
