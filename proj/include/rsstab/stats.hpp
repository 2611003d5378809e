#pragma once

#include <cstddef>
#include <span>

namespace rsstab {

// Least-squares fit of log y = log c + s·log x.
struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

// Points with x <= 0 or y <= 0 are skipped. Throws InvalidArgument when
// fewer than two usable points remain.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

}  // namespace rsstab
