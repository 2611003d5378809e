#include "rsstab/stats.hpp"

#include "rsstab/error.hpp"

#include <cmath>
#include <vector>

namespace rsstab {

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionMismatch(x.size(), y.size(), "fit_power_law");
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) continue;
        lx.push_back(std::log(x[k]));
        ly.push_back(std::log(y[k]));
    }
    if (lx.size() < 2) throw InvalidArgument("fit_power_law: need at least two positive points");
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        mx += lx[k];
        my += ly[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < lx.size(); ++k) {
        sxx += (lx[k] - mx) * (lx[k] - mx);
        sxy += (lx[k] - mx) * (ly[k] - my);
        syy += (ly[k] - my) * (ly[k] - my);
    }
    if (!(sxx > 0.0)) throw InvalidArgument("fit_power_law: x values are all equal");
    PowerLawFit fit;
    fit.exponent = sxy / sxx;
    fit.prefactor = std::exp(my - fit.exponent * mx);
    fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    fit.points = lx.size();
    return fit;
}

}  // namespace rsstab
