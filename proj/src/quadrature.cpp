#include "rsstab/quadrature.hpp"

#include "rsstab/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rsstab {

namespace {

struct Panel {
    double a, fa, m, fm, b, fb, whole;
};

class Simpson {
public:
    Simpson(const std::function<double(double)>& f, int max_depth) : f_(f), max_depth_(max_depth) {}

    double eval(double x) {
        const double y = f_(x);
        ++evaluations_;
        if (!std::isfinite(y))
            throw QuadratureNonConvergence("integrand is not finite at x=" + std::to_string(x));
        return y;
    }

    double recurse(const Panel& p, double tol, int depth) {
        const double lm = 0.5 * (p.a + p.m);
        const double rm = 0.5 * (p.m + p.b);
        const double flm = eval(lm);
        const double frm = eval(rm);
        const double left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        const double right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        const double delta = left + right - p.whole;
        if (std::abs(delta) <= 15.0 * tol) {
            error_ += std::abs(delta) / 15.0;
            return left + right + delta / 15.0;
        }
        if (depth >= max_depth_)
            throw QuadratureNonConvergence("adaptive Simpson exceeded maximum depth on [" +
                                           std::to_string(p.a) + ", " + std::to_string(p.b) + "]");
        return recurse({p.a, p.fa, lm, flm, p.m, p.fm, left}, 0.5 * tol, depth + 1) +
               recurse({p.m, p.fm, rm, frm, p.b, p.fb, right}, 0.5 * tol, depth + 1);
    }

    long evaluations() const { return evaluations_; }
    double error() const { return error_; }

private:
    const std::function<double(double)>& f_;
    int max_depth_;
    long evaluations_ = 0;
    double error_ = 0.0;
};

}  // namespace

QuadratureResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                                  const QuadratureOptions& options) {
    QuadratureResult out;
    if (a == b) return out;
    Simpson s(f, options.max_depth);
    // Seed with a coarse composite rule so that narrow features are not
    // missed by the first panel.
    constexpr int kInitialPanels = 8;
    const double h = (b - a) / kInitialPanels;
    double coarse = 0.0;
    std::vector<Panel> panels;
    panels.reserve(kInitialPanels);
    double fa = s.eval(a);
    for (int k = 0; k < kInitialPanels; ++k) {
        const double pa = a + k * h;
        const double pb = (k + 1 == kInitialPanels) ? b : a + (k + 1) * h;
        const double pm = 0.5 * (pa + pb);
        const double fm = s.eval(pm);
        const double fb = s.eval(pb);
        const double whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
        panels.push_back({pa, fa, pm, fm, pb, fb, whole});
        coarse += whole;
        fa = fb;
    }
    const double tol =
        std::max(options.rel_tol * std::abs(coarse), options.abs_tol) / kInitialPanels;
    double total = 0.0;
    for (const auto& p : panels) total += s.recurse(p, tol, 0);
    out.value = total;
    out.error_estimate = s.error();
    out.evaluations = s.evaluations();
    return out;
}

}  // namespace rsstab
