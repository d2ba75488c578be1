#include "gbmflow/numerics.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>

namespace gbmflow {

void QuadratureSpec::check() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw ParameterError("quadrature tolerances must be positive");
    if (max_depth < 10) throw ParameterError("quadrature max_depth must be >= 10");
    if (initial_panels < 1) throw ParameterError("quadrature needs at least one initial panel");
}

std::vector<double> cumulative_integral(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ParameterError("cumulative_integral: length mismatch");
    std::vector<double> out(xs.size(), 0.0);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (!(xs[i] > xs[i - 1])) throw ParameterError("cumulative_integral: grid must be increasing");
        out[i] = out[i - 1] + 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    return out;
}

RootResult find_root_bracketed(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(lo < hi)) throw ParameterError("find_root_bracketed requires lo < hi");
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return {lo, 0.0, 0};
    if (fhi == 0.0) return {hi, 0.0, 0};
    if (!(flo * fhi < 0.0)) {
        std::ostringstream msg;
        msg << "no sign change on [" << lo << ", " << hi << "]: f(lo)=" << flo << ", f(hi)=" << fhi;
        throw NumericalError(msg.str());
    }
    std::uintmax_t iters = 100;
    const auto narrow = [tol](double a, double b) { return std::abs(b - a) < tol; };
    double a = lo, b = hi;
    try {
        const auto bracket = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, narrow, iters);
        a = bracket.first;
        b = bracket.second;
    } catch (const boost::math::evaluation_error&) {
        iters = 0;
    }
    int it = static_cast<int>(iters);
    // Bisection fallback keeps the bracket property when TOMS 748 stops early.
    double fa = f(a);
    while (!narrow(a, b) && it < 400) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) return {m, 0.0, it + 1};
        if ((fa < 0.0) == (fm < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        ++it;
    }
    const double root = 0.5 * (a + b);
    return {root, f(root), it};
}

MinimizeResult minimize_golden(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(lo < hi)) throw ParameterError("minimize_golden requires lo < hi");
    if (!(tol > 0.0)) throw ParameterError("minimize_golden requires tol > 0");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    int it = 0;
    while (b - a > tol && it < 500) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        ++it;
    }
    MinimizeResult r;
    r.iterations = it;
    if (fc <= fd) {
        r.argmin = c;
        r.min = fc;
    } else {
        r.argmin = d;
        r.min = fd;
    }
    // A minimizer pinned against an end of the bracket is a boundary optimum.
    if (r.argmin - lo <= 2.0 * tol) {
        const double flo = f(lo);
        if (flo <= r.min) {
            r.argmin = lo;
            r.min = flo;
        }
        r.boundary = BoundaryFlag::lower;
    } else if (hi - r.argmin <= 2.0 * tol) {
        const double fhi = f(hi);
        if (fhi <= r.min) {
            r.argmin = hi;
            r.min = fhi;
        }
        r.boundary = BoundaryFlag::upper;
    }
    return r;
}

}  // namespace gbmflow
