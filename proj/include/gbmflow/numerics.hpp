#pragma once

// Shared numerical kernels: adaptive Gauss-Kronrod quadrature, running
// integrals on grids, bracketed root finding and golden-section search.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "gbmflow/model.hpp"

namespace gbmflow {

struct QuadratureSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_depth = 50;
    /// Equal panels the interval is split into before any refinement.
    int initial_panels = 1;

    void check() const;
};

struct QuadraturePanel {
    double a = 0.0;
    double b = 0.0;
    double value = 0.0;
    double error = 0.0;
    int depth = 0;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    /// Panel with the largest error estimate when refinement stopped.
    QuadraturePanel worst_panel;
    long evaluations = 0;
};

namespace detail {

// 15-point Kronrod nodes on [-1, 1] (nonnegative half) with the embedded
// 7-point Gauss weights at the odd indices.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

/// One G7-K15 panel with the QUADPACK error scaling.
template <class F>
QuadraturePanel gk15(F& f, double a, double b, int depth) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    std::array<double, 15> fv;
    fv[7] = f(c);
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kKronrodNodes[j];
        fv[j] = f(c - dx);
        fv[14 - j] = f(c + dx);
    }
    double kron = kKronrodWeights[7] * fv[7];
    double gauss = kGaussWeights[3] * fv[7];
    double abs_k = std::abs(kron);
    for (int j = 0; j < 7; ++j) {
        const double s = fv[j] + fv[14 - j];
        kron += kKronrodWeights[j] * s;
        abs_k += kKronrodWeights[j] * (std::abs(fv[j]) + std::abs(fv[14 - j]));
        if (j % 2 == 1) gauss += kGaussWeights[j / 2] * s;
    }
    const double mean = 0.5 * kron;
    double asc = kKronrodWeights[7] * std::abs(fv[7] - mean);
    for (int j = 0; j < 7; ++j)
        asc += kKronrodWeights[j] * (std::abs(fv[j] - mean) + std::abs(fv[14 - j] - mean));
    kron *= h;
    gauss *= h;
    asc *= std::abs(h);
    abs_k *= std::abs(h);
    double err = std::abs(kron - gauss);
    if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
    const double round = 50.0 * std::numeric_limits<double>::epsilon() * abs_k;
    if (round > std::numeric_limits<double>::min()) err = std::max(err, round);
    return {a, b, kron, err, depth};
}

}  // namespace detail

/**
 * Adaptive G7-K15 quadrature of f over [a, b].
 *
 * The worst panel is bisected until the summed error estimate drops below
 * max(abs_tol, rel_tol * |value|). If the worst panel reaches max_depth the
 * result is returned with converged = false and that panel recorded.
 * Integrable endpoint singularities are fine since nodes never touch a or b.
 */
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
    spec.check();
    if (!(a <= b)) throw ParameterError("integrate_adaptive requires a <= b");
    QuadratureResult out;
    if (a == b) return out;

    const auto by_error = [](const QuadraturePanel& x, const QuadraturePanel& y) { return x.error < y.error; };
    std::vector<QuadraturePanel> heap;
    heap.reserve(static_cast<std::size_t>(spec.initial_panels) * 8);
    const double w = (b - a) / spec.initial_panels;
    for (int i = 0; i < spec.initial_panels; ++i) {
        const double lo = a + w * i;
        const double hi = (i + 1 == spec.initial_panels) ? b : a + w * (i + 1);
        heap.push_back(detail::gk15(f, lo, hi, 0));
    }
    std::make_heap(heap.begin(), heap.end(), by_error);
    out.evaluations = 15L * spec.initial_panels;

    constexpr std::size_t kMaxPanels = 1u << 18;
    double value = 0.0, error = 0.0;
    for (const auto& p : heap) {
        value += p.value;
        error += p.error;
    }
    while (error > std::max(spec.abs_tol, spec.rel_tol * std::abs(value))) {
        const QuadraturePanel& worst = heap.front();
        const double mid = 0.5 * (worst.a + worst.b);
        if (worst.depth >= spec.max_depth || heap.size() >= kMaxPanels || !(mid > worst.a && mid < worst.b)) {
            out.converged = false;
            break;
        }
        std::pop_heap(heap.begin(), heap.end(), by_error);
        const QuadraturePanel parent = heap.back();
        heap.pop_back();
        const auto left = detail::gk15(f, parent.a, mid, parent.depth + 1);
        const auto right = detail::gk15(f, mid, parent.b, parent.depth + 1);
        out.evaluations += 30;
        value += left.value + right.value - parent.value;
        error += left.error + right.error - parent.error;
        heap.push_back(left);
        std::push_heap(heap.begin(), heap.end(), by_error);
        heap.push_back(right);
        std::push_heap(heap.begin(), heap.end(), by_error);
    }
    // Re-sum in left-to-right order so the result does not carry the
    // incremental update's rounding.
    std::sort(heap.begin(), heap.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
    value = 0.0;
    error = 0.0;
    for (const auto& p : heap) {
        value += p.value;
        error += p.error;
    }
    out.value = value;
    out.error = error;
    out.worst_panel = *std::max_element(heap.begin(), heap.end(), by_error);
    return out;
}

/// Single fixed G7-K15 panel; for integrands already known to be smooth on [a, b].
template <class F>
double integrate_panel(F&& f, double a, double b) {
    if (a == b) return 0.0;
    return detail::gk15(f, a, b, 0).value;
}

/// Running trapezoid sums: out[0] = 0, out[i] = integral from xs[0] to xs[i].
std::vector<double> cumulative_integral(std::span<const double> xs, std::span<const double> ys);

struct RootResult {
    double root = 0.0;
    double f_root = 0.0;
    int iterations = 0;
};

/// Root of f in [lo, hi]; requires a sign change, throws NumericalError otherwise.
RootResult find_root_bracketed(const std::function<double(double)>& f, double lo, double hi, double tol);

enum class BoundaryFlag { interior, lower, upper };

struct MinimizeResult {
    double argmin = 0.0;
    double min = 0.0;
    BoundaryFlag boundary = BoundaryFlag::interior;
    int iterations = 0;
};

/// Golden-section search on [lo, hi] until the bracket is narrower than tol.
MinimizeResult minimize_golden(const std::function<double(double)>& f, double lo, double hi, double tol);

}  // namespace gbmflow
