#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's numerical kernels: expansions are brute force over subsets,
// maxima come from dense sampling, integrals from composite Gauss-Legendre,
// and crossed-product sums index raw arrays directly.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

/// Coefficients of prod_j (1 + c_j x^2) in powers of x^2, by summing the
/// products over every subset of factors (2^K terms).
inline std::vector<long double> expand_by_subsets(const std::vector<long double>& c)
{
    const std::size_t K = c.size();
    std::vector<long double> a(K + 1, 0.0L);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << K); ++mask) {
        long double p = 1.0L;
        std::size_t bits = 0;
        for (std::size_t j = 0; j < K; ++j) {
            if (mask & (std::uint64_t{1} << j)) {
                p *= c[j];
                ++bits;
            }
        }
        a[bits] += p;
    }
    return a;
}

/// max of f over [a, b] from n + 1 equispaced samples refined by a local
/// golden-section search around the best sample.
inline double dense_max(const std::function<double(double)>& f, double a, double b, int n = 200000)
{
    double best_x = a;
    double best = f(a);
    for (int i = 1; i <= n; ++i) {
        const double x = a + (b - a) * i / n;
        const double v = f(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    double lo = std::max(a, best_x - (b - a) / n);
    double hi = std::min(b, best_x + (b - a) / n);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
        const double x1 = hi - g * (hi - lo);
        const double x2 = lo + g * (hi - lo);
        if (f(x1) < f(x2)) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    return std::max(best, f(0.5 * (lo + hi)));
}

/// Composite 5-point Gauss-Legendre rule on `panels` equal panels.
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels = 2000)
{
    static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                0.9061798459386640};
    static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                                0.2369268850561891};
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        for (int k = 0; k < 5; ++k) {
            s += w[k] * f(mid + 0.5 * h * x[k]);
        }
    }
    return 0.5 * h * s;
}

/// Crossed element as raw arrays: slices[k][i] with k the window slot
/// (lattice index k - R) and i the space index on a 1-d lattice.
using Raw = std::vector<std::vector<double>>;

/// alpha_g(a)(m_i) = a(m_{i - g * step}), zero outside.
inline double shifted(const std::vector<double>& a, std::int64_t i, std::int64_t g, std::int64_t step)
{
    const std::int64_t src = i - g * step;
    if (src < 0 || src >= static_cast<std::int64_t>(a.size())) {
        return 0.0;
    }
    return a[static_cast<std::size_t>(src)];
}

/// (F1 * F2)(g) = sum_h w F1(h) alpha_h(F2(g - h)) by direct triple loop.
inline Raw convolve(const Raw& F1, const Raw& F2, std::int64_t R, std::int64_t step, double w = 1.0)
{
    const auto m = static_cast<std::int64_t>(F1[0].size());
    Raw out(F1.size(), std::vector<double>(F1[0].size(), 0.0));
    for (std::int64_t g = -R; g <= R; ++g) {
        for (std::int64_t h = -R; h <= R; ++h) {
            const std::int64_t k = g - h;
            if (k < -R || k > R) {
                continue;
            }
            for (std::int64_t i = 0; i < m; ++i) {
                out[static_cast<std::size_t>(g + R)][static_cast<std::size_t>(i)] +=
                    w * F1[static_cast<std::size_t>(h + R)][static_cast<std::size_t>(i)] *
                    shifted(F2[static_cast<std::size_t>(k + R)], i, h, step);
            }
        }
    }
    return out;
}

/// Fe = sum_g w F(g) (g e).
inline std::vector<double> act(const Raw& F, const std::vector<double>& e, std::int64_t R, std::int64_t step,
                               double w = 1.0)
{
    std::vector<double> out(e.size(), 0.0);
    for (std::int64_t g = -R; g <= R; ++g) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            out[i] += w * F[static_cast<std::size_t>(g + R)][i] * shifted(e, static_cast<std::int64_t>(i), g, step);
        }
    }
    return out;
}

} // namespace oracle
