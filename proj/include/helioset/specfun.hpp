#ifndef HELIOSET_SPECFUN_HPP
#define HELIOSET_SPECFUN_HPP

// Bessel J0, J1, Y0, the Hankel function H0^(1) and the modified Bessel
// function K_nu for real positive arguments.
//
// J0/J1/Y0 use three regimes:
//   |x| <= 8        ascending power series, accumulated in long double
//   8 < |x| < 25    Miller backward recurrence normalized by
//                   J0 + 2 sum J_2k = 1, with the Neumann series for Y0
//   |x| >= 25       Hankel asymptotic expansion (P, Q series)
// The asymptotic series loses accuracy below ~20 (its smallest term is of
// order exp(-2x)), hence the middle band.

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>

#include "helioset/common.hpp"

namespace helioset::specfun {

using Complex = std::complex<double>;

inline constexpr double series_limit = 8.0;
inline constexpr double asymptotic_limit = 25.0;

namespace detail {

inline constexpr long double euler_gamma = 0.577215664901532860606512090082402431L;

// Ascending series for J0, J1 and the regular part of Y0 in one pass.
struct SeriesValues {
    double j0, j1, y0;
};

inline SeriesValues small_series(double x) {
    const long double hx = 0.5L * x;
    const long double q = hx * hx;
    long double t0 = 1.0L;  // (-1)^m q^m / (m!)^2
    long double t1 = 1.0L;  // (-1)^m q^m / (m!(m+1)!)
    long double j0 = 1.0L, j1 = 1.0L, ysum = 0.0L, harmonic = 0.0L;
    for (int m = 1; m < 200; ++m) {
        t0 *= -q / (static_cast<long double>(m) * m);
        t1 *= -q / (static_cast<long double>(m) * (m + 1));
        harmonic += 1.0L / m;
        j0 += t0;
        j1 += t1;
        ysum -= harmonic * t0;
        if (std::fabs(t0) < 1e-22L * std::fabs(j0) && std::fabs(t1) < 1e-22L) break;
    }
    j1 *= hx;
    long double y0 = 0.0L;
    if (x > 0.0) {
        y0 = (2.0L / std::numbers::pi_v<long double>) *
             ((std::log(hx) + euler_gamma) * j0 + ysum);
    }
    return {static_cast<double>(j0), static_cast<double>(j1), static_cast<double>(y0)};
}

inline SeriesValues miller(double x) {
    const int start = 2 * (static_cast<int>(x + 30.0 + 10.0 * std::cbrt(x)) / 2);
    long double next = 0.0L;   // J_{k+1}
    long double cur = 1e-30L;  // J_k
    long double norm = 0.0L;
    long double neumann = 0.0L;  // sum_{k>=1} (-1)^k J_{2k} / k
    long double j1 = 0.0L;
    for (int k = start; k >= 1; --k) {
        const long double prev = (2.0L * k / x) * cur - next;  // J_{k-1}
        next = cur;
        cur = prev;
        const int order = k - 1;
        if (order == 1) j1 = cur;
        if (order > 0 && order % 2 == 0) {
            norm += 2.0L * cur;
            const int half = order / 2;
            neumann += (half % 2 == 0 ? 1.0L : -1.0L) * cur / half;
        }
        if (std::fabs(cur) > 1e300L) {
            cur *= 1e-300L;
            next *= 1e-300L;
            norm *= 1e-300L;
            neumann *= 1e-300L;
            j1 *= 1e-300L;
        }
    }
    norm += cur;  // + J0
    const long double j0 = cur / norm;
    const long double inv_pi = 1.0L / std::numbers::pi_v<long double>;
    const long double y0 = 2.0L * inv_pi * (std::log(0.5L * x) + euler_gamma) * j0 -
                           4.0L * inv_pi * neumann / norm;
    return {static_cast<double>(j0), static_cast<double>(j1 / norm), static_cast<double>(y0)};
}

// Hankel P and Q for order nu with mu = 4 nu^2.
inline std::pair<double, double> hankel_pq(double mu, double x) {
    double p = 1.0, q = 0.0;
    double term = 1.0;
    double last = std::numeric_limits<double>::infinity();
    const double z = 8.0 * x;
    for (int k = 1; k < 200; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (k * z);
        const double mag = std::fabs(term);
        if (mag > last) break;  // divergent tail
        last = mag;
        // a_k terms alternate between Q (odd k) and P (even k) with sign (-1)^floor(k/2).
        const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
        if (k % 2 == 1) {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if (mag < 1e-18) break;
    }
    return {p, q};
}

struct AsymptoticValues {
    double j0, j1, y0, y1;
};

inline AsymptoticValues large_asymptotic(double x) {
    const double amp = std::sqrt(2.0 / (pi * x));
    const auto [p0, q0] = hankel_pq(0.0, x);
    const auto [p1, q1] = hankel_pq(4.0, x);
    const double c0 = x - 0.25 * pi;
    const double c1 = x - 0.75 * pi;
    return {amp * (p0 * std::cos(c0) - q0 * std::sin(c0)),
            amp * (p1 * std::cos(c1) - q1 * std::sin(c1)),
            amp * (p0 * std::sin(c0) + q0 * std::cos(c0)),
            amp * (p1 * std::sin(c1) + q1 * std::cos(c1))};
}

inline SeriesValues evaluate(double ax) {
    if (ax <= series_limit) return small_series(ax);
    if (ax < asymptotic_limit) return miller(ax);
    const auto a = large_asymptotic(ax);
    return {a.j0, a.j1, a.y0};
}

// 7-point Gauss / 15-point Kronrod pair (QUADPACK abscissae and weights).
inline constexpr double gk_x[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double gk_wk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double gk_wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
    double value;
    double error;
};

template <class F>
GkResult gauss_kronrod(const F& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(mid);
    double kronrod = fc * gk_wk[7];
    double gauss = fc * gk_wg[3];
    for (int i = 0; i < 7; ++i) {
        const double dx = half * gk_x[i];
        const double s = f(mid - dx) + f(mid + dx);
        kronrod += gk_wk[i] * s;
        if (i % 2 == 1) gauss += gk_wg[i / 2] * s;
    }
    return {kronrod * half, std::fabs((kronrod - gauss) * half)};
}

template <class F>
double adaptive(const F& f, double a, double b, double abs_tol, int depth) {
    const auto whole = gauss_kronrod(f, a, b);
    if (whole.error <= abs_tol || depth <= 0) return whole.value;
    const double mid = 0.5 * (a + b);
    return adaptive(f, a, mid, 0.5 * abs_tol, depth - 1) +
           adaptive(f, mid, b, 0.5 * abs_tol, depth - 1);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to the given
/// relative tolerance.
template <class F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-14) {
    double estimate = 0.0;
    constexpr int pieces = 16;
    const double step = (b - a) / pieces;
    for (int i = 0; i < pieces; ++i) {
        estimate += std::fabs(detail::gauss_kronrod(f, a + i * step, a + (i + 1) * step).value);
    }
    const double tol = std::max(rel_tol * estimate, std::numeric_limits<double>::min());
    double total = 0.0;
    for (int i = 0; i < pieces; ++i) {
        total += detail::adaptive(f, a + i * step, a + (i + 1) * step, tol / pieces, 30);
    }
    return total;
}

inline double bessel_j0(double x) {
    return detail::evaluate(std::fabs(x)).j0;
}

inline double bessel_j1(double x) {
    const double v = detail::evaluate(std::fabs(x)).j1;
    return x < 0.0 ? -v : v;
}

inline double bessel_y0(double x) {
    if (!(x > 0.0)) throw DomainError("bessel_y0: argument must be positive");
    return detail::evaluate(x).y0;
}

/// H0^(1)(x) = J0(x) + i Y0(x), x > 0.
inline Complex hankel1_0(double x) {
    if (!(x > 0.0)) throw DomainError("hankel1_0: argument must be positive");
    const auto v = detail::evaluate(x);
    return {v.j0, v.y0};
}

inline double gamma_fn(double x) { return std::tgamma(x); }

/// K_nu(x) = exp(-x) * int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt.
inline double bessel_k_nu(double nu, double x) {
    if (!(x > 0.0)) throw DomainError("bessel_k_nu: argument must be positive");
    if (!std::isfinite(nu)) throw InvalidParameter("bessel_k_nu: order must be finite");
    nu = std::fabs(nu);
    // Truncate where the integrand falls below exp(-60) of its peak region.
    double upper = 1.0;
    while (x * (std::cosh(upper) - 1.0) - nu * upper < 60.0 + nu) upper += 0.5;
    const auto integrand = [nu, x](double t) {
        return std::exp(-x * (std::cosh(t) - 1.0) + nu * t) * 0.5 *
               (1.0 + std::exp(-2.0 * nu * t));
    };
    return std::exp(-x) * integrate(integrand, 0.0, upper, 1e-14);
}

}  // namespace helioset::specfun

#endif  // HELIOSET_SPECFUN_HPP
