#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "promptforge/errors.hpp"

namespace promptforge::stats {

namespace detail {

// Continued fraction for the incomplete beta function, modified Lentz scheme.
// Converges quickly for x < (a+1)/(a+b+2); callers apply the symmetry switch.
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIterations = 300;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw ValidationError("incomplete beta continued fraction did not converge");
}

} // namespace detail

// Regularized incomplete beta function I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("beta parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_cf(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Upper-tail probability P(F' > f) of the F(df1, df2) distribution:
// I_{df2 / (df2 + df1 f)}(df2/2, df1/2).
inline double f_upper_tail(double f, int df1, int df2) {
    if (df1 < 1 || df2 < 1) throw ValidationError("degrees of freedom must be >= 1");
    if (!(f >= 0.0)) throw ValidationError("F statistic must be >= 0");
    if (std::isinf(f)) return 0.0;
    if (f == 0.0) return 1.0;
    const double x = df2 / (df2 + df1 * f);
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x);
}

} // namespace promptforge::stats
