#pragma once

// Scalar constants from the stability analysis: the step-ratio threshold eta
// and the two functions f1, f2 that lower-bound the diagonal of B.

#include <cmath>
#include <stdexcept>
#include <utility>

namespace fastl21 {

inline double sigma_of(double alpha) { return 1.0 - 0.5 * alpha; }

/// Positive root of 1 - 3 rho^2 (1 + rho) = 0, by safeguarded Newton from 0.5.
inline double eta_root()
{
    auto g = [](double r) { return 1.0 - 3.0 * r * r * (1.0 + r); };
    auto dg = [](double r) { return -6.0 * r - 9.0 * r * r; };
    // g(0) = 1 > 0 and g(1) = -5 < 0, g is strictly decreasing on (0, 1).
    double lo = 0.0, hi = 1.0, x = 0.5;
    for (int it = 0; it < 100; ++it) {
        const double gx = g(x);
        if (gx > 0) lo = x; else hi = x;
        double next = x - gx / dg(x);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-17) {
            x = next;
            break;
        }
        x = next;
    }
    if (std::abs(g(x)) > 1e-14) throw std::runtime_error("eta_root: residual check failed");
    return x;
}

inline double eta()
{
    static const double value = eta_root();
    return value;
}

inline double f1_of(double alpha)
{
    return 2.0 - alpha - (1.0 - alpha) * std::pow(eta(), -alpha);
}

inline double f2_of(double alpha)
{
    const double s = sigma_of(alpha), se = s * eta();
    return 1.0 - (1.0 - alpha) * std::pow(s, alpha) * (std::pow(se, -alpha) - std::pow(se + 1.0, -alpha));
}

/// (f1(alpha), f2(alpha)); both stay above 0.6 on (0, 1).
inline std::pair<double, double> f1_f2(double alpha)
{
    if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("f1_f2: alpha must lie in (0, 1)");
    return {f1_of(alpha), f2_of(alpha)};
}

}  // namespace fastl21
