#pragma once

// Reference maximum L2 errors and observed orders for the linear manufactured
// problem u = t^alpha (x^2-1)(y^2-1) on graded meshes with N = 100..1600.
// Used to score convergence studies.

#include <array>
#include <cmath>
#include <optional>

namespace fastl21 {

struct ReferenceRow {
    double alpha;
    int r_times_alpha;  // r = r_times_alpha / alpha
    std::array<double, 5> err_l2;
    std::array<double, 4> order_l2;  // orders at N = 200, 400, 800, 1600
};

inline constexpr std::array<int, 5> reference_n{100, 200, 400, 800, 1600};

inline constexpr std::array<ReferenceRow, 9> reference_rows{{
    {0.3, 1, {1.8477e-3, 9.5337e-4, 4.8429e-4, 2.4407e-4, 1.2252e-4}, {0.9546, 0.9772, 0.9885, 0.9943}},
    {0.3, 2, {5.2619e-5, 1.3355e-5, 3.3696e-6, 8.4709e-7, 2.1248e-7}, {1.9782, 1.9868, 1.9920, 1.9951}},
    {0.3, 3, {1.1576e-4, 2.9563e-5, 7.4851e-6, 1.8855e-6, 4.7355e-7}, {1.9693, 1.9817, 1.9890, 1.9934}},
    {0.5, 1, {2.1627e-3, 1.1124e-3, 5.6416e-4, 2.8409e-4, 1.4255e-4}, {0.9592, 0.9795, 0.9897, 0.9949}},
    {0.5, 2, {3.4309e-5, 8.6705e-6, 2.1836e-6, 5.4867e-7, 1.3764e-7}, {1.9844, 1.9894, 1.9927, 1.9950}},
    {0.5, 3, {7.5018e-5, 1.9013e-5, 4.7967e-6, 1.2065e-6, 3.0290e-7}, {1.9802, 1.9869, 1.9912, 1.9940}},
    {0.7, 1, {1.8710e-3, 9.5944e-4, 4.8584e-4, 2.4447e-4, 1.2262e-4}, {0.9636, 0.9817, 0.9908, 0.9954}},
    {0.7, 2, {2.0342e-5, 5.1591e-6, 1.2961e-6, 3.2443e-7, 8.1133e-8}, {1.9793, 1.9929, 1.9982, 1.9996}},
    {0.7, 3, {3.9451e-5, 9.9647e-6, 2.5108e-6, 6.3158e-7, 1.5866e-7}, {1.9852, 1.9887, 1.9911, 1.9930}},
}};

/// Reference error for (alpha, r, N), if tabulated.
inline std::optional<double> reference_error(double alpha, double r, int N)
{
    for (const auto& row : reference_rows) {
        if (std::abs(row.alpha - alpha) > 1e-12 || std::abs(row.r_times_alpha / row.alpha - r) > 1e-9 * r) continue;
        for (std::size_t i = 0; i < reference_n.size(); ++i)
            if (reference_n[i] == N) return row.err_l2[i];
    }
    return std::nullopt;
}

/// Reference order between N/2 and N, if tabulated.
inline std::optional<double> reference_order(double alpha, double r, int N)
{
    for (const auto& row : reference_rows) {
        if (std::abs(row.alpha - alpha) > 1e-12 || std::abs(row.r_times_alpha / row.alpha - r) > 1e-9 * r) continue;
        for (std::size_t i = 1; i < reference_n.size(); ++i)
            if (reference_n[i] == N) return row.order_l2[i - 1];
    }
    return std::nullopt;
}

}  // namespace fastl21
