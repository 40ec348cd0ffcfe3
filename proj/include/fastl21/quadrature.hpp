#pragma once

// Quadrature primitives: Gauss-Legendre and Gauss-Jacobi rules generated in
// quad precision, and an adaptive Gauss-Kronrod (7/15) integrator.

#include <quadmath.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fastl21 {

/// Extended-precision scalar used wherever double rounding would swamp the
/// target accuracy (SOE construction and certification).
using wide = __float128;

inline std::string to_string(wide x, int digits = 36)
{
    char buf[128];
    quadmath_snprintf(buf, sizeof buf, "%.*Qe", digits - 1, x);
    return buf;
}

inline wide parse_wide(const std::string& s)
{
    char* end = nullptr;
    wide v = strtoflt128(s.c_str(), &end);
    if (end == s.c_str()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

/// Nodes and weights on [-1, 1].
struct QuadratureRule {
    std::vector<wide> nodes;
    std::vector<wide> weights;
};

namespace detail {

// Legendre P_m and P_m' at x.
inline std::pair<wide, wide> legendre_eval(int m, wide x)
{
    wide p0 = 1, p1 = x;
    if (m == 0) return {1, 0};
    for (int k = 2; k <= m; ++k) {
        wide p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    wide dp = m * (x * p1 - p0) / (x * x - 1);
    return {p1, dp};
}

// Jacobi P_m^{(a,b)} and P_{m-1}^{(a,b)} at x.
inline std::pair<wide, wide> jacobi_eval(int m, wide a, wide b, wide x)
{
    wide p0 = 1;
    if (m == 0) return {p0, 0};
    wide p1 = (a + 1) + (a + b + 2) * (x - 1) / 2;
    for (int n = 1; n < m; ++n) {
        wide s = 2 * n + a + b;
        wide c1 = 2 * (n + 1) * (n + a + b + 1) * s;
        wide c2 = (s + 1) * ((s + 2) * s * x + a * a - b * b);
        wide c3 = 2 * (n + a) * (n + b) * (s + 2);
        wide p2 = (c2 * p1 - c3 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    return {p1, p0};
}

inline wide jacobi_derivative(int m, wide a, wide b, wide x, wide pm, wide pm1)
{
    wide s = 2 * m + a + b;
    return (m * ((a - b) - s * x) * pm + 2 * (m + a) * (m + b) * pm1) / (s * (1 - x * x));
}

}  // namespace detail

/// m-point Gauss-Legendre rule, cached per order.
inline const QuadratureRule& gauss_legendre(int m)
{
    static std::mutex mutex;
    static std::map<int, QuadratureRule> cache;
    if (m < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    std::lock_guard lock(mutex);
    if (auto it = cache.find(m); it != cache.end()) return it->second;

    QuadratureRule rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    const wide pi = M_PIq;
    for (int i = 0; i < m; ++i) {
        wide x = cosq(pi * (i + wide(0.75)) / (m + wide(0.5)));
        for (int it = 0; it < 100; ++it) {
            auto [p, dp] = detail::legendre_eval(m, x);
            wide dx = p / dp;
            x -= dx;
            if (fabsq(dx) < wide(1e-33)) break;
        }
        auto [p, dp] = detail::legendre_eval(m, x);
        (void)p;
        rule.nodes[m - 1 - i] = x;
        rule.weights[m - 1 - i] = 2 / ((1 - x * x) * dp * dp);
    }
    return cache.emplace(m, std::move(rule)).first->second;
}

/// m-point Gauss-Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1].
/// Golub-Welsch in double seeds a Newton polish in quad precision.
inline QuadratureRule gauss_jacobi(int m, double a, double b)
{
    if (m < 1) throw std::invalid_argument("gauss_jacobi: order must be >= 1");
    if (a <= -1 || b <= -1) throw std::invalid_argument("gauss_jacobi: exponents must exceed -1");

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
    for (int n = 0; n < m; ++n) {
        double s = 2.0 * n + a + b;
        if (n == 0)
            J(0, 0) = (b - a) / (a + b + 2);
        else
            J(n, n) = (b * b - a * a) / (s * (s + 2));
        if (n + 1 < m) {
            double k = n + 1;
            double sk = 2 * k + a + b;
            double off = std::sqrt(4 * k * (k + a) * (k + b) * (k + a + b) / (sk * sk * (sk + 1) * (sk - 1)));
            J(n, n + 1) = J(n + 1, n) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& seeds = es.eigenvalues();

    const wide aw = a, bw = b;
    // 2^{a+b+1} Γ(m+a+1) Γ(m+b+1) / (Γ(m+a+b+1) Γ(m+1))
    const wide log_c = (aw + bw + 1) * logq(wide(2)) + lgammaq(m + aw + 1) + lgammaq(m + bw + 1)
                       - lgammaq(m + aw + bw + 1) - lgammaq(wide(m + 1));
    const wide cst = expq(log_c);

    QuadratureRule rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    for (int i = 0; i < m; ++i) {
        wide x = seeds[i];
        for (int it = 0; it < 100; ++it) {
            auto [pm, pm1] = detail::jacobi_eval(m, aw, bw, x);
            wide dp = detail::jacobi_derivative(m, aw, bw, x, pm, pm1);
            wide dx = pm / dp;
            x -= dx;
            if (fabsq(dx) < wide(1e-33)) break;
        }
        auto [pm, pm1] = detail::jacobi_eval(m, aw, bw, x);
        wide dp = detail::jacobi_derivative(m, aw, bw, x, pm, pm1);
        rule.nodes[i] = x;
        rule.weights[i] = cst / ((1 - x * x) * dp * dp);
    }
    for (int i = 1; i < m; ++i)
        if (!(rule.nodes[i] > rule.nodes[i - 1]))
            throw std::runtime_error("gauss_jacobi: Newton polish lost node ordering");
    return rule;
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod

struct QuadResult {
    double value = 0;
    double error = 0;
    int subdivisions = 0;
    bool converged = true;
};

template <std::size_t K>
struct QuadResultN {
    std::array<double, K> value{};
    double error = 0;
    int subdivisions = 0;
    bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod abscissae (1, 3, 5, 7).
inline constexpr std::array<double, 4> gauss7_w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t K, class F>
void gk15(F&& f, double a, double b, std::array<double, K>& kr, double& err)
{
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    std::array<double, K> g{};
    kr.fill(0);
    auto add = [&](const std::array<double, K>& v, double wk, double wg) {
        for (std::size_t i = 0; i < K; ++i) {
            kr[i] += wk * v[i];
            g[i] += wg * v[i];
        }
    };
    add(f(c), kronrod_w[7], gauss7_w[3]);
    for (int j = 0; j < 7; ++j) {
        const double wg = (j % 2 == 1) ? gauss7_w[j / 2] : 0.0;
        add(f(c - h * kronrod_x[j]), kronrod_w[j], wg);
        add(f(c + h * kronrod_x[j]), kronrod_w[j], wg);
    }
    err = 0;
    for (std::size_t i = 0; i < K; ++i) {
        kr[i] *= h;
        g[i] *= h;
        err = std::max(err, std::abs(kr[i] - g[i]));
    }
}

}  // namespace detail

/// Globally adaptive GK15 for K integrands sharing one evaluation. Stops when
/// the summed error estimate is below max(abs_tol, rel_tol * |I|) for every
/// component, or after max_bisections interval splits.
template <std::size_t K, class F>
QuadResultN<K> integrate_gk(F&& f, double a, double b, double abs_tol = 1e-13,
                            double rel_tol = 1e-13, int max_bisections = 50)
{
    struct Piece {
        double a, b, err;
        std::array<double, K> val;
    };
    std::vector<Piece> pieces;
    Piece first{a, b, 0, {}};
    detail::gk15<K>(f, a, b, first.val, first.err);
    pieces.push_back(first);

    QuadResultN<K> out;
    for (;;) {
        std::array<double, K> total{};
        double err = 0;
        for (const auto& p : pieces) {
            for (std::size_t i = 0; i < K; ++i) total[i] += p.val[i];
            err += p.err;
        }
        double scale = 0;
        for (double v : total) scale = std::max(scale, std::abs(v));
        out.value = total;
        out.error = err;
        if (err <= std::max(abs_tol, rel_tol * scale)) break;
        if (out.subdivisions >= max_bisections) {
            out.converged = false;
            break;
        }
        auto worst = std::max_element(pieces.begin(), pieces.end(),
                                      [](const Piece& l, const Piece& r) { return l.err < r.err; });
        const double mid = 0.5 * (worst->a + worst->b);
        Piece left{worst->a, mid, 0, {}}, right{mid, worst->b, 0, {}};
        detail::gk15<K>(f, left.a, left.b, left.val, left.err);
        detail::gk15<K>(f, right.a, right.b, right.val, right.err);
        *worst = left;
        pieces.push_back(right);
        ++out.subdivisions;
    }
    return out;
}

/// Scalar convenience wrapper around integrate_gk.
template <class F>
QuadResult integrate_gk(F&& f, double a, double b, double abs_tol = 1e-13, double rel_tol = 1e-13,
                        int max_bisections = 50)
{
    auto r = integrate_gk<1>([&](double x) { return std::array<double, 1>{f(x)}; }, a, b, abs_tol,
                             rel_tol, max_bisections);
    return {r.value[0], r.error, r.subdivisions, r.converged};
}

}  // namespace fastl21
