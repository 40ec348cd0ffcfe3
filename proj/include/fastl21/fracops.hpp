#pragma once

// Discrete Caputo operators on a nonuniform mesh: the standard L2-1sigma
// formula (O(k) work per step) and its fast SOE variant that carries the
// history in N_q exponentially decaying accumulators.

#include "mesh.hpp"
#include "quadrature.hpp"
#include "soe.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fastl21 {

using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Exponential moments

/// phi_p(x) = int_0^1 w^p e^{-x w} dw for p = 0, 1, 2 and x >= 0, plus
/// phi_c(x) = int_0^1 (1 - 2w) e^{-x w} dw = phi_0 - 2 phi_1 in slot 3, which
/// cancels badly for small x when formed by subtraction.
inline std::array<double, 4> exp_phi(double x)
{
    std::array<double, 4> phi{};
    if (x < 2.0) {
        // Alternating series; at x < 2 thirty terms leave < 1e-23.
        double term = 1.0;
        for (int n = 0; n < 32; ++n) {
            phi[0] += term / (n + 1);
            phi[1] += term / (n + 2);
            phi[2] += term / (n + 3);
            phi[3] -= term * n / ((n + 1.0) * (n + 2.0));
            term *= -x / (n + 1);
        }
        return phi;
    }
    const double ex = std::exp(-x);
    phi[0] = -std::expm1(-x) / x;
    phi[1] = (phi[0] - ex) / x;
    phi[2] = (2.0 * phi[1] - ex) / x;
    phi[3] = phi[0] - 2.0 * phi[1];
    return phi;
}

/// int_{t_left}^{t_right} s^p e^{-theta (shift - s)} ds for p in {0, 1}.
inline double exp_moment(double theta, double t_left, double t_right, double shift, int poly_degree)
{
    if (!(t_left < t_right)) throw std::invalid_argument("exp_moment: need t_left < t_right");
    if (shift < t_right) throw std::invalid_argument("exp_moment: shift must be >= t_right");
    if (theta < 0) throw std::invalid_argument("exp_moment: theta must be >= 0");
    const double h = t_right - t_left;
    const double er = std::exp(-theta * (shift - t_right));
    const auto phi = exp_phi(theta * h);
    // s = t_right - h w
    switch (poly_degree) {
    case 0: return h * er * phi[0];
    case 1: return h * er * (t_right * phi[0] - h * phi[1]);
    default: throw std::invalid_argument("exp_moment: poly_degree must be 0 or 1");
    }
}

// ---------------------------------------------------------------------------
// Coefficients

/// Plain L2-1sigma coefficients for step k. Vectors are indexed by j = 1..k-1
/// (entry 0 unused) so that a[j] is a_j^{(k)}.
struct L21Coeffs {
    int k = 0;
    std::vector<double> a, b, c, d;
    double local = 0;
};

/// Hatted (SOE-kernel) coefficients, same layout as L21Coeffs.
struct FastCoeffs {
    int k = 0;
    std::vector<double> a, b, c, d;
    double local = 0;
};

/// Per-node coefficients of the last history interval [t_{k-2}, t_{k-1}] and
/// the decay factor e^{-theta (t_k* - t_{k-1}*)}.
struct LocalFastCoeffs {
    int k = 0;
    Vec a, b, c, decay;
};

/// sigma^{1-alpha} / (Gamma(2-alpha) tau_k^alpha)
inline double local_weight(const TimeMesh& mesh, int k)
{
    const double a = mesh.alpha();
    return std::pow(mesh.sigma(), 1.0 - a) / (std::tgamma(2.0 - a) * std::pow(mesh.tau(k), a));
}

namespace detail {

// With s = t_j - tau_j w, the three Lagrange derivative weights of the
// quadratic through t_{j-1}, t_j, t_{j+1} are linear in w:
//   a: (-tau_{j+1} - 2 tau_j w) / (tau_j (tau_j + tau_{j+1}))
//   b: (tau_j - tau_{j+1} - 2 tau_j w) / (-tau_j tau_{j+1})
//   c: tau_j (1 - 2 w) / (tau_{j+1} (tau_j + tau_{j+1}))
// Given m0 = int K ds, m1 = int w K ds and mc = int (1 - 2w) K ds over the
// interval, the coefficient triple follows directly.
inline std::array<double, 3> lagrange_triple(double tj, double tj1, double m0, double m1, double mc)
{
    const double sum = tj + tj1;
    return {(-tj1 * m0 - 2.0 * tj * m1) / (tj * sum),
            ((tj - tj1) * m0 - 2.0 * tj * m1) / (-tj * tj1),
            tj * mc / (tj1 * sum)};
}

inline void check_step(const TimeMesh& mesh, int k)
{
    if (k < 1 || k > mesh.n()) throw std::out_of_range("step index outside mesh");
}

}  // namespace detail

/// Plain coefficients via adaptive Gauss-Kronrod on each history interval.
inline L21Coeffs l21_coeffs(const TimeMesh& mesh, int k, double tol = 1e-13)
{
    detail::check_step(mesh, k);
    L21Coeffs out;
    out.k = k;
    out.local = local_weight(mesh, k);
    out.a.assign(k, 0.0);
    out.b.assign(k, 0.0);
    out.c.assign(k, 0.0);
    out.d.assign(k, 0.0);
    const double alpha = mesh.alpha();
    const double s = mesh.sigma();
    for (int j = 1; j <= k - 1; ++j) {
        const double tj = mesh.tau(j), tj1 = mesh.tau(j + 1);
        // distance from t_j to t_k*
        const double dist = (mesh.t(k - 1) - mesh.t(j)) + s * mesh.tau(k);
        auto f = [&](double w) {
            const double ker = std::pow(dist + tj * w, -alpha) * tj;
            return std::array<double, 3>{ker, w * ker, (1.0 - 2.0 * w) * ker};
        };
        const auto r = integrate_gk<3>(f, 0.0, 1.0, tol, tol, 50);
        if (!r.converged) throw std::runtime_error("l21_coeffs: quadrature did not converge");
        const auto abc = detail::lagrange_triple(tj, tj1, r.value[0], r.value[1], r.value[2]);
        out.a[j] = abc[0];
        out.b[j] = abc[1];
        out.c[j] = abc[2];
    }
    for (int j = 1; j <= k - 1; ++j) out.d[j] = (j > 1 ? out.c[j - 1] : 0.0) - out.a[j];
    return out;
}

namespace detail {

// Per-node moments over [t_{j-1}, t_j] against e^{-theta (t_k* - s)}.
inline std::array<double, 3> node_triple(double theta, double tj, double tj1, double dist)
{
    const double er = std::exp(-theta * dist);
    if (er == 0.0) return {0.0, 0.0, 0.0};
    const auto phi = exp_phi(theta * tj);
    const double scale = tj * er;
    return lagrange_triple(tj, tj1, scale * phi[0], scale * phi[1], scale * phi[3]);
}

}  // namespace detail

/// Hatted coefficients by summing closed-form per-node moments.
inline FastCoeffs fast_coeffs(const TimeMesh& mesh, const SoeApprox& soe, int k)
{
    detail::check_step(mesh, k);
    FastCoeffs out;
    out.k = k;
    out.local = local_weight(mesh, k);
    out.a.assign(k, 0.0);
    out.b.assign(k, 0.0);
    out.c.assign(k, 0.0);
    out.d.assign(k, 0.0);
    const double s = mesh.sigma();
    const auto& th = soe.nodes();
    const auto& wt = soe.weights();
    for (int j = 1; j <= k - 1; ++j) {
        const double tj = mesh.tau(j), tj1 = mesh.tau(j + 1);
        const double dist = (mesh.t(k - 1) - mesh.t(j)) + s * mesh.tau(k);
        double a = 0, b = 0, c = 0;
        for (std::size_t l = 0; l < th.size(); ++l) {
            const auto abc = detail::node_triple(th[l], tj, tj1, dist);
            a += wt[l] * abc[0];
            b += wt[l] * abc[1];
            c += wt[l] * abc[2];
        }
        out.a[j] = a;
        out.b[j] = b;
        out.c[j] = c;
    }
    for (int j = 1; j <= k - 1; ++j) out.d[j] = (j > 1 ? out.c[j - 1] : 0.0) - out.a[j];
    return out;
}

/// Per-node coefficients of the recurrence step k (k >= 2).
inline LocalFastCoeffs local_fast_coeffs(const TimeMesh& mesh, const SoeApprox& soe, int k)
{
    detail::check_step(mesh, k);
    if (k < 2) throw std::invalid_argument("local_fast_coeffs: k must be >= 2");
    const std::size_t nq = soe.nq();
    LocalFastCoeffs out;
    out.k = k;
    out.a.resize(nq);
    out.b.resize(nq);
    out.c.resize(nq);
    out.decay.resize(nq);
    const double s = mesh.sigma();
    const double tj = mesh.tau(k - 1), tj1 = mesh.tau(k);
    const double dist = s * tj1;
    const double shift = (1.0 - s) * tj + s * tj1;
    const auto& th = soe.nodes();
    for (std::size_t l = 0; l < nq; ++l) {
        const auto abc = detail::node_triple(th[l], tj, tj1, dist);
        out.a[l] = abc[0];
        out.b[l] = abc[1];
        out.c[l] = abc[2];
        out.decay[l] = std::exp(-th[l] * shift);
    }
    return out;
}

// ---------------------------------------------------------------------------
// History

/// H^l(t_k*) for every SOE node, one column per node. Scalar problems use a
/// single row.
class FastHistory {
public:
    FastHistory() = default;
    FastHistory(Eigen::Index dof, std::size_t nq) : H_(Eigen::MatrixXd::Zero(dof, static_cast<Eigen::Index>(nq))) {}

    /// Index k of the offset point t_k* the accumulators refer to.
    int index() const noexcept { return k_; }
    const Eigen::MatrixXd& values() const noexcept { return H_; }
    Eigen::Index dof() const noexcept { return H_.rows(); }

    /// sum_l w^l H^l
    Vec weighted_sum(const Vec& weights) const { return H_ * weights; }

    /// Advance from t_{k-1}* to t_k* with the newly solved u^k.
    void update(const LocalFastCoeffs& lc, const Vec& u_km2, const Vec& u_km1, const Vec& u_k)
    {
        if (lc.k != k_ + 1) throw std::logic_error("FastHistory::update: index mismatch");
        H_ = H_ * lc.decay.asDiagonal();
        H_.noalias() += u_km2 * lc.a.transpose();
        H_.noalias() += u_km1 * lc.b.transpose();
        H_.noalias() += u_k * lc.c.transpose();
        k_ = lc.k;
    }

    /// The first offset point carries no history.
    void reset() { H_.setZero(); k_ = 1; }

private:
    Eigen::MatrixXd H_;
    int k_ = 1;
};

inline Vec soe_weights_vec(const SoeApprox& soe)
{
    return Eigen::Map<const Vec>(soe.weights().data(), static_cast<Eigen::Index>(soe.nq()));
}

inline void history_update(FastHistory& h, const Vec& u_km2, const Vec& u_km1, const Vec& u_k,
                           const TimeMesh& mesh, const SoeApprox& soe, int k)
{
    if (h.index() != k - 1) throw std::logic_error("history_update: history is not at step k-1");
    h.update(local_fast_coeffs(mesh, soe, k), u_km2, u_km1, u_k);
}

/// F_k^{alpha,*} u with the history already advanced to step k.
inline Vec apply_fast_op(const FastHistory& h, const Vec& u_km1, const Vec& u_k, const TimeMesh& mesh,
                         const SoeApprox& soe, int k)
{
    if (h.index() != k) throw std::logic_error("apply_fast_op: history is not at step k");
    const double g = std::tgamma(1.0 - mesh.alpha());
    Vec out = local_weight(mesh, k) * (u_k - u_km1);
    if (k >= 2) out += h.weighted_sum(soe_weights_vec(soe)) / g;
    return out;
}

/// L_k^{alpha,*} u from the samples u^0..u^k and precomputed coefficients.
inline Vec apply_standard_op(const std::vector<Vec>& u, const L21Coeffs& co, double alpha)
{
    const int k = co.k;
    if (static_cast<int>(u.size()) < k + 1) throw std::invalid_argument("apply_standard_op: need u^0..u^k");
    Vec hist = Vec::Zero(u[0].size());
    if (k >= 2) {
        hist += co.c[k - 1] * (u[k] - u[k - 1]);
        for (int j = 1; j <= k - 1; ++j) hist += co.d[j] * (u[j] - u[j - 1]);
    }
    return hist / std::tgamma(1.0 - alpha) + co.local * (u[k] - u[k - 1]);
}

inline Vec apply_standard_op(const std::vector<Vec>& u, const TimeMesh& mesh, int k)
{
    return apply_standard_op(u, l21_coeffs(mesh, k), mesh.alpha());
}

// Scalar conveniences.

inline double apply_standard_op(const std::vector<double>& u, const TimeMesh& mesh, int k)
{
    std::vector<Vec> v;
    v.reserve(k + 1);
    for (int j = 0; j <= k; ++j) v.push_back(Vec::Constant(1, u.at(j)));
    return apply_standard_op(v, mesh, k)(0);
}

/// Runs the fast operator over scalar samples u^0..u^N and returns F_k u for
/// k = 1..N (entry 0 unused).
inline std::vector<double> fast_op_sequence(const std::vector<double>& u, const TimeMesh& mesh, const SoeApprox& soe)
{
    const int N = mesh.n();
    if (static_cast<int>(u.size()) < N + 1) throw std::invalid_argument("fast_op_sequence: need u^0..u^N");
    FastHistory h(1, soe.nq());
    std::vector<double> out(N + 1, 0.0);
    auto s = [&](int j) { return Vec::Constant(1, u[j]); };
    for (int k = 1; k <= N; ++k) {
        if (k >= 2) history_update(h, s(k - 2), s(k - 1), s(k), mesh, soe, k);
        out[k] = apply_fast_op(h, s(k - 1), s(k), mesh, soe, k)(0);
    }
    return out;
}

}  // namespace fastl21
