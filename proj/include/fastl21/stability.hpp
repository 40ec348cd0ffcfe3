#pragma once

// Numerical certificates for the stability theory: the lower-triangular
// matrix M of the bilinear form sum_k <F_k u, delta_k u>, its split M = A + B,
// the eigenvalue test on S = A + A^T, and the coefficient properties used in
// the finite-time error analysis.

#include "fracops.hpp"
#include "mesh.hpp"
#include "soe.hpp"
#include "theory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastl21 {

/// M is n x n lower triangular; row k-1 holds step k (0-based storage of the
/// 1-based math). The bilinear form equals psi M psi^T / Gamma(1 - alpha).
struct BilinearMatrix {
    int n = 0;
    Eigen::MatrixXd M;
    Eigen::MatrixXd A;
    Eigen::VectorXd Bdiag;
    Eigen::VectorXd beta;
    // Analytic lower bounds for B_kk, the sharp form that still carries
    // rho_{k+1} and the eta-based form.
    Eigen::VectorXd bound_rho;
    Eigen::VectorXd bound_eta;
};

/// Needs hatted coefficients through step n + 1, so the mesh must have at
/// least n + 1 steps.
inline BilinearMatrix assemble_bilinear(const TimeMesh& mesh, const SoeApprox& soe, int n)
{
    if (n < 1) throw std::invalid_argument("assemble_bilinear: n must be >= 1");
    if (mesh.n() < n + 1) throw std::invalid_argument("assemble_bilinear: mesh needs n + 1 steps");
    const double a = mesh.alpha(), s = mesh.sigma(), eps = soe.eps();
    BilinearMatrix bm;
    bm.n = n;
    bm.M = Eigen::MatrixXd::Zero(n, n);

    std::vector<FastCoeffs> fc(n + 2);
    for (int k = 2; k <= n + 1; ++k) fc[k] = fast_coeffs(mesh, soe, k);

    for (int k = 1; k <= n; ++k) {
        for (int j = 1; j < k; ++j) bm.M(k - 1, j - 1) = fc[k].d[j];
        const double chat = k >= 2 ? fc[k].c[k - 1] : 0.0;
        bm.M(k - 1, k - 1) = chat + std::pow(s, 1.0 - a) / ((1.0 - a) * std::pow(mesh.tau(k), a));
    }

    bm.beta.resize(n);
    bm.beta(0) = 0.5 * fc[2].d[1];
    for (int k = 2; k <= n; ++k) bm.beta(k - 1) = 0.5 * (fc[k + 1].d[k] + fc[k].d[k - 1] - fc[k + 1].d[k - 1]);

    bm.A = bm.M.triangularView<Eigen::StrictlyLower>();
    bm.A.diagonal() = bm.beta;
    bm.Bdiag = bm.M.diagonal() - bm.beta;

    bm.bound_rho.resize(n);
    bm.bound_eta.resize(n);
    const auto [f1, f2] = f1_f2(a);
    for (int k = 1; k <= n; ++k) {
        const double loc = std::pow(s, 1.0 - a) / ((1.0 - a) * std::pow(mesh.tau(k), a));
        const double stk = std::pow(s * mesh.tau(k), -a);
        if (k == 1) {
            bm.bound_rho(0) = loc - 0.5 * std::pow(s * mesh.tau(2), -a) - 0.5 * eps;
            bm.bound_eta(0) = f1 / (2.0 * (1.0 - a)) * stk - 0.5 * eps;
        } else {
            const double st1 = s * mesh.tau(k + 1);
            bm.bound_rho(k - 1) = loc - 0.5 * stk - 0.5 * std::pow(st1, -a) + 0.5 * std::pow(st1 + mesh.tau(k), -a)
                                  - 1.5 * eps;
            bm.bound_eta(k - 1) = f2 / (2.0 * (1.0 - a)) * stk - 1.5 * eps;
        }
    }
    return bm;
}

struct PsdCertificate {
    double s_min_eig = 0;
    double s_max_abs = 0;
    double tol_eig = 0;
    // Matrix properties (1)-(3) of S that together imply positive semidefiniteness.
    bool s_column_decreasing = true;   // (1) S[i-1][j] >= S[i][j], j < i
    bool s_row_increasing = true;      // (2) S[i][j-1] <  S[i][j], 1 < j <= i
    bool s_difference_monotone = true; // (3) S[i-1][j-1] - S[i][j-1] <= S[i-1][j] - S[i][j]
    double bdiag_min = 0;
    int bdiag_argmin = 0;
    bool bdiag_bounds_ok = true;
    double bdiag_bound_margin = std::numeric_limits<double>::infinity();  // min_k B_kk - bound_k
    bool pass = false;

    bool monotone_props() const { return s_column_decreasing && s_row_increasing && s_difference_monotone; }

    std::string to_key_value() const
    {
        std::ostringstream os;
        os.precision(10);
        os << "s_min_eig=" << s_min_eig << '\n'
           << "s_max_abs=" << s_max_abs << '\n'
           << "tol_eig=" << tol_eig << '\n'
           << "s_column_decreasing=" << (s_column_decreasing ? "true" : "false") << '\n'
           << "s_row_increasing=" << (s_row_increasing ? "true" : "false") << '\n'
           << "s_difference_monotone=" << (s_difference_monotone ? "true" : "false") << '\n'
           << "bdiag_min=" << bdiag_min << '\n'
           << "bdiag_argmin=" << bdiag_argmin << '\n'
           << "bdiag_bounds_ok=" << (bdiag_bounds_ok ? "true" : "false") << '\n'
           << "bdiag_bound_margin=" << bdiag_bound_margin << '\n'
           << "last_row_uses_extra_step=true\n"
           << "pass=" << (pass ? "true" : "false") << '\n';
        return os.str();
    }
};

/// tol_eig is relative to max|S|; bound_tol is the absolute slack on the B_kk
/// lower bounds. The monotone properties are reported but do not gate `pass`.
inline PsdCertificate certify_psd(const BilinearMatrix& bm, double tol_eig = 1e-10, double bound_tol = 1e-12)
{
    PsdCertificate cert;
    const int n = bm.n;
    const Eigen::MatrixXd S = bm.A + bm.A.transpose();
    cert.s_max_abs = S.cwiseAbs().maxCoeff();
    cert.tol_eig = tol_eig * cert.s_max_abs;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    cert.s_min_eig = es.eigenvalues().minCoeff();

    // Rounding slack for the entrywise comparisons.
    const double slack = 1e-14 * cert.s_max_abs;
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            if (S(i - 1, j) < S(i, j) - slack) cert.s_column_decreasing = false;
    for (int i = 1; i < n; ++i)
        for (int j = 1; j <= i; ++j)
            if (!(S(i, j - 1) < S(i, j) + slack)) cert.s_row_increasing = false;
    for (int i = 2; i < n; ++i)
        for (int j = 1; j < i; ++j)
            if (S(i - 1, j - 1) - S(i, j - 1) > S(i - 1, j) - S(i, j) + slack) cert.s_difference_monotone = false;

    cert.bdiag_min = bm.Bdiag.minCoeff(&cert.bdiag_argmin);
    cert.bdiag_argmin += 1;
    for (int k = 0; k < n; ++k) {
        const double bound = std::max(bm.bound_rho(k), bm.bound_eta(k));
        const double margin = bm.Bdiag(k) - bound;
        cert.bdiag_bound_margin = std::min(cert.bdiag_bound_margin, margin);
        if (margin < -bound_tol) cert.bdiag_bounds_ok = false;
    }
    cert.pass = cert.s_min_eig >= -cert.tol_eig && cert.bdiag_min >= 0 && cert.bdiag_bounds_ok;
    return cert;
}

/// psi M psi^T and sum_k B_kk psi_k^2 accumulated in long double.
inline std::pair<long double, long double> quadratic_forms(const BilinearMatrix& bm, const Eigen::VectorXd& psi)
{
    long double full = 0, diag = 0;
    for (int k = 0; k < bm.n; ++k) {
        long double row = 0;
        for (int j = 0; j <= k; ++j) row += static_cast<long double>(bm.M(k, j)) * psi(j);
        full += row * psi(k);
        diag += static_cast<long double>(bm.Bdiag(k)) * psi(k) * psi(k);
    }
    return {full, diag};
}

// ---------------------------------------------------------------------------
// Properties of M used by the error analysis

struct QCheck {
    bool ok = true;
    double worst_margin = std::numeric_limits<double>::infinity();  // relative to entry scale
    int worst_k = -1, worst_j = -1;
    int violations = 0;

    void observe(int k, int j, double lhs, double rhs, double rel_tol)
    {
        const double scale = std::max({std::abs(lhs), std::abs(rhs), std::numeric_limits<double>::min()});
        const double m = (lhs - rhs) / scale;
        if (m < worst_margin) {
            worst_margin = m;
            worst_k = k;
            worst_j = j;
        }
        if (m < -rel_tol) {
            ok = false;
            ++violations;
        }
    }
};

struct QReport {
    AdmissibilityReport preconditions;  // ratio, dtcut, and eps against (1-alpha)/sigma * c-hat
    QCheck q1_offdiag, q1_diag, q2_offdiag, q2_diag, q3;
    bool pass() const
    {
        return preconditions.pass() && q1_offdiag.ok && q1_diag.ok && q2_offdiag.ok && q2_diag.ok && q3.ok;
    }
};

/// Checks Q1-Q3 for rows 1..n of M. rel_tol absorbs rounding in the computed
/// coefficients.
inline QReport verify_Q_properties(const TimeMesh& mesh, const SoeApprox& soe, int n, double rel_tol = 1e-12)
{
    detail::require_same_alpha(mesh, soe);
    if (n < 2 || mesh.n() < n) throw std::invalid_argument("verify_Q_properties: need 2 <= n <= mesh steps");
    const double a = mesh.alpha(), s = mesh.sigma(), eps = soe.eps();
    const auto& th = soe.nodes();
    const auto& wt = soe.weights();
    const double et = eta();

    QReport rep;
    std::vector<FastCoeffs> fc(n + 1);
    for (int k = 2; k <= n; ++k) fc[k] = fast_coeffs(mesh, soe, k);

    auto& pre = rep.preconditions;
    pre.coverage_steps = n;
    pre.coverage_horizon = mesh.t(n);
    pre.ratio.evaluated = pre.dtcut.evaluated = pre.eps.evaluated = true;
    for (int k = 2; k <= n; ++k) {
        pre.ratio.observe(k, mesh.rho(k) - et);
        pre.dtcut.observe(k, s * mesh.tau(k) - soe.dt_cut());
        pre.eps.observe(k, (1.0 - a) / s * fc[k].c[k - 1] - eps);
    }

    auto M = [&](int k, int j) {
        if (j < k) return fc[k].d[j];
        const double chat = k >= 2 ? fc[k].c[k - 1] : 0.0;
        return chat + std::pow(s, 1.0 - a) / ((1.0 - a) * std::pow(mesh.tau(k), a));
    };

    for (int k = 2; k <= n; ++k) {
        const double tks = mesh.tstar(k);
        for (int j = 1; j < k; ++j) {
            double mass = 0;
            for (std::size_t l = 0; l < th.size(); ++l)
                mass += wt[l] * exp_moment(th[l], mesh.t(j - 1), mesh.t(j), tks, 0);
            rep.q1_offdiag.observe(k, j, M(k, j), et / ((1.0 + et) * mesh.tau(j)) * mass, rel_tol);
        }
        const double loc = std::pow(s, 1.0 - a) / ((1.0 - a) * std::pow(mesh.tau(k), a));
        rep.q1_diag.observe(k, k, M(k, k), loc, rel_tol);

        for (int j = 2; j <= k - 1; ++j) {
            const double tj = mesh.tau(j), tj1 = mesh.tau(j + 1);
            const double dist = tks - mesh.t(j);
            double rhs = 0;
            for (std::size_t l = 0; l < th.size(); ++l) {
                const double er = std::exp(-th[l] * dist);
                if (er == 0.0) continue;
                const auto phi = exp_phi(th[l] * tj);
                rhs += wt[l] * th[l] * tj / (tj + tj1) * er * (tj1 * phi[1] + tj * phi[2]);
            }
            rep.q2_offdiag.observe(k, j, M(k, j) - M(k, j - 1), rhs, rel_tol);
        }
        rep.q2_diag.observe(k, k, M(k, k) - M(k, k - 1),
                            a / (2.0 * (1.0 - a) * std::pow(s * mesh.tau(k), a)) - eps, rel_tol);
        rep.q3.observe(k, k, (1.0 - a) / s * M(k, k), M(k, k - 1), rel_tol);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Truncation probe

struct TruncationProbe {
    std::vector<double> error;  // entry k = |exact_k - F_k u|, entry 0 unused
    double max_error = 0;
    int argmax = 0;
};

/// Applies the fast operator to samples of u and compares with the exact
/// Caputo derivative evaluated at the offset points.
inline TruncationProbe scalar_truncation_probe(const TimeMesh& mesh, const SoeApprox& soe,
                                               const std::function<double(double)>& u,
                                               const std::function<double(double)>& caputo_u)
{
    const int N = mesh.n();
    std::vector<double> samples(N + 1);
    for (int k = 0; k <= N; ++k) samples[k] = u(mesh.t(k));
    const auto F = fast_op_sequence(samples, mesh, soe);
    TruncationProbe out;
    out.error.assign(N + 1, 0.0);
    for (int k = 1; k <= N; ++k) {
        out.error[k] = std::abs(caputo_u(mesh.tstar(k)) - F[k]);
        if (out.error[k] > out.max_error) {
            out.max_error = out.error[k];
            out.argmax = k;
        }
    }
    return out;
}

/// Probe with u(t) = t^alpha, whose Caputo derivative is Gamma(1 + alpha).
inline TruncationProbe scalar_truncation_probe(const TimeMesh& mesh, const SoeApprox& soe, double alpha)
{
    const double g = std::tgamma(1.0 + alpha);
    return scalar_truncation_probe(
        mesh, soe, [alpha](double t) { return std::pow(t, alpha); }, [g](double) { return g; });
}

}  // namespace fastl21
