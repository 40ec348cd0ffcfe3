#pragma once

// Nonuniform time meshes and the admissibility conditions that the stability
// theory places on them.

#include "soe.hpp"
#include "theory.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastl21 {

/// Points 0 = t_0 < t_1 < ... < t_N together with the L2-1sigma offsets.
/// Indexing follows the math: tau(k) and tstar(k) are defined for k >= 1,
/// rho(k) for k >= 2.
class TimeMesh {
public:
    TimeMesh() = default;

    static TimeMesh from_points(std::vector<double> points, double alpha)
    {
        TimeMesh m;
        if (points.size() < 2) throw std::invalid_argument("TimeMesh: need at least one step");
        if (points.front() != 0.0) throw std::invalid_argument("TimeMesh: t_0 must be 0");
        m.alpha_ = alpha;
        m.sigma_ = sigma_of(alpha);
        m.points_ = std::move(points);
        m.steps_.assign(m.points_.size(), 0.0);
        for (std::size_t k = 1; k < m.points_.size(); ++k) {
            m.steps_[k] = m.points_[k] - m.points_[k - 1];
            if (!(m.steps_[k] > 0)) throw std::invalid_argument("TimeMesh: points must increase strictly");
        }
        return m;
    }

    static TimeMesh from_steps(const std::vector<double>& steps, double alpha)
    {
        std::vector<double> pts(steps.size() + 1, 0.0);
        for (std::size_t k = 0; k < steps.size(); ++k) pts[k + 1] = pts[k] + steps[k];
        return from_points(std::move(pts), alpha);
    }

    int n() const noexcept { return static_cast<int>(points_.size()) - 1; }
    double alpha() const noexcept { return alpha_; }
    double sigma() const noexcept { return sigma_; }

    double t(int k) const { return points_.at(k); }
    double tau(int k) const { return steps_.at(k); }
    double rho(int k) const { return steps_.at(k) / steps_.at(k - 1); }
    double tstar(int k) const { return points_.at(k - 1) + sigma_ * steps_.at(k); }
    double t_end() const { return points_.back(); }

    const std::vector<double>& points() const noexcept { return points_; }
    /// steps()[k] = tau_k for k >= 1; entry 0 is an unused zero.
    const std::vector<double>& steps() const noexcept { return steps_; }

    /// First nsteps steps of this mesh.
    TimeMesh truncated(int nsteps) const
    {
        if (nsteps < 1 || nsteps > n()) throw std::invalid_argument("TimeMesh::truncated: bad step count");
        return from_points(std::vector<double>(points_.begin(), points_.begin() + nsteps + 1), alpha_);
    }

private:
    double alpha_ = 0.5;
    double sigma_ = 0.75;
    std::vector<double> points_;
    std::vector<double> steps_;
};

/// t_j = (j/n)^r * t_end.
inline TimeMesh graded_mesh(int n, double r, double t_end, double alpha)
{
    if (n < 2 || r < 1 || !(t_end > 0)) throw std::invalid_argument("graded_mesh: need n >= 2, r >= 1, t_end > 0");
    std::vector<double> pts(n + 1);
    for (int j = 0; j <= n; ++j) pts[j] = std::pow(static_cast<double>(j) / n, r) * t_end;
    pts[n] = t_end;
    return TimeMesh::from_points(std::move(pts), alpha);
}

/// Graded start on n_graded steps reaching t_graded_end, then geometric growth
/// by `growth` until tau_max, then constant tau_max. Stops once t >= horizon
/// (or after max_steps steps).
inline TimeMesh hybrid_mesh(int n_graded, double r, double t_graded_end, double growth, double tau_max,
                            double horizon, double alpha, int max_steps = 50'000'000)
{
    if (n_graded < 1 || r < 1) throw std::invalid_argument("hybrid_mesh: need n_graded >= 1 and r >= 1");
    if (!(growth > 1) || !(tau_max > 0)) throw std::invalid_argument("hybrid_mesh: need growth > 1, tau_max > 0");
    std::vector<double> pts{0.0};
    double prev_tau = 0;
    for (int j = 1; j <= max_steps; ++j) {
        double tau;
        if (j <= n_graded) {
            if (j == n_graded) {
                tau = t_graded_end - pts.back();
            } else {
                const double a = static_cast<double>(j) / n_graded, b = static_cast<double>(j - 1) / n_graded;
                tau = t_graded_end * (std::pow(a, r) - std::pow(b, r));
            }
        } else {
            tau = growth * prev_tau < tau_max ? growth * prev_tau : tau_max;
        }
        pts.push_back(j == n_graded ? t_graded_end : pts.back() + tau);
        prev_tau = tau;
        if (pts.back() >= horizon) break;
    }
    return TimeMesh::from_points(std::move(pts), alpha);
}

// ---------------------------------------------------------------------------
// Admissibility

struct ConditionCheck {
    std::string name;
    bool evaluated = false;
    bool ok = true;
    double margin = std::numeric_limits<double>::infinity();  // worst (smallest) slack
    int failing_index = -1;                                    // first violating k, -1 if none
    int worst_index = -1;

    void observe(int k, double slack)
    {
        evaluated = true;
        if (slack < margin) {
            margin = slack;
            worst_index = k;
        }
        if (!(slack >= 0) && ok) {
            ok = false;
            failing_index = k;
        }
    }
};

struct AdmissibilityReport {
    ConditionCheck ratio{"ratio"};
    ConditionCheck eps{"eps"};
    ConditionCheck dtcut{"dtcut"};
    ConditionCheck tsoe{"tsoe"};
    ConditionCheck semilinear_tau{"semilinear_tau"};
    int coverage_steps = 0;
    double coverage_horizon = 0;

    std::vector<const ConditionCheck*> all() const { return {&ratio, &eps, &dtcut, &tsoe, &semilinear_tau}; }

    /// True iff every evaluated condition holds.
    bool pass() const
    {
        for (const auto* c : all())
            if (c->evaluated && !c->ok) return false;
        return true;
    }

    std::string to_key_value() const
    {
        std::ostringstream os;
        os.precision(10);
        for (const auto* c : all()) {
            if (!c->evaluated) continue;
            os << c->name << "_ok=" << (c->ok ? "true" : "false") << '\n';
            os << c->name << "_margin=" << c->margin << '\n';
            os << c->name << "_failing_index=" << c->failing_index << '\n';
        }
        os << "coverage_steps=" << coverage_steps << '\n';
        os << "coverage_horizon=" << coverage_horizon << '\n';
        os << "pass=" << (pass() ? "true" : "false") << '\n';
        return os.str();
    }
};

namespace detail {
inline void require_same_alpha(const TimeMesh& mesh, const SoeApprox& soe)
{
    if (std::abs(mesh.alpha() - soe.alpha()) > 1e-14)
        throw std::invalid_argument("mesh and SOE were built for different alpha");
}
}  // namespace detail

/// The four step conditions that guarantee positive semidefiniteness, over
/// the steps this mesh actually contains.
inline AdmissibilityReport check_psd_conditions(const TimeMesh& mesh, const SoeApprox& soe)
{
    detail::require_same_alpha(mesh, soe);
    AdmissibilityReport rep;
    const int N = mesh.n();
    const double a = mesh.alpha(), s = mesh.sigma(), et = eta();
    rep.coverage_steps = N;
    rep.coverage_horizon = mesh.t_end();

    for (int k = 2; k <= N; ++k) rep.ratio.observe(k, mesh.rho(k) - et);
    for (int k = 1; k <= N; ++k) {
        const double bound = 1.0 / (5.0 * (1.0 - a) * std::pow(s * mesh.tau(k), a));
        rep.eps.observe(k, bound - soe.eps());
    }
    for (int k = 2; k <= N; ++k) rep.dtcut.observe(k, s * mesh.tau(k) - soe.dt_cut());
    // The final step has no successor, so k runs to N - 1.
    for (int k = 2; k <= N - 1; ++k) rep.tsoe.observe(k, soe.t_soe() - (s * mesh.tau(k + 1) + mesh.tau(k)));
    rep.ratio.evaluated = rep.eps.evaluated = rep.dtcut.evaluated = rep.tsoe.evaluated = true;
    return rep;
}

/// Step-size bounds for energy stability of the linearized semilinear scheme,
/// given sup |f'| <= lipschitz. Margins are bound - tau_k^alpha.
inline AdmissibilityReport check_semilinear_tau(const TimeMesh& mesh, const SoeApprox& soe, double lipschitz)
{
    detail::require_same_alpha(mesh, soe);
    if (!(lipschitz > 0)) throw std::invalid_argument("check_semilinear_tau: lipschitz must be positive");
    AdmissibilityReport rep;
    const double a = mesh.alpha(), s = mesh.sigma();
    const double lip_term = (3.0 - a) * std::tgamma(2.0 - a) * lipschitz;
    const double sa = std::pow(s, a);
    const double b1 = f1_of(a) / (sa * (lip_term + (1.0 - a) * soe.eps()));
    const double b2 = f2_of(a) / (sa * (lip_term + 3.0 * (1.0 - a) * soe.eps()));
    rep.coverage_steps = mesh.n();
    rep.coverage_horizon = mesh.t_end();
    for (int k = 1; k <= mesh.n(); ++k)
        rep.semilinear_tau.observe(k, (k == 1 ? b1 : b2) - std::pow(mesh.tau(k), a));
    return rep;
}

// ---------------------------------------------------------------------------
// Plain-text IO: one t_k per line.

inline void write_mesh(std::ostream& os, const TimeMesh& mesh)
{
    const auto old = os.precision(17);
    for (double t : mesh.points()) os << t << '\n';
    os.precision(old);
}

inline TimeMesh read_mesh(std::istream& is, double alpha)
{
    std::vector<double> pts;
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        pts.push_back(std::stod(line.substr(first)));
    }
    return TimeMesh::from_points(std::move(pts), alpha);
}

}  // namespace fastl21
