#pragma once

// Sum-of-exponentials (SOE) compression of the kernel t^{-alpha}:
//
//   | t^{-alpha} - sum_l w_l exp(-theta_l t) | <= eps   for t in [dt_cut, t_soe].
//
// The nodes come from quadrature of t^{-alpha} = 1/Gamma(alpha) * int_0^inf
// exp(-t s) s^{alpha-1} ds: a Gauss-Jacobi rule on the singular cell
// [0, a0] and Gauss-Legendre rules on dyadic cells [a0 2^j, a0 2^{j+1}] up
// to a truncation point.  Per-cell orders come from Bernstein-ellipse error
// bounds; the result is then certified by dense sampling.
//
// Nodes and weights are kept in quad precision.  At the cut-off the kernel can
// be ~1e9 while eps is 1e-12, so double-rounded weights cannot meet the
// absolute tolerance.  Double copies are exposed for the time stepping code.

#include "fastl21/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastl21 {

struct CertReport {
    double max_err = 0;
    double argmax_t = 0;
    int samples = 0;
    bool pass = false;
};

class SoeApprox {
public:
    SoeApprox() = default;

    /// Canonicalizes (sorts by node, merges nodes closer than 1e-14 relative)
    /// and validates positivity.
    SoeApprox(double alpha, double eps, double dt_cut, double t_soe, std::vector<wide> nodes,
              std::vector<wide> weights)
        : alpha_(alpha), eps_(eps), dt_cut_(dt_cut), t_soe_(t_soe)
    {
        if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("SoeApprox: alpha must lie in (0,1)");
        if (!(eps > 0)) throw std::invalid_argument("SoeApprox: eps must be positive");
        if (!(dt_cut > 0 && dt_cut < t_soe)) throw std::invalid_argument("SoeApprox: need 0 < dt_cut < t_soe");
        if (nodes.size() != weights.size()) throw std::invalid_argument("SoeApprox: node/weight size mismatch");

        std::vector<std::size_t> order(nodes.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto l, auto r) { return nodes[l] < nodes[r]; });
        for (std::size_t i : order) {
            if (!(nodes[i] > 0) || !(weights[i] > 0))
                throw std::invalid_argument("SoeApprox: nodes and weights must be strictly positive");
            if (!nodes_w_.empty() && nodes[i] - nodes_w_.back() <= wide(1e-14) * nodes[i]) {
                weights_w_.back() += weights[i];
                continue;
            }
            nodes_w_.push_back(nodes[i]);
            weights_w_.push_back(weights[i]);
        }
        nodes_.reserve(nodes_w_.size());
        weights_.reserve(weights_w_.size());
        for (std::size_t i = 0; i < nodes_w_.size(); ++i) {
            nodes_.push_back(static_cast<double>(nodes_w_[i]));
            weights_.push_back(static_cast<double>(weights_w_[i]));
        }
    }

    double alpha() const noexcept { return alpha_; }
    double eps() const noexcept { return eps_; }
    double dt_cut() const noexcept { return dt_cut_; }
    double t_soe() const noexcept { return t_soe_; }
    std::size_t nq() const noexcept { return nodes_.size(); }

    const std::vector<double>& nodes() const noexcept { return nodes_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<wide>& nodes_wide() const noexcept { return nodes_w_; }
    const std::vector<wide>& weights_wide() const noexcept { return weights_w_; }

    /// Report from the certification run that accepted this approximation;
    /// empty (samples == 0) for hand-assembled or deserialized objects.
    const CertReport& certificate() const noexcept { return cert_; }
    void set_certificate(const CertReport& rep) { cert_ = rep; }

private:
    double alpha_ = 0.5, eps_ = 1, dt_cut_ = 0, t_soe_ = 1;
    std::vector<double> nodes_, weights_;
    std::vector<wide> nodes_w_, weights_w_;
    CertReport cert_;
};

namespace detail {

// Sum of exponentials at t in mixed precision.  Terms below 1e-3 are summed
// in double.  Larger terms use long double unless the accumulated long double
// rounding bound exceeds `ld_budget`, in which case the terms of size >= 10 are
// redone in quad precision.
inline wide soe_sum_wide(const SoeApprox& soe, double t, double ld_budget = 0)
{
    const auto& th = soe.nodes();
    const auto& w = soe.weights();
    const auto& thw = soe.nodes_wide();
    const auto& ww = soe.weights_wide();
    constexpr double ld_unit = 5.43e-20;  // 2^-64

    double small = 0;
    double ld_err = 0;
    for (std::size_t i = 0; i < th.size(); ++i) {
        const double x = th[i] * t;
        const double term = w[i] * std::exp(-x);
        if (term < 1e-3)
            small += term;
        else
            ld_err += term * (x + 3) * ld_unit;
    }
    const bool need_quad = ld_err > ld_budget;

    long double mid = 0;
    wide big = 0;
    const wide tw = t;
    for (std::size_t i = 0; i < th.size(); ++i) {
        const double term = w[i] * std::exp(-th[i] * t);
        if (term < 1e-3) continue;
        if (need_quad && term >= 10.0)
            big += ww[i] * expq(-thw[i] * tw);
        else
            mid += static_cast<long double>(ww[i]) * std::exp(-static_cast<long double>(thw[i]) * t);
    }
    return big + static_cast<wide>(mid) + static_cast<wide>(small);
}

inline wide kernel_wide(double alpha, double t)
{
    return expq(-wide(alpha) * logq(wide(t)));
}

inline std::vector<double> log_samples(double lo, double hi, int n)
{
    std::vector<double> ts(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i) ts[i] = std::exp(llo + (lhi - llo) * i / (n - 1));
    ts.front() = lo;
    ts.back() = hi;
    return ts;
}

// log of the Gauss-Legendre error bound for the dyadic cell [A, 2A] at time t,
// optimized over the Bernstein ellipse parameter.
inline double dyadic_log_bound(double alpha, double A, double t, int m)
{
    const double lg = std::lgamma(alpha);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 48; ++i) {
        const double rho = 1.0 + (5.8 - 1.0) * i / 49.0;
        const double arho = 0.5 * (rho + 1.0 / rho);
        const double d = 3.0 - arho;
        if (d <= 0) continue;
        const double logM = std::log(A / 2) + (alpha - 1) * std::log(A * d / 2) - t * A * d / 2 - lg;
        const double b = std::log(64.0 / 15.0) + logM - 2.0 * m * std::log(rho) - std::log(rho * rho - 1);
        best = std::min(best, b);
    }
    return best;
}

// log of the Gauss-Jacobi error bound on the singular cell [0, a0] at time t.
inline double singular_log_bound(double alpha, double a0, double t, int m)
{
    const double lg = std::lgamma(alpha);
    const double c = t * a0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 60; ++i) {
        const double rho = std::exp(0.15 * i);  // up to ~e^9
        const double arho = 0.5 * (rho + 1.0 / rho);
        const double logM = c * (arho - 1) / 2;
        const double b = std::log(std::pow(2.0, alpha) / alpha) + alpha * std::log(a0 / 2) - lg + std::log(4.0)
                         + logM - (2.0 * m - 1) * std::log(rho) - std::log(rho - 1);
        best = std::min(best, b);
    }
    return best;
}

inline double tail_bound(double alpha, double S, double dt)
{
    return std::exp((alpha - 1) * std::log(S) - dt * S - std::log(dt) - std::lgamma(alpha));
}

}  // namespace detail

/// Sum of exponentials at t > 0, evaluated in extended precision and rounded.
inline double eval_soe(const SoeApprox& soe, double t)
{
    return static_cast<double>(detail::soe_sum_wide(soe, t));
}

/// Max |t^{-alpha} - SOE(t)| over `samples` log-spaced points of
/// [dt_cut, t_soe], measured in quad precision.
inline CertReport certify_soe(const SoeApprox& soe, int samples = 10000)
{
    if (samples < 100) throw std::invalid_argument("certify_soe: need at least 100 samples");
    CertReport rep;
    rep.samples = samples;
    for (double t : detail::log_samples(soe.dt_cut(), soe.t_soe(), samples)) {
        const wide sum = detail::soe_sum_wide(soe, t, 1e-3 * soe.eps());
        const double err = static_cast<double>(fabsq(detail::kernel_wide(soe.alpha(), t) - sum));
        if (err > rep.max_err || std::isnan(err)) {
            rep.max_err = err;
            rep.argmax_t = t;
        }
    }
    rep.pass = rep.max_err <= soe.eps();
    return rep;
}

struct SoeBuildOptions {
    int max_doublings = 5;
    int max_order = 512;
    /// Fraction of eps allotted to the a-priori bounds; the rest is slack for
    /// rounding and sampling.
    double budget_fraction = 0.5;
    /// Certification samples = clamp(10 * nq, min_samples, max_samples).
    int min_samples = 10000;
    int max_samples = 20000;
    /// Rules with at most this many nodes get a greedy order-trimming pass.
    int trim_below = 64;
};

/// Build and certify an SOE approximation of t^{-alpha} on [dt_cut, t_soe].
/// Throws std::runtime_error if certification fails after the order-doubling
/// limit.
inline SoeApprox build_soe(double alpha, double eps, double dt_cut, double t_soe,
                           const SoeBuildOptions& opt = {})
{
    if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("build_soe: alpha must lie in (0,1)");
    if (!(eps > 0 && eps < 1)) throw std::invalid_argument("build_soe: eps must lie in (0,1)");
    if (!(dt_cut > 0 && dt_cut < t_soe)) throw std::invalid_argument("build_soe: need 0 < dt_cut < t_soe");

    const double target = opt.budget_fraction * eps;

    // Singular cell [0, a0] with a0 a power of two not exceeding 1/t_soe.
    const double a0 = std::exp2(std::floor(std::log2(1.0 / t_soe)));

    // Truncation point: smallest dyadic boundary whose tail bound fits.
    int ncells = 0;
    while (detail::tail_bound(alpha, a0 * std::exp2(ncells), dt_cut) > target / 4 || a0 * std::exp2(ncells) * dt_cut < 1)
        ++ncells;

    const auto ts = detail::log_samples(dt_cut, t_soe, 160);

    int m_sing = 2;
    while (m_sing < opt.max_order && detail::singular_log_bound(alpha, a0, t_soe, m_sing) > std::log(target / 4))
        ++m_sing;

    std::vector<int> orders(ncells, 2);
    const double log_cell_budget = std::log(target / 2 / std::max(ncells, 1));
    for (int j = 0; j < ncells; ++j) {
        const double A = a0 * std::exp2(j);
        int& m = orders[j];
        for (; m < opt.max_order; ++m) {
            double worst = -std::numeric_limits<double>::infinity();
            for (double t : ts) worst = std::max(worst, detail::dyadic_log_bound(alpha, A, t, m));
            if (worst <= log_cell_budget) break;
        }
    }

    const wide ginv = 1 / tgammaq(wide(alpha));
    auto assemble = [&](int ms, const std::vector<int>& ords) {
        std::vector<wide> nodes, weights;
        const auto gj = gauss_jacobi(std::min(ms, opt.max_order), 0.0, alpha - 1);
        const wide a0w = a0;
        const wide pre = powq(a0w / 2, wide(alpha)) * ginv;
        for (std::size_t i = 0; i < gj.nodes.size(); ++i) {
            nodes.push_back(a0w * (1 + gj.nodes[i]) / 2);
            weights.push_back(pre * gj.weights[i]);
        }
        for (int j = 0; j < ncells; ++j) {
            const wide A = wide(a0) * powq(wide(2), wide(j));
            const auto& gl = gauss_legendre(std::min(ords[j], opt.max_order));
            for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
                const wide s = A * (3 + gl.nodes[i]) / 2;
                nodes.push_back(s);
                weights.push_back(A / 2 * gl.weights[i] * expq((wide(alpha) - 1) * logq(s)) * ginv);
            }
        }
        return SoeApprox(alpha, eps, dt_cut, t_soe, std::move(nodes), std::move(weights));
    };
    auto samples_for = [&](const SoeApprox& soe) {
        return std::clamp(static_cast<int>(10 * soe.nq()), opt.min_samples, opt.max_samples);
    };

    for (int attempt = 0; attempt <= opt.max_doublings; ++attempt) {
        const int scale = 1 << attempt;
        int ms = m_sing * scale;
        std::vector<int> ords(orders);
        for (int& m : ords) m *= scale;
        SoeApprox soe = assemble(ms, ords);
        CertReport rep = certify_soe(soe, samples_for(soe));
        if (!rep.pass) continue;

        // The a-priori bounds are conservative. For small rules, lower the
        // orders one at a time while certification still passes.
        if (static_cast<int>(soe.nq()) <= opt.trim_below) {
            bool progress = true;
            while (progress) {
                progress = false;
                for (int cell = -1; cell < ncells; ++cell) {
                    int& m = cell < 0 ? ms : ords[cell];
                    if (m <= 1) continue;
                    --m;
                    SoeApprox trial = assemble(ms, ords);
                    const CertReport trep = certify_soe(trial, samples_for(trial));
                    if (trep.pass) {
                        soe = std::move(trial);
                        rep = trep;
                        progress = true;
                    } else {
                        ++m;
                    }
                }
            }
        }
        soe.set_certificate(rep);
        return soe;
    }
    throw std::runtime_error("build_soe: certification failed after order doubling (alpha=" + std::to_string(alpha)
                             + ", eps=" + std::to_string(eps) + ", dt_cut=" + std::to_string(dt_cut) + ")");
}

// ---------------------------------------------------------------------------
// Plain-text table: first line "alpha eps dt_cut t_soe", then "theta weight"
// per line.

inline void write_soe(std::ostream& os, const SoeApprox& soe)
{
    os << std::setprecision(17) << soe.alpha() << ' ' << soe.eps() << ' ' << soe.dt_cut() << ' ' << soe.t_soe()
       << '\n';
    for (std::size_t i = 0; i < soe.nq(); ++i)
        os << to_string(soe.nodes_wide()[i]) << ' ' << to_string(soe.weights_wide()[i]) << '\n';
}

inline SoeApprox read_soe(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_soe: missing header line");
    std::istringstream hs(line);
    double alpha, eps, dt, T;
    if (!(hs >> alpha >> eps >> dt >> T)) throw std::runtime_error("read_soe: malformed header line");
    std::vector<wide> nodes, weights;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::string a, b;
        if (!(ls >> a >> b)) throw std::runtime_error("read_soe: malformed row '" + line + "'");
        nodes.push_back(parse_wide(a));
        weights.push_back(parse_wide(b));
    }
    return SoeApprox(alpha, eps, dt, T, std::move(nodes), std::move(weights));
}

}  // namespace fastl21
