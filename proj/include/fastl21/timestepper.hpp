#pragma once

// Time marching for
//   D^alpha u = kappa Lap u - f(u) + g(t, x, y)
// with the L2-1sigma operator on the left (fast or standard) and the
// Newton-linearized right-hand side
//   kappa (sigma Lap u^k + alpha/2 Lap u^{k-1}) - f(u^{k-1}) - sigma f'(u^{k-1}) (u^k - u^{k-1}) + g(t_k*).
// Linear problems are the case f = 0.

#include "fracops.hpp"
#include "mesh.hpp"
#include "soe.hpp"
#include "spatial.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastl21 {

enum class OperatorKind { fast, standard };

inline std::string to_string(OperatorKind k) { return k == OperatorKind::fast ? "fast" : "standard"; }

inline OperatorKind parse_operator(const std::string& s)
{
    if (s == "fast") return OperatorKind::fast;
    if (s == "standard") return OperatorKind::standard;
    throw std::invalid_argument("unknown operator '" + s + "' (expected fast or standard)");
}

using SpaceTimeFn = std::function<double(double t, double x, double y)>;
using SpaceFn = std::function<double(double x, double y)>;
using ScalarFn = std::function<double(double)>;

/// f, f' and a primitive F of the reaction term, plus sup |f'|.
struct Nonlinearity {
    ScalarFn f;
    ScalarFn df;
    ScalarFn F;
    double lipschitz = 0;
};

/// Allen-Cahn reaction u^3 - u continued linearly outside [-M, M].
struct TruncatedPotential {
    double m_tr = 1;

    double f(double u) const
    {
        const double M = m_tr;
        if (u > M) return (3 * M * M - 1) * u - 2 * M * M * M;
        if (u < -M) return (3 * M * M - 1) * u + 2 * M * M * M;
        return u * u * u - u;
    }
    double df(double u) const
    {
        if (std::abs(u) > m_tr) return 3 * m_tr * m_tr - 1;
        return 3 * u * u - 1;
    }
    double F(double u) const
    {
        const double M = m_tr;
        const double q = (3 * M * M - 1) / 2 * u * u + (3 * M * M * M * M + 1) / 4;
        if (u > M) return q - 2 * M * M * M * u;
        if (u < -M) return q + 2 * M * M * M * u;
        return 0.25 * (u * u - 1) * (u * u - 1);
    }
    double lipschitz() const { return 3 * m_tr * m_tr - 1; }

    Nonlinearity as_nonlinearity() const
    {
        const auto self = *this;
        return {[self](double u) { return self.f(u); }, [self](double u) { return self.df(u); },
                [self](double u) { return self.F(u); }, lipschitz()};
    }
};

inline TruncatedPotential make_truncated(double m_tr)
{
    if (!(m_tr >= 1)) throw std::invalid_argument("make_truncated: bound must be >= 1");
    return {m_tr};
}

/// The plain Allen-Cahn term without truncation.
inline Nonlinearity allen_cahn()
{
    return {[](double u) { return u * u * u - u; }, [](double u) { return 3 * u * u - 1; },
            [](double u) { return 0.25 * (u * u - 1) * (u * u - 1); }, std::numeric_limits<double>::infinity()};
}

/// Reaction +sin(u) on the right-hand side, i.e. f(u) = -sin(u) with F = cos(u).
inline Nonlinearity sine_reaction()
{
    return {[](double u) { return -std::sin(u); }, [](double u) { return -std::cos(u); },
            [](double u) { return std::cos(u); }, 1.0};
}

/// Deterministic uniform stream on [0, 1).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// amplitude * (2 rand - 1) at interior nodes in row-major order.
inline Field random_field(const SpatialOperator& space, double amplitude, std::uint64_t seed)
{
    SplitMix64 rng(seed);
    Field u(space.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = amplitude * (2.0 * rng.uniform() - 1.0);
    return u;
}

struct Problem {
    double diffusion = 1.0;              // kappa (nu^2 for the semilinear examples)
    SpaceTimeFn source;                  // g, may be empty
    SpaceFn initial;                     // u^0 as a function, or
    std::optional<Field> initial_field;  // u^0 as grid values
    std::optional<Nonlinearity> nonlinearity;
    SpaceTimeFn exact;                   // optional exact solution for error tracking
    ScalarFn energy_potential;           // overrides F in the energy if set
    ScalarFn alt_potential;              // second energy column if set
};

/// Local weight of the very first step. l21 is sigma^(1-alpha) / (Gamma(2-alpha) tau_1^alpha),
/// the same weight every later step uses. l1 drops the sigma^(1-alpha) factor, which is the
/// L1 weight at t_1 and gives the larger start-up error seen on meshes with r alpha = 1.
enum class FirstStep { l21, l1 };

inline std::string to_string(FirstStep f) { return f == FirstStep::l21 ? "l21" : "l1"; }

inline FirstStep parse_first_step(const std::string& s)
{
    if (s == "l21") return FirstStep::l21;
    if (s == "l1") return FirstStep::l1;
    throw std::invalid_argument("unknown first step '" + s + "' (expected l21 or l1)");
}

struct RunConfig {
    TimeMesh mesh;
    SoeApprox soe;
    std::shared_ptr<const SpatialOperator> space;
    Problem problem;
    OperatorKind op = OperatorKind::fast;
    int cadence = 1;       // diagnostics every cadence steps (and at the last step)
    int steps = -1;        // number of steps to take, -1 for the whole mesh
    bool strict = false;   // refuse to run on an inadmissible mesh
    bool track_energy = false;  // evaluate the energy at every step for energy_max_increase
    FirstStep first_step = FirstStep::l21;
};

struct DiagnosticRow {
    int k = 0;
    double t = 0;
    double l2 = 0;
    double h1semi = 0;
    double energy = 0;
    double energy_alt = std::numeric_limits<double>::quiet_NaN();
    double err_l2 = std::numeric_limits<double>::quiet_NaN();
    double err_h1 = std::numeric_limits<double>::quiet_NaN();
};

struct RunState {
    int k = 0;
    Field u;   // u^k
    Field u1;  // u^{k-1}
    Field u2;  // u^{k-2}
    FastHistory history;
    std::vector<Field> deltas;  // standard operator only: delta_j u, j = 1..k
};

struct RunResult {
    std::vector<DiagnosticRow> series;
    Field final_field;
    double setup_seconds = 0;
    double loop_seconds = 0;
    double max_err_l2 = 0;
    double max_err_h1 = 0;
    double energy_max_increase = 0;  // max_n E^n - E^0 over the evaluated steps
    AdmissibilityReport psd;
    std::optional<AdmissibilityReport> semilinear;
};

class TimeStepper {
public:
    explicit TimeStepper(const RunConfig& cfg) : cfg_(cfg)
    {
        if (!cfg_.space) throw std::invalid_argument("RunConfig: spatial operator missing");
        detail::require_same_alpha(cfg_.mesh, cfg_.soe);
        gamma_ = std::tgamma(1.0 - cfg_.mesh.alpha());
        weights_ = soe_weights_vec(cfg_.soe);
    }

    RunState initial_state() const
    {
        const auto& sp = *cfg_.space;
        RunState st;
        if (cfg_.problem.initial_field) {
            st.u = *cfg_.problem.initial_field;
            if (st.u.size() != sp.size()) throw std::invalid_argument("initial field has the wrong size");
        } else if (cfg_.problem.initial) {
            st.u = sp.sample(cfg_.problem.initial);
        } else {
            st.u = Field::Zero(sp.size());
        }
        st.u1 = st.u;
        st.u2 = st.u;
        if (cfg_.op == OperatorKind::fast) st.history = FastHistory(sp.size(), cfg_.soe.nq());
        st.deltas.emplace_back();  // index 0 unused
        return st;
    }

    /// Advances st from step k - 1 to step k.
    void step(RunState& st, int k) const
    {
        if (st.k != k - 1) throw std::logic_error("step: state is not at k - 1");
        const auto& mesh = cfg_.mesh;
        const auto& sp = *cfg_.space;
        const auto& pr = cfg_.problem;
        const double s = mesh.sigma(), a = mesh.alpha();
        double loc = local_weight(mesh, k);
        if (k == 1 && cfg_.first_step == FirstStep::l1) loc /= std::pow(s, 1.0 - a);
        const Field& prev = st.u;

        // implicit coefficient and the known part of the memory term
        double c = loc;
        Field rhs = loc * prev;
        std::optional<LocalFastCoeffs> lc;
        if (cfg_.op == OperatorKind::fast) {
            if (k >= 2) {
                lc = local_fast_coeffs(mesh, cfg_.soe, k);
                const Vec dw = lc->decay.cwiseProduct(weights_);
                Field known = st.history.values() * dw;
                known += lc->a.dot(weights_) * st.u1;
                known += lc->b.dot(weights_) * prev;
                const double sc = lc->c.dot(weights_) / gamma_;
                // the node coefficients c multiply u^k, which is still unknown
                c += sc;
                rhs -= known / gamma_;
            }
        } else if (k >= 2) {
            const auto co = l21_coeffs(mesh, k);
            Field hist = Field::Zero(sp.size());
            for (int j = 1; j <= k - 1; ++j) hist += co.d[j] * st.deltas[j];
            // c_{k-1} multiplies delta_k u = u^k - u^{k-1}
            const double sc = co.c[k - 1] / gamma_;
            c += sc;
            rhs += sc * prev - hist / gamma_;
        }

        if (pr.diffusion != 0.0) rhs += (0.5 * a * pr.diffusion) * sp.laplacian(prev);
        if (pr.source) {
            const double ts = mesh.tstar(k);
            rhs += sp.sample([&](double x, double y) { return pr.source(ts, x, y); });
        }
        Field diag;
        if (pr.nonlinearity) {
            const auto& nl = *pr.nonlinearity;
            diag = prev.unaryExpr([&](double v) { return s * nl.df(v); });
            rhs += diag.cwiseProduct(prev) - prev.unaryExpr([&](double v) { return nl.f(v); });
        }
        Field next = sp.solve_shifted(c, s * pr.diffusion, rhs, pr.nonlinearity ? &diag : nullptr);

        if (cfg_.op == OperatorKind::fast) {
            if (k >= 2) st.history.update(*lc, st.u1, prev, next);
        } else {
            st.deltas.push_back(next - prev);
        }
        st.u2 = std::move(st.u1);
        st.u1 = prev;
        st.u = std::move(next);
        st.k = k;
    }

    DiagnosticRow diagnostics(const RunState& st) const
    {
        const auto& sp = *cfg_.space;
        const auto& pr = cfg_.problem;
        DiagnosticRow row;
        row.k = st.k;
        row.t = cfg_.mesh.t(st.k);
        const auto nr = sp.norms(st.u);
        row.l2 = nr.l2;
        row.h1semi = nr.h1_semi;
        ScalarFn pot = pr.energy_potential;
        if (!pot && pr.nonlinearity) pot = pr.nonlinearity->F;
        if (!pot) pot = [](double) { return 0.0; };
        row.energy = sp.energy(st.u, pr.diffusion, pot);
        if (pr.alt_potential) row.energy_alt = sp.energy(st.u, pr.diffusion, pr.alt_potential);
        if (pr.exact) {
            const double t = row.t;
            const Field e = st.u - sp.sample([&](double x, double y) { return pr.exact(t, x, y); });
            const auto en = sp.norms(e);
            row.err_l2 = en.l2;
            row.err_h1 = en.h1_semi;
        }
        return row;
    }

    const RunConfig& config() const noexcept { return cfg_; }

private:
    const RunConfig& cfg_;
    double gamma_ = 1;
    Vec weights_;
};

inline void step_linear(RunState& st, const TimeStepper& ts, int k)
{
    if (ts.config().problem.nonlinearity) throw std::invalid_argument("step_linear: problem has a nonlinearity");
    ts.step(st, k);
}

inline void step_semilinear(RunState& st, const TimeStepper& ts, int k)
{
    if (!ts.config().problem.nonlinearity) throw std::invalid_argument("step_semilinear: no nonlinearity set");
    ts.step(st, k);
}

inline RunResult run(const RunConfig& cfg)
{
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    RunResult res;
    res.psd = check_psd_conditions(cfg.mesh, cfg.soe);
    if (cfg.problem.nonlinearity && std::isfinite(cfg.problem.nonlinearity->lipschitz))
        res.semilinear = check_semilinear_tau(cfg.mesh, cfg.soe, cfg.problem.nonlinearity->lipschitz);
    if (cfg.strict && (!res.psd.pass() || (res.semilinear && !res.semilinear->pass())))
        throw std::runtime_error("run: mesh fails the admissibility conditions\n" + res.psd.to_key_value());

    const TimeStepper ts(cfg);
    RunState st = ts.initial_state();
    const int last = cfg.steps < 0 ? cfg.mesh.n() : std::min(cfg.steps, cfg.mesh.n());
    const int cadence = std::max(1, cfg.cadence);
    const bool track_err = static_cast<bool>(cfg.problem.exact);

    auto record = [&](const DiagnosticRow& row) { res.series.push_back(row); };
    record(ts.diagnostics(st));
    res.energy_max_increase = 0;
    const auto t1 = clock::now();
    for (int k = 1; k <= last; ++k) {
        try {
            ts.step(st, k);
        } catch (const std::exception& e) {
            throw std::runtime_error("run: step " + std::to_string(k) + " failed: " + e.what());
        }
        const bool on_cadence = k % cadence == 0 || k == last;
        if (on_cadence || track_err || cfg.track_energy) {
            const auto row = ts.diagnostics(st);
            res.energy_max_increase = std::max(res.energy_max_increase, row.energy - res.series.front().energy);
            if (track_err) {
                res.max_err_l2 = std::max(res.max_err_l2, row.err_l2);
                res.max_err_h1 = std::max(res.max_err_h1, row.err_h1);
            }
            if (on_cadence) record(row);
        }
    }
    const auto t2 = clock::now();
    res.final_field = st.u;
    res.setup_seconds = std::chrono::duration<double>(t1 - t0).count();
    res.loop_seconds = std::chrono::duration<double>(t2 - t1).count();
    return res;
}

inline void write_series_csv(std::ostream& os, const std::vector<DiagnosticRow>& series)
{
    const bool alt = !series.empty() && !std::isnan(series.front().energy_alt);
    const bool err = !series.empty() && !std::isnan(series.back().err_l2);
    os << "k,t_k,l2,h1semi,energy";
    if (alt) os << ",energy_original";
    if (err) os << ",err_l2,err_h1";
    os << '\n' << std::setprecision(17);
    for (const auto& r : series) {
        os << r.k << ',' << r.t << ',' << r.l2 << ',' << r.h1semi << ',' << r.energy;
        if (alt) os << ',' << r.energy_alt;
        if (err) os << ',' << r.err_l2 << ',' << r.err_h1;
        os << '\n';
    }
}

}  // namespace fastl21
