#pragma once

// Scripted studies: convergence tables, timing and N_q profiles, long-time
// H1 behaviour and energy evolution. Every study can write its CSV files and
// a short report into an output directory.

#include "timestepper.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <optional>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace fastl21 {

// ---------------------------------------------------------------------------
// SOE builds are the expensive part of setup, so identical requests share one.

inline const SoeApprox& cached_soe(double alpha, double eps, double dt_cut, double t_soe)
{
    static std::map<std::tuple<double, double, double, double>, SoeApprox> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_tuple(alpha, eps, dt_cut, t_soe);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build_soe(alpha, eps, dt_cut, t_soe)).first;
    return it->second;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("loglog_slope: need two or more points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name)
{
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    os.precision(10);
    return os;
}

inline double bubble(double x, double y) { return (x * x - 1) * (y * y - 1); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Convergence

enum class ConvergenceProblem {
    linear,           // t^alpha (x^2-1)(y^2-1), D^alpha u = Lap u + f
    semilinear_poly,  // same solution, D^alpha u = Lap u + sin u + g
    semilinear_sine,  // t^alpha sin(pi x) sin(pi y), D^alpha u = Lap u + sin u + g
};

inline std::string to_string(ConvergenceProblem p)
{
    switch (p) {
    case ConvergenceProblem::linear: return "linear";
    case ConvergenceProblem::semilinear_poly: return "semilinear_poly";
    case ConvergenceProblem::semilinear_sine: return "semilinear_sine";
    }
    return "?";
}

inline ConvergenceProblem parse_convergence_problem(const std::string& s)
{
    if (s == "linear") return ConvergenceProblem::linear;
    if (s == "semilinear_poly") return ConvergenceProblem::semilinear_poly;
    if (s == "semilinear_sine") return ConvergenceProblem::semilinear_sine;
    throw std::invalid_argument("unknown convergence problem '" + s + "'");
}

inline Problem manufactured_problem(ConvergenceProblem kind, double alpha)
{
    const double g = std::tgamma(1.0 + alpha);
    Problem p;
    if (kind == ConvergenceProblem::semilinear_sine) {
        const double pi = std::numbers::pi;
        auto shape = [pi](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
        p.exact = [=](double t, double x, double y) { return std::pow(t, alpha) * shape(x, y); };
        p.source = [=](double t, double x, double y) {
            const double s = shape(x, y), ta = std::pow(t, alpha);
            return g * s + 2 * pi * pi * ta * s - std::sin(ta * s);
        };
        p.nonlinearity = sine_reaction();
        return p;
    }
    p.exact = [=](double t, double x, double y) { return std::pow(t, alpha) * detail::bubble(x, y); };
    if (kind == ConvergenceProblem::linear) {
        p.source = [=](double t, double x, double y) {
            return g * detail::bubble(x, y) - 2 * std::pow(t, alpha) * (x * x + y * y - 2);
        };
    } else {
        p.source = [=](double t, double x, double y) {
            const double ta = std::pow(t, alpha), b = detail::bubble(x, y);
            return g * b - 2 * ta * (x * x + y * y - 2) - std::sin(ta * b);
        };
        p.nonlinearity = sine_reaction();
    }
    return p;
}

struct ConvergenceRow {
    double alpha = 0;
    double r = 0;
    int N = 0;
    double err_l2 = 0;
    double err_h1 = 0;
    double order_l2 = std::numeric_limits<double>::quiet_NaN();
    double order_h1 = std::numeric_limits<double>::quiet_NaN();
    std::size_t nq = 0;
    double loop_seconds = 0;
    CertReport soe_cert;
};

struct ConvergenceTable {
    ConvergenceProblem problem = ConvergenceProblem::linear;
    std::vector<ConvergenceRow> rows;
    double wall_seconds = 0;

    const ConvergenceRow* find(double r, int N) const
    {
        for (const auto& row : rows)
            if (std::abs(row.r - r) <= 1e-12 * r && row.N == N) return &row;
        return nullptr;
    }

    void write_csv(std::ostream& os) const
    {
        os << "alpha,r,N,err_l2,order_l2,err_h1,order_h1,nq,soe_max_err\n";
        os.precision(10);
        for (const auto& w : rows)
            os << w.alpha << ',' << w.r << ',' << w.N << ',' << w.err_l2 << ',' << w.order_l2 << ',' << w.err_h1 << ','
               << w.order_h1 << ',' << w.nq << ',' << w.soe_cert.max_err << '\n';
    }

    /// Grid layout: one error row and one order row per r, one column per N.
    void write_table(std::ostream& os) const
    {
        std::vector<int> Ns;
        std::vector<double> rs;
        for (const auto& w : rows) {
            if (std::find(Ns.begin(), Ns.end(), w.N) == Ns.end()) Ns.push_back(w.N);
            if (std::find(rs.begin(), rs.end(), w.r) == rs.end()) rs.push_back(w.r);
        }
        os << "row";
        for (int N : Ns) os << ",N=" << N;
        os << '\n';
        char buf[64];
        for (double r : rs) {
            const double ra = r * (rows.empty() ? 1.0 : rows.front().alpha);
            if (std::abs(ra - std::round(ra)) < 1e-9)
                os << "r=" << std::lround(ra) << "/alpha";
            else
                os << "r=" << r;
            for (int N : Ns) {
                const auto* w = find(r, N);
                std::snprintf(buf, sizeof buf, "%.4e", w ? w->err_l2 : std::nan(""));
                os << ',' << buf;
            }
            os << "\norder";
            for (int N : Ns) {
                const auto* w = find(r, N);
                if (!w || std::isnan(w->order_l2)) {
                    os << ",--";
                } else {
                    std::snprintf(buf, sizeof buf, "%.4f", w->order_l2);
                    os << ',' << buf;
                }
            }
            os << '\n';
        }
    }
};

struct ConvergenceOptions {
    Backend backend = Backend::cheb;
    int space_n = 24;
    double eps = 1e-12;
    double t_soe = 1.0;
    OperatorKind op = OperatorKind::fast;
    // the reference tables use the L1 weight on the first step
    FirstStep first_step = FirstStep::l1;
};

/// Runs every (r, N) pair on the graded mesh t_j = (j/N)^r and records the
/// maximum L2 and H1 errors over all steps.
inline ConvergenceTable convergence_study(double alpha, const std::vector<double>& r_list,
                                          const std::vector<int>& n_list, ConvergenceProblem problem,
                                          const ConvergenceOptions& opt = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    ConvergenceTable table;
    table.problem = problem;
    const auto space = build_space(opt.backend, opt.space_n);
    for (double r : r_list) {
        const ConvergenceRow* prev = nullptr;
        std::size_t first = table.rows.size();
        for (int N : n_list) {
            RunConfig cfg;
            cfg.mesh = graded_mesh(N, r, 1.0, alpha);
            cfg.soe = cached_soe(alpha, opt.eps, cfg.mesh.sigma() * cfg.mesh.tau(2), opt.t_soe);
            cfg.space = space;
            cfg.problem = manufactured_problem(problem, alpha);
            cfg.op = opt.op;
            cfg.first_step = opt.first_step;
            cfg.cadence = N;
            const auto res = run(cfg);
            ConvergenceRow row;
            row.alpha = alpha;
            row.r = r;
            row.N = N;
            row.err_l2 = res.max_err_l2;
            row.err_h1 = res.max_err_h1;
            row.nq = cfg.soe.nq();
            row.loop_seconds = res.loop_seconds;
            row.soe_cert = cfg.soe.certificate();
            table.rows.push_back(row);
        }
        for (std::size_t i = first + 1; i < table.rows.size(); ++i) {
            prev = &table.rows[i - 1];
            auto& cur = table.rows[i];
            const double ratio = static_cast<double>(cur.N) / prev->N;
            cur.order_l2 = std::log(prev->err_l2 / cur.err_l2) / std::log(ratio);
            cur.order_h1 = std::log(prev->err_h1 / cur.err_h1) / std::log(ratio);
        }
    }
    table.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return table;
}

// ---------------------------------------------------------------------------
// Timing and N_q profiles

struct TimingRow {
    int N = 0;
    double fast_seconds = 0;
    double standard_seconds = 0;
    std::size_t nq = 0;
};

struct NqRow {
    double eps = 0;
    double dt = 0;
    std::size_t nq = 0;
    CertReport cert;
};

struct TimingProfile {
    double alpha = 0.5;
    std::vector<TimingRow> rows;
    double slope_fast = 0;
    double slope_standard = 0;
    std::vector<NqRow> nq_vs_eps;
    std::vector<NqRow> nq_vs_dt;

    static bool monotone(const std::vector<NqRow>& v)
    {
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i].nq < v[i - 1].nq) return false;
        return true;
    }
    bool nq_monotone_eps() const { return monotone(nq_vs_eps); }
    bool nq_monotone_dt() const { return monotone(nq_vs_dt); }

    void write_csv(std::ostream& times, std::ostream& nq) const
    {
        times << "N,fast_seconds,standard_seconds,nq\n";
        for (const auto& r : rows) times << r.N << ',' << r.fast_seconds << ',' << r.standard_seconds << ',' << r.nq << '\n';
        nq << "sweep,eps,dt,nq,max_err,certified\n";
        for (const auto& r : nq_vs_eps)
            nq << "eps," << r.eps << ',' << r.dt << ',' << r.nq << ',' << r.cert.max_err << ',' << r.cert.pass << '\n';
        for (const auto& r : nq_vs_dt)
            nq << "dt," << r.eps << ',' << r.dt << ',' << r.nq << ',' << r.cert.max_err << ',' << r.cert.pass << '\n';
    }
};

struct TimingOptions {
    double r = 1.5;
    Backend backend = Backend::cheb;
    int space_n = 9;
    int repeats = 3;
    bool standard = true;
    bool nq_profiles = true;
    std::vector<double> eps_list{1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12, 1e-13};
    std::vector<double> dt_list{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10};
    double nq_dt = 1e-5;    // fixed dt of the eps sweep
    double nq_eps = 1e-13;  // fixed eps of the dt sweep
};

/// Best-of-repeats time-loop wall clock for the fast and standard operators
/// on the linear manufactured problem.
inline TimingProfile timing_bench(double alpha, const std::vector<int>& n_list, const TimingOptions& opt = {})
{
    TimingProfile prof;
    prof.alpha = alpha;
    const auto space = build_space(opt.backend, opt.space_n);
    std::vector<double> xs, yf, ys;
    for (int N : n_list) {
        RunConfig cfg;
        cfg.mesh = graded_mesh(N, opt.r, 1.0, alpha);
        cfg.soe = cached_soe(alpha, 1e-12, cfg.mesh.sigma() * cfg.mesh.tau(2), 1.0);
        cfg.space = space;
        cfg.problem = manufactured_problem(ConvergenceProblem::linear, alpha);
        cfg.problem.exact = nullptr;
        cfg.cadence = N;
        TimingRow row;
        row.N = N;
        row.nq = cfg.soe.nq();
        auto best = [&](OperatorKind op) {
            cfg.op = op;
            double t = std::numeric_limits<double>::infinity();
            for (int i = 0; i < std::max(1, opt.repeats); ++i) t = std::min(t, run(cfg).loop_seconds);
            return t;
        };
        row.fast_seconds = best(OperatorKind::fast);
        if (opt.standard) row.standard_seconds = best(OperatorKind::standard);
        prof.rows.push_back(row);
        xs.push_back(N);
        yf.push_back(row.fast_seconds);
        ys.push_back(row.standard_seconds);
    }
    if (xs.size() >= 2) {
        prof.slope_fast = loglog_slope(xs, yf);
        if (opt.standard) prof.slope_standard = loglog_slope(xs, ys);
    }
    if (opt.nq_profiles) {
        for (double e : opt.eps_list) {
            const auto& s = cached_soe(alpha, e, opt.nq_dt, 1.0);
            prof.nq_vs_eps.push_back({e, opt.nq_dt, s.nq(), s.certificate()});
        }
        // larger dt first so that a monotone profile is nondecreasing
        for (double dt : opt.dt_list) {
            const auto& s = cached_soe(alpha, opt.nq_eps, dt, 1.0);
            prof.nq_vs_dt.push_back({opt.nq_eps, dt, s.nq(), s.certificate()});
        }
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Long-time H1 behaviour

enum class LongtimeSource { f1, f2, zero };

inline std::string to_string(LongtimeSource s)
{
    switch (s) {
    case LongtimeSource::f1: return "f1";
    case LongtimeSource::f2: return "f2";
    case LongtimeSource::zero: return "zero";
    }
    return "?";
}

inline LongtimeSource parse_longtime_source(const std::string& s)
{
    if (s == "f1") return LongtimeSource::f1;
    if (s == "f2") return LongtimeSource::f2;
    if (s == "zero") return LongtimeSource::zero;
    throw std::invalid_argument("unknown source '" + s + "' (expected f1, f2 or zero)");
}

struct LongtimeResult {
    LongtimeSource source = LongtimeSource::f2;
    double alpha = 0.5;
    double horizon = 0;
    int steps = 0;
    std::size_t nq = 0;
    CertReport soe_cert;
    AdmissibilityReport psd;
    std::vector<DiagnosticRow> series;
    double first_half_max = 0;
    double second_half_max = 0;
    bool bounded = false;  // second-half max below 1.05 x first-half max

    std::string verdict() const { return bounded ? "bounded" : "growing"; }
};

struct LongtimeOptions {
    Backend backend = Backend::cheb;
    int space_n = 9;
    int cadence = 10;
    double eps = 1e-12;
    double t_soe = 1.0;
};

/// Mesh: 100 graded steps on [0, 1] with r = 2/alpha, then growth by 1.005
/// up to tau_max = 0.2, until the horizon.
inline TimeMesh longtime_mesh(double alpha, double horizon)
{
    return hybrid_mesh(100, 2.0 / alpha, 1.0, 1.005, 0.2, horizon, alpha);
}

inline LongtimeResult longtime_study(LongtimeSource source, double horizon = 2000, double alpha = 0.5,
                                     const LongtimeOptions& opt = {})
{
    const double pi = std::numbers::pi;
    RunConfig cfg;
    cfg.mesh = longtime_mesh(alpha, horizon);
    cfg.soe = cached_soe(alpha, opt.eps, cfg.mesh.sigma() * cfg.mesh.tau(2), opt.t_soe);
    cfg.space = build_space(opt.backend, opt.space_n);
    cfg.problem.initial = [pi](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
    if (source == LongtimeSource::f1)
        cfg.problem.source = [](double t, double, double) { return t * std::sin(0.2 * t); };
    else if (source == LongtimeSource::f2)
        cfg.problem.source = [](double t, double, double) { return 5 * std::exp(-0.0005 * t) * std::sin(0.005 * t); };
    cfg.cadence = std::max(1, opt.cadence);
    const auto res = run(cfg);

    LongtimeResult out;
    out.source = source;
    out.alpha = alpha;
    out.horizon = horizon;
    out.steps = cfg.mesh.n();
    out.nq = cfg.soe.nq();
    out.soe_cert = cfg.soe.certificate();
    out.psd = res.psd;
    out.series = res.series;
    const double half = 0.5 * cfg.mesh.t_end();
    for (const auto& r : out.series) {
        double& m = r.t <= half ? out.first_half_max : out.second_half_max;
        m = std::max(m, r.h1semi);
    }
    out.bounded = out.second_half_max < 1.05 * out.first_half_max;
    return out;
}

// ---------------------------------------------------------------------------
// Energy evolution

enum class EnergyProblem { sine, allen_cahn };

inline std::string to_string(EnergyProblem p) { return p == EnergyProblem::sine ? "sine" : "allen_cahn"; }

inline EnergyProblem parse_energy_problem(const std::string& s)
{
    if (s == "sine") return EnergyProblem::sine;
    if (s == "allen_cahn") return EnergyProblem::allen_cahn;
    throw std::invalid_argument("unknown energy problem '" + s + "' (expected sine or allen_cahn)");
}

struct EnergyRun {
    double alpha = 0;
    bool truncated = true;
    std::size_t nq = 0;
    CertReport soe_cert;
    AdmissibilityReport psd;
    std::optional<AdmissibilityReport> cond_tau;
    std::vector<DiagnosticRow> series;
    double max_increase = 0;  // max_n E^n - E^0 over every step
    bool stable = false;      // max_increase <= 1e-10
};

struct EnergyStudy {
    EnergyProblem problem = EnergyProblem::allen_cahn;
    std::vector<EnergyRun> runs;
    std::optional<EnergyRun> untruncated;  // comparison run without truncation
    double original_energy_gap = std::numeric_limits<double>::quiet_NaN();  // relative to E^0
};

struct EnergyOptions {
    Backend backend = Backend::cheb;
    int space_n = 9;
    double horizon = 300;
    double nu2 = 0.01;
    double m_tr = 1.0;
    std::uint64_t seed = 42;
    int cadence = 10;
    double eps = 1e-12;
    double t_soe = 300;
    double compare_alpha = 0.8;  // untruncated comparison for Allen-Cahn, skipped if not in the list
};

/// 100 graded steps (r = 3) on [0, 0.1], growth by 1.01 up to tau_max = 0.02.
inline TimeMesh energy_mesh(double alpha, double horizon)
{
    return hybrid_mesh(100, 3.0, 0.1, 1.01, 0.02, horizon, alpha);
}

inline EnergyStudy energy_study(EnergyProblem problem, const std::vector<double>& alphas, const EnergyOptions& opt = {})
{
    const double pi = std::numbers::pi;
    const auto space = build_space(opt.backend, opt.space_n);
    const Field noise = random_field(*space, 0.05, opt.seed);
    const ScalarFn original = [](double u) { return 0.25 * (u * u - 1) * (u * u - 1); };

    auto one = [&](double alpha, bool truncated) {
        RunConfig cfg;
        cfg.mesh = energy_mesh(alpha, opt.horizon);
        cfg.soe = cached_soe(alpha, opt.eps, cfg.mesh.sigma() * cfg.mesh.tau(2), opt.t_soe);
        cfg.space = space;
        cfg.problem.diffusion = opt.nu2;
        cfg.cadence = std::max(1, opt.cadence);
        cfg.track_energy = true;
        if (problem == EnergyProblem::sine) {
            cfg.problem.initial = [pi](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
            cfg.problem.nonlinearity = sine_reaction();
        } else {
            cfg.problem.initial_field = noise;
            cfg.problem.nonlinearity = truncated ? make_truncated(opt.m_tr).as_nonlinearity() : allen_cahn();
            cfg.problem.alt_potential = original;
        }
        const auto res = run(cfg);
        EnergyRun er;
        er.alpha = alpha;
        er.truncated = truncated;
        er.nq = cfg.soe.nq();
        er.soe_cert = cfg.soe.certificate();
        er.psd = res.psd;
        er.cond_tau = res.semilinear;
        er.series = res.series;
        er.max_increase = res.energy_max_increase;
        er.stable = er.max_increase <= 1e-10;
        return er;
    };

    EnergyStudy st;
    st.problem = problem;
    for (double a : alphas) st.runs.push_back(one(a, true));
    if (problem == EnergyProblem::allen_cahn) {
        for (const auto& r : st.runs) {
            if (std::abs(r.alpha - opt.compare_alpha) > 1e-12) continue;
            st.untruncated = one(r.alpha, false);
            double gap = 0;
            const auto& a = r.series;
            const auto& b = st.untruncated->series;
            for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
                gap = std::max(gap, std::abs(a[i].energy_alt - b[i].energy_alt));
            st.original_energy_gap = gap / std::abs(a.front().energy_alt);
        }
    }
    return st;
}

// ---------------------------------------------------------------------------
// Output

inline void write_convergence(const std::filesystem::path& dir, double alpha, const ConvergenceTable& t)
{
    std::ostringstream tag;
    tag << to_string(t.problem) << "_alpha" << alpha;
    auto a = detail::open_out(dir, "convergence_" + tag.str() + ".csv");
    t.write_csv(a);
    auto b = detail::open_out(dir, "table_" + tag.str() + ".csv");
    t.write_table(b);
}

inline void write_timing(const std::filesystem::path& dir, const TimingProfile& p)
{
    auto a = detail::open_out(dir, "timing.csv");
    auto b = detail::open_out(dir, "nq_profile.csv");
    p.write_csv(a, b);
}

inline void write_longtime(const std::filesystem::path& dir, const LongtimeResult& r)
{
    auto os = detail::open_out(dir, "longtime_" + to_string(r.source) + ".csv");
    write_series_csv(os, r.series);
}

inline void write_energy(const std::filesystem::path& dir, const EnergyStudy& s)
{
    for (const auto& r : s.runs) {
        std::ostringstream name;
        name << "energy_" << to_string(s.problem) << "_alpha" << r.alpha << ".csv";
        auto os = detail::open_out(dir, name.str());
        write_series_csv(os, r.series);
    }
    if (s.untruncated) {
        std::ostringstream name;
        name << "energy_" << to_string(s.problem) << "_alpha" << s.untruncated->alpha << "_untruncated.csv";
        auto os = detail::open_out(dir, name.str());
        write_series_csv(os, s.untruncated->series);
    }
}

}  // namespace fastl21
