// fastl21: command-line front end.
//
//   fastl21 soe build|certify
//   fastl21 mesh make|check
//   fastl21 psd verify
//   fastl21 run linear|semilinear
//   fastl21 study convergence|timing|longtime|energy
//
// Exit codes: 0 success, 1 a check or acceptance threshold failed, 2 usage error.

#include <fastl21/fastl21.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace fastl21;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string config;
    std::string out = "fastl21_out";
    std::optional<double> alpha;
    std::optional<int> n;
    std::optional<double> r;
    std::optional<std::string> backend;
    std::optional<std::string> op;
    std::optional<std::uint64_t> seed;
    std::optional<int> space_n;
    std::optional<double> eps;
    std::optional<double> dt;
    std::optional<double> tsoe;
    std::optional<double> horizon;
    std::optional<std::string> problem;
    std::optional<std::string> kind;
    std::optional<std::string> first_step;
    std::string mesh_file;
    std::string soe_file;
    std::optional<double> lipschitz;
    std::optional<int> repeats;
    std::vector<std::string> sources{"f1", "f2"};
    int samples = 10000;
    bool strict = false;
};

void add_common(CLI::App* app, Flags& f)
{
    app->add_option("--config", f.config, "TOML configuration file")->check(CLI::ExistingFile);
    app->add_option("--out", f.out, "output directory")->capture_default_str();
    app->add_option("--alpha", f.alpha, "fractional order in (0, 1)");
    app->add_option("--n", f.n, "number of time steps (psd verify: matrix size)");
    app->add_option("--r", f.r, "grading exponent");
    app->add_option("--backend", f.backend, "spatial backend")->check(CLI::IsMember({"fd", "cheb"}));
    app->add_option("--operator", f.op, "fractional operator")->check(CLI::IsMember({"fast", "standard"}));
    app->add_option("--seed", f.seed, "seed of the random initial field");
}

void add_soe_params(CLI::App* app, Flags& f)
{
    app->add_option("--eps", f.eps, "SOE tolerance");
    app->add_option("--dt", f.dt, "SOE lower cutoff (default sigma * tau_2)");
    app->add_option("--tsoe", f.tsoe, "SOE upper limit");
}

Config load(const Flags& f)
{
    Config c = f.config.empty() ? Config{} : load_config(f.config);
    if (f.alpha) c.alpha = *f.alpha;
    if (f.n) c.n = *f.n;
    if (f.r) c.r = *f.r;
    if (f.backend) c.backend = *f.backend;
    if (f.op) c.op = *f.op;
    if (f.seed) c.seed = *f.seed;
    if (f.space_n) c.space_n = *f.space_n;
    if (f.eps) c.eps = *f.eps;
    if (f.dt) {
        c.dt_rule = "fixed";
        c.dt = *f.dt;
    }
    if (f.tsoe) c.t_soe = *f.tsoe;
    if (f.horizon) c.horizon = *f.horizon;
    if (f.problem) c.problem = *f.problem;
    if (f.kind) c.mesh = *f.kind;
    if (f.first_step) c.first_step = *f.first_step;
    if (f.repeats) c.repeats = *f.repeats;
    if (f.strict) c.strict = true;
    validate(c);
    return c;
}

fs::path out_dir(const Flags& f)
{
    fs::create_directories(f.out);
    return f.out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

// Accumulates pass/fail lines for report.txt.
struct Report {
    std::ostringstream body;
    bool ok = true;

    void check(bool pass, const std::string& what)
    {
        body << (pass ? "PASS " : "FAIL ") << what << '\n';
        ok = ok && pass;
    }
    void note(const std::string& what) { body << "NOTE " << what << '\n'; }

    int finish(const fs::path& dir)
    {
        body << "overall=" << (ok ? "pass" : "fail") << '\n';
        write_text(dir / "report.txt", body.str());
        std::cout << body.str();
        return ok ? 0 : 1;
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------

int cmd_soe_build(const Flags& f)
{
    const Config c = load(f);
    const double dt = f.dt ? *f.dt : 1e-5;
    const SoeApprox& soe = cached_soe(c.alpha, c.eps, dt, c.t_soe);
    const auto dir = out_dir(f);
    std::ofstream os(dir / "soe.txt");
    write_soe(os, soe);
    const auto& cert = soe.certificate();
    std::cout << "nq=" << soe.nq() << "\nmax_err=" << cert.max_err << "\nsamples=" << cert.samples
              << "\npass=" << (cert.pass ? "true" : "false") << '\n';
    return cert.pass ? 0 : 1;
}

int cmd_soe_certify(const Flags& f)
{
    if (f.soe_file.empty()) throw UsageError("soe certify needs --file");
    std::ifstream is(f.soe_file);
    if (!is) throw UsageError("cannot open " + f.soe_file);
    const SoeApprox soe = read_soe(is);
    const auto cert = certify_soe(soe, f.samples);
    std::cout << "nq=" << soe.nq() << "\nmax_err=" << cert.max_err << "\nargmax_t=" << cert.argmax_t
              << "\nsamples=" << cert.samples << "\neps=" << soe.eps() << "\npass=" << (cert.pass ? "true" : "false")
              << '\n';
    return cert.pass ? 0 : 1;
}

TimeMesh mesh_from(const Flags& f, const Config& c)
{
    if (f.mesh_file.empty()) return make_mesh(c);
    std::ifstream is(f.mesh_file);
    if (!is) throw UsageError("cannot open " + f.mesh_file);
    return read_mesh(is, c.alpha);
}

int cmd_mesh_make(const Flags& f)
{
    const Config c = load(f);
    const TimeMesh mesh = make_mesh(c);
    const auto dir = out_dir(f);
    std::ofstream os(dir / "mesh.txt");
    write_mesh(os, mesh);
    std::cout << "steps=" << mesh.n() << "\nt_end=" << mesh.t_end() << "\nsigma_tau2=" << mesh.sigma() * mesh.tau(2)
              << '\n';
    return 0;
}

int cmd_mesh_check(const Flags& f)
{
    const Config c = load(f);
    const TimeMesh mesh = mesh_from(f, c);
    const double tsoe = f.tsoe ? *f.tsoe : std::max(c.t_soe, mesh.t_end());
    const SoeApprox& soe = cached_soe(c.alpha, c.eps, dt_cut_for(c, mesh), tsoe);
    const auto rep = f.lipschitz ? check_semilinear_tau(mesh, soe, *f.lipschitz) : check_psd_conditions(mesh, soe);
    std::cout << rep.to_key_value();
    write_text(out_dir(f) / "admissibility.txt", rep.to_key_value());
    return rep.pass() ? 0 : 1;
}

int cmd_psd_verify(const Flags& f)
{
    Config c = load(f);
    const int n = f.n ? *f.n : 64;
    if (n < 1) throw UsageError("--n must be positive");
    TimeMesh mesh;
    if (f.mesh_file.empty()) {
        // the last row of the matrix needs the coefficients of step n + 1
        mesh = graded_mesh(n + 1, f.r ? *f.r : 2.0 / c.alpha, 1.0, c.alpha);
    } else {
        mesh = mesh_from(f, c);
        if (mesh.n() < n + 1) throw UsageError("psd verify needs a mesh with at least n + 1 steps");
        mesh = mesh.truncated(n + 1);
    }
    const double tsoe = f.tsoe ? *f.tsoe : std::max(c.t_soe, mesh.t_end());
    const SoeApprox& soe = cached_soe(c.alpha, c.eps, dt_cut_for(c, mesh), tsoe);
    const auto cert = certify_psd(assemble_bilinear(mesh, soe, n));
    std::cout << "n=" << n << '\n' << cert.to_key_value();
    write_text(out_dir(f) / "psd_certificate.txt", cert.to_key_value());
    return cert.pass ? 0 : 1;
}

int cmd_run(const Flags& f, bool semilinear)
{
    Config c = load(f);
    if (semilinear && !f.problem && c.problem == "linear") c.problem = "semilinear_poly";
    const bool nonlinear = c.problem == "semilinear_poly" || c.problem == "semilinear_sine" || c.problem == "sine" ||
                           c.problem == "allen_cahn";
    if (semilinear != nonlinear)
        throw UsageError("problem '" + c.problem + "' does not match 'run " + (semilinear ? "semilinear" : "linear") +
                         "'");
    RunConfig rc = make_run_config(c);
    if (f.tsoe) rc.soe = cached_soe(c.alpha, c.eps, dt_cut_for(c, rc.mesh), *f.tsoe);
    const auto res = run(rc);
    const auto dir = out_dir(f);
    {
        std::ofstream os(dir / "series.csv");
        write_series_csv(os, res.series);
        std::ofstream fo(dir / "final_field.csv");
        rc.space->write_csv(fo, res.final_field);
    }
    Report rep;
    rep.note("steps=" + std::to_string(rc.mesh.n()) + " nq=" + std::to_string(rc.soe.nq()));
    rep.note(fmt("setup_seconds=%.3f loop_seconds=%.3f", res.setup_seconds, res.loop_seconds));
    if (rc.problem.exact) rep.note(fmt("max_err_l2=%.6e max_err_h1=%.6e", res.max_err_l2, res.max_err_h1));
    rep.check(rc.soe.certificate().pass, fmt("soe certificate max_err=%.3e", rc.soe.certificate().max_err));
    rep.note(std::string("psd_conditions=") + (res.psd.pass() ? "pass" : "fail"));
    if (res.semilinear) rep.note(std::string("semilinear_tau=") + (res.semilinear->pass() ? "pass" : "fail"));
    if (rc.track_energy) rep.note(fmt("energy_max_increase=%.3e", res.energy_max_increase));
    return rep.finish(dir);
}

int cmd_run_linear(const Flags& f) { return cmd_run(f, false); }
int cmd_run_semilinear(const Flags& f) { return cmd_run(f, true); }

// ---------------------------------------------------------------------------

int cmd_study_convergence(const Flags& f)
{
    const Config c = load(f);
    const double a = c.alpha;
    const auto problem = parse_convergence_problem(c.problem);
    const std::vector<double> r_list = c.r_list.empty() ? std::vector<double>{1 / a, 2 / a, 3 / a} : c.r_list;
    const std::vector<int> n_list =
        c.n_list.empty() ? std::vector<int>(reference_n.begin(), reference_n.end()) : c.n_list;
    ConvergenceOptions opt;
    opt.backend = parse_backend(c.backend);
    if (c.space_n > 0) opt.space_n = c.space_n;
    opt.eps = c.eps;
    opt.t_soe = c.t_soe;
    opt.op = parse_operator(c.op);
    if (!c.first_step.empty()) opt.first_step = parse_first_step(c.first_step);
    const auto table = convergence_study(a, r_list, n_list, problem, opt);
    const auto dir = out_dir(f);
    write_convergence(dir, a, table);

    Report rep;
    rep.note(fmt("alpha=%g wall_seconds=%.1f", a, table.wall_seconds) + " first_step=" + to_string(opt.first_step));
    for (const auto& row : table.rows) {
        rep.check(row.soe_cert.pass, fmt("soe certificate r=%g N=%g max_err=%.3e", row.r, row.N, row.soe_cert.max_err));
        if (problem != ConvergenceProblem::linear) continue;
        if (auto ref = reference_error(a, row.r, row.N))
            rep.check(std::abs(row.err_l2 - *ref) <= 0.05 * *ref,
                      fmt("L2 error r=%g N=%g within 5%% of %.4e", row.r, row.N, *ref));
        if (auto ref = reference_order(a, row.r, row.N); ref && !std::isnan(row.order_l2))
            rep.check(std::abs(row.order_l2 - *ref) <= 0.03,
                      fmt("L2 order r=%g N=%g within 0.03 of %.4f", row.r, row.N, *ref));
    }
    for (double r : r_list) {
        const auto* last = table.find(r, n_list.back());
        if (!last || std::isnan(last->order_h1)) continue;
        const double expect = std::min(r * a, 2.0);
        rep.check(std::abs(last->order_h1 - expect) <= 0.1,
                  fmt("H1 order r=%g at largest N is %.4f, expected %.1f", r, last->order_h1, expect));
    }
    return rep.finish(dir);
}

int cmd_study_timing(const Flags& f)
{
    const Config c = load(f);
    const std::vector<int> n_list = c.n_list.empty() ? std::vector<int>{1000, 2000, 4000, 8000} : c.n_list;
    TimingOptions opt;
    opt.backend = parse_backend(c.backend);
    if (c.space_n > 0) opt.space_n = c.space_n;
    opt.repeats = c.repeats;
    if (f.r) opt.r = *f.r;
    const auto prof = timing_bench(c.alpha, n_list, opt);
    const auto dir = out_dir(f);
    write_timing(dir, prof);
    Report rep;
    rep.check(prof.slope_fast <= 1.25, fmt("fast slope %.3f <= 1.25", prof.slope_fast));
    rep.check(prof.slope_standard >= 1.7, fmt("standard slope %.3f >= 1.7", prof.slope_standard));
    rep.check(prof.nq_monotone_eps(), "nq nondecreasing as eps decreases");
    rep.check(prof.nq_monotone_dt(), "nq nondecreasing as dt decreases");
    for (const auto* sweep : {&prof.nq_vs_eps, &prof.nq_vs_dt})
        for (const auto& r : *sweep)
            rep.check(r.cert.pass, fmt("soe eps=%.0e dt=%.0e max_err=%.3e", r.eps, r.dt, r.cert.max_err));
    return rep.finish(dir);
}

int cmd_study_longtime(const Flags& f)
{
    const Config c = load(f);
    LongtimeOptions opt;
    opt.backend = parse_backend(c.backend);
    if (c.space_n > 0) opt.space_n = c.space_n;
    opt.eps = c.eps;
    opt.cadence = c.cadence > 1 ? c.cadence : opt.cadence;
    const double horizon = c.horizon > 0 ? c.horizon : 2000.0;
    const auto dir = out_dir(f);
    Report rep;
    for (const auto& name : f.sources) {
        const auto src = parse_longtime_source(name);
        const auto res = longtime_study(src, horizon, c.alpha, opt);
        write_longtime(dir, res);
        rep.note("source=" + name +
                 fmt(" steps=%g first_half_max=%.4f second_half_max=%.4f", res.steps, res.first_half_max,
                     res.second_half_max) +
                 " verdict=" + res.verdict());
        rep.check(res.soe_cert.pass, "soe certificate for " + name);
        rep.check(res.psd.pass(), "psd conditions on the long-time mesh for " + name);
        if (src == LongtimeSource::f2) rep.check(res.bounded, "f2 verdict is bounded");
        if (src == LongtimeSource::f1) rep.check(!res.bounded, "f1 verdict is growing");
    }
    return rep.finish(dir);
}

int cmd_study_energy(const Flags& f)
{
    const Config c = load(f);
    const std::string pname = c.problem == "sine" ? "sine" : "allen_cahn";
    const auto problem = parse_energy_problem(pname);
    EnergyOptions opt;
    opt.backend = parse_backend(c.backend);
    if (c.space_n > 0) opt.space_n = c.space_n;
    if (c.horizon > 0) opt.horizon = c.horizon;
    if (f.seed || !f.config.empty()) opt.seed = c.seed;
    if (!f.config.empty()) {
        opt.nu2 = c.nu2;
        opt.m_tr = c.m_tr;
    }
    opt.eps = c.eps;
    std::vector<double> alphas = c.alphas;
    if (alphas.empty())
        alphas = problem == EnergyProblem::sine ? std::vector<double>{0.3, 0.5, 0.7} : std::vector<double>{0.4, 0.6, 0.8};
    const auto st = energy_study(problem, alphas, opt);
    const auto dir = out_dir(f);
    write_energy(dir, st);
    Report rep;
    for (const auto& r : st.runs) {
        const bool theory = r.cond_tau && r.cond_tau->pass() && r.psd.pass();
        rep.check(r.soe_cert.pass, fmt("soe certificate alpha=%g", r.alpha));
        const std::string line = fmt("alpha=%g max energy increase %.3e", r.alpha, r.max_increase);
        if (theory)
            rep.check(r.stable, line + " (conditions hold)");
        else
            rep.note(line + " (conditions fail, observation only)");
    }
    if (st.untruncated)
        rep.check(st.original_energy_gap <= 0.01,
                  fmt("truncated vs untruncated original energy gap %.3e <= 1%%", st.original_energy_gap));
    return rep.finish(dir);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fast L2-1sigma time stepping for subdiffusion equations"};
    app.require_subcommand(1);
    Flags f;
    int (*action)(const Flags&) = nullptr;

    auto leaf = [&](CLI::App* parent, const char* name, const char* help, int (*fn)(const Flags&)) {
        auto* s = parent->add_subcommand(name, help);
        add_common(s, f);
        s->callback([&action, fn] { action = fn; });
        return s;
    };

    auto* soe = app.add_subcommand("soe", "sum-of-exponentials kernel approximation")->require_subcommand(1);
    auto* soe_build = leaf(soe, "build", "build and certify an SOE table, write soe.txt", cmd_soe_build);
    add_soe_params(soe_build, f);
    auto* soe_cert = leaf(soe, "certify", "re-certify an SOE table file", cmd_soe_certify);
    soe_cert->add_option("--file", f.soe_file, "SOE table written by 'soe build'")->required();
    soe_cert->add_option("--samples", f.samples, "number of log-spaced samples")->capture_default_str();

    auto* mesh = app.add_subcommand("mesh", "time meshes")->require_subcommand(1);
    auto* mesh_make = leaf(mesh, "make", "generate a graded or hybrid mesh, write mesh.txt", cmd_mesh_make);
    mesh_make->add_option("--kind", f.kind, "graded or hybrid")->check(CLI::IsMember({"graded", "hybrid"}));
    mesh_make->add_option("--horizon", f.horizon, "final time of a hybrid mesh");
    auto* mesh_check = leaf(mesh, "check", "print the admissibility report", cmd_mesh_check);
    mesh_check->add_option("--mesh", f.mesh_file, "mesh file, one t_k per line")->check(CLI::ExistingFile);
    mesh_check->add_option("--kind", f.kind, "graded or hybrid")->check(CLI::IsMember({"graded", "hybrid"}));
    mesh_check->add_option("--horizon", f.horizon, "final time of a hybrid mesh");
    mesh_check->add_option("--lipschitz", f.lipschitz, "also check the semilinear step bound for this constant");
    add_soe_params(mesh_check, f);

    auto* psd = app.add_subcommand("psd", "positive semidefiniteness certificate")->require_subcommand(1);
    auto* psd_verify = leaf(psd, "verify",
                            "certify the n x n bilinear form; the mesh needs n + 1 steps "
                            "(default: graded, r = 2/alpha, n = 64)",
                            cmd_psd_verify);
    psd_verify->add_option("--mesh", f.mesh_file, "mesh file, one t_k per line")->check(CLI::ExistingFile);
    add_soe_params(psd_verify, f);

    auto* runc = app.add_subcommand("run", "single run, writes series.csv and final_field.csv")->require_subcommand(1);
    for (bool sl : {false, true}) {
        auto* s = leaf(runc, sl ? "semilinear" : "linear", sl ? "semilinear problem" : "linear problem",
                       sl ? cmd_run_semilinear : cmd_run_linear);
        s->add_option("--problem", f.problem, "problem kind");
        s->add_option("--space-n", f.space_n, "spatial resolution");
        s->add_option("--kind", f.kind, "graded or hybrid")->check(CLI::IsMember({"graded", "hybrid"}));
        s->add_option("--horizon", f.horizon, "final time of a hybrid mesh");
        s->add_flag("--strict", f.strict, "refuse meshes that fail the stability conditions");
        s->add_option("--first-step", f.first_step, "first-step weight (default l21)")
            ->check(CLI::IsMember({"l21", "l1"}));
        add_soe_params(s, f);
    }

    auto* study = app.add_subcommand("study", "scripted studies with report.txt")->require_subcommand(1);
    auto* conv = leaf(study, "convergence", "graded-mesh convergence table", cmd_study_convergence);
    conv->add_option("--problem", f.problem, "linear, semilinear_poly or semilinear_sine");
    conv->add_option("--space-n", f.space_n, "spatial resolution");
    conv->add_option("--first-step", f.first_step, "first-step weight (default l1, matching the reference tables)")
        ->check(CLI::IsMember({"l21", "l1"}));
    auto* timing = leaf(study, "timing", "fast vs standard wall clock and N_q profiles", cmd_study_timing);
    timing->add_option("--repeats", f.repeats, "best of this many runs");
    timing->add_option("--space-n", f.space_n, "spatial resolution");
    auto* lt = leaf(study, "longtime", "long-time H1 behaviour", cmd_study_longtime);
    lt->add_option("--horizon", f.horizon, "final time (default 2000)");
    lt->add_option("--source", f.sources, "sources to run (f1, f2, zero)")->capture_default_str();
    lt->add_option("--space-n", f.space_n, "spatial resolution");
    auto* en = leaf(study, "energy", "discrete energy evolution", cmd_study_energy);
    en->add_option("--problem", f.problem, "allen_cahn or sine");
    en->add_option("--horizon", f.horizon, "final time (default 300)");
    en->add_option("--space-n", f.space_n, "spatial resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << "\n" << app.help();
        return 2;
    }
    if (!action) {
        std::cerr << app.help();
        return 2;
    }
    try {
        return action(f);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
