#pragma once

// TOML run/study configuration. Sections: top level (study, alpha), [soe],
// [mesh], [space], [problem], [run], [study]. Unknown keys are rejected.

#include "experiments.hpp"

#include <toml.hpp>

#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastl21 {

struct Config {
    std::string study = "run";  // run | convergence | timing | longtime | energy
    double alpha = 0.5;

    // [soe]
    double eps = 1e-12;
    std::string dt_rule = "sigma_tau2";  // sigma_tau2 | fixed
    double dt = 1e-5;                    // used when dt_rule = fixed
    double t_soe = 1.0;

    // [mesh]
    std::string mesh = "graded";  // graded | hybrid
    int n = 100;
    double r = 4.0;
    double t_end = 1.0;
    int n_graded = 100;
    double t_graded_end = 1.0;
    double growth = 1.005;
    double tau_max = 0.2;
    double horizon = 0;  // 0 picks the study default

    // [space]
    std::string backend = "cheb";
    int space_n = 0;  // 0 picks the study default

    // [problem]
    std::string problem = "linear";  // linear | semilinear_poly | semilinear_sine | f1 | f2 | zero | sine | allen_cahn
    double nu2 = 1.0;
    double m_tr = 1.0;
    bool truncate = true;
    std::uint64_t seed = 42;

    // [run]
    std::string op = "fast";
    int cadence = 1;
    bool strict = false;
    std::string first_step;  // l21 | l1, empty picks the study default

    // [study]
    std::vector<double> r_list;
    std::vector<int> n_list;
    std::vector<double> alphas;
    int repeats = 3;

    bool operator==(const Config&) const = default;
};

namespace detail {

inline void reject_unknown(const toml::table& t, const std::set<std::string>& allowed, const std::string& where)
{
    for (const auto& [k, v] : t) {
        (void)v;
        if (!allowed.count(std::string(k.str())))
            throw std::invalid_argument("config: unknown key '" + std::string(k.str()) + "' in " + where);
    }
}

template <class T>
void read_key(const toml::table& t, const char* key, T& out)
{
    const auto* node = t.get(key);
    if (!node) return;
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = node->value<double>()) {
            out = *v;
            return;
        }
    } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
        if (auto v = node->value<std::int64_t>()) {
            if (*v < 0 && std::is_same_v<T, std::uint64_t>) throw std::invalid_argument(std::string("config: negative ") + key);
            out = static_cast<T>(*v);
            return;
        }
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node->value<bool>()) {
            out = *v;
            return;
        }
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node->value<std::string>()) {
            out = *v;
            return;
        }
    } else {
        if (const auto* arr = node->as_array()) {
            out.clear();
            for (const auto& el : *arr) {
                using E = typename T::value_type;
                auto v = el.template value<std::conditional_t<std::is_same_v<E, int>, std::int64_t, double>>();
                if (!v) throw std::invalid_argument(std::string("config: bad element in ") + key);
                out.push_back(static_cast<E>(*v));
            }
            return;
        }
    }
    throw std::invalid_argument(std::string("config: wrong type for '") + key + "'");
}

inline const toml::table* section(const toml::table& root, const char* name)
{
    const auto* node = root.get(name);
    if (!node) return nullptr;
    const auto* t = node->as_table();
    if (!t) throw std::invalid_argument(std::string("config: '") + name + "' must be a table");
    return t;
}

template <class T>
toml::array to_array(const std::vector<T>& v)
{
    toml::array a;
    for (const auto& x : v) {
        if constexpr (std::is_same_v<T, int>)
            a.push_back(static_cast<std::int64_t>(x));
        else
            a.push_back(x);
    }
    return a;
}

}  // namespace detail

inline void validate(const Config& c)
{
    static const std::set<std::string> studies{"run", "convergence", "timing", "longtime", "energy"};
    static const std::set<std::string> problems{"linear", "semilinear_poly", "semilinear_sine", "f1", "f2",
                                                "zero",   "sine",            "allen_cahn"};
    if (!studies.count(c.study)) throw std::invalid_argument("config: unknown study '" + c.study + "'");
    if (!problems.count(c.problem)) throw std::invalid_argument("config: unknown problem '" + c.problem + "'");
    if (!(c.alpha > 0 && c.alpha < 1)) throw std::invalid_argument("config: alpha must lie in (0, 1)");
    if (c.dt_rule != "sigma_tau2" && c.dt_rule != "fixed") throw std::invalid_argument("config: dt_rule must be sigma_tau2 or fixed");
    if (c.mesh != "graded" && c.mesh != "hybrid") throw std::invalid_argument("config: mesh must be graded or hybrid");
    parse_backend(c.backend);
    parse_operator(c.op);
    if (!c.first_step.empty()) parse_first_step(c.first_step);
    if (c.n < 2 || (c.space_n != 0 && c.space_n < 3) || c.cadence < 1 || c.horizon < 0)
        throw std::invalid_argument("config: sizes out of range");
}

inline Config parse_config(const std::string& text)
{
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: " << e.description() << " at line " << e.source().begin.line;
        throw std::invalid_argument(os.str());
    }
    using detail::read_key;
    detail::reject_unknown(root, {"study", "alpha", "soe", "mesh", "space", "problem", "run", "study_params"}, "top level");
    Config c;
    read_key(root, "study", c.study);
    read_key(root, "alpha", c.alpha);
    if (const auto* t = detail::section(root, "soe")) {
        detail::reject_unknown(*t, {"eps", "dt_rule", "dt", "t_soe"}, "[soe]");
        read_key(*t, "eps", c.eps);
        read_key(*t, "dt_rule", c.dt_rule);
        read_key(*t, "dt", c.dt);
        read_key(*t, "t_soe", c.t_soe);
    }
    if (const auto* t = detail::section(root, "mesh")) {
        detail::reject_unknown(*t, {"kind", "n", "r", "t_end", "n_graded", "t_graded_end", "growth", "tau_max", "horizon"},
                               "[mesh]");
        read_key(*t, "kind", c.mesh);
        read_key(*t, "n", c.n);
        read_key(*t, "r", c.r);
        read_key(*t, "t_end", c.t_end);
        read_key(*t, "n_graded", c.n_graded);
        read_key(*t, "t_graded_end", c.t_graded_end);
        read_key(*t, "growth", c.growth);
        read_key(*t, "tau_max", c.tau_max);
        read_key(*t, "horizon", c.horizon);
    }
    if (const auto* t = detail::section(root, "space")) {
        detail::reject_unknown(*t, {"backend", "n"}, "[space]");
        read_key(*t, "backend", c.backend);
        read_key(*t, "n", c.space_n);
    }
    if (const auto* t = detail::section(root, "problem")) {
        detail::reject_unknown(*t, {"kind", "nu2", "m_tr", "truncate", "seed"}, "[problem]");
        read_key(*t, "kind", c.problem);
        read_key(*t, "nu2", c.nu2);
        read_key(*t, "m_tr", c.m_tr);
        read_key(*t, "truncate", c.truncate);
        read_key(*t, "seed", c.seed);
    }
    if (const auto* t = detail::section(root, "run")) {
        detail::reject_unknown(*t, {"operator", "cadence", "strict", "first_step"}, "[run]");
        read_key(*t, "operator", c.op);
        read_key(*t, "cadence", c.cadence);
        read_key(*t, "strict", c.strict);
        read_key(*t, "first_step", c.first_step);
    }
    if (const auto* t = detail::section(root, "study_params")) {
        detail::reject_unknown(*t, {"r_list", "n_list", "alphas", "repeats"}, "[study_params]");
        read_key(*t, "r_list", c.r_list);
        read_key(*t, "n_list", c.n_list);
        read_key(*t, "alphas", c.alphas);
        read_key(*t, "repeats", c.repeats);
    }
    validate(c);
    return c;
}

inline Config load_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

inline std::string serialize_config(const Config& c)
{
    toml::table root;
    root.insert("study", c.study);
    root.insert("alpha", c.alpha);
    root.insert("soe", toml::table{{"eps", c.eps}, {"dt_rule", c.dt_rule}, {"dt", c.dt}, {"t_soe", c.t_soe}});
    root.insert("mesh", toml::table{{"kind", c.mesh},
                                    {"n", static_cast<std::int64_t>(c.n)},
                                    {"r", c.r},
                                    {"t_end", c.t_end},
                                    {"n_graded", static_cast<std::int64_t>(c.n_graded)},
                                    {"t_graded_end", c.t_graded_end},
                                    {"growth", c.growth},
                                    {"tau_max", c.tau_max},
                                    {"horizon", c.horizon}});
    root.insert("space", toml::table{{"backend", c.backend}, {"n", static_cast<std::int64_t>(c.space_n)}});
    root.insert("problem", toml::table{{"kind", c.problem},
                                       {"nu2", c.nu2},
                                       {"m_tr", c.m_tr},
                                       {"truncate", c.truncate},
                                       {"seed", static_cast<std::int64_t>(c.seed)}});
    toml::table run{{"operator", c.op}, {"cadence", static_cast<std::int64_t>(c.cadence)}, {"strict", c.strict}};
    if (!c.first_step.empty()) run.insert("first_step", c.first_step);
    root.insert("run", std::move(run));
    root.insert("study_params", toml::table{{"r_list", detail::to_array(c.r_list)},
                                            {"n_list", detail::to_array(c.n_list)},
                                            {"alphas", detail::to_array(c.alphas)},
                                            {"repeats", static_cast<std::int64_t>(c.repeats)}});
    std::ostringstream os;
    os << root << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Building runtime objects from a config

inline TimeMesh make_mesh(const Config& c)
{
    if (c.mesh == "graded") return graded_mesh(c.n, c.r, c.t_end, c.alpha);
    return hybrid_mesh(c.n_graded, c.r, c.t_graded_end, c.growth, c.tau_max, c.horizon > 0 ? c.horizon : 2000.0,
                       c.alpha);
}

inline double dt_cut_for(const Config& c, const TimeMesh& mesh)
{
    return c.dt_rule == "fixed" ? c.dt : mesh.sigma() * mesh.tau(2);
}

inline RunConfig make_run_config(const Config& c)
{
    RunConfig rc;
    rc.mesh = make_mesh(c);
    rc.soe = cached_soe(c.alpha, c.eps, dt_cut_for(c, rc.mesh), c.t_soe);
    rc.space = build_space(parse_backend(c.backend), c.space_n > 0 ? c.space_n : 24);
    rc.op = parse_operator(c.op);
    rc.cadence = c.cadence;
    rc.strict = c.strict;
    if (!c.first_step.empty()) rc.first_step = parse_first_step(c.first_step);
    const double pi = std::numbers::pi;
    auto sine_shape = [pi](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
    Problem& p = rc.problem;
    if (c.problem == "linear") {
        p = manufactured_problem(ConvergenceProblem::linear, c.alpha);
    } else if (c.problem == "semilinear_poly") {
        p = manufactured_problem(ConvergenceProblem::semilinear_poly, c.alpha);
    } else if (c.problem == "semilinear_sine") {
        p = manufactured_problem(ConvergenceProblem::semilinear_sine, c.alpha);
    } else if (c.problem == "f1" || c.problem == "f2" || c.problem == "zero") {
        p.initial = sine_shape;
        if (c.problem == "f1") p.source = [](double t, double, double) { return t * std::sin(0.2 * t); };
        if (c.problem == "f2")
            p.source = [](double t, double, double) { return 5 * std::exp(-0.0005 * t) * std::sin(0.005 * t); };
    } else if (c.problem == "sine") {
        p.initial = sine_shape;
        p.nonlinearity = sine_reaction();
    } else {
        p.initial_field = random_field(*rc.space, 0.05, c.seed);
        p.nonlinearity = c.truncate ? make_truncated(c.m_tr).as_nonlinearity() : allen_cahn();
        p.alt_potential = [](double u) { return 0.25 * (u * u - 1) * (u * u - 1); };
    }
    p.diffusion = c.nu2;
    if (p.nonlinearity) rc.track_energy = true;
    return rc;
}

}  // namespace fastl21
