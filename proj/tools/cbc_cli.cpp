// Command-line front end for the control-based continuation toolkit.
//
//   cbc simulate     one settling run; trajectory CSV + summary
//   cbc analyze      controlled fixed points and their stability for a centre
//   cbc branch       branch tracking; diagram CSV + summary
//   cbc uncontrolled analytic Van der Pol branch; CSV + fold location
//   cbc gains-check  Routh-Hurwitz flags and the amplitude bound a_max
//
// Exit codes: 0 success, 2 validation/parse error, 3 not converged, 4 diverged.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbc/cbc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitDiverged = 4;

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::vector<std::string> overrides;
    long long seed = 0;  // accepted for harness uniformity; the system is deterministic
};

void add_common(CLI::App* app, CommonOptions& opts) {
    app->add_option("--config", opts.config_path, "configuration file (key = value lines)");
    app->add_option("--out", opts.out_path, "CSV output path");
    app->add_option("--set", opts.overrides, "override a configuration key (key=value)");
    app->add_option("--seed", opts.seed, "ignored; accepted for harness uniformity");
}

cbc::RunConfig load_config(const CommonOptions& opts) {
    std::string text;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw cbc::ValidationError("cannot open config file '" + opts.config_path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    cbc::RunConfig cfg = cbc::parse_config(text);
    for (const std::string& o : opts.overrides) cbc::apply_override(cfg, o);
    cbc::validate(cfg);
    return cfg;
}

// Opens --out, or returns nullptr when no output was requested.
std::unique_ptr<std::ofstream> open_out(const std::string& path) {
    if (path.empty()) return nullptr;
    auto out = std::make_unique<std::ofstream>(path);
    if (!*out) throw cbc::ValidationError("cannot open output file '" + path + "'");
    return out;
}

void put(const std::string& key, double v) {
    std::cout << key << " = " << cbc::format_number(v) << '\n';
}
void put(const std::string& key, const std::string& v) { std::cout << key << " = " << v << '\n'; }
void put(const std::string& key, bool v) { put(key, std::string(v ? "true" : "false")); }

std::string format_complex(const cbc::Complex& z) {
    return cbc::format_number(z.real()) + (z.imag() < 0 ? "-" : "+") +
           cbc::format_number(std::abs(z.imag())) + "i";
}

int status_exit(cbc::SettleStatus s) {
    switch (s) {
        case cbc::SettleStatus::Converged: return kExitOk;
        case cbc::SettleStatus::NotConverged: return kExitNotConverged;
        case cbc::SettleStatus::Diverged: return kExitDiverged;
    }
    return kExitNotConverged;
}

int run_simulate(const CommonOptions& opts, std::size_t stride) {
    const cbc::RunConfig cfg = load_config(opts);
    const cbc::OscillatorModel model = cbc::make_vdp_model(cfg.vdp, cfg.epsilon);
    auto out = open_out(opts.out_path);
    cbc::StepObserver observer;
    std::size_t count = 0;
    if (out) {
        *out << cbc::kTrajectoryCsvHeader << '\n';
        observer = [&](double t, const cbc::ExtendedState& s) {
            if (count++ % stride == 0) cbc::write_trajectory_row(*out, t, s, cfg.gains, cfg.center);
        };
    }
    const cbc::SettleResult r =
        cbc::settle_and_measure(model, cfg.gains, cfg.center, {}, cfg.settle, observer);
    put("status", std::string(cbc::to_string(r.status)));
    put("t_end", r.t_end);
    if (r.point) {
        put("mu", r.point->mu);
        put("a_est", r.point->a_est);
        put("omega_est", r.point->omega_est);
        put("settle_time", r.point->settle_time);
        put("f1", cbc::vdp_slow_functions(r.point->a_est, r.point->mu, cfg.vdp).f1);
    }
    put("e1_rms", r.residuals.e1_rms);
    put("e2", r.residuals.e2);
    put("e3", r.residuals.e3);
    return status_exit(r.status);
}

int run_analyze(const CommonOptions& opts) {
    const cbc::RunConfig cfg = load_config(opts);
    const cbc::OscillatorModel model = cbc::make_vdp_model(cfg.vdp, cfg.epsilon);
    const auto fps = cbc::controlled_fixed_points(model, cfg.gains, cfg.center);
    auto out = open_out(opts.out_path);
    if (out) {
        *out << "index,a,mu,eta,omega,direction_product,lambda1,lambda2,lambda3,max_real,stable\n";
    }
    put("fixed_points", static_cast<double>(fps.size()));
    for (std::size_t i = 0; i < fps.size(); ++i) {
        const auto& fp = fps[i];
        const cbc::StabilityReport rep = cbc::stability_report(fp, cfg.gains, model);
        const std::string p = "fp" + std::to_string(i) + ".";
        put(p + "a", fp.a);
        put(p + "mu", fp.mu);
        put(p + "eta", fp.eta);
        put(p + "omega", fp.omega);
        put(p + "a_max", rep.a_max);
        for (std::size_t k = 0; k < 4; ++k) put(p + "routh_" + std::to_string(k + 1), rep.routh_flags[k]);
        for (std::size_t k = 0; k < 3; ++k) {
            put(p + "cubic1_root" + std::to_string(k), format_complex(rep.cubic1_roots[k]));
        }
        for (std::size_t k = 0; k < 3; ++k) {
            put(p + "cubic2_root" + std::to_string(k), format_complex(rep.cubic2_roots[k]));
        }
        for (std::size_t k = 0; k < 6; ++k) {
            put(p + "eigen" + std::to_string(k), format_complex(rep.eigen6[k]));
        }
        if (rep.perturbative) {
            put(p + "direction_product", rep.perturbative->direction_product);
            put(p + "lambda1", rep.perturbative->lambda1);
            put(p + "lambda2", rep.perturbative->lambda2);
            put(p + "lambda3", rep.perturbative->lambda3);
        }
        put(p + "max_real", rep.max_real_part());
        put(p + "stable", rep.stable);
        if (out) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            const auto pe = rep.perturbative.value_or(cbc::PerturbativeEigs{nan, nan, nan, nan});
            *out << i;
            for (double v : {fp.a, fp.mu, fp.eta, fp.omega, pe.direction_product, pe.lambda1,
                             pe.lambda2, pe.lambda3, rep.max_real_part()}) {
                *out << ',' << cbc::format_number(v);
            }
            *out << ',' << (rep.stable ? 1 : 0) << '\n';
        }
    }
    return kExitOk;
}

int run_branch(const CommonOptions& opts, std::optional<std::size_t> steps) {
    cbc::RunConfig cfg = load_config(opts);
    if (steps) cfg.n_steps = *steps;
    cbc::validate(cfg);
    const cbc::OscillatorModel model = cbc::make_vdp_model(cfg.vdp, cfg.epsilon);
    const cbc::BifurcationDiagram d =
        cbc::run_branch(model, cfg.gains, cfg.center, cfg.n_steps, cfg.settle);
    if (auto out = open_out(opts.out_path)) {
        cbc::write_diagram_csv(*out, d);
    } else {
        cbc::write_diagram_csv(std::cout, d);
    }
    put("status", std::string(d.complete() ? "complete" : cbc::to_string(d.status)));
    put("points", static_cast<double>(d.points.size()));
    put("requested_steps", static_cast<double>(d.requested_steps));
    put("direction", static_cast<double>(d.direction));
    if (!d.points.empty()) {
        put("last_mu", d.points.back().mu);
        put("last_a_est", d.points.back().a_est);
    }
    return d.complete() ? kExitOk : status_exit(d.status);
}

int run_uncontrolled(const CommonOptions& opts, double mu_min, double mu_max, std::size_t points) {
    const cbc::RunConfig cfg = load_config(opts);
    if (points < 2) throw cbc::ValidationError("points must be at least 2");
    if (!(mu_max > mu_min)) throw cbc::ValidationError("mu-max must exceed mu-min");
    const cbc::FoldPoint fold = cbc::vdp_fold_point(cfg.vdp);
    if (auto out = open_out(opts.out_path)) {
        *out << "mu,a,lambda_u,omega,stable\n";
        for (std::size_t i = 0; i < points; ++i) {
            const double mu =
                mu_min + (mu_max - mu_min) * static_cast<double>(i) / static_cast<double>(points - 1);
            for (double a : cbc::vdp_branch_amplitudes(mu, cfg.vdp)) {
                const double lambda_u =
                    cfg.epsilon * cbc::vdp_slow_derivatives(a, mu, cfg.vdp).f1a;
                const double omega =
                    1.0 - cfg.epsilon / a * cbc::vdp_slow_functions(a, mu, cfg.vdp).f2;
                *out << cbc::format_number(mu) << ',' << cbc::format_number(a) << ','
                     << cbc::format_number(lambda_u) << ',' << cbc::format_number(omega) << ','
                     << (lambda_u < 0.0 ? 1 : 0) << '\n';
            }
        }
    }
    put("fold_mu", fold.mu);
    put("fold_a", fold.a);
    return kExitOk;
}

int run_gains_check(const CommonOptions& opts, std::optional<double> amplitude) {
    const cbc::RunConfig cfg = load_config(opts);
    const double a = amplitude.value_or(cfg.center.g0);
    const cbc::PllStability s = cbc::pll_stability(cfg.gains, a);
    put("a_max", s.a_max);
    put("amplitude", a);
    for (std::size_t k = 0; k < 4; ++k) put("routh_" + std::to_string(k + 1), s.flags[k]);
    put("stable", s.all());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Control-based continuation of limit cycles"};
    app.require_subcommand(1);

    CommonOptions common;
    std::size_t stride = 1;
    std::optional<std::size_t> steps;
    double mu_min = -0.2;
    double mu_max = 0.5;
    std::size_t points = 701;
    std::optional<double> amplitude;

    auto* simulate = app.add_subcommand("simulate", "settle one run and write its trajectory");
    add_common(simulate, common);
    simulate->add_option("--stride", stride, "write every N-th sample")->check(CLI::PositiveNumber);

    auto* analyze = app.add_subcommand("analyze", "fixed points and stability for a centre");
    add_common(analyze, common);

    auto* branch = app.add_subcommand("branch", "track a branch of limit cycles");
    add_common(branch, common);
    branch->add_option("--steps", steps, "number of continuation steps");

    auto* uncontrolled = app.add_subcommand("uncontrolled", "analytic uncontrolled diagram");
    add_common(uncontrolled, common);
    uncontrolled->add_option("--mu-min", mu_min, "lower end of the mu sweep");
    uncontrolled->add_option("--mu-max", mu_max, "upper end of the mu sweep");
    uncontrolled->add_option("--points", points, "number of mu samples");

    auto* gains_check = app.add_subcommand("gains-check", "Routh-Hurwitz tuning report");
    add_common(gains_check, common);
    gains_check->add_option("--amplitude", amplitude, "amplitude at which to evaluate (default g_0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*simulate) return run_simulate(common, stride);
        if (*analyze) return run_analyze(common);
        if (*branch) return run_branch(common, steps);
        if (*uncontrolled) return run_uncontrolled(common, mu_min, mu_max, points);
        if (*gains_check) return run_gains_check(common, amplitude);
    } catch (const cbc::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const cbc::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const cbc::EmptyIntersection& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitValidation;
}
