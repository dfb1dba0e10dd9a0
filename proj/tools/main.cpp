// Command-line front end: deterministic two-wall solves, single-path
// stochastic runs, Monte Carlo ensembles, the contraction-bound checker and
// Green kernel dumps.  Exit codes: 0 success, 2 parse error, 3 solver
// non-convergence, 4 validation failure.
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rspde/ensemble.hpp"
#include "rspde/errors.hpp"
#include "rspde/green.hpp"
#include "rspde/io.hpp"
#include "rspde/noise.hpp"
#include "rspde/obstacle.hpp"
#include "rspde/picard.hpp"
#include "rspde/problem_spec.hpp"

namespace {

using nlohmann::json;
using namespace rspde;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

ProblemSpec load_spec(const CommonFlags& flags) {
    ProblemSpec spec = load_problem_spec(flags.config_path);
    if (flags.seed) spec.seed = *flags.seed;
    if (flags.out_dir) spec.out_dir = *flags.out_dir;
    return spec;
}

std::string hash_stamp(const ProblemSpec& spec) {
    return "config_hash=" + hash_hex(config_hash(spec.echo()));
}

void write_echo(const ProblemSpec& spec) {
    write_text_file(spec.out_dir + "/config_echo.json", spec.echo().dump(2) + "\n");
}

std::string fmt5(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.5f", x);
    return buf;
}

int run_solve(const CommonFlags& flags) {
    const ProblemSpec spec = load_spec(flags);
    const Grid grid = spec.make_grid();
    const WallPair walls = spec.make_walls(grid);
    const Drift f = spec.make_drift();
    const ScalarField v = spec.has_v() ? spec.make_v(grid) : ScalarField(grid);

    TwoWallTrace trace;
    const SolutionTriplet sol =
        solve_two_wall(f, v, walls, spec.penalty, spec.tol, {}, &trace);

    const std::vector<std::string> stamps{hash_stamp(spec)};
    write_text_file(
        spec.out_dir + "/solution.csv",
        solution_csv(sol.u, sol.measures,
                     identity_residual(f, v, sol.z, sol.measures), stamps));

    json diag;
    diag["iterations"] = sol.iterations;
    diag["sup_diffs"] = trace.stage_change;  // outer penalty stage changes
    diag["condition"] = nullptr;             // deterministic run, no noise
    diag["residuals"] = residual_report_json(sol.residuals);
    diag["eta_mass"] = sol.measures.eta_mass();
    diag["xi_mass"] = sol.measures.xi_mass();
    diag["config_hash"] = hash_hex(config_hash(spec.echo()));
    write_text_file(spec.out_dir + "/diagnostics.json", diag.dump(2) + "\n");
    write_echo(spec);

    std::cout << "solve: " << grid.node_count() << " nodes, " << sol.iterations
              << " engine iterations\n"
              << "  sup |u| = " << format_double(sup_norm(sol.u))
              << ", eta mass = " << format_double(sol.measures.eta_mass())
              << ", xi mass = " << format_double(sol.measures.xi_mass()) << "\n"
              << "  residual check: " << (sol.residuals.pass() ? "pass" : "FAIL")
              << "\n";
    return 0;
}

int run_spde(const CommonFlags& flags) {
    const ProblemSpec spec = load_spec(flags);
    if (spec.has_v())
        throw ValidationError(
            "spde: the forcing comes from the noise; remove the v block");
    if (!spec.has_diffusion())
        throw ValidationError("spde: a diffusion block is required");

    const Grid grid = spec.make_grid();
    const WallPair walls = spec.make_walls(grid);
    CoefficientPair coeffs{spec.make_drift(), spec.make_diffusion()};
    const GreenKernel kernel = discrete_green(grid);
    const NoiseSample noise = sample_white_noise(grid, spec.seed);

    PicardOptions opts;
    opts.max_iterations = spec.picard_max_iterations;
    opts.tol = spec.picard_tol;
    opts.solver_tol = spec.tol;
    opts.penalty = spec.penalty;
    const PicardResult res = picard_solve(kernel, coeffs, walls, noise,
                                          spec.make_condition_inputs(), opts);

    const std::vector<std::string> stamps{"seed=" + std::to_string(spec.seed),
                                          hash_stamp(spec)};
    write_text_file(
        spec.out_dir + "/solution.csv",
        solution_csv(res.triplet.u, res.triplet.measures,
                     identity_residual(coeffs.f, res.v, res.triplet.z,
                                       res.triplet.measures),
                     stamps));
    write_text_file(spec.out_dir + "/noise.csv", noise_csv(noise, stamps));

    json diag;
    diag["iterations"] = res.iterations;
    diag["sup_diffs"] = res.sup_diffs;
    diag["v_sup_diffs"] = res.v_sup_diffs;
    diag["converged"] = res.converged;
    diag["condition"] = condition_json(res.condition);
    diag["regime"] =
        res.condition.satisfied ? "proven contraction" : "outside proven regime";
    diag["residuals"] = residual_report_json(res.triplet.residuals);
    diag["seed"] = spec.seed;
    diag["config_hash"] = hash_hex(config_hash(spec.echo()));
    write_text_file(spec.out_dir + "/diagnostics.json", diag.dump(2) + "\n");
    write_echo(spec);

    std::cout << "spde: seed " << spec.seed << ", " << res.iterations
              << " fixed-point iterations, "
              << (res.converged ? "converged" : "budget exhausted") << "\n"
              << "  sup |u| = " << format_double(sup_norm(res.triplet.u)) << "\n"
              << "  contraction lhs = " << format_double(res.condition.lhs) << " ("
              << (res.condition.satisfied ? "proven contraction"
                                          : "outside proven regime")
              << ")\n";
    return 0;
}

int run_ensemble_cmd(const CommonFlags& flags, int replicates, int workers,
                     std::vector<double> p_list) {
    const ProblemSpec spec = load_spec(flags);
    if (spec.has_v())
        throw ValidationError(
            "ensemble: the forcing comes from the noise; remove the v block");
    if (!spec.has_diffusion())
        throw ValidationError("ensemble: a diffusion block is required");
    if (p_list.empty()) p_list.push_back(spec.make_condition_inputs().p);

    const Grid grid = spec.make_grid();
    const WallPair walls = spec.make_walls(grid);
    CoefficientPair coeffs{spec.make_drift(), spec.make_diffusion()};
    const GreenKernel kernel = discrete_green(grid);

    PicardOptions opts;
    opts.max_iterations = spec.picard_max_iterations;
    opts.tol = spec.picard_tol;
    opts.solver_tol = spec.tol;
    opts.penalty = spec.penalty;
    const EnsembleSummary summary =
        run_ensemble(kernel, coeffs, walls, spec.make_condition_inputs(), opts,
                     spec.seed, replicates, workers, p_list.front());

    const std::vector<std::string> stamps{"seed=" + std::to_string(spec.seed),
                                          hash_stamp(spec)};
    write_text_file(spec.out_dir + "/ensemble.csv", ensemble_csv(summary, stamps));

    std::vector<double> sups;
    for (const auto& rec : summary.replicates)
        if (rec.error.empty()) sups.push_back(rec.sup_u);

    json moments = json::array();
    for (double p : p_list) {
        const auto [est, se] = estimate_sup_moment(sups, p);
        moments.push_back({{"p", p}, {"estimate", est}, {"std_error", se}});
    }
    json failures = json::array();
    for (const auto& rec : summary.replicates)
        if (!rec.error.empty())
            failures.push_back(
                {{"r", rec.replicate}, {"seed", rec.seed}, {"error", rec.error}});

    json out;
    out["replicates"] = replicates;
    out["converged"] = summary.converged_count;
    out["failed"] = summary.failed_count;
    out["p"] = summary.p;
    out["moment"] = summary.moment;
    out["std_error"] = summary.std_error;
    out["moments"] = moments;
    out["decay"] = {{"rate", summary.decay.rate},
                    {"points_used", summary.decay.points_used},
                    {"truncated", summary.decay.truncated},
                    {"valid", summary.decay.valid}};
    out["condition"] = condition_json(summary.condition);
    out["regime"] = summary.condition.satisfied ? "proven contraction"
                                                : "outside proven regime";
    out["failures"] = failures;
    out["base_seed"] = spec.seed;
    out["config_hash"] = hash_hex(config_hash(spec.echo()));
    write_text_file(spec.out_dir + "/summary.json", out.dump(2) + "\n");
    write_echo(spec);

    std::cout << "ensemble: " << replicates << " replicates ("
              << summary.converged_count << " converged, " << summary.failed_count
              << " failed), base seed " << spec.seed << "\n"
              << "  E sup|u|^" << format_double(summary.p) << " = "
              << format_double(summary.moment) << " +/- "
              << format_double(summary.std_error) << "\n";
    if (summary.decay.valid)
        std::cout << "  stage decay rate = " << format_double(summary.decay.rate)
                  << "\n";
    return 0;
}

int run_check_condition(const ContractionInputs& inputs) {
    const ContractionReport rep = contraction_condition(inputs);
    const double front = std::pow(2.0, 2.0 * inputs.p - 1.0) * rep.c_p_used;
    const double holder = rep.inputs.a * rep.inputs.b_holder *
                          std::pow(rep.inputs.r_d, rep.exponent);
    const double iso = std::pow(rep.inputs.c_d, inputs.p / 2.0);
    const double amp = std::pow(rep.inputs.c_sigma, inputs.p);

    std::cout << "moment prefactor  2^(2p-1) * c_p             = "
              << format_double(front) << "\n"
              << "holder term       a * B * r_D^(lambda*p-k)   = "
              << format_double(holder) << "\n"
              << "isometry term     C_D^(p/2)                  = "
              << format_double(iso) << "\n"
              << "noise amplitude   C_sigma^p                  = "
              << format_double(amp) << "\n"
              << "lhs = prefactor * (holder + isometry) * amplitude = "
              << format_double(front * (holder + iso) * amp) << "\n"
              << "lhs = " << fmt5(rep.lhs) << "\n"
              << (rep.satisfied ? "SATISFIED" : "NOT SATISFIED") << "\n";
    return 0;
}

int run_green(int dim, int n, double lambda, const std::string& out_dir) {
    const Grid grid(dim, n);
    if (lambda <= 0.0) lambda = dim == 1 ? 1.0 : 0.9;
    const GreenKernel kernel = discrete_green(grid);
    const double c_d = green_sup_l2(kernel);
    const double b_hat = green_holder_constant(kernel, lambda);

    write_text_file(out_dir + "/kernel.csv", kernel_csv(kernel));
    json diag;
    diag["k"] = dim;
    diag["n"] = n;
    diag["lambda"] = lambda;
    diag["c_d"] = c_d;
    diag["b_holder"] = b_hat;
    // The empirical constant is a max over finitely many node pairs, hence a
    // lower bound for the true one; a bound "satisfied" with it is advisory.
    diag["b_holder_is_empirical_lower_bound"] = true;
    write_text_file(out_dir + "/green.json", diag.dump(2) + "\n");

    std::cout << "green: k=" << dim << " n=" << n << "\n"
              << "  C_D (sup L2 norm^2)      = " << format_double(c_d) << "\n"
              << "  B-hat (lambda=" << format_double(lambda)
              << ", empirical lower bound) = " << format_double(b_hat) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reflected elliptic SPDE solver: two-wall obstacle problems, "
                 "pathwise fixed-point iteration and seeded Monte Carlo"};
    app.require_subcommand(1);

    CommonFlags solve_flags, spde_flags, ens_flags;

    auto add_common = [](CLI::App* cmd, CommonFlags& flags, bool with_seed) {
        cmd->add_option("--config", flags.config_path, "problem file (JSON)")
            ->required();
        cmd->add_option("--out", flags.out_dir, "output directory override");
        if (with_seed) cmd->add_option("--seed", flags.seed, "base seed override");
    };

    CLI::App* solve = app.add_subcommand(
        "solve", "deterministic two-wall reflected problem");
    add_common(solve, solve_flags, false);

    CLI::App* spde = app.add_subcommand(
        "spde", "single-path stochastic run (fixed noise realization)");
    add_common(spde, spde_flags, true);

    CLI::App* ens = app.add_subcommand("ensemble", "seeded Monte Carlo ensemble");
    add_common(ens, ens_flags, true);
    int replicates = 100;
    int workers = 1;
    std::vector<double> p_list;
    ens->add_option("--replicates", replicates, "number of noise realizations")
        ->check(CLI::PositiveNumber);
    ens->add_option("--workers", workers, "worker thread count")
        ->check(CLI::PositiveNumber);
    ens->add_option("--p", p_list, "moment exponents (repeatable)");

    CLI::App* check = app.add_subcommand(
        "check-condition", "evaluate the fixed-point contraction bound");
    ContractionInputs ci;
    check->add_option("--p", ci.p, "moment exponent (> 1)");
    check->add_option("--lambda", ci.lambda, "kernel Holder exponent");
    check->add_option("--k", ci.dim, "space dimension");
    check->add_option("--a", ci.a, "continuity-theorem constant");
    check->add_option("--B", ci.b_holder, "kernel Holder constant");
    check->add_option("--cp", ci.c_p, "moment constant (<= 0 for (p/(p-1))^p)");
    check->add_option("--rd", ci.r_d, "domain diameter");
    check->add_option("--cd", ci.c_d, "kernel sup L2 norm^2");
    check->add_option("--csigma", ci.c_sigma, "diffusion Lipschitz constant");

    CLI::App* green = app.add_subcommand(
        "green", "dump the discrete kernel and its constants");
    int green_dim = 1;
    int green_n = 99;
    double green_lambda = 0.0;
    std::string green_out = "out";
    green->add_option("--k", green_dim, "space dimension");
    green->add_option("--n", green_n, "interior nodes per axis");
    green->add_option("--lambda", green_lambda, "Holder exponent");
    green->add_option("--out", green_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*solve) return run_solve(solve_flags);
        if (*spde) return run_spde(spde_flags);
        if (*ens) return run_ensemble_cmd(ens_flags, replicates, workers, p_list);
        if (*check) return run_check_condition(ci);
        if (*green) return run_green(green_dim, green_n, green_lambda, green_out);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
