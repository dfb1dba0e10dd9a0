#include "rspde/picard.hpp"

#include <cmath>
#include <random>
#include <string>

namespace rspde {

ContractionReport contraction_condition(const ContractionInputs& in) {
    if (!(in.p > 1.0)) throw ValidationError("contraction: p must exceed 1");
    if (in.dim < 1 || in.dim > 3)
        throw ValidationError("contraction: dim must be 1, 2 or 3");
    const double lambda_max = in.dim == 1 ? 1.0 : in.dim == 2 ? 1.0 : 0.5;
    const bool closed_top = in.dim == 1;
    if (!(in.lambda > 0.0) ||
        (closed_top ? in.lambda > lambda_max : in.lambda >= lambda_max))
        throw ValidationError(
            "contraction: lambda out of range for dim " + std::to_string(in.dim) +
            " (need (0,1] in 1D, (0,1) in 2D, (0,1/2) in 3D)");
    if (!(in.a > 0.0) || !(in.b_holder > 0.0))
        throw ValidationError("contraction: a and B must be positive");
    if (!(in.r_d > 0.0)) throw ValidationError("contraction: r_d must be positive");
    if (!(in.c_d >= 0.0)) throw ValidationError("contraction: c_d must be >= 0");
    if (!(in.c_sigma >= 0.0))
        throw ValidationError("contraction: c_sigma must be >= 0");

    ContractionReport rep;
    rep.inputs = in;
    rep.exponent = in.lambda * in.p - in.dim;
    if (!(rep.exponent > 0.0))
        throw ValidationError(
            "contraction: need lambda * p > dim, got exponent " +
            std::to_string(rep.exponent));
    rep.c_p_used = in.c_p > 0.0 ? in.c_p : std::pow(in.p / (in.p - 1.0), in.p);
    const double front = std::pow(2.0, 2.0 * in.p - 1.0) * rep.c_p_used;
    const double holder_term =
        front * in.a * in.b_holder * std::pow(in.r_d, rep.exponent);
    const double iso_term = front * std::pow(in.c_d, in.p / 2.0);
    rep.lhs = (holder_term + iso_term) * std::pow(in.c_sigma, in.p);
    rep.satisfied = rep.lhs < 1.0;
    return rep;
}

PicardResult picard_solve(const GreenKernel& kernel, const CoefficientPair& coeffs,
                          const WallPair& walls, const NoiseSample& noise,
                          const ContractionInputs& condition,
                          const PicardOptions& opts) {
    const Grid& grid = kernel.grid();
    require_same_grid(grid, walls.grid(), "picard_solve");
    require_same_grid(grid, noise.grid, "picard_solve");
    if (opts.max_iterations < 1)
        throw ValidationError("picard_solve: need at least one iteration");
    if (!(opts.tol > 0.0)) throw ValidationError("picard_solve: tol must be positive");

    ContractionInputs cin = condition;
    cin.dim = grid.dim();
    cin.r_d = grid.diameter();
    if (cin.c_d <= 0.0) cin.c_d = green_sup_l2(kernel);
    if (cin.c_sigma <= 0.0) cin.c_sigma = coeffs.sigma.lipschitz();
    ContractionReport report = contraction_condition(cin);
    if (!report.satisfied && opts.require_contraction)
        throw ValidationError(
            "picard_solve: contraction bound not satisfied (lhs = " +
            std::to_string(report.lhs) + " >= 1)");

    PicardResult result{SolutionTriplet{ScalarField(grid), ScalarField(grid),
                                        {ScalarField(grid), ScalarField(grid), 0.0},
                                        {},
                                        0},
                        ScalarField(grid),
                        {},
                        {},
                        0,
                        false,
                        report};

    ScalarField u_prev(grid);  // u_0 = 0
    ScalarField v_prev(grid);
    ObstacleOptions obstacle_opts = opts.obstacle;
    for (int m = 1; m <= opts.max_iterations; ++m) {
        result.v = stochastic_convolution(kernel, coeffs.sigma, u_prev, noise);
        if (m > 1) result.v_sup_diffs.push_back(sup_diff(result.v, v_prev));
        v_prev = result.v;
        result.triplet = solve_two_wall(coeffs.f, result.v, walls, opts.penalty,
                                        opts.solver_tol, obstacle_opts);
        result.iterations = m;
        const double diff = sup_diff(result.triplet.u, u_prev);
        result.sup_diffs.push_back(diff);
        u_prev = result.triplet.u;
        obstacle_opts.initial_guess = result.triplet.z.values;  // warm start
        if (diff <= opts.tol) {
            result.converged = true;
            return result;
        }
    }
    if (opts.throw_on_nonconvergence)
        throw ConvergenceError("picard_solve: iteration budget exhausted",
                               result.sup_diffs.back());
    return result;
}

LipschitzProbeResult pathwise_lipschitz_probe(const Drift& f, const WallPair& walls,
                                              const PenaltyParams& penalty,
                                              std::uint64_t seed, int trials,
                                              double amplitude, double solver_tol) {
    if (trials < 1) throw ValidationError("lipschitz probe: need at least one trial");
    if (!(amplitude > 0.0))
        throw ValidationError("lipschitz probe: amplitude must be positive");
    const Grid& grid = walls.grid();
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };

    LipschitzProbeResult out;
    out.trials = trials;
    for (int t = 0; t < trials; ++t) {
        ScalarField v1(grid), v2(grid);
        for (std::size_t i = 0; i < v1.size(); ++i) {
            v1.values[i] = uniform(-amplitude, amplitude);
            v2.values[i] = v1.values[i] + uniform(-amplitude, amplitude);
        }
        const SolutionTriplet s1 = solve_two_wall(f, v1, walls, penalty, solver_tol);
        const SolutionTriplet s2 = solve_two_wall(f, v2, walls, penalty, solver_tol);
        const double dv = sup_diff(v1, v2);
        if (dv == 0.0) continue;
        const double dz = sup_diff(s1.z, s2.z);
        const double ratio = dz / dv;
        out.worst_ratio = std::max(out.worst_ratio, ratio);
        if (dz > dv + 1e-8) ++out.violations;
    }
    return out;
}

}  // namespace rspde
