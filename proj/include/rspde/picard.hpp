#pragma once

#include <cstdint>
#include <vector>

#include "rspde/coefficients.hpp"
#include "rspde/green.hpp"
#include "rspde/grid.hpp"
#include "rspde/noise.hpp"
#include "rspde/obstacle.hpp"

namespace rspde {

/// Constants entering the fixed-point contraction bound
///   (2^(2p-1) a c_p B r^(lambda p - k) + 2^(2p-1) c_p C^(p/2)) * L^p < 1
/// where r is the domain diameter, C the sup-L2 kernel norm and L the
/// diffusion Lipschitz constant.  a and B come from the Kolmogorov
/// continuity argument and the kernel Holder embedding; they default to 1
/// and can be overridden when sharper values are known.  c_p <= 0 selects
/// the default moment constant (p/(p-1))^p.
struct ContractionInputs {
    double p = 2.0;
    double lambda = 1.0;
    int dim = 1;
    double a = 1.0;
    double b_holder = 1.0;
    double c_p = 0.0;
    double r_d = 1.0;
    double c_d = 0.0;
    double c_sigma = 0.0;
};

struct ContractionReport {
    ContractionInputs inputs;
    double c_p_used = 0.0;
    double exponent = 0.0;  // lambda * p - dim
    double lhs = 0.0;
    bool satisfied = false;
};

/// Validates ranges (p > 1; lambda in (0,1] for dim 1, (0,1) for dim 2,
/// (0,1/2) for dim 3; lambda * p > dim) and evaluates the bound.
ContractionReport contraction_condition(const ContractionInputs& inputs);

struct PicardOptions {
    int max_iterations = 50;
    double tol = 1e-8;
    double solver_tol = 1e-12;
    PenaltyParams penalty;
    ObstacleOptions obstacle;
    // The contraction bound is sufficient, not necessary: by default an
    // unsatisfied bound does not stop the run, it only marks the result as
    // outside the proven regime.  Set require_contraction to hard-fail.
    bool require_contraction = false;
    bool throw_on_nonconvergence = true;
};

struct PicardResult {
    SolutionTriplet triplet;         // final reflected solve (u = z + v)
    ScalarField v;                   // final stochastic convolution
    std::vector<double> sup_diffs;   // ||u_m - u_(m-1)||_inf per iteration
    std::vector<double> v_sup_diffs; // ||v_m - v_(m-1)||_inf, from iteration 2
    int iterations = 0;
    bool converged = false;
    ContractionReport condition;
};

/// Pathwise fixed-point iteration on one noise realization: u_0 = 0, then
/// v_m = kernel convolution of sigma(., u_(m-1)) against the increments and
/// u_m solves the two-wall problem with forcing v_m.  Stops when the sup
/// change drops below tol.  The contraction bound is evaluated up front and
/// failure to satisfy it is an error unless explicitly waived.
PicardResult picard_solve(const GreenKernel& kernel, const CoefficientPair& coeffs,
                          const WallPair& walls, const NoiseSample& noise,
                          const ContractionInputs& condition,
                          const PicardOptions& opts = {});

/// Empirical check that the two-wall solve is non-expansive in the forcing:
/// random forcing pairs are solved and ||z - z'||_inf is compared with
/// ||v - v'||_inf.  The discrete comparison principle makes the ratio <= 1;
/// violations beyond a 1e-8 slack are counted.
struct LipschitzProbeResult {
    int trials = 0;
    int violations = 0;
    double worst_ratio = 0.0;
};

LipschitzProbeResult pathwise_lipschitz_probe(const Drift& f, const WallPair& walls,
                                              const PenaltyParams& penalty,
                                              std::uint64_t seed, int trials,
                                              double amplitude = 0.5,
                                              double solver_tol = 1e-12);

}  // namespace rspde
