#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rspde/green.hpp"
#include "rspde/grid.hpp"
#include "rspde/noise.hpp"
#include "rspde/obstacle.hpp"
#include "rspde/picard.hpp"

using namespace rspde;

namespace {

ContractionInputs reference_inputs() {
    ContractionInputs in;
    in.p = 2.0;
    in.lambda = 1.0;
    in.dim = 1;
    in.a = 1.0;
    in.b_holder = 1.0;
    in.c_p = 4.0;
    in.r_d = 1.0;
    in.c_d = 0.0208333;
    in.c_sigma = 0.1;
    return in;
}

WallPair band(const Grid& g, double lo, double hi) {
    return WallPair::from_fields(ScalarField(g, lo), ScalarField(g, hi));
}

}  // namespace

TEST_CASE("contraction bound reference arithmetic") {
    ContractionReport rep = contraction_condition(reference_inputs());
    // 2^3 * 4 * (1*1*1 + 0.0208333) * 0.01 = 0.326666656.
    CHECK(rep.lhs == doctest::Approx(0.32666665600000006).epsilon(1e-12));
    CHECK(rep.satisfied);
    CHECK(rep.exponent == doctest::Approx(1.0));
    CHECK(rep.c_p_used == 4.0);

    ContractionInputs loud = reference_inputs();
    loud.c_sigma = 0.2;
    ContractionReport rep2 = contraction_condition(loud);
    CHECK(rep2.lhs == doctest::Approx(1.3066666240000002).epsilon(1e-12));
    CHECK_FALSE(rep2.satisfied);
}

TEST_CASE("default moment constant is (p/(p-1))^p") {
    ContractionInputs in = reference_inputs();
    in.c_p = 0.0;  // ask for the default; equals 4 at p = 2
    ContractionReport rep = contraction_condition(in);
    CHECK(rep.c_p_used == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(rep.lhs == doctest::Approx(0.32666665600000006).epsilon(1e-12));

    in.p = 3.0;
    in.c_p = 0.0;
    CHECK(contraction_condition(in).c_p_used ==
          doctest::Approx(std::pow(1.5, 3.0)).epsilon(1e-15));
}

TEST_CASE("contraction input validation") {
    ContractionInputs in = reference_inputs();
    in.p = 1.0;
    CHECK_THROWS_AS(contraction_condition(in), ValidationError);

    in = reference_inputs();
    in.lambda = 1.2;
    CHECK_THROWS_AS(contraction_condition(in), ValidationError);

    in = reference_inputs();
    in.dim = 2;  // lambda = 1 is outside (0,1) in 2D
    CHECK_THROWS_AS(contraction_condition(in), ValidationError);

    in = reference_inputs();
    in.dim = 2;
    in.lambda = 0.9;
    in.p = 2.0;  // lambda*p = 1.8 < dim
    CHECK_THROWS_AS(contraction_condition(in), ValidationError);
    in.p = 3.0;  // exponent 0.7 > 0
    CHECK_NOTHROW(contraction_condition(in));

    in = reference_inputs();
    in.c_sigma = -0.1;
    CHECK_THROWS_AS(contraction_condition(in), ValidationError);
}

TEST_CASE("degenerate diffusion reduces to the deterministic solve") {
    Grid g(1, 49);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    CoefficientPair coeffs{Drift([](Point p, double s) { return s - p.x; }),
                           Diffusion::constant(0.0)};
    NoiseSample noise = sample_white_noise(g, 9);

    PicardResult res =
        picard_solve(kernel, coeffs, walls, noise, ContractionInputs{});
    CHECK(res.converged);

    SolutionTriplet det = solve_two_wall(coeffs.f, ScalarField(g), walls, {});
    for (std::size_t i = 0; i < det.u.size(); ++i)
        CHECK(res.triplet.u[i] == doctest::Approx(det.u[i]).epsilon(1e-12));
}

TEST_CASE("multiplicative noise run satisfies the pathwise stage bound") {
    Grid g(1, 49);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    CoefficientPair coeffs{
        Drift::zero(),
        Diffusion([](Point, double s) { return 0.1 * s + 0.05; }, 0.1)};
    NoiseSample noise = sample_white_noise(g, 4242);

    PicardResult res =
        picard_solve(kernel, coeffs, walls, noise, ContractionInputs{});
    CHECK(res.converged);
    CHECK(res.condition.satisfied);
    REQUIRE(res.sup_diffs.size() >= 2);
    REQUIRE(res.v_sup_diffs.size() == res.sup_diffs.size() - 1);
    // ||u_m - u_(m-1)|| <= 2 ||v_m - v_(m-1)|| for m >= 2: the two-wall map
    // is non-expansive in the forcing and u = z + v.
    for (std::size_t m = 1; m < res.sup_diffs.size(); ++m)
        CHECK(res.sup_diffs[m] <= 2.0 * res.v_sup_diffs[m - 1] + 1e-9);
}

TEST_CASE("fixed seed and different initial guesses converge together") {
    Grid g(1, 49);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    CoefficientPair coeffs{
        Drift::zero(),
        Diffusion([](Point, double s) { return 0.1 * s + 0.05; }, 0.1)};
    NoiseSample noise = sample_white_noise(g, 31);

    PicardResult a = picard_solve(kernel, coeffs, walls, noise, {});
    PicardOptions opts;
    opts.obstacle.initial_guess =
        std::vector<double>(g.node_count(), 0.2);  // feasible but far off
    PicardResult b = picard_solve(kernel, coeffs, walls, noise, {}, opts);
    for (std::size_t i = 0; i < a.triplet.u.size(); ++i)
        CHECK(a.triplet.u[i] == doctest::Approx(b.triplet.u[i]).epsilon(1e-7));
}

TEST_CASE("unsatisfied bound still runs unless enforcement is requested") {
    Grid g(1, 29);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    CoefficientPair coeffs{
        Drift::zero(),
        Diffusion([](Point, double s) { return 0.2 * s + 0.01; }, 0.2)};
    NoiseSample noise = sample_white_noise(g, 77);

    // Default: run anyway, report the regime.
    PicardResult res = picard_solve(kernel, coeffs, walls, noise, {});
    CHECK_FALSE(res.condition.satisfied);
    CHECK(res.condition.lhs > 1.0);
    CHECK(res.iterations >= 1);

    PicardOptions strict;
    strict.require_contraction = true;
    CHECK_THROWS_AS(picard_solve(kernel, coeffs, walls, noise, {}, strict),
                    ValidationError);
}

TEST_CASE("condition inputs are auto-filled from the kernel and diffusion") {
    Grid g(1, 99);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    CoefficientPair coeffs{
        Drift::zero(),
        Diffusion([](Point, double s) { return 0.1 * s; }, 0.1)};
    NoiseSample noise = sample_white_noise(g, 8);

    PicardResult res = picard_solve(kernel, coeffs, walls, noise, {});
    CHECK(res.condition.inputs.c_d ==
          doctest::Approx(green_sup_l2(kernel)).epsilon(1e-15));
    CHECK(res.condition.inputs.c_sigma == doctest::Approx(0.1));
    CHECK(res.condition.inputs.r_d == 1.0);
    CHECK(res.condition.inputs.dim == 1);
}

TEST_CASE("forcing probe observes the non-expansive map") {
    Grid g(1, 39);
    WallPair walls = band(g, -0.4, 0.4);
    Drift f([](Point, double s) { return 0.3 * s; });
    LipschitzProbeResult probe = pathwise_lipschitz_probe(f, walls, {}, 13, 20);
    CHECK(probe.trials == 20);
    CHECK(probe.violations == 0);
    CHECK(probe.worst_ratio <= 1.0 + 1e-8);
    CHECK(probe.worst_ratio > 0.0);
    CHECK(std::isfinite(probe.worst_ratio));
}
