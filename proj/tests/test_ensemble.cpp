#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rspde/ensemble.hpp"
#include "rspde/green.hpp"
#include "rspde/noise.hpp"

using namespace rspde;

namespace {

WallPair band(const Grid& g, double lo, double hi) {
    return WallPair::from_fields(ScalarField(g, lo), ScalarField(g, hi));
}

CoefficientPair small_multiplicative() {
    return {Drift::zero(),
            Diffusion([](Point, double s) { return 0.1 * s + 0.05; }, 0.1)};
}

}  // namespace

TEST_CASE("geometric decay fit oracles") {
    DecayFit exact = geometric_decay_fit({1.0, 0.5, 0.25, 0.125});
    CHECK(exact.valid);
    CHECK(exact.rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(exact.points_used == 4);
    CHECK_FALSE(exact.truncated);

    DecayFit flat = geometric_decay_fit({1.0, 1.0, 1.0});
    CHECK(flat.rate == doctest::Approx(1.0).epsilon(1e-12));

    // Non-geometric series: least-squares slope in log space.
    DecayFit ls = geometric_decay_fit({1.0, 0.4, 0.2, 0.07});
    CHECK(ls.rate == doctest::Approx(0.4201713271334678).epsilon(1e-12));

    DecayFit cut = geometric_decay_fit({1.0, 0.5, 0.0, 0.25});
    CHECK(cut.truncated);
    CHECK(cut.points_used == 2);
    CHECK(cut.valid);
    CHECK(cut.rate == doctest::Approx(0.5).epsilon(1e-12));

    DecayFit empty = geometric_decay_fit({});
    CHECK_FALSE(empty.valid);
    DecayFit single = geometric_decay_fit({0.7});
    CHECK_FALSE(single.valid);
}

TEST_CASE("sup moment estimator oracles") {
    // Constant records: mean c^p, zero standard error.
    auto [mc, sc] = estimate_sup_moment({1.5, 1.5, 1.5, 1.5}, 3.0);
    CHECK(mc == doctest::Approx(std::pow(1.5, 3.0)).epsilon(1e-15));
    CHECK(sc == 0.0);

    // Records {0, 2} at p = 2: squares {0, 4}, mean 2, sample sd
    // (n-1 form) sqrt(8), SE sqrt(8)/sqrt(2) = 2.
    auto [m2, s2] = estimate_sup_moment({0.0, 2.0}, 2.0);
    CHECK(m2 == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(s2 == doctest::Approx(2.0).epsilon(1e-15));

    CHECK_THROWS_AS(estimate_sup_moment({}, 2.0), ValidationError);
    CHECK_THROWS_AS(estimate_sup_moment({1.0}, 0.0), ValidationError);
}

TEST_CASE("degenerate ensemble is flat") {
    Grid g(1, 19);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    CoefficientPair coeffs{Drift([](Point p, double s) { return s - p.x; }),
                           Diffusion::constant(0.0)};
    EnsembleSummary s =
        run_ensemble(kernel, coeffs, walls, {}, {}, 123, 8, 2, 2.0);
    REQUIRE(s.replicates.size() == 8);
    CHECK(s.converged_count == 8);
    CHECK(s.failed_count == 0);
    for (const auto& rec : s.replicates)
        CHECK(rec.sup_u == s.replicates.front().sup_u);
    CHECK(s.std_error == 0.0);
}

TEST_CASE("band containment holds on every replicate") {
    Grid g(1, 25);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    CoefficientPair coeffs{Drift::zero(), Diffusion::constant(1.0)};
    EnsembleSummary s =
        run_ensemble(kernel, coeffs, walls, {}, {}, 7, 16, 4, 2.0);
    CHECK(s.failed_count == 0);
    for (const auto& rec : s.replicates) CHECK(rec.sup_u <= 0.5 + 1e-9);
    CHECK(s.moment <= 0.25 + 1e-9);
    CHECK(std::isfinite(s.moment));
}

TEST_CASE("worker count does not change the ensemble") {
    Grid g(1, 29);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    EnsembleSummary s1 = run_ensemble(kernel, small_multiplicative(), walls, {},
                                      {}, 555, 24, 1, 2.0);
    EnsembleSummary s4 = run_ensemble(kernel, small_multiplicative(), walls, {},
                                      {}, 555, 24, 4, 2.0);
    REQUIRE(s1.replicates.size() == s4.replicates.size());
    for (std::size_t r = 0; r < s1.replicates.size(); ++r) {
        CHECK(s1.replicates[r].sup_u == s4.replicates[r].sup_u);  // bitwise
        CHECK(s1.replicates[r].seed == s4.replicates[r].seed);
        CHECK(s1.replicates[r].iterations == s4.replicates[r].iterations);
    }
    CHECK(s1.moment == s4.moment);
    CHECK(s1.std_error == s4.std_error);
    CHECK(s1.decay.rate == s4.decay.rate);
}

TEST_CASE("replicate seeds derive from the base seed by index") {
    Grid g(1, 19);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    EnsembleSummary s = run_ensemble(kernel, small_multiplicative(), walls, {},
                                     {}, 99, 6, 2, 2.0);
    for (std::size_t r = 0; r < s.replicates.size(); ++r)
        CHECK(s.replicates[r].seed ==
              derive_seed(99, static_cast<std::uint64_t>(r)));
}

TEST_CASE("stage decay is fitted from the averaged sup changes") {
    Grid g(1, 29);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    PicardOptions opts;
    opts.tol = 1e-12;  // force enough stages for a fit
    EnsembleSummary s = run_ensemble(kernel, small_multiplicative(), walls, {},
                                     opts, 2024, 32, 4, 2.0);
    CHECK(s.decay.valid);
    CHECK(s.decay.rate > 0.0);
    // Inside the proven regime the mean contraction factor stays below 1.
    CHECK(s.condition.satisfied);
    CHECK(s.decay.rate < 1.0);
}

TEST_CASE("an exhausted iteration budget is counted, not thrown") {
    Grid g(1, 19);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    PicardOptions opts;
    opts.max_iterations = 1;
    opts.tol = 1e-15;
    EnsembleSummary s = run_ensemble(kernel, small_multiplicative(), walls, {},
                                     opts, 5, 6, 2, 2.0);
    CHECK(s.converged_count == 0);
    CHECK(s.failed_count == 0);  // budget exhaustion is not a failure
    for (const auto& rec : s.replicates) {
        CHECK_FALSE(rec.converged);
        CHECK(rec.iterations == 1);
        CHECK(rec.error.empty());
    }
}

TEST_CASE("a fully failed ensemble is an error") {
    Grid g(1, 19);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -0.5, 0.5);
    PicardOptions opts;
    opts.obstacle.max_newton = 0;  // every inner solve exhausts immediately
    CHECK_THROWS_AS(run_ensemble(kernel, small_multiplicative(), walls, {}, opts,
                                 5, 4, 2, 2.0),
                    ConvergenceError);
}

TEST_CASE("ensemble validates its own parameters") {
    Grid g(1, 9);
    GreenKernel kernel = discrete_green(g);
    WallPair walls = band(g, -1.0, 1.0);
    CHECK_THROWS_AS(run_ensemble(kernel, small_multiplicative(), walls, {}, {},
                                 1, 0, 1, 2.0),
                    ValidationError);
}
