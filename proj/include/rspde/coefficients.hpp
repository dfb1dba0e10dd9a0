#pragma once

#include <cstdint>
#include <functional>

#include "rspde/grid.hpp"

namespace rspde {

using SpatialStateFn = std::function<double(Point, double)>;

/// Sampling plan for the construction-time coefficient checks.  The checks
/// are necessary-condition spot checks on random (point, state) draws, not
/// proofs; the seed is fixed so validation is reproducible.
struct CoefficientCheckOptions {
    int samples = 256;
    double state_range = 8.0;
    std::uint64_t seed = 0x5eedc0def01dULL;
    double slack = 1e-12;
};

/// Drift term f(x, u).  Must be nondecreasing in the state variable;
/// construction spot-checks this and throws ValidationError with a
/// counterexample on failure.
class Drift {
public:
    explicit Drift(SpatialStateFn fn, const CoefficientCheckOptions& check = {});

    static Drift zero();

    double operator()(Point p, double state) const { return fn_(p, state); }

    /// Central-difference state derivative clamped at zero from below
    /// (monotonicity makes the true slope nonnegative; the clamp only
    /// guards rounding).  Used as the Jacobian diagonal contribution.
    double slope(Point p, double state) const;

private:
    SpatialStateFn fn_;
};

/// Diffusion coefficient sigma(x, u) with its declared state-Lipschitz
/// constant.  Construction spot-checks |sigma(x,u)-sigma(x,u')| against
/// lipschitz*|u-u'| and throws with a counterexample on failure.
class Diffusion {
public:
    Diffusion(SpatialStateFn fn, double lipschitz,
              const CoefficientCheckOptions& check = {});

    static Diffusion constant(double value);

    double operator()(Point p, double state) const { return fn_(p, state); }
    double lipschitz() const { return lipschitz_; }

private:
    SpatialStateFn fn_;
    double lipschitz_;
};

struct CoefficientPair {
    Drift f = Drift::zero();
    Diffusion sigma = Diffusion::constant(0.0);
};

}  // namespace rspde
