#include "rspde/coefficients.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <utility>

namespace rspde {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

Point random_point(std::mt19937_64& rng) {
    return {uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)};
}

std::string describe(Point p, double a, double b) {
    std::ostringstream os;
    os << "x=(" << p.x << "," << p.y << ") states " << a << " and " << b;
    return os.str();
}

void check_monotone(const SpatialStateFn& fn, const CoefficientCheckOptions& opt) {
    std::mt19937_64 rng(opt.seed);
    for (int s = 0; s < opt.samples; ++s) {
        const Point p = random_point(rng);
        double a = uniform(rng, -opt.state_range, opt.state_range);
        double b = uniform(rng, -opt.state_range, opt.state_range);
        if (a > b) std::swap(a, b);
        const double fa = fn(p, a);
        const double fb = fn(p, b);
        if (!std::isfinite(fa) || !std::isfinite(fb))
            throw ValidationError("drift: non-finite value at " + describe(p, a, b));
        if (fb < fa - opt.slack)
            throw ValidationError(
                "drift: not nondecreasing in the state, counterexample at " +
                describe(p, a, b));
    }
}

void check_lipschitz(const SpatialStateFn& fn, double lipschitz,
                     const CoefficientCheckOptions& opt) {
    std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    for (int s = 0; s < opt.samples; ++s) {
        const Point p = random_point(rng);
        const double a = uniform(rng, -opt.state_range, opt.state_range);
        const double b = uniform(rng, -opt.state_range, opt.state_range);
        const double fa = fn(p, a);
        const double fb = fn(p, b);
        if (!std::isfinite(fa) || !std::isfinite(fb))
            throw ValidationError("diffusion: non-finite value at " + describe(p, a, b));
        const double bound = lipschitz * std::abs(a - b);
        if (std::abs(fa - fb) > bound + opt.slack)
            throw ValidationError(
                "diffusion: declared Lipschitz constant violated, counterexample at " +
                describe(p, a, b));
    }
}

}  // namespace

Drift::Drift(SpatialStateFn fn, const CoefficientCheckOptions& check)
    : fn_(std::move(fn)) {
    if (!fn_) throw ValidationError("drift: empty function");
    check_monotone(fn_, check);
}

Drift Drift::zero() {
    return Drift([](Point, double) { return 0.0; });
}

double Drift::slope(Point p, double state) const {
    const double d = 1e-6 * (1.0 + std::abs(state));
    const double raw = (fn_(p, state + d) - fn_(p, state - d)) / (2.0 * d);
    return std::max(raw, 0.0);
}

Diffusion::Diffusion(SpatialStateFn fn, double lipschitz,
                     const CoefficientCheckOptions& check)
    : fn_(std::move(fn)), lipschitz_(lipschitz) {
    if (!fn_) throw ValidationError("diffusion: empty function");
    if (!(lipschitz >= 0.0) || !std::isfinite(lipschitz))
        throw ValidationError("diffusion: Lipschitz constant must be finite and >= 0");
    check_lipschitz(fn_, lipschitz_, check);
}

Diffusion Diffusion::constant(double value) {
    if (!std::isfinite(value))
        throw ValidationError("diffusion: constant value must be finite");
    return Diffusion([value](Point, double) { return value; }, 0.0);
}

}  // namespace rspde
