#include "rspde/noise.hpp"

#include <cmath>
#include <random>

namespace rspde {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform_open(std::mt19937_64& rng) {
    // (0,1): top 53 bits, zero remapped away from the origin.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return u == 0.0 ? 0x1.0p-53 : u;
}

// Marsaglia polar method; emits pairs, caches the spare.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double a, b, s;
        do {
            a = 2.0 * uniform_open(rng_) - 1.0;
            b = 2.0 * uniform_open(rng_) - 1.0;
            s = a * a + b * b;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = b * m;
        has_spare_ = true;
        return a * m;
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t state = base + index * 0x9e3779b97f4a7c15ULL;
    return splitmix64(state);
}

NoiseSample sample_white_noise(const Grid& grid, std::uint64_t seed) {
    NoiseSample sample{grid, seed, std::vector<double>(grid.node_count())};
    Gaussian gauss(seed);
    const double sd = std::sqrt(grid.cell_volume());
    for (double& w : sample.increments) w = sd * gauss.next();
    return sample;
}

ScalarField stochastic_convolution(const GreenKernel& kernel,
                                   const Diffusion& sigma, const ScalarField& u,
                                   const NoiseSample& noise) {
    const Grid& g = kernel.grid();
    require_same_grid(g, u.grid, "stochastic_convolution");
    require_same_grid(g, noise.grid, "stochastic_convolution");
    const std::size_t n = g.node_count();
    if (noise.increments.size() != n)
        throw ValidationError("stochastic_convolution: noise size mismatch");

    std::vector<double> weighted(n);
    for (std::size_t j = 0; j < n; ++j)
        weighted[j] = sigma(g.node(j), u.values[j]) * noise.increments[j];

    ScalarField out(g);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = kernel.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * weighted[j];
        out.values[i] = acc;
    }
    require_finite(out, "stochastic_convolution");
    return out;
}

}  // namespace rspde
