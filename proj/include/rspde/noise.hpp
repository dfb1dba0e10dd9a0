#pragma once

#include <cstdint>
#include <vector>

#include "rspde/coefficients.hpp"
#include "rspde/green.hpp"
#include "rspde/grid.hpp"

namespace rspde {

/// Decorrelated child seed for stream `index` of a base seed (splitmix64).
/// derive_seed(s, i) for distinct i gives independent, reproducible streams;
/// used to hand each replicate its own generator.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Spatial white-noise realization: one increment per grid cell,
/// i.i.d. N(0, cell_volume).  The increments carry the cell measure, so
/// sums against them approximate integrals against the noise.
struct NoiseSample {
    Grid grid;
    std::uint64_t seed;
    std::vector<double> increments;
};

/// Fixed sampler: mt19937_64 driven Marsaglia polar method.  The standard
/// library's normal_distribution is implementation-defined, so the stream
/// is produced by hand to make runs bit-reproducible across toolchains.
NoiseSample sample_white_noise(const Grid& grid, std::uint64_t seed);

/// Kernel-weighted stochastic convolution:
///   v(x_i) = sum_j g[i][j] * sigma(y_j, u_j) * dW_j.
/// The cell measure is already inside dW, so no extra volume factor.
ScalarField stochastic_convolution(const GreenKernel& kernel,
                                   const Diffusion& sigma, const ScalarField& u,
                                   const NoiseSample& noise);

}  // namespace rspde
