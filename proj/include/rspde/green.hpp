#pragma once

#include <cstddef>
#include <vector>

#include "rspde/grid.hpp"

namespace rspde {

/// Green function of -d^2/dx^2 on (0,1) with zero boundary:
/// G(x,y) = min(x,y) - x*y.
double green_1d_analytic(double x, double y);

/// Dense discrete Green kernel g[i][j]: column j solves the stencil system
/// with the scaled unit load e_j / cell_volume, so that
/// (kernel * diag(cell_volume) * w)_i inverts the discrete Laplacian.
/// Symmetric up to solver precision; in 1D it matches the analytic kernel
/// at the nodes exactly (the kernel is piecewise linear in each variable).
class GreenKernel {
public:
    GreenKernel(const Grid& grid, std::vector<double> row_major_values);

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const {
        return values_[i * n_ + j];
    }
    const double* row(std::size_t i) const { return values_.data() + i * n_; }

private:
    Grid grid_;
    std::size_t n_;
    std::vector<double> values_;
};

/// Assembles the kernel by a sparse factorization and one solve per node.
/// Refuses grids above node_cap nodes (the kernel is dense).
GreenKernel discrete_green(const Grid& grid, std::size_t node_cap = 4096);

/// sup over source points x_i of the squared L2 norm of G(x_i, .),
/// i.e. max_i sum_j g[i][j]^2 * cell_volume.
double green_sup_l2(const GreenKernel& kernel);

/// Empirical Holder constant of x -> G(x,.) in L2: the max over node pairs
/// of ||G(x,.) - G(x',.)||_L2^2 / |x - x'|^(2*lambda).  Valid lambda range
/// depends on the dimension: (0,1] in 1D, (0,1) in 2D.
double green_holder_constant(const GreenKernel& kernel, double lambda);

}  // namespace rspde
