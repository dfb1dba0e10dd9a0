#include "rspde/green.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <string>

#include "rspde/laplacian.hpp"

namespace rspde {

double green_1d_analytic(double x, double y) {
    if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0))
        throw ValidationError("green_1d_analytic: coordinates must lie in [0,1]");
    return std::min(x, y) - x * y;
}

GreenKernel::GreenKernel(const Grid& grid, std::vector<double> row_major_values)
    : grid_(grid), n_(grid.node_count()), values_(std::move(row_major_values)) {
    if (values_.size() != n_ * n_)
        throw ValidationError("green kernel: expected " + std::to_string(n_ * n_) +
                              " values, got " + std::to_string(values_.size()));
    require_finite(values_, "green kernel");
}

GreenKernel discrete_green(const Grid& grid, std::size_t node_cap) {
    const std::size_t count = grid.node_count();
    if (count > node_cap)
        throw ValidationError("discrete_green: grid has " + std::to_string(count) +
                              " nodes, cap is " + std::to_string(node_cap));

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(neg_laplacian_matrix(grid));
    if (solver.info() != Eigen::Success)
        throw ConvergenceError("discrete_green: factorization failed");

    const double load = 1.0 / grid.cell_volume();
    std::vector<double> values(count * count);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(count));
    for (std::size_t j = 0; j < count; ++j) {
        rhs[static_cast<Eigen::Index>(j)] = load;
        const Eigen::VectorXd col = solver.solve(rhs);
        rhs[static_cast<Eigen::Index>(j)] = 0.0;
        for (std::size_t i = 0; i < count; ++i)
            values[i * count + j] = col[static_cast<Eigen::Index>(i)];
    }
    return GreenKernel(grid, std::move(values));
}

double green_sup_l2(const GreenKernel& kernel) {
    const std::size_t n = kernel.size();
    const double vol = kernel.grid().cell_volume();
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = kernel.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * row[j];
        best = std::max(best, acc * vol);
    }
    return best;
}

double green_holder_constant(const GreenKernel& kernel, double lambda) {
    const int dim = kernel.grid().dim();
    if (dim == 1) {
        if (!(lambda > 0.0 && lambda <= 1.0))
            throw ValidationError("green_holder_constant: in 1D lambda must lie in (0,1]");
    } else {
        if (!(lambda > 0.0 && lambda < 1.0))
            throw ValidationError("green_holder_constant: in 2D lambda must lie in (0,1)");
    }

    const std::size_t n = kernel.size();
    const double vol = kernel.grid().cell_volume();
    const bool quadratic = lambda == 1.0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point pi = kernel.grid().node(i);
        const double* ri = kernel.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* rj = kernel.row(j);
            double acc = 0.0;
            for (std::size_t z = 0; z < n; ++z) {
                const double d = ri[z] - rj[z];
                acc += d * d;
            }
            const Point pj = kernel.grid().node(j);
            const double dx = pi.x - pj.x;
            const double dy = pi.y - pj.y;
            const double dist2 = dx * dx + dy * dy;
            const double denom = quadratic ? dist2 : std::pow(dist2, lambda);
            best = std::max(best, acc * vol / denom);
        }
    }
    return best;
}

}  // namespace rspde
