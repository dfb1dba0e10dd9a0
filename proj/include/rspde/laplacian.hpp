#pragma once

#include <Eigen/SparseCore>

#include "rspde/grid.hpp"

namespace rspde {

/// Sparse matrix of the negative discrete Laplacian on a grid's interior
/// nodes (symmetric positive definite; zero Dirichlet boundary folded in).
Eigen::SparseMatrix<double> neg_laplacian_matrix(const Grid& grid);

/// Diagonal entry of the stencil, 2*dim/h^2.  Used to convert residual
/// tolerances into solution units.
double stencil_diagonal(const Grid& grid);

}  // namespace rspde
