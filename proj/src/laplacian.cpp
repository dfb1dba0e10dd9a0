#include "rspde/laplacian.hpp"

#include <vector>

namespace rspde {

Eigen::SparseMatrix<double> neg_laplacian_matrix(const Grid& grid) {
    const int n = grid.nodes_per_axis();
    const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    const auto count = static_cast<Eigen::Index>(grid.node_count());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(grid.node_count() * (grid.dim() == 1 ? 3 : 5));

    auto push = [&](std::size_t r, std::size_t c, double v) {
        triplets.emplace_back(static_cast<Eigen::Index>(r),
                              static_cast<Eigen::Index>(c), v);
    };

    if (grid.dim() == 1) {
        for (int i = 0; i < n; ++i) {
            push(i, i, 2.0 * inv_h2);
            if (i > 0) push(i, i - 1, -inv_h2);
            if (i + 1 < n) push(i, i + 1, -inv_h2);
        }
    } else {
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) {
                const std::size_t idx = static_cast<std::size_t>(iy) * n + ix;
                push(idx, idx, 4.0 * inv_h2);
                if (ix > 0) push(idx, idx - 1, -inv_h2);
                if (ix + 1 < n) push(idx, idx + 1, -inv_h2);
                if (iy > 0) push(idx, idx - n, -inv_h2);
                if (iy + 1 < n) push(idx, idx + n, -inv_h2);
            }
        }
    }

    Eigen::SparseMatrix<double> mat(count, count);
    mat.setFromTriplets(triplets.begin(), triplets.end());
    return mat;
}

double stencil_diagonal(const Grid& grid) {
    return 2.0 * grid.dim() / (grid.spacing() * grid.spacing());
}

}  // namespace rspde
