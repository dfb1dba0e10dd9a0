#include "rspde/grid.hpp"

#include <cmath>

namespace rspde {

Grid::Grid(int dim, int nodes_per_axis) : dim_(dim), n_(nodes_per_axis) {
    if (dim != 1 && dim != 2)
        throw ValidationError("grid: dim must be 1 or 2, got " + std::to_string(dim));
    if (nodes_per_axis < 2)
        throw ValidationError("grid: need at least 2 nodes per axis, got " +
                              std::to_string(nodes_per_axis));
    spacing_ = 1.0 / (n_ + 1);
    cell_volume_ = dim_ == 1 ? spacing_ : spacing_ * spacing_;
    count_ = dim_ == 1 ? static_cast<std::size_t>(n_)
                       : static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
}

Point Grid::node(std::size_t index) const {
    if (index >= count_)
        throw ValidationError("grid: node index out of range");
    if (dim_ == 1) return {(static_cast<double>(index) + 1.0) * spacing_, 0.0};
    const std::size_t ix = index % static_cast<std::size_t>(n_);
    const std::size_t iy = index / static_cast<std::size_t>(n_);
    return {(static_cast<double>(ix) + 1.0) * spacing_,
            (static_cast<double>(iy) + 1.0) * spacing_};
}

double Grid::diameter() const { return dim_ == 1 ? 1.0 : std::sqrt(2.0); }

ScalarField ScalarField::from_function(const Grid& g,
                                       const std::function<double(Point)>& fn) {
    ScalarField out(g);
    for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = fn(g.node(i));
    return out;
}

ScalarField laplacian_apply(const ScalarField& field) {
    const Grid& g = field.grid;
    const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
    ScalarField out(g);
    const int n = g.nodes_per_axis();
    if (g.dim() == 1) {
        for (int i = 0; i < n; ++i) {
            const double left = i > 0 ? field.values[i - 1] : 0.0;
            const double right = i + 1 < n ? field.values[i + 1] : 0.0;
            out.values[i] = (2.0 * field.values[i] - left - right) * inv_h2;
        }
        return out;
    }
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const std::size_t idx = static_cast<std::size_t>(iy) * n + ix;
            const double left = ix > 0 ? field.values[idx - 1] : 0.0;
            const double right = ix + 1 < n ? field.values[idx + 1] : 0.0;
            const double down = iy > 0 ? field.values[idx - n] : 0.0;
            const double up = iy + 1 < n ? field.values[idx + n] : 0.0;
            out.values[idx] =
                (4.0 * field.values[idx] - left - right - down - up) * inv_h2;
        }
    }
    return out;
}

double sup_norm(const ScalarField& f) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid, b.grid, "sup_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

void require_finite(const std::vector<double>& values, const std::string& what) {
    for (double v : values)
        if (!std::isfinite(v))
            throw ValidationError(what + ": non-finite value encountered");
}

void require_finite(const ScalarField& f, const std::string& what) {
    require_finite(f.values, what);
}

void require_same_grid(const Grid& a, const Grid& b, const std::string& what) {
    if (!(a == b))
        throw ValidationError(what + ": grids do not match (dim " +
                              std::to_string(a.dim()) + " n " +
                              std::to_string(a.nodes_per_axis()) + " vs dim " +
                              std::to_string(b.dim()) + " n " +
                              std::to_string(b.nodes_per_axis()) + ")");
}

}  // namespace rspde
