#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "rspde/errors.hpp"

namespace rspde {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Uniform grid of interior nodes on the unit interval (dim 1) or unit
/// square (dim 2) with implicit homogeneous Dirichlet boundary.
///
/// With n nodes per axis the spacing is 1/(n+1), node coordinates are
/// (i+1)*spacing, and each node owns a cell of volume spacing^dim.
/// 2D nodes are numbered row-major: index = iy*n + ix.
class Grid {
public:
    Grid(int dim, int nodes_per_axis);

    int dim() const { return dim_; }
    int nodes_per_axis() const { return n_; }
    double spacing() const { return spacing_; }
    double cell_volume() const { return cell_volume_; }
    std::size_t node_count() const { return count_; }

    Point node(std::size_t index) const;

    /// Euclidean diameter of the domain: 1 in 1D, sqrt(2) in 2D.
    double diameter() const;

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.dim_ == b.dim_ && a.n_ == b.n_;
    }

private:
    int dim_;
    int n_;
    double spacing_;
    double cell_volume_;
    std::size_t count_;
};

/// Nodal values on a grid's interior nodes.  The boundary is identically
/// zero and is never stored.
struct ScalarField {
    Grid grid;
    std::vector<double> values;

    explicit ScalarField(const Grid& g, double fill = 0.0)
        : grid(g), values(g.node_count(), fill) {}

    static ScalarField from_function(const Grid& g,
                                     const std::function<double(Point)>& fn);

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

/// Applies the negative discrete Laplacian (3-point / 5-point stencil with
/// zero Dirichlet boundary) to a field.
ScalarField laplacian_apply(const ScalarField& field);

double sup_norm(const ScalarField& f);
double sup_diff(const ScalarField& a, const ScalarField& b);

/// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const ScalarField& f, const std::string& what);
void require_finite(const std::vector<double>& values, const std::string& what);
void require_same_grid(const Grid& a, const Grid& b, const std::string& what);

}  // namespace rspde
