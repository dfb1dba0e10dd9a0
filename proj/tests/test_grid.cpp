#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rspde/grid.hpp"
#include "rspde/laplacian.hpp"

using namespace rspde;

TEST_CASE("1d grid geometry") {
    Grid g(1, 3);
    CHECK(g.spacing() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.cell_volume() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.node_count() == 3);
    CHECK(g.node(0).x == doctest::Approx(0.25));
    CHECK(g.node(2).x == doctest::Approx(0.75));
    CHECK(g.diameter() == 1.0);
}

TEST_CASE("2d grid geometry and numbering") {
    Grid g(2, 3);
    CHECK(g.spacing() == doctest::Approx(0.25));
    CHECK(g.cell_volume() == doctest::Approx(0.0625));
    CHECK(g.node_count() == 9);
    // Row-major: index 5 -> ix = 2, iy = 1.
    const Point p = g.node(5);
    CHECK(p.x == doctest::Approx(0.75));
    CHECK(p.y == doctest::Approx(0.5));
    CHECK(g.diameter() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(Grid(1, 1), ValidationError);
    CHECK_THROWS_AS(Grid(3, 5), ValidationError);
    CHECK_THROWS_AS(Grid(1, 0), ValidationError);
}

TEST_CASE("negative laplacian stencil on 1d fields") {
    Grid g(1, 3);

    // Constant zero field.
    ScalarField zero(g);
    ScalarField lz = laplacian_apply(zero);
    for (std::size_t i = 0; i < lz.size(); ++i) CHECK(lz[i] == 0.0);

    // Hat at the middle node: h = 1/4, -Lap e_1 = (-16, 32, -16).
    ScalarField hat(g);
    hat[1] = 1.0;
    ScalarField lh = laplacian_apply(hat);
    CHECK(lh[0] == doctest::Approx(-16.0));
    CHECK(lh[1] == doctest::Approx(32.0));
    CHECK(lh[2] == doctest::Approx(-16.0));

    // Affine-in-x field has zero second difference away from the boundary;
    // the Dirichlet pinning shows up only through the end nodes.
    ScalarField lin = ScalarField::from_function(g, [](Point p) { return p.x; });
    ScalarField ll = laplacian_apply(lin);
    CHECK(ll[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("negative laplacian matches matrix form") {
    for (int dim : {1, 2}) {
        Grid g(dim, 5);
        ScalarField f = ScalarField::from_function(
            g, [](Point p) { return std::sin(3.0 * p.x) + 0.5 * p.y; });
        ScalarField viaStencil = laplacian_apply(f);
        auto A = neg_laplacian_matrix(g);
        Eigen::VectorXd x(static_cast<Eigen::Index>(f.size()));
        for (std::size_t i = 0; i < f.size(); ++i)
            x[static_cast<Eigen::Index>(i)] = f[i];
        Eigen::VectorXd y = A * x;
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(viaStencil[i] ==
                  doctest::Approx(y[static_cast<Eigen::Index>(i)]).epsilon(1e-13));
        CHECK(stencil_diagonal(g) ==
              doctest::Approx(2.0 * dim * 36.0));  // h = 1/6
    }
}

TEST_CASE("sup norms and finiteness guards") {
    Grid g(1, 4);
    ScalarField a(g), b(g);
    a[2] = -3.0;
    b[2] = 1.0;
    CHECK(sup_norm(a) == 3.0);
    CHECK(sup_diff(a, b) == 4.0);

    a[1] = std::nan("");
    CHECK_THROWS_AS(require_finite(a, "test"), ValidationError);
    CHECK_THROWS_AS(require_finite(std::vector<double>{1.0, INFINITY}, "test"),
                    ValidationError);
    require_finite(b, "test");  // no throw

    Grid g2(1, 5);
    CHECK_THROWS_AS(require_same_grid(g, g2, "test"), ValidationError);
}
