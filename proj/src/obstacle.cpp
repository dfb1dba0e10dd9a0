#include "rspde/obstacle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "rspde/laplacian.hpp"

namespace rspde {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDeltaRatio = 1e-2;  // delta_m = kDeltaRatio * epsilon_m

enum class Label : std::uint8_t { Free = 0, Lower = 1, Upper = 2 };

std::vector<Point> node_points(const Grid& grid) {
    std::vector<Point> pts(grid.node_count());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = grid.node(i);
    return pts;
}

// Constraint/penalty configuration for one Newton solve.  Wall arrays hold
// nodal wall values (same coordinates as u = z + v); null disables a term.
struct EngineSetup {
    const Grid* grid = nullptr;
    const Drift* f = nullptr;
    const std::vector<double>* v = nullptr;
    const std::vector<Point>* pts = nullptr;
    const Eigen::SparseMatrix<double>* A = nullptr;
    double theta = 0.0;

    const double* hard_lo = nullptr;
    const double* hard_hi = nullptr;
    const double* pen_lo = nullptr;
    double inv_delta = 0.0;
    const double* pen_hi = nullptr;
    double inv_epsilon = 0.0;

    bool constrained() const { return hard_lo != nullptr || hard_hi != nullptr; }
};

Eigen::VectorXd engine_residual(const EngineSetup& s, const Eigen::VectorXd& z) {
    const auto n = static_cast<std::size_t>(z.size());
    Eigen::VectorXd r = (*s.A) * z;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ei = static_cast<Eigen::Index>(i);
        const double u = z[ei] + (*s.v)[i];
        double ri = r[ei] + (*s.f)((*s.pts)[i], u);
        if (s.pen_hi) ri += s.inv_epsilon * std::max(u - s.pen_hi[i], 0.0);
        if (s.pen_lo) ri -= s.inv_delta * std::max(s.pen_lo[i] - u, 0.0);
        r[ei] = ri;
    }
    return r;
}

// Merit of an iterate.  With a hard wall present this is the sup of the
// natural residual max(min(r/theta, u - lo), u - hi) in solution units; in
// the purely penalized mode it is the raw residual sup norm.  The branch
// each node selects is the active-set guess for the next Newton step.
double engine_merit(const EngineSetup& s, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& r, std::vector<Label>* labels) {
    const auto n = static_cast<std::size_t>(z.size());
    if (labels) labels->assign(n, Label::Free);
    double merit = 0.0;
    if (!s.constrained()) {
        for (std::size_t i = 0; i < n; ++i)
            merit = std::max(merit, std::abs(r[static_cast<Eigen::Index>(i)]));
        return merit;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto ei = static_cast<Eigen::Index>(i);
        const double u = z[ei] + (*s.v)[i];
        // Convert the residual to solution units by the node's actual
        // stiffness: inside a penalty region the diagonal carries 1/epsilon
        // (or 1/delta), and dividing by theta alone would demand corrections
        // below one ulp of z.
        double stiffness = s.theta;
        if (s.pen_hi && u >= s.pen_hi[i]) stiffness += s.inv_epsilon;
        if (s.pen_lo && u <= s.pen_lo[i]) stiffness += s.inv_delta;
        const double rt = r[ei] / stiffness;
        const double gap_lo = s.hard_lo ? u - s.hard_lo[i] : kInf;
        const double gap_hi = s.hard_hi ? u - s.hard_hi[i] : -kInf;
        Label label = Label::Free;
        double nr = rt;
        if (gap_lo < nr) {
            nr = gap_lo;
            label = Label::Lower;
        }
        if (gap_hi > nr) {
            nr = gap_hi;
            label = Label::Upper;
        }
        if (labels) (*labels)[i] = label;
        merit = std::max(merit, std::abs(nr));
    }
    return merit;
}

struct EngineResult {
    Eigen::VectorXd z;
    Eigen::VectorXd residual;
    double merit = 0.0;
    int iterations = 0;
};

EngineResult newton_engine(const EngineSetup& s, Eigen::VectorXd z, double tol,
                           int max_iter) {
    const auto n = static_cast<std::size_t>(z.size());
    std::vector<Label> labels;
    Eigen::VectorXd r = engine_residual(s, z);
    double merit = engine_merit(s, z, r, &labels);

    // Hard-wall solves take one extra full step after the merit reaches
    // tolerance: the stopping rule bounds residuals only by theta * tol, and
    // a warm start can meet it with stale free-node residuals that would
    // later read as spurious measure mass.  The polish solve drives the free
    // block to solver precision at the settled active set.
    bool just_polished = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (merit <= tol && (just_polished || !s.constrained()))
            return {std::move(z), std::move(r), merit, iter};
        just_polished = merit <= tol;

        Eigen::VectorXd dz = Eigen::VectorXd::Zero(z.size());
        std::vector<Eigen::Index> free_of(n, -1);
        std::vector<std::size_t> free_nodes;
        free_nodes.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto ei = static_cast<Eigen::Index>(i);
            if (labels[i] == Label::Lower)
                dz[ei] = (s.hard_lo[i] - (*s.v)[i]) - z[ei];
            else if (labels[i] == Label::Upper)
                dz[ei] = (s.hard_hi[i] - (*s.v)[i]) - z[ei];
            else {
                free_of[i] = static_cast<Eigen::Index>(free_nodes.size());
                free_nodes.push_back(i);
            }
        }

        if (!free_nodes.empty()) {
            Eigen::VectorXd rhs(static_cast<Eigen::Index>(free_nodes.size()));
            for (std::size_t k = 0; k < free_nodes.size(); ++k)
                rhs[static_cast<Eigen::Index>(k)] =
                    -r[static_cast<Eigen::Index>(free_nodes[k])];

            std::vector<Eigen::Triplet<double>> trip;
            trip.reserve(free_nodes.size() * (s.grid->dim() == 1 ? 3 : 5));
            for (std::size_t k = 0; k < free_nodes.size(); ++k) {
                const auto col = static_cast<Eigen::Index>(free_nodes[k]);
                for (Eigen::SparseMatrix<double>::InnerIterator it(*s.A, col); it;
                     ++it) {
                    const auto row = static_cast<std::size_t>(it.row());
                    if (free_of[row] >= 0)
                        trip.emplace_back(free_of[row], static_cast<Eigen::Index>(k),
                                          it.value());
                }
            }
            // Displacement of active nodes feeds the free right-hand side
            // (A is symmetric, so column iteration covers the row coupling).
            for (std::size_t i = 0; i < n; ++i) {
                const auto ei = static_cast<Eigen::Index>(i);
                if (free_of[i] >= 0 || dz[ei] == 0.0) continue;
                for (Eigen::SparseMatrix<double>::InnerIterator it(*s.A, ei); it;
                     ++it) {
                    const auto row = static_cast<std::size_t>(it.row());
                    if (free_of[row] >= 0) rhs[free_of[row]] -= it.value() * dz[ei];
                }
            }
            for (std::size_t k = 0; k < free_nodes.size(); ++k) {
                const std::size_t i = free_nodes[k];
                const double u = z[static_cast<Eigen::Index>(i)] + (*s.v)[i];
                double diag = (*s.f).slope((*s.pts)[i], u);
                // Ties sit exactly on the penalty kink (hard solves park
                // contact nodes there); the generalized derivative must take
                // the stiff branch or the step overshoots into the penalty.
                if (s.pen_hi && u >= s.pen_hi[i]) diag += s.inv_epsilon;
                if (s.pen_lo && u <= s.pen_lo[i]) diag += s.inv_delta;
                if (diag != 0.0)
                    trip.emplace_back(static_cast<Eigen::Index>(k),
                                      static_cast<Eigen::Index>(k), diag);
            }

            Eigen::SparseMatrix<double> AFF(
                static_cast<Eigen::Index>(free_nodes.size()),
                static_cast<Eigen::Index>(free_nodes.size()));
            AFF.setFromTriplets(trip.begin(), trip.end());
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
            solver.compute(AFF);
            if (solver.info() != Eigen::Success)
                throw ConvergenceError("obstacle newton: factorization failed", merit);
            const Eigen::VectorXd dz_free = solver.solve(rhs);
            for (std::size_t k = 0; k < free_nodes.size(); ++k)
                dz[static_cast<Eigen::Index>(free_nodes[k])] =
                    dz_free[static_cast<Eigen::Index>(k)];
        }

        // Backtracking halving line search on the merit, floor 2^-20.
        double alpha = 1.0;
        bool accepted = false;
        while (alpha >= kLineSearchFloor) {
            Eigen::VectorXd z_try = z + alpha * dz;
            Eigen::VectorXd r_try = engine_residual(s, z_try);
            const double merit_try = engine_merit(s, z_try, r_try, nullptr);
            if (merit_try < merit || merit_try <= tol) {
                z = std::move(z_try);
                r = std::move(r_try);
                merit = merit_try;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted)
            throw ConvergenceError("obstacle newton: line search stalled", merit);
        merit = engine_merit(s, z, r, &labels);
    }
    throw ConvergenceError("obstacle newton: iteration budget exhausted", merit);
}

Eigen::VectorXd initial_guess(const ObstacleOptions& opts, std::size_t n,
                              const std::vector<double>& v, const double* lo,
                              const double* hi) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    if (opts.initial_guess) {
        if (opts.initial_guess->size() != n)
            throw ValidationError("obstacle: initial guess size mismatch");
        require_finite(*opts.initial_guess, "obstacle initial guess");
        for (std::size_t i = 0; i < n; ++i)
            z[static_cast<Eigen::Index>(i)] = (*opts.initial_guess)[i];
        return z;
    }
    // z0 = clip(0, h1 - v, h2 - v) nodewise.
    for (std::size_t i = 0; i < n; ++i) {
        double zi = 0.0;
        if (lo) zi = std::max(zi, lo[i] - v[i]);
        if (hi) zi = std::min(zi, hi[i] - v[i]);
        z[static_cast<Eigen::Index>(i)] = zi;
    }
    return z;
}

}  // namespace

WallPair::WallPair(ScalarField lower, ScalarField upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    sup_wall_norm_ = std::max(sup_norm(lower_), sup_norm(upper_));
}

WallPair WallPair::from_fields(ScalarField lower, ScalarField upper) {
    require_same_grid(lower.grid, upper.grid, "walls");
    require_finite(lower, "lower wall");
    require_finite(upper, "upper wall");
    WallPair walls(std::move(lower), std::move(upper));
    const double min_sep = 10.0 * walls.contact_tol();
    for (std::size_t i = 0; i < walls.lower_.size(); ++i) {
        const double gap = walls.upper_[i] - walls.lower_[i];
        if (gap < 0.0)
            throw ValidationError(
                "walls: ordering violated, lower wall exceeds upper wall at node " +
                std::to_string(i));
        if (!(gap > min_sep))
            throw ValidationError(
                "walls: separation below 10x contact tolerance at node " +
                std::to_string(i));
    }
    return walls;
}

WallPair WallPair::from_functions(const Grid& grid,
                                  const std::function<double(Point)>& lower,
                                  const std::function<double(Point)>& upper) {
    if (!lower || !upper) throw ValidationError("walls: empty function");
    auto check_boundary = [&](Point p) {
        const double lo = lower(p);
        const double hi = upper(p);
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw ValidationError("walls: non-finite boundary value");
        if (lo > 0.0 || hi < 0.0)
            throw ValidationError(
                "walls: boundary compatibility violated (need lower <= 0 <= upper "
                "on the boundary)");
    };
    if (grid.dim() == 1) {
        check_boundary({0.0, 0.0});
        check_boundary({1.0, 0.0});
    } else {
        const int n = grid.nodes_per_axis();
        const double h = grid.spacing();
        for (int i = 0; i <= n + 1; ++i) {
            const double t = i * h;
            check_boundary({t, 0.0});
            check_boundary({t, 1.0});
            check_boundary({0.0, t});
            check_boundary({1.0, t});
        }
    }
    return from_fields(ScalarField::from_function(grid, lower),
                       ScalarField::from_function(grid, upper));
}

void PenaltyParams::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ValidationError("penalty: epsilon must be positive");
    if (!(delta > 0.0) || !std::isfinite(delta))
        throw ValidationError("penalty: delta must be positive");
    if (!(rho > 0.0 && rho < 1.0))
        throw ValidationError("penalty: schedule factor must lie in (0,1)");
    if (stages < 1) throw ValidationError("penalty: need at least one stage");
}

double PenaltyParams::epsilon_at(int stage) const {
    return epsilon * std::pow(rho, stage);
}

double PenaltyParams::delta_at(int stage) const {
    return kDeltaRatio * epsilon_at(stage);
}

double ReflectionMeasures::eta_mass() const {
    double m = 0.0;
    for (double w : eta.values) m += w;
    return m;
}

double ReflectionMeasures::xi_mass() const {
    double m = 0.0;
    for (double w : xi.values) m += w;
    return m;
}

ScalarField solve_penalized(const Drift& f, const ScalarField& v,
                            const WallPair& walls, const PenaltyParams& params,
                            double tol, const ObstacleOptions& opts) {
    require_same_grid(v.grid, walls.grid(), "solve_penalized");
    require_finite(v, "solve_penalized forcing");
    params.validate();
    if (!(tol > 0.0)) throw ValidationError("solve_penalized: tol must be positive");

    const Grid& grid = v.grid;
    const auto pts = node_points(grid);
    const auto A = neg_laplacian_matrix(grid);
    EngineSetup s;
    s.grid = &grid;
    s.f = &f;
    s.v = &v.values;
    s.pts = &pts;
    s.A = &A;
    s.theta = stencil_diagonal(grid);
    s.pen_lo = walls.lower().values.data();
    s.inv_delta = 1.0 / params.delta;
    s.pen_hi = walls.upper().values.data();
    s.inv_epsilon = 1.0 / params.epsilon;

    Eigen::VectorXd z0 =
        initial_guess(opts, grid.node_count(), v.values, s.pen_lo, s.pen_hi);
    EngineResult res = newton_engine(s, std::move(z0), tol, opts.max_newton);

    ScalarField z(grid);
    for (std::size_t i = 0; i < z.size(); ++i)
        z.values[i] = res.z[static_cast<Eigen::Index>(i)];
    require_finite(z, "solve_penalized result");
    return z;
}

SingleWallResult solve_single_wall(const Drift& f, const ScalarField& v,
                                   const ScalarField& lower_wall,
                                   const std::optional<UpperPenalty>& upper,
                                   double tol, const ObstacleOptions& opts) {
    require_same_grid(v.grid, lower_wall.grid, "solve_single_wall");
    require_finite(v, "solve_single_wall forcing");
    require_finite(lower_wall, "solve_single_wall wall");
    if (!(tol > 0.0)) throw ValidationError("solve_single_wall: tol must be positive");

    const Grid& grid = v.grid;
    const auto pts = node_points(grid);
    const auto A = neg_laplacian_matrix(grid);
    EngineSetup s;
    s.grid = &grid;
    s.f = &f;
    s.v = &v.values;
    s.pts = &pts;
    s.A = &A;
    s.theta = stencil_diagonal(grid);
    s.hard_lo = lower_wall.values.data();
    if (upper) {
        if (!upper->wall) throw ValidationError("solve_single_wall: null upper wall");
        require_same_grid(grid, upper->wall->grid, "solve_single_wall upper");
        if (!(upper->epsilon > 0.0))
            throw ValidationError("solve_single_wall: epsilon must be positive");
        s.pen_hi = upper->wall->values.data();
        s.inv_epsilon = 1.0 / upper->epsilon;
    }

    Eigen::VectorXd z0 =
        initial_guess(opts, grid.node_count(), v.values, s.hard_lo, s.pen_hi);
    EngineResult res = newton_engine(s, std::move(z0), tol, opts.max_newton);

    SingleWallResult out{ScalarField(grid), ScalarField(grid), res.iterations};
    const double ctol = 1e-7 * (1.0 + sup_norm(lower_wall));
    const double vol = grid.cell_volume();
    for (std::size_t i = 0; i < out.z.size(); ++i) {
        const auto ei = static_cast<Eigen::Index>(i);
        out.z.values[i] = res.z[ei];
        const double gap = res.z[ei] + v.values[i] - lower_wall.values[i];
        out.eta.values[i] =
            gap <= ctol ? std::max(res.residual[ei], 0.0) * vol : 0.0;
    }
    require_finite(out.z, "solve_single_wall result");
    return out;
}

ReflectionMeasures extract_measures(const Drift& f, const ScalarField& v,
                                    const ScalarField& z, const WallPair& walls,
                                    double mass_tol) {
    require_same_grid(v.grid, z.grid, "extract_measures");
    require_same_grid(v.grid, walls.grid(), "extract_measures");
    const Grid& grid = v.grid;
    const double ctol = walls.contact_tol();
    const double vol = grid.cell_volume();

    ScalarField r = laplacian_apply(z);
    for (std::size_t i = 0; i < r.size(); ++i)
        r.values[i] += f(grid.node(i), z.values[i] + v.values[i]);

    ReflectionMeasures m{ScalarField(grid), ScalarField(grid), 0.0};
    double leftover = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double u = z.values[i] + v.values[i];
        const double gap_lo = u - walls.lower()[i];
        const double gap_hi = walls.upper()[i] - u;
        if (gap_lo <= ctol) {
            m.eta.values[i] = std::max(r.values[i], 0.0) * vol;
            leftover += std::max(-r.values[i], 0.0) * vol;
        } else if (gap_hi <= ctol) {
            m.xi.values[i] = std::max(-r.values[i], 0.0) * vol;
            leftover += std::max(r.values[i], 0.0) * vol;
        } else {
            leftover += std::abs(r.values[i]) * vol;
        }
    }
    m.off_support_mass = leftover;
    if (!(m.off_support_mass <= mass_tol))
        throw ConvergenceError(
            "extract_measures: residual mass off the contact sets exceeds "
            "tolerance",
            m.off_support_mass);
    return m;
}

ResidualReport check_solution(const ScalarField& z, const ScalarField& v,
                              const ReflectionMeasures& measures,
                              const WallPair& walls, const Drift& f,
                              const CheckTolerances& tols) {
    require_same_grid(z.grid, v.grid, "check_solution");
    require_same_grid(z.grid, walls.grid(), "check_solution");
    require_same_grid(z.grid, measures.eta.grid, "check_solution");
    const Grid& grid = z.grid;
    const double vol = grid.cell_volume();
    const std::size_t n = grid.node_count();

    ScalarField r = laplacian_apply(z);
    for (std::size_t i = 0; i < n; ++i)
        r.values[i] += f(grid.node(i), z.values[i] + v.values[i]);

    ResidualReport rep;
    rep.wall.tolerance = tols.wall;
    rep.measure_sign.tolerance = tols.sign_mass;
    rep.disjoint_support.tolerance = tols.disjoint_mass;
    rep.identity.tolerance = tols.identity_mass;

    double comp_lo = 0.0, comp_hi = 0.0, id_total = 0.0;
    double comp_lo_worst = -1.0, comp_hi_worst = -1.0, id_worst = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = z.values[i] + v.values[i];
        const double viol = std::max(walls.lower()[i] - u, u - walls.upper()[i]);
        if (viol > rep.wall.value) {
            rep.wall.value = viol;
            rep.wall.worst_node = static_cast<std::int64_t>(i);
        }

        const double eta = measures.eta[i];
        const double xi = measures.xi[i];
        const double neg = std::max(-eta, 0.0) + std::max(-xi, 0.0);
        if (neg > rep.measure_sign.value) {
            rep.measure_sign.value = neg;
            rep.measure_sign.worst_node = static_cast<std::int64_t>(i);
        }
        const double overlap = std::min(std::max(eta, 0.0), std::max(xi, 0.0));
        if (overlap > rep.disjoint_support.value) {
            rep.disjoint_support.value = overlap;
            rep.disjoint_support.worst_node = static_cast<std::int64_t>(i);
        }

        // Identity in mass units: the residual carries (eta - xi)/vol.
        const double id_res = std::abs(r.values[i] * vol - eta + xi);
        id_total += id_res;
        if (id_res > id_worst) {
            id_worst = id_res;
            rep.identity.worst_node = static_cast<std::int64_t>(i);
        }

        const double c_lo = eta * std::max(u - walls.lower()[i], 0.0);
        comp_lo += c_lo;
        if (c_lo > comp_lo_worst) {
            comp_lo_worst = c_lo;
            rep.complementarity_lower.worst_node = static_cast<std::int64_t>(i);
        }
        const double c_hi = xi * std::max(walls.upper()[i] - u, 0.0);
        comp_hi += c_hi;
        if (c_hi > comp_hi_worst) {
            comp_hi_worst = c_hi;
            rep.complementarity_upper.worst_node = static_cast<std::int64_t>(i);
        }
    }

    rep.identity.value = id_total;
    rep.wall.pass = rep.wall.value <= rep.wall.tolerance;
    rep.measure_sign.pass = rep.measure_sign.value <= rep.measure_sign.tolerance;
    rep.disjoint_support.pass =
        rep.disjoint_support.value <= rep.disjoint_support.tolerance;
    rep.identity.pass = rep.identity.value <= rep.identity.tolerance;

    rep.complementarity_lower.value = comp_lo;
    rep.complementarity_lower.tolerance =
        tols.complementarity_rel * (1.0 + measures.eta_mass());
    rep.complementarity_lower.pass =
        comp_lo <= rep.complementarity_lower.tolerance;

    rep.complementarity_upper.value = comp_hi;
    rep.complementarity_upper.tolerance =
        tols.complementarity_rel * (1.0 + measures.xi_mass());
    rep.complementarity_upper.pass =
        comp_hi <= rep.complementarity_upper.tolerance;

    return rep;
}

SolutionTriplet solve_two_wall(const Drift& f, const ScalarField& v,
                               const WallPair& walls, const PenaltyParams& params,
                               double tol, const ObstacleOptions& opts,
                               TwoWallTrace* trace) {
    require_same_grid(v.grid, walls.grid(), "solve_two_wall");
    require_finite(v, "solve_two_wall forcing");
    params.validate();
    if (!(tol > 0.0)) throw ValidationError("solve_two_wall: tol must be positive");

    const Grid& grid = v.grid;
    const auto pts = node_points(grid);
    const auto A = neg_laplacian_matrix(grid);
    const double theta = stencil_diagonal(grid);
    const std::size_t n = grid.node_count();

    EngineSetup base;
    base.grid = &grid;
    base.f = &f;
    base.v = &v.values;
    base.pts = &pts;
    base.A = &A;
    base.theta = theta;

    const double* lo = walls.lower().values.data();
    const double* hi = walls.upper().values.data();

    Eigen::VectorXd z = initial_guess(opts, n, v.values, lo, hi);
    int iterations = 0;
    if (trace) *trace = {};

    const double boot_tol = 1e-8 * theta;  // warm-start stages, residual units
    Eigen::VectorXd prev_stage;
    for (int m = 0; m < params.stages; ++m) {
        const double eps = params.epsilon_at(m);

        EngineSetup pen = base;
        pen.pen_lo = lo;
        pen.inv_delta = 1.0 / params.delta_at(m);
        pen.pen_hi = hi;
        pen.inv_epsilon = 1.0 / eps;
        EngineResult boot = newton_engine(pen, std::move(z), boot_tol, opts.max_newton);
        iterations += boot.iterations;

        // Inner delta-limit: hard lower wall, upper wall still penalized.
        EngineSetup inner = base;
        inner.hard_lo = lo;
        inner.pen_hi = hi;
        inner.inv_epsilon = 1.0 / eps;
        EngineResult stage =
            newton_engine(inner, std::move(boot.z), tol, opts.max_newton);
        iterations += stage.iterations;
        z = std::move(stage.z);

        if (trace) {
            trace->epsilons.push_back(eps);
            trace->stage_z.emplace_back(z.data(), z.data() + z.size());
            if (m > 0)
                trace->stage_change.push_back(
                    (z - prev_stage).lpNorm<Eigen::Infinity>());
        }
        prev_stage = z;
    }

    // Outer epsilon-limit: both walls hard.
    EngineSetup hard = base;
    hard.hard_lo = lo;
    hard.hard_hi = hi;
    EngineResult fin = newton_engine(hard, std::move(z), tol, opts.max_newton);
    iterations += fin.iterations;

    SolutionTriplet out{ScalarField(grid),
                        ScalarField(grid),
                        {ScalarField(grid), ScalarField(grid), 0.0},
                        {},
                        iterations};
    for (std::size_t i = 0; i < n; ++i) {
        const auto ei = static_cast<Eigen::Index>(i);
        out.z.values[i] = fin.z[ei];
        out.u.values[i] = fin.z[ei] + v.values[i];
    }
    require_finite(out.u, "solve_two_wall result");
    out.measures = extract_measures(f, v, out.z, walls);
    out.residuals = check_solution(out.z, v, out.measures, walls, f);
    return out;
}

SolutionTriplet solve_psor(const Drift& f, const ScalarField& v,
                           const WallPair& walls, double tol, double mass_tol,
                           double relaxation, const ObstacleOptions& opts) {
    require_same_grid(v.grid, walls.grid(), "solve_psor");
    require_finite(v, "solve_psor forcing");
    if (!(tol > 0.0)) throw ValidationError("solve_psor: tol must be positive");
    if (!(mass_tol > 0.0))
        throw ValidationError("solve_psor: mass_tol must be positive");
    if (!(relaxation > 0.0 && relaxation < 2.0))
        throw ValidationError("solve_psor: relaxation must lie in (0,2)");

    const Grid& grid = v.grid;
    const int nn = grid.nodes_per_axis();
    const std::size_t n = grid.node_count();
    const double theta = stencil_diagonal(grid);
    const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    const double vol = grid.cell_volume();
    const double ctol = walls.contact_tol();
    const auto pts = node_points(grid);

    std::vector<double> lo_z(n), hi_z(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo_z[i] = walls.lower()[i] - v.values[i];
        hi_z[i] = walls.upper()[i] - v.values[i];
    }

    std::vector<double> z(n);
    if (opts.initial_guess) {
        if (opts.initial_guess->size() != n)
            throw ValidationError("solve_psor: initial guess size mismatch");
        z = *opts.initial_guess;
    } else {
        for (std::size_t i = 0; i < n; ++i) z[i] = std::clamp(0.0, lo_z[i], hi_z[i]);
    }

    auto neighbor_sum = [&](const std::vector<double>& w, std::size_t i) {
        double acc = 0.0;
        if (grid.dim() == 1) {
            if (i > 0) acc += w[i - 1];
            if (i + 1 < n) acc += w[i + 1];
        } else {
            const std::size_t ix = i % static_cast<std::size_t>(nn);
            const std::size_t iy = i / static_cast<std::size_t>(nn);
            if (ix > 0) acc += w[i - 1];
            if (ix + 1 < static_cast<std::size_t>(nn)) acc += w[i + 1];
            if (iy > 0) acc += w[i - static_cast<std::size_t>(nn)];
            if (iy + 1 < static_cast<std::size_t>(nn))
                acc += w[i + static_cast<std::size_t>(nn)];
        }
        return acc;
    };

    long sweeps = 0;
    std::vector<double> q(n);
    // Sweep-change threshold for the inner passes.  It starts at 0.1 * tol
    // and tightens whenever the outer certificate fails: the residual lags
    // the iterate change by the 1/(1 - rho) convergence factor, so a fixed
    // threshold would let the outer loop spin without progress.
    double inner_stop = 0.1 * tol;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
        for (std::size_t i = 0; i < n; ++i) q[i] = -f(pts[i], z[i] + v.values[i]);

        while (true) {
            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double az = theta * z[i] - inv_h2 * neighbor_sum(z, i);
                double znew = z[i] + relaxation * (q[i] - az) / theta;
                znew = std::clamp(znew, lo_z[i], hi_z[i]);
                change = std::max(change, std::abs(znew - z[i]));
                z[i] = znew;
            }
            if (++sweeps > opts.max_sweeps)
                throw ConvergenceError("solve_psor: sweep budget exhausted", change);
            if (change <= inner_stop) break;
        }

        // Outer stop: natural residual and complementarity defect mass with
        // the un-lagged drift.
        double merit = 0.0;
        double defect_mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double az = theta * z[i] - inv_h2 * neighbor_sum(z, i);
            const double r = az + f(pts[i], z[i] + v.values[i]);
            const double nr =
                std::max(std::min(r / theta, z[i] - lo_z[i]), z[i] - hi_z[i]);
            merit = std::max(merit, std::abs(nr));
            if (z[i] - lo_z[i] <= ctol)
                defect_mass += std::max(-r, 0.0) * vol;
            else if (hi_z[i] - z[i] <= ctol)
                defect_mass += std::max(r, 0.0) * vol;
            else
                defect_mass += std::abs(r) * vol;
        }
        if (merit <= tol && defect_mass <= mass_tol) {
            SolutionTriplet out{ScalarField(grid),
                                ScalarField(grid),
                                {ScalarField(grid), ScalarField(grid), 0.0},
                                {},
                                static_cast<int>(sweeps)};
            for (std::size_t i = 0; i < n; ++i) {
                out.z.values[i] = z[i];
                out.u.values[i] = z[i] + v.values[i];
            }
            out.measures = extract_measures(f, v, out.z, walls, mass_tol);
            CheckTolerances tols;
            tols.identity_mass = std::max(tols.identity_mass, mass_tol);
            out.residuals = check_solution(out.z, v, out.measures, walls, f, tols);
            return out;
        }
        // Floor: a converged sweep still cycles by a few ulps of the O(1)
        // iterate, so thresholds below that would spin forever.
        inner_stop =
            std::max(inner_stop * 0.25, 64.0 * std::numeric_limits<double>::epsilon());
    }
    throw ConvergenceError("solve_psor: outer iteration budget exhausted", tol);
}

Drift AffineDrift::as_drift() const {
    if (!c0) throw ValidationError("affine drift: empty offset function");
    if (!(c1 >= 0.0) || !std::isfinite(c1))
        throw ValidationError("affine drift: state slope must be finite and >= 0");
    const auto offset = c0;
    const double slope = c1;
    return Drift([offset, slope](Point p, double s) { return offset(p) + slope * s; });
}

EnumResult solve_active_set_enum(const AffineDrift& f, const ScalarField& v,
                                 const WallPair& walls, double tol) {
    require_same_grid(v.grid, walls.grid(), "solve_active_set_enum");
    if (!f.c0) throw ValidationError("solve_active_set_enum: empty offset function");
    if (!(f.c1 >= 0.0))
        throw ValidationError("solve_active_set_enum: state slope must be >= 0");
    if (!(tol > 0.0))
        throw ValidationError("solve_active_set_enum: tol must be positive");
    const Grid& grid = v.grid;
    const std::size_t n = grid.node_count();
    if (n > 12)
        throw ValidationError(
            "solve_active_set_enum: refuses more than 12 nodes (3^N assignments)");

    const double theta = stencil_diagonal(grid);
    const Eigen::MatrixXd A = Eigen::MatrixXd(neg_laplacian_matrix(grid));
    Eigen::VectorXd c0(static_cast<Eigen::Index>(n));
    std::vector<double> lo_z(n), hi_z(n);
    for (std::size_t i = 0; i < n; ++i) {
        c0[static_cast<Eigen::Index>(i)] = f.c0(grid.node(i));
        lo_z[i] = walls.lower()[i] - v.values[i];
        hi_z[i] = walls.upper()[i] - v.values[i];
    }

    long feasible = 0;
    std::vector<Eigen::VectorXd> distinct;
    std::vector<int> labels(n, 0);

    long total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;

    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::VectorXd> vmap(v.values.data(),
                                                 static_cast<Eigen::Index>(n));
    for (long a = 0; a < total; ++a) {
        long rem = a;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rem % 3);
            rem /= 3;
        }

        std::vector<Eigen::Index> free_idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == 1)
                z[static_cast<Eigen::Index>(i)] = lo_z[i];
            else if (labels[i] == 2)
                z[static_cast<Eigen::Index>(i)] = hi_z[i];
            else
                free_idx.push_back(static_cast<Eigen::Index>(i));
        }

        if (!free_idx.empty()) {
            const auto nf = static_cast<Eigen::Index>(free_idx.size());
            Eigen::MatrixXd AFF(nf, nf);
            Eigen::VectorXd rhs(nf);
            for (Eigen::Index row = 0; row < nf; ++row) {
                const Eigen::Index i = free_idx[static_cast<std::size_t>(row)];
                double acc = -c0[i] - f.c1 * vmap[i];
                for (std::size_t jj = 0; jj < n; ++jj) {
                    const auto j = static_cast<Eigen::Index>(jj);
                    if (labels[jj] != 0) acc -= A(i, j) * z[j];
                }
                rhs[row] = acc;
                for (Eigen::Index col = 0; col < nf; ++col) {
                    const Eigen::Index j = free_idx[static_cast<std::size_t>(col)];
                    AFF(row, col) = A(i, j) + (i == j ? f.c1 : 0.0);
                }
            }
            const Eigen::VectorXd zf = AFF.ldlt().solve(rhs);
            for (Eigen::Index k = 0; k < nf; ++k)
                z[free_idx[static_cast<std::size_t>(k)]] = zf[k];
        }

        const Eigen::VectorXd r = A * z + c0 + f.c1 * (z + vmap);

        bool ok = true;
        const double tol_r = tol * theta;
        for (std::size_t i = 0; i < n && ok; ++i) {
            const auto ei = static_cast<Eigen::Index>(i);
            if (labels[i] == 0)
                ok = z[ei] >= lo_z[i] - tol && z[ei] <= hi_z[i] + tol;
            else if (labels[i] == 1)
                ok = r[ei] >= -tol_r;
            else
                ok = r[ei] <= tol_r;
        }
        if (!ok) continue;

        ++feasible;
        bool is_new = true;
        for (const auto& known : distinct) {
            if ((known - z).lpNorm<Eigen::Infinity>() <= tol) {
                is_new = false;
                break;
            }
        }
        if (is_new) distinct.push_back(z);
    }

    if (distinct.empty())
        throw ConvergenceError("solve_active_set_enum: no feasible assignment", 0.0);
    if (distinct.size() > 1)
        throw ValidationError(
            "solve_active_set_enum: multiple distinct feasible solutions (" +
            std::to_string(distinct.size()) + ")");

    const Drift drift = f.as_drift();
    SolutionTriplet out{ScalarField(grid),
                        ScalarField(grid),
                        {ScalarField(grid), ScalarField(grid), 0.0},
                        {},
                        0};
    for (std::size_t i = 0; i < n; ++i) {
        out.z.values[i] = distinct[0][static_cast<Eigen::Index>(i)];
        out.u.values[i] = out.z.values[i] + v.values[i];
    }
    out.measures = extract_measures(drift, v, out.z, walls);
    out.residuals = check_solution(out.z, v, out.measures, walls, drift);

    return EnumResult{std::move(out), feasible, static_cast<int>(distinct.size())};
}

}  // namespace rspde
