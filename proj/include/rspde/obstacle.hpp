#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rspde/coefficients.hpp"
#include "rspde/grid.hpp"

namespace rspde {

/// Reflecting walls h1 <= h2 on a grid.  Construction enforces strict
/// interior separation (at least 10x the contact tolerance) and, when built
/// from functions, compatibility with the zero boundary: h1 <= 0 <= h2 on
/// the boundary of the domain.
class WallPair {
public:
    static WallPair from_fields(ScalarField lower, ScalarField upper);
    static WallPair from_functions(const Grid& grid,
                                   const std::function<double(Point)>& lower,
                                   const std::function<double(Point)>& upper);

    const ScalarField& lower() const { return lower_; }
    const ScalarField& upper() const { return upper_; }
    const Grid& grid() const { return lower_.grid; }

    double sup_wall_norm() const { return sup_wall_norm_; }

    /// Nodes within this distance of a wall count as contact nodes:
    /// 1e-7 * (1 + max(sup|h1|, sup|h2|)).
    double contact_tol() const { return 1e-7 * (1.0 + sup_wall_norm_); }

private:
    WallPair(ScalarField lower, ScalarField upper);
    ScalarField lower_;
    ScalarField upper_;
    double sup_wall_norm_;
};

/// Penalty scales for the two walls plus the geometric schedule of the
/// double limit: stage m uses epsilon_m = epsilon * rho^m with the inner
/// parameter tied to it by delta_m = epsilon_m / 100.
struct PenaltyParams {
    double epsilon = 1e-2;
    double delta = 1e-4;
    double rho = 0.25;
    int stages = 8;

    void validate() const;
    double epsilon_at(int stage) const;
    double delta_at(int stage) const;
};

/// Node masses of the two reflection measures (the density times the cell
/// volume).  eta pushes the solution up off the lower wall, xi pushes it
/// down off the upper wall.
struct ReflectionMeasures {
    ScalarField eta;
    ScalarField xi;
    double off_support_mass = 0.0;

    double eta_mass() const;
    double xi_mass() const;
};

struct ClauseCheck {
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::int64_t worst_node = -1;
};

/// Discrete verdict on the four defining clauses of a reflected solution:
/// wall respect, measure positivity and disjoint supports, the equation
/// identity, and complementarity of each measure with its gap.
struct ResidualReport {
    ClauseCheck wall;
    ClauseCheck measure_sign;
    ClauseCheck disjoint_support;
    ClauseCheck identity;
    ClauseCheck complementarity_lower;
    ClauseCheck complementarity_upper;

    bool pass() const {
        return wall.pass && measure_sign.pass && disjoint_support.pass &&
               identity.pass && complementarity_lower.pass &&
               complementarity_upper.pass;
    }
};

struct CheckTolerances {
    double wall = 1e-9;
    double sign_mass = 1e-12;
    double disjoint_mass = 1e-12;
    double identity_mass = 1e-8;
    double complementarity_rel = 1e-10;
};

/// Solution of an obstacle problem in decomposed form: u = z + v where v is
/// the supplied forcing field and z carries the constraint.
struct SolutionTriplet {
    ScalarField u;
    ScalarField z;
    ReflectionMeasures measures;
    ResidualReport residuals;
    int iterations = 0;
};

struct ObstacleOptions {
    std::optional<std::vector<double>> initial_guess;  // in z coordinates
    int max_newton = 200;
    int max_outer = 200;
    long max_sweeps = 200000;
};

/// Smallest admitted line-search step, 2^-20.
inline constexpr double kLineSearchFloor = 0x1.0p-20;

/// Stage trace of the outer penalty limit: z^{eps_m} after the inner
/// delta-limit at each stage, with stage-to-stage sup changes.
struct TwoWallTrace {
    std::vector<double> epsilons;
    std::vector<std::vector<double>> stage_z;
    std::vector<double> stage_change;
};

/// Doubly penalized problem at the fixed (epsilon, delta) in params:
///   -Lap z + f(x, z + v) = (1/delta)(z + v - h1)^- - (1/epsilon)(z + v - h2)^+
/// solved by damped semismooth Newton until the sup norm of the nonlinear
/// residual drops below tol.
ScalarField solve_penalized(const Drift& f, const ScalarField& v,
                            const WallPair& walls, const PenaltyParams& params,
                            double tol, const ObstacleOptions& opts = {});

/// One-wall reflected problem (hard constraint u >= lower), optionally with
/// a penalized upper wall still in place: the problem with augmented drift
/// f + (. + v - h2)^+ / epsilon that realizes the inner delta-limit of the
/// double penalization at fixed epsilon.  Walls may violate the boundary
/// compatibility clause here (raw single-wall call, relaxed validation).
/// tol is in solution units; eta holds node masses.
struct UpperPenalty {
    const ScalarField* wall = nullptr;
    double epsilon = 0.0;
};

struct SingleWallResult {
    ScalarField z;
    ScalarField eta;
    int iterations = 0;
};

SingleWallResult solve_single_wall(const Drift& f, const ScalarField& v,
                                   const ScalarField& lower_wall,
                                   const std::optional<UpperPenalty>& upper = {},
                                   double tol = 1e-12,
                                   const ObstacleOptions& opts = {});

/// Full two-wall solve by the double limit: each stage solves the doubly
/// penalized problem at (epsilon_m, delta_m) as a warm start, then realizes
/// the inner delta-limit exactly (hard lower wall, upper wall penalized at
/// epsilon_m); after the last stage the outer limit is completed with both
/// walls hard.  Measures are then extracted from the residual and the
/// triplet is checked clause by clause.  tol is in solution units.
SolutionTriplet solve_two_wall(const Drift& f, const ScalarField& v,
                               const WallPair& walls, const PenaltyParams& params,
                               double tol = 1e-12, const ObstacleOptions& opts = {},
                               TwoWallTrace* trace = nullptr);

/// Projected SOR reference solver, independent of the Newton path.  The
/// drift is lagged across outer passes; inner sweeps project onto the
/// walls, so every iterate satisfies the wall bounds exactly.  Inner passes
/// stop when the sweep change drops below a threshold that starts at
/// 0.1 * tol and tightens while the outer certificate (natural residual
/// below tol and complementarity defect mass below mass_tol) fails.
SolutionTriplet solve_psor(const Drift& f, const ScalarField& v,
                           const WallPair& walls, double tol,
                           double mass_tol = 1e-6, double relaxation = 1.5,
                           const ObstacleOptions& opts = {});

/// Affine drift f(x, u) = c0(x) + c1 * u with c1 >= 0; the form the
/// enumeration oracle can invert node set by node set.
struct AffineDrift {
    std::function<double(Point)> c0;
    double c1 = 0.0;

    Drift as_drift() const;
};

/// Exhaustive active-set enumeration over all 3^N node labelings
/// (lower contact / free / upper contact); exact reference for grids of at
/// most 12 nodes.  Labelings whose solutions coincide (a node exactly on a
/// wall with zero multiplier can carry either label) are deduplicated by
/// the solution vector; distinct feasible solutions are an error.
struct EnumResult {
    SolutionTriplet triplet;
    long feasible_assignments = 0;  // raw count over labelings
    int distinct_solutions = 0;     // after deduplication
};

EnumResult solve_active_set_enum(const AffineDrift& f, const ScalarField& v,
                                 const WallPair& walls, double tol = 1e-9);

/// Splits the equation residual r = -Lap z + f(x, z + v) into the two
/// measures by contact set and sign:
///   eta[i] = max(r,0) * cell_volume on the lower contact set,
///   xi[i]  = max(-r,0) * cell_volume on the upper contact set.
/// Residual mass that lands off the contact sets or with the wrong sign is
/// reported and must stay below mass_tol.
ReflectionMeasures extract_measures(const Drift& f, const ScalarField& v,
                                    const ScalarField& z, const WallPair& walls,
                                    double mass_tol = 1e-8);

/// Clause-by-clause certificate for a candidate triplet.
ResidualReport check_solution(const ScalarField& z, const ScalarField& v,
                              const ReflectionMeasures& measures,
                              const WallPair& walls, const Drift& f,
                              const CheckTolerances& tols = {});

}  // namespace rspde
