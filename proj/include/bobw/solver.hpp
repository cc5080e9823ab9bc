#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "bobw/mdp.hpp"

namespace bobw {

/// Stationarity tolerance used by the learners unless configured otherwise.
inline constexpr double kDefaultSolverTol = 1e-10;

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// min_p <p, loss> + sum_a (1/eta_a) ln(1/p_a) over the probability simplex.
struct SimplexProblem {
    std::span<const double> loss;
    std::span<const double> eta;
};

struct SimplexSolution {
    std::vector<double> p;
    double multiplier = 0.0;  ///< lambda in the stationarity condition L_a + lambda = 1/(eta_a p_a)
    int iterations = 0;
};

/**
 * Log-barrier OFTRL step over the simplex.
 *
 * Stationarity gives p_a = (1/eta_a) / (L_a + lambda); lambda is the root of
 * sum_a p_a(lambda) = 1 on (-min L, inf), found by Newton iterations from the
 * left of the root with a bisection bracket as safeguard. The loss is shifted
 * by its minimum internally so the root stays well conditioned for large L.
 */
SimplexSolution solve_simplex_full(const SimplexProblem& problem, double tol = kDefaultSolverTol);

inline std::vector<double> solve_simplex(const SimplexProblem& problem,
                                         double tol = kDefaultSolverTol) {
    return solve_simplex_full(problem, tol).p;
}

/// Objective value <p, L> + sum (1/eta) ln(1/p).
double simplex_objective(const SimplexProblem& problem, std::span<const double> p);

/// max_a |L_a + lambda - 1/(eta_a p_a)|
double simplex_kkt_residual(const SimplexProblem& problem, const SimplexSolution& sol);

/// min_q <q, L> + sum_{s,a} (1/eta(s,a)) ln(1/q(s,a)) over the occupancy polytope.
struct PolytopeProblem {
    const LayeredMdp& mdp;
    const SATable& loss;
    const SATable& eta;
};

struct OccupancySolution {
    OccupancyMeasure q;
    std::vector<double> multipliers;  ///< one per flow constraint (state)
    int iterations = 0;
    double stationarity = 0.0;  ///< max |grad + E^T nu| / (1 + max|L|)
    double feasibility = 0.0;   ///< max |E q - b|
};

struct NewtonOptions {
    double tol = kDefaultSolverTol;
    double feasibility_tol = 1e-11;
    int max_iterations = 200;
    int max_damping = 20;
    /// Fraction of the distance to zero a coordinate may travel in one step.
    double boundary_fraction = 0.99;
};

/**
 * Log-barrier OFTRL step over Omega(P) by damped infeasible-start Newton on
 * the KKT system of the flow constraints. Starts from `warm_start` when
 * given (strictly positive) and from the uniform-policy occupancy otherwise.
 * Throws SolverError when Newton fails to converge.
 */
OccupancySolution solve_occupancy(const PolytopeProblem& problem, const NewtonOptions& options = {},
                                  const OccupancyMeasure* warm_start = nullptr);

/// Negative-entropy variant, (1/eta) sum q ln q with a scalar rate; used by the O-REPS baseline.
OccupancySolution solve_occupancy_entropy(const LayeredMdp& mdp, const SATable& loss, double eta,
                                          const NewtonOptions& options = {},
                                          const OccupancyMeasure* warm_start = nullptr);

double occupancy_objective(const PolytopeProblem& problem, const SATable& q);

/// Max violation of the flow constraints (initial-state mass and conservation).
double flow_residual(const LayeredMdp& mdp, const SATable& q);

}  // namespace bobw
