#include "bobw/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace bobw {

namespace {

void require_finite(std::span<const double> xs, const char* what) {
    for (double x : xs)
        if (!std::isfinite(x)) throw SolverError(std::string(what) + ": non-finite input");
}

void require_positive(std::span<const double> xs, const char* what) {
    for (double x : xs)
        if (!(x > 0.0)) throw SolverError(std::string(what) + ": learning rates must be positive");
}

}  // namespace

SimplexSolution solve_simplex_full(const SimplexProblem& problem, double tol) {
    const auto& L = problem.loss;
    const auto& eta = problem.eta;
    if (L.size() != eta.size() || L.empty())
        throw SolverError("solve_simplex: loss and eta must have equal nonzero length");
    if (!(tol > 0.0)) throw SolverError("solve_simplex: tol must be positive");
    require_finite(L, "solve_simplex");
    require_finite(eta, "solve_simplex");
    require_positive(eta, "solve_simplex");

    const std::size_t n = L.size();
    const double lmin = *std::min_element(L.begin(), L.end());
    std::vector<double> d(n), w(n);
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        d[a] = L[a] - lmin;
        w[a] = 1.0 / eta[a];
        hi += w[a];
        if (d[a] == 0.0) lo = std::max(lo, w[a]);
    }

    // phi(mu) = sum w/(d+mu) - 1 is convex and decreasing on (0, inf);
    // phi(lo) >= 0 >= phi(hi).
    auto phi = [&](double mu, double* slope) {
        double f = -1.0;
        double df = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            const double r = 1.0 / (d[a] + mu);
            f += w[a] * r;
            df -= w[a] * r * r;
        }
        if (slope) *slope = df;
        return f;
    };

    constexpr int kMaxIterations = 10000;
    double mu = lo;
    int it = 0;
    for (; it < kMaxIterations; ++it) {
        double slope = 0.0;
        const double f = phi(mu, &slope);
        if (f <= 0.0) {
            hi = std::min(hi, mu);
            if (f > -1e-15) break;
        } else {
            lo = std::max(lo, mu);
            if (f < 1e-15) break;
        }
        double next = mu - f / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == mu) break;
        mu = next;
    }
    if (it == kMaxIterations) throw SolverError("solve_simplex: iteration cap exceeded");

    SimplexSolution sol;
    sol.p.resize(n);
    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        sol.p[a] = w[a] / (d[a] + mu);
        total += sol.p[a];
    }
    for (double& p : sol.p) p /= total;
    sol.multiplier = mu - lmin;
    sol.iterations = it + 1;

    const double scale = 1.0 + std::max(std::abs(lmin), std::abs(*std::max_element(L.begin(), L.end())));
    if (simplex_kkt_residual(problem, sol) > tol * scale * 1e3)
        throw SolverError("solve_simplex: KKT residual above tolerance");
    return sol;
}

double simplex_objective(const SimplexProblem& problem, std::span<const double> p) {
    double obj = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a)
        obj += p[a] * problem.loss[a] - std::log(p[a]) / problem.eta[a];
    return obj;
}

double simplex_kkt_residual(const SimplexProblem& problem, const SimplexSolution& sol) {
    double r = 0.0;
    for (std::size_t a = 0; a < sol.p.size(); ++a)
        r = std::max(r, std::abs(problem.loss[a] + sol.multiplier -
                                 1.0 / (problem.eta[a] * sol.p[a])));
    return r;
}

namespace {

/// Flow constraints E q = b: initial-state mass one, conservation at every other state.
struct FlowConstraints {
    Eigen::MatrixXd E;
    Eigen::VectorXd b;
};

FlowConstraints build_constraints(const LayeredMdp& mdp) {
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    FlowConstraints c{Eigen::MatrixXd::Zero(S, S * A), Eigen::VectorXd::Zero(S)};
    c.b(mdp.initial_state()) = 1.0;
    for (StateId n = 0; n < S; ++n) {
        for (ActionId a = 0; a < A; ++a) c.E(n, n * A + a) = 1.0;
        const std::size_t h = mdp.layer_of(n);
        if (h == 0) continue;
        for (StateId s = mdp.layer_begin(h - 1); s < mdp.layer_end(h - 1); ++s)
            for (ActionId a = 0; a < A; ++a) c.E(n, s * A + a) -= mdp.transition(s, a, n);
    }
    return c;
}

/// Separable regularizer sum_i w_i r(x_i).
struct Regularizer {
    enum class Kind { LogBarrier, Entropy } kind;
    Eigen::VectorXd w;

    double value(const Eigen::VectorXd& x) const {
        double v = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i)
            v += kind == Kind::LogBarrier ? -w(i) * std::log(x(i)) : w(i) * x(i) * std::log(x(i));
        return v;
    }
    double grad(Eigen::Index i, double x) const {
        return kind == Kind::LogBarrier ? -w(i) / x : w(i) * (std::log(x) + 1.0);
    }
    double hess(Eigen::Index i, double x) const {
        return kind == Kind::LogBarrier ? w(i) / (x * x) : w(i) / x;
    }
};

Eigen::VectorXd to_vector(const SATable& t) {
    const auto v = t.values();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

OccupancySolution newton_solve(const LayeredMdp& mdp, const SATable& loss, const Regularizer& reg,
                               const NewtonOptions& opt, const OccupancyMeasure* warm_start) {
    if (loss.num_states() != mdp.num_states() || loss.num_actions() != mdp.num_actions())
        throw SolverError("solve_occupancy: loss shape does not match the MDP");
    require_finite(loss.values(), "solve_occupancy");
    if (!(opt.tol > 0.0)) throw SolverError("solve_occupancy: tol must be positive");

    const FlowConstraints fc = build_constraints(mdp);
    const Eigen::VectorXd L = to_vector(loss);
    const Eigen::Index n = L.size();
    const double scale = 1.0 + L.cwiseAbs().maxCoeff();

    Eigen::VectorXd x;
    bool warm = warm_start != nullptr && warm_start->same_shape(loss);
    if (warm) {
        x = to_vector(*warm_start);
        warm = x.minCoeff() > 0.0 && x.allFinite();
    }
    if (!warm) {
        x = to_vector(occupancy(mdp, Policy::uniform(mdp.num_states(), mdp.num_actions())));
        if (!(x.minCoeff() > 0.0))
            throw SolverError("solve_occupancy: some state is unreachable, the polytope has no interior");
    }

    Eigen::VectorXd g(n), dinv(n);
    auto eval_derivatives = [&](const Eigen::VectorXd& at) {
        for (Eigen::Index i = 0; i < n; ++i) {
            g(i) = L(i) + reg.grad(i, at(i));
            dinv(i) = 1.0 / reg.hess(i, at(i));
        }
    };
    auto residual_norm = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& nu) {
        Eigen::VectorXd rd(n);
        for (Eigen::Index i = 0; i < n; ++i) rd(i) = L(i) + reg.grad(i, at(i));
        rd.noalias() += fc.E.transpose() * nu;
        const Eigen::VectorXd rp = fc.E * at - fc.b;
        return std::sqrt(rd.squaredNorm() + rp.squaredNorm());
    };

    // Least-squares multiplier estimate at the starting point.
    eval_derivatives(x);
    Eigen::MatrixXd M = fc.E * dinv.asDiagonal() * fc.E.transpose();
    Eigen::VectorXd nu = M.ldlt().solve(-(fc.E * dinv.cwiseProduct(g)));

    OccupancySolution out;
    double stationarity = 0.0;
    double feasibility = 0.0;
    bool converged = false;
    int it = 0;
    for (; it <= opt.max_iterations; ++it) {
        eval_derivatives(x);
        const Eigen::VectorXd rd = g + fc.E.transpose() * nu;
        const Eigen::VectorXd rp = fc.E * x - fc.b;
        stationarity = rd.cwiseAbs().maxCoeff() / scale;
        feasibility = rp.cwiseAbs().maxCoeff();
        if (stationarity <= opt.tol && feasibility <= opt.feasibility_tol) {
            converged = true;
            break;
        }
        if (it == opt.max_iterations) break;

        M.noalias() = fc.E * dinv.asDiagonal() * fc.E.transpose();
        const Eigen::VectorXd nu_next = M.ldlt().solve(rp - fc.E * dinv.cwiseProduct(g));
        const Eigen::VectorXd dx = -dinv.cwiseProduct(g + fc.E.transpose() * nu_next);
        const Eigen::VectorXd dnu = nu_next - nu;

        double alpha = 1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (dx(i) < 0.0) alpha = std::min(alpha, opt.boundary_fraction * x(i) / -dx(i));

        const double r0 = std::sqrt(rd.squaredNorm() + rp.squaredNorm());
        bool accepted = false;
        for (int k = 0; k <= opt.max_damping; ++k) {
            const Eigen::VectorXd xt = x + alpha * dx;
            const Eigen::VectorXd nut = nu + alpha * dnu;
            if (xt.minCoeff() > 0.0 && residual_norm(xt, nut) <= (1.0 - 0.01 * alpha) * r0) {
                x = xt;
                nu = nut;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Residual is at rounding level; the direction no longer reduces it.
            if (stationarity <= 1e3 * opt.tol && feasibility <= 1e3 * opt.feasibility_tol) {
                converged = true;
                break;
            }
            throw SolverError("solve_occupancy: line search failed after damping retries");
        }
    }
    if (!converged) throw SolverError("solve_occupancy: Newton iteration cap exceeded");

    out.q = OccupancyMeasure(mdp.num_states(), mdp.num_actions(), 0.0);
    std::copy(x.data(), x.data() + n, out.q.values().begin());
    out.multipliers.assign(nu.data(), nu.data() + nu.size());
    out.iterations = it;
    out.stationarity = stationarity;
    out.feasibility = feasibility;
    if (x.minCoeff() < 1e-300) throw SolverError("solve_occupancy: iterate underflowed to zero");
    return out;
}

}  // namespace

OccupancySolution solve_occupancy(const PolytopeProblem& problem, const NewtonOptions& options,
                                  const OccupancyMeasure* warm_start) {
    if (!problem.eta.same_shape(problem.loss))
        throw SolverError("solve_occupancy: eta shape does not match the loss");
    require_finite(problem.eta.values(), "solve_occupancy");
    require_positive(problem.eta.values(), "solve_occupancy");
    Regularizer reg{Regularizer::Kind::LogBarrier, to_vector(problem.eta).cwiseInverse()};
    return newton_solve(problem.mdp, problem.loss, reg, options, warm_start);
}

OccupancySolution solve_occupancy_entropy(const LayeredMdp& mdp, const SATable& loss, double eta,
                                          const NewtonOptions& options,
                                          const OccupancyMeasure* warm_start) {
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw SolverError("solve_occupancy_entropy: eta must be positive");
    Regularizer reg{Regularizer::Kind::Entropy,
                    Eigen::VectorXd::Constant(static_cast<Eigen::Index>(loss.size()), 1.0 / eta)};
    return newton_solve(mdp, loss, reg, options, warm_start);
}

double occupancy_objective(const PolytopeProblem& problem, const SATable& q) {
    double obj = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        obj += q.values()[i] * problem.loss.values()[i] -
               std::log(q.values()[i]) / problem.eta.values()[i];
    return obj;
}

double flow_residual(const LayeredMdp& mdp, const SATable& q) {
    const FlowConstraints fc = build_constraints(mdp);
    const Eigen::VectorXd r = fc.E * to_vector(q) - fc.b;
    return r.cwiseAbs().maxCoeff();
}

}  // namespace bobw
