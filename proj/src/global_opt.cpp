#include "bobw/global_opt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bobw {

void require_horizon(const LayeredMdp& mdp, std::size_t T) {
    const std::size_t floor = std::max<std::size_t>({2, mdp.num_states(), mdp.num_actions()});
    if (T < floor)
        throw std::invalid_argument("horizon T=" + std::to_string(T) + " is below max{2, S, A} = " +
                                    std::to_string(floor));
}

GlobalOpt::GlobalOpt(LayeredMdp mdp, std::size_t T, GlobalOptConfig config)
    : mdp_(std::move(mdp)), T_(T), log_T_(std::log(static_cast<double>(T))), config_(config),
      cumulative_(mdp_.num_states(), mdp_.num_actions(), 0.0),
      eta_(mdp_.num_states(), mdp_.num_actions(), 1.0 / (2.0 * static_cast<double>(mdp_.horizon()))),
      zeta_sum_(mdp_.num_states(), mdp_.num_actions(), 0.0),
      predictor_(mdp_.num_states(), mdp_.num_actions(), config.predictor) {
    require_horizon(mdp_, T_);
}

GlobalOpt::Decision GlobalOpt::act() const {
    LossTable L = cumulative_;
    const auto m = predictor_.current().values();
    auto lv = L.values();
    for (std::size_t i = 0; i < lv.size(); ++i) lv[i] += m[i];

    const PolytopeProblem problem{mdp_, L, eta_};
    OccupancySolution sol =
        solve_occupancy(problem, config_.solver, last_q_ ? &*last_q_ : nullptr);
    Decision d;
    d.pi = policy_from_occupancy(sol.q);
    d.q = std::move(sol.q);
    d.solver_iterations = sol.iterations;
    return d;
}

LossTable GlobalOpt::estimate(const OccupancyMeasure& q, const Trajectory& traj,
                              const LossTable& m) {
    LossTable hat = m;
    for (const Step& st : traj.steps) {
        const double qsa = q(st.state, st.action);
        if (!(qsa >= 1e-300))
            throw InvariantViolation("estimate: visited pair has vanishing occupancy");
        hat(st.state, st.action) = m(st.state, st.action) + (st.loss - m(st.state, st.action)) / qsa;
    }
    return hat;
}

LossTable GlobalOpt::shift(const LayeredMdp& mdp, const Policy& pi, const LossTable& ell_tilde) {
    const ValueFunctions vf = value_functions(mdp, pi, ell_tilde);
    LossTable g(mdp.num_states(), mdp.num_actions(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s)
        for (ActionId a = 0; a < mdp.num_actions(); ++a)
            g(s, a) = vf.q(s, a) - vf.v[s] - ell_tilde(s, a);
    return g;
}

LossTable GlobalOpt::update_learning_rate(const OccupancyMeasure& q, const LossTable& ell_hat,
                                          const LossTable& g, const LossTable& m) {
    LossTable zeta(mdp_.num_states(), mdp_.num_actions(), 0.0);
    for (StateId s = 0; s < mdp_.num_states(); ++s) {
        for (ActionId a = 0; a < mdp_.num_actions(); ++a) {
            const double tilde = ell_hat(s, a) - m(s, a);
            const double shifted = tilde + g(s, a);
            const double z = q(s, a) * q(s, a) * std::min(tilde * tilde, shifted * shifted);
            if (!(z >= 0.0 && z <= 1.0 + 1e-9))
                throw InvariantViolation("global learning rate: zeta outside [0, 1]");
            zeta(s, a) = z;
            const double eta = eta_(s, a);
            eta_(s, a) = 1.0 / (1.0 / eta + eta * z / log_T_);
            zeta_sum_(s, a) += z;
        }
    }
    return zeta;
}

GlobalOptStep GlobalOpt::step(Rng& rng, const Observe& observe) {
    GlobalOptStep out;
    out.t = t_;
    Decision d = act();
    out.solver_iterations = d.solver_iterations;
    out.m = predictor_.current();
    out.eta = eta_;

    out.traj = sample_trajectory(mdp_, d.pi, rng);
    observe(out.traj);

    out.ell_hat = estimate(d.q, out.traj, out.m);
    out.ell_tilde = LossTable(mdp_.num_states(), mdp_.num_actions(), 0.0);
    for (const Step& st : out.traj.steps)
        out.ell_tilde(st.state, st.action) =
            out.ell_hat(st.state, st.action) - out.m(st.state, st.action);
    out.shift = shift(mdp_, d.pi, out.ell_tilde);
    out.zeta = update_learning_rate(d.q, out.ell_hat, out.shift, out.m);
    update_predictor(out.traj);

    auto cum = cumulative_.values();
    const auto hat = out.ell_hat.values();
    for (std::size_t i = 0; i < cum.size(); ++i) cum[i] += hat[i];
    ++t_;

    last_q_ = d.q;
    out.q = std::move(d.q);
    out.pi = std::move(d.pi);
    return out;
}

}  // namespace bobw
