#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "bobw/global_opt.hpp"
#include "bobw/mdp.hpp"
#include "bobw/predictor.hpp"
#include "bobw/solver.hpp"

namespace bobw {

struct PolicyOptConfig {
    PredictorConfig predictor;
    double simplex_tol = kDefaultSolverTol;
    /// Hard cap on virtual episodes is this constant times H S A (ln T)^2.
    double virtual_cap_constant = 2000.0;
};

/// Output of the backward policy pass.
struct PolicyDecision {
    Policy pi;
    LossTable q_pred;              ///< Q^{pi}(s,a; m_t)
    std::vector<double> v_pred;    ///< V^{pi}(s; m_t)
};

struct DilatedBonus {
    std::vector<double> local;  ///< b_t(s)
    LossTable dilated;          ///< B_t(s,a)
};

/// Everything one iteration (real or virtual) of the policy learner produced.
struct PolicyOptStep {
    bool real = true;
    std::size_t real_index = 0;  ///< real-episode index t used for gamma_t
    std::size_t iteration = 0;   ///< real + virtual count, 1-based
    Policy pi;
    OccupancyMeasure q_pi;
    std::vector<double> q_explore;  ///< q_t(s) = q^{pi}(s) + gamma_t
    double gamma = 0.0;
    LossTable m;
    LossTable q_pred;
    LossTable q_hat;
    LossTable zeta;  ///< zero in virtual iterations
    SATable eta_before;
    SATable eta_after;
    DilatedBonus bonus;
    Trajectory traj;  ///< empty in virtual iterations
    std::pair<StateId, ActionId> dagger{0, 0};
};

/**
 * Per-state log-barrier OFTRL over action distributions with the optimistic
 * Q-estimator, dilated exploration bonuses and virtual episodes.
 *
 * 1/eta_1 = 180 H^3, m_1 = 1/2, gamma_t = sqrt(HS)/t with t the real-episode
 * index. Virtual iterations shrink a single learning rate, feed a zero loss
 * and leave the predictor untouched; the run continues until T real episodes.
 */
class PolicyOpt {
public:
    PolicyOpt(LayeredMdp mdp, std::size_t T, PolicyOptConfig config = {});

    /// Backward pass: Q^{pi_t}(.;m_t) for layer h uses the already-fixed deeper rows.
    PolicyDecision optimize_policy() const;

    /// gamma_t for the upcoming real episode.
    double gamma() const;

    /// q_t(s) = q^{pi}(s) + gamma_t
    std::vector<double> exploration_mass(const OccupancyMeasure& q_pi) const;

    /// Y_t: true when max eta(s,a) / q_t(s) <= 1 / (18 sqrt(H^3 S)).
    bool check_virtual(const std::vector<double>& q_explore) const;

    /// argmax eta(s,a) / q_t(s), lexicographically smallest on ties.
    std::pair<StateId, ActionId> argmax_ratio(const std::vector<double>& q_explore) const;

    /// Shrinks eta at the argmax pair by 1 + 1/(324 H ln T). Returns the pair.
    std::pair<StateId, ActionId> virtual_update(const std::vector<double>& q_explore);

    /// Q_hat = Q(m) + 1[s,a visited] (L - M) / (q_t(s) pi(a|s)) Y - gamma H / q_t(s).
    /// `traj` is ignored when `real` is false.
    LossTable q_estimate(const PolicyDecision& decision, const std::vector<double>& q_explore,
                         const Trajectory& traj, bool real) const;

    /// zeta = (1[s,a] - pi(a|s) 1[s])^2 (L - M)^2;  1/eta += eta zeta / (q_t(s)^2 ln T).
    LossTable real_update_learning_rate(const Policy& pi, const std::vector<double>& q_explore,
                                        const Trajectory& traj, const LossTable& m);

    /// b and B from eta_before (eta_t) and the current rates (eta_{t+1}).
    DilatedBonus bonus(const Policy& pi, const std::vector<double>& q_explore,
                       const SATable& eta_before) const;

    PolicyOptStep step(Rng& rng, const Observe& observe);

    const LayeredMdp& mdp() const { return mdp_; }
    std::size_t horizon_T() const { return T_; }
    double log_T() const { return log_T_; }
    std::size_t real_episodes() const { return real_t_; }
    std::size_t total_iterations() const { return total_t_; }
    std::size_t virtual_count() const { return virtual_count_; }
    double virtual_cap() const;
    const SATable& eta() const { return eta_; }
    const LossTable& prediction() const { return predictor_.current(); }
    const LossTable& cumulative() const { return cumulative_; }
    /// sum over real iterations of zeta / q_t(s)^2, per pair
    const SATable& scaled_zeta_sum() const { return scaled_zeta_sum_; }
    bool finished() const { return real_t_ >= T_; }

private:
    /// L_{t,h} - M_{t,h} for every layer h of the trajectory.
    std::vector<double> suffix_gap(const Trajectory& traj, const LossTable& m) const;

    LayeredMdp mdp_;
    std::size_t T_;
    double log_T_;
    PolicyOptConfig config_;
    LossTable cumulative_;  ///< sum of (Q_hat - B)
    SATable eta_;
    SATable scaled_zeta_sum_;
    LossPredictor predictor_;
    std::size_t real_t_ = 0;
    std::size_t total_t_ = 0;
    std::size_t virtual_count_ = 0;
};

}  // namespace bobw
