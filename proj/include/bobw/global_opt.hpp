#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>

#include "bobw/mdp.hpp"
#include "bobw/predictor.hpp"
#include "bobw/solver.hpp"

namespace bobw {

/// Fills trajectory losses from the environment. The only channel through
/// which a learner sees ell_t, so feedback stays restricted to visited pairs.
using Observe = std::function<void(Trajectory&)>;

/// A checked algorithmic invariant failed; always a bug or a broken configuration.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Rejects horizons below max{2, S, A}.
void require_horizon(const LayeredMdp& mdp, std::size_t T);

struct GlobalOptConfig {
    PredictorConfig predictor;
    NewtonOptions solver;
};

/// Everything one episode of the occupancy-measure learner produced.
struct GlobalOptStep {
    std::size_t t = 0;
    OccupancyMeasure q;
    Policy pi;
    LossTable m;          ///< prediction used in this episode
    SATable eta;          ///< learning rates used in this episode
    Trajectory traj;
    LossTable ell_hat;
    LossTable ell_tilde;  ///< ell_hat - m, nonzero only on the trajectory
    LossTable shift;      ///< loss-shifting function g_t
    LossTable zeta;
    int solver_iterations = 0;
};

/**
 * Optimistic FTRL over the occupancy polytope with a per-pair log-barrier,
 * importance-weighted optimistic estimates, loss shifting and adaptive
 * learning rates.
 *
 * Initial state: 1/eta_1 = 2H everywhere, m_1 = 1/2, zero cumulative estimate.
 */
class GlobalOpt {
public:
    GlobalOpt(LayeredMdp mdp, std::size_t T, GlobalOptConfig config = {});

    struct Decision {
        OccupancyMeasure q;
        Policy pi;
        int solver_iterations = 0;
    };

    /// Solves the OFTRL objective on cumulative_estimate + m_t; does not mutate.
    Decision act() const;

    /// m + 1[visited] (l - m) / q on the trajectory, m elsewhere.
    static LossTable estimate(const OccupancyMeasure& q, const Trajectory& traj, const LossTable& m);

    /// g(s,a) = Q(s,a; tilde) - V(s; tilde) - tilde(s,a) under pi.
    static LossTable shift(const LayeredMdp& mdp, const Policy& pi, const LossTable& ell_tilde);

    /// zeta = q^2 min{(hat - m)^2, (hat + g - m)^2};  1/eta += eta zeta / ln T.
    /// Returns zeta. Throws InvariantViolation when zeta leaves [0, 1 + 1e-9].
    LossTable update_learning_rate(const OccupancyMeasure& q, const LossTable& ell_hat,
                                   const LossTable& g, const LossTable& m);

    void update_predictor(const Trajectory& traj) { predictor_.update(traj); }

    /// One full episode: act, sample, estimate, shift, update rates and prediction.
    GlobalOptStep step(Rng& rng, const Observe& observe);

    const LayeredMdp& mdp() const { return mdp_; }
    std::size_t horizon_T() const { return T_; }
    double log_T() const { return log_T_; }
    /// Index of the next episode (1-based).
    std::size_t episode() const { return t_; }
    const SATable& eta() const { return eta_; }
    const LossTable& prediction() const { return predictor_.current(); }
    const LossTable& cumulative_estimate() const { return cumulative_; }
    /// sum over finished episodes of zeta, per pair
    const SATable& zeta_sum() const { return zeta_sum_; }
    const GlobalOptConfig& config() const { return config_; }

private:
    LayeredMdp mdp_;
    std::size_t T_;
    double log_T_;
    GlobalOptConfig config_;
    LossTable cumulative_;
    SATable eta_;
    SATable zeta_sum_;
    LossPredictor predictor_;
    std::size_t t_ = 1;
    std::optional<OccupancyMeasure> last_q_;
};

}  // namespace bobw
