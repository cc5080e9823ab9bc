#pragma once

#include <cstdint>
#include <vector>

#include "bobw/mdp.hpp"

namespace bobw {

enum class PredictorKind { GradientDescent, EmpiricalMean };

struct PredictorConfig {
    PredictorKind kind = PredictorKind::GradientDescent;
    double xi = 0.25;  ///< gradient-descent step, must lie in (0, 1/2]
};

/**
 * Optimistic loss prediction m_t shared by both learners.
 *
 * Starts at m_1 = 1/2 everywhere. Gradient descent moves visited pairs by
 * m <- (1 - xi) m + xi l. The empirical-mean mode keeps 1/2 until a pair is
 * first visited and then reports the running mean of its observed losses.
 */
class LossPredictor {
public:
    LossPredictor(std::size_t num_states, std::size_t num_actions, PredictorConfig config);

    const LossTable& current() const { return m_; }
    const PredictorConfig& config() const { return config_; }

    /// Applies the observed trajectory losses; unvisited pairs are untouched.
    void update(const Trajectory& traj);

    std::uint64_t visits(StateId s, ActionId a) const { return counts_[s * actions_ + a]; }

private:
    PredictorConfig config_;
    std::size_t actions_;
    LossTable m_;
    std::vector<std::uint64_t> counts_;
    std::vector<double> sums_;
};

}  // namespace bobw
