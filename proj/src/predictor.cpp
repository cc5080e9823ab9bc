#include "bobw/predictor.hpp"

#include <stdexcept>

namespace bobw {

LossPredictor::LossPredictor(std::size_t num_states, std::size_t num_actions,
                             PredictorConfig config)
    : config_(config), actions_(num_actions), m_(num_states, num_actions, 0.5),
      counts_(num_states * num_actions, 0), sums_(num_states * num_actions, 0.0) {
    if (config_.kind == PredictorKind::GradientDescent && !(config_.xi > 0.0 && config_.xi <= 0.5))
        throw std::invalid_argument("predictor: xi must lie in (0, 1/2]");
}

void LossPredictor::update(const Trajectory& traj) {
    for (const Step& st : traj.steps) {
        const std::size_t i = st.state * actions_ + st.action;
        ++counts_[i];
        sums_[i] += st.loss;
        double& m = m_(st.state, st.action);
        if (config_.kind == PredictorKind::GradientDescent)
            m = (1.0 - config_.xi) * m + config_.xi * st.loss;
        else
            m = sums_[i] / static_cast<double>(counts_[i]);
    }
}

}  // namespace bobw
