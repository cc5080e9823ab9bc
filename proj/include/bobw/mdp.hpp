#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bobw {

using StateId = std::size_t;
using ActionId = std::size_t;
using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) built from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/**
 * Dense real-valued table over state-action pairs, row-major in the state.
 * Base of the strong table types below; all of them share the layout.
 */
class SATable {
public:
    SATable() = default;
    SATable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
        : states_(num_states), actions_(num_actions), data_(num_states * num_actions, fill) {}

    std::size_t num_states() const { return states_; }
    std::size_t num_actions() const { return actions_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(StateId s, ActionId a) { return data_[s * actions_ + a]; }
    double operator()(StateId s, ActionId a) const { return data_[s * actions_ + a]; }

    std::span<double> row(StateId s) { return {data_.data() + s * actions_, actions_}; }
    std::span<const double> row(StateId s) const { return {data_.data() + s * actions_, actions_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double row_sum(StateId s) const;
    double max_abs() const;

    bool same_shape(const SATable& other) const {
        return states_ == other.states_ && actions_ == other.actions_;
    }

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> data_;
};

/// Real values per (s,a): true losses, predictions, estimators, Q-functions.
struct LossTable : SATable {
    using SATable::SATable;
    LossTable() = default;
    explicit LossTable(SATable t) : SATable(std::move(t)) {}
};

/// Action distribution per state.
struct Policy : SATable {
    using SATable::SATable;
    Policy() = default;
    explicit Policy(SATable t) : SATable(std::move(t)) {}

    static Policy uniform(std::size_t num_states, std::size_t num_actions);
    /// One-hot rows from an action index per state.
    static Policy deterministic(std::span<const ActionId> actions, std::size_t num_actions);
};

/// Visitation probability q(s,a) of each pair within one episode.
struct OccupancyMeasure : SATable {
    using SATable::SATable;
    OccupancyMeasure() = default;
    explicit OccupancyMeasure(SATable t) : SATable(std::move(t)) {}

    /// q(s) = sum_a q(s,a)
    double state_mass(StateId s) const { return row_sum(s); }
};

double inner(const SATable& x, const SATable& y);

struct Step {
    StateId state = 0;
    ActionId action = 0;
    double loss = 0.0;
};

/// One realized episode: exactly one step per layer, starting at the initial state.
struct Trajectory {
    std::vector<Step> steps;

    bool visited(StateId s, ActionId a) const;
    bool visited(StateId s) const;
};

/**
 * Layered episodic MDP with a known transition kernel.
 *
 * States carry global contiguous indices; layer h owns the index range
 * [layer_begin(h), layer_end(h)). The terminal layer is implicit, so rows of
 * last-layer states are all zero. P is stored densely as [s][a][s'] over the
 * non-terminal states.
 *
 * Construction does not validate; call validate_mdp() or load through
 * mdp_from_json(), which rejects invalid kernels.
 */
class LayeredMdp {
public:
    LayeredMdp() = default;
    LayeredMdp(std::vector<std::size_t> layer_sizes, std::size_t num_actions,
               std::vector<double> transitions);

    std::size_t horizon() const { return layer_sizes_.size(); }
    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return num_actions_; }

    std::size_t layer_size(std::size_t h) const { return layer_sizes_[h]; }
    StateId layer_begin(std::size_t h) const { return offsets_[h]; }
    StateId layer_end(std::size_t h) const { return offsets_[h + 1]; }
    std::size_t layer_of(StateId s) const { return layer_index_[s]; }
    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }

    StateId initial_state() const { return 0; }

    double transition(StateId s, ActionId a, StateId next) const {
        return transitions_[(s * num_actions_ + a) * num_states_ + next];
    }
    /// Full row P(.|s,a) over all non-terminal states.
    std::span<const double> transition_row(StateId s, ActionId a) const {
        return {transitions_.data() + (s * num_actions_ + a) * num_states_, num_states_};
    }
    const std::vector<double>& transitions() const { return transitions_; }

private:
    std::vector<std::size_t> layer_sizes_;
    std::vector<StateId> offsets_;
    std::vector<std::size_t> layer_index_;
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> transitions_;
};

/// Itemized list of violated model invariants; empty means valid.
std::vector<std::string> validate_mdp(const LayeredMdp& mdp);

/// Layered MDP with P(s'|s,a) = 1/|S_{h+1}| for every next-layer state.
LayeredMdp uniform_layered_mdp(std::span<const std::size_t> layer_sizes, std::size_t num_actions);

/// Random kernel with strictly positive next-layer rows (used by tests and tools).
LayeredMdp random_layered_mdp(std::span<const std::size_t> layer_sizes, std::size_t num_actions,
                              Rng& rng);

struct ValueFunctions {
    std::vector<double> v;  ///< V(s) per non-terminal state
    LossTable q;            ///< Q(s,a)
};

/// Backward DP: Q = loss + P V, V = <pi, Q>, V(terminal) = 0.
ValueFunctions value_functions(const LayeredMdp& mdp, const Policy& policy, const SATable& loss);

/// Forward DP for q^pi.
OccupancyMeasure occupancy(const LayeredMdp& mdp, const Policy& policy);

/// q(s',a' | s,a): zero before layer(s) and on same-layer pairs other than (s,a),
/// one at (s,a), forward DP from the point mass afterwards.
OccupancyMeasure conditional_occupancy(const LayeredMdp& mdp, const Policy& policy, StateId s,
                                       ActionId a);

/// pi(a|s) proportional to q(s,a); rows with mass below 1e-300 become uniform.
Policy policy_from_occupancy(const OccupancyMeasure& q);

/// Samples states and actions layer by layer. Losses are left at zero.
Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& policy, Rng& rng);

struct DeterministicPolicy {
    std::vector<ActionId> actions;
    Policy policy;
    double value = 0.0;  ///< V(s_0) under the given loss
};

/// Argmin backward DP; ties go to the smallest action index.
DeterministicPolicy best_deterministic_policy(const LayeredMdp& mdp, const SATable& loss);

/// Delta(s,a) = Q*(s,a; mu) - min_b Q*(s,b; mu) for the mu-optimal policy.
LossTable suboptimality_gaps(const LayeredMdp& mdp, const SATable& mu);

/// Samples an action from a probability row.
ActionId sample_action(std::span<const double> probs, Rng& rng);

}  // namespace bobw
