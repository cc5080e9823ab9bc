#include "bobw/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bobw {

double SATable::row_sum(StateId s) const {
    const auto r = row(s);
    return std::accumulate(r.begin(), r.end(), 0.0);
}

double SATable::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

double inner(const SATable& x, const SATable& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("inner: table shapes differ");
    const auto xv = x.values();
    const auto yv = y.values();
    return std::inner_product(xv.begin(), xv.end(), yv.begin(), 0.0);
}

Policy Policy::uniform(std::size_t num_states, std::size_t num_actions) {
    return Policy(num_states, num_actions, 1.0 / static_cast<double>(num_actions));
}

Policy Policy::deterministic(std::span<const ActionId> actions, std::size_t num_actions) {
    Policy p(actions.size(), num_actions, 0.0);
    for (StateId s = 0; s < actions.size(); ++s) p(s, actions[s]) = 1.0;
    return p;
}

bool Trajectory::visited(StateId s, ActionId a) const {
    return std::any_of(steps.begin(), steps.end(),
                       [&](const Step& st) { return st.state == s && st.action == a; });
}

bool Trajectory::visited(StateId s) const {
    return std::any_of(steps.begin(), steps.end(), [&](const Step& st) { return st.state == s; });
}

LayeredMdp::LayeredMdp(std::vector<std::size_t> layer_sizes, std::size_t num_actions,
                       std::vector<double> transitions)
    : layer_sizes_(std::move(layer_sizes)), num_actions_(num_actions),
      transitions_(std::move(transitions)) {
    if (layer_sizes_.empty()) throw std::invalid_argument("LayeredMdp: horizon must be >= 1");
    if (num_actions_ == 0) throw std::invalid_argument("LayeredMdp: need at least one action");
    offsets_.assign(layer_sizes_.size() + 1, 0);
    for (std::size_t h = 0; h < layer_sizes_.size(); ++h) {
        if (layer_sizes_[h] == 0) throw std::invalid_argument("LayeredMdp: empty layer");
        offsets_[h + 1] = offsets_[h] + layer_sizes_[h];
    }
    num_states_ = offsets_.back();
    layer_index_.resize(num_states_);
    for (std::size_t h = 0; h < layer_sizes_.size(); ++h)
        for (StateId s = offsets_[h]; s < offsets_[h + 1]; ++s) layer_index_[s] = h;
    if (transitions_.size() != num_states_ * num_actions_ * num_states_)
        throw std::invalid_argument("LayeredMdp: transition tensor must be S*A*S");
}

std::vector<std::string> validate_mdp(const LayeredMdp& mdp) {
    std::vector<std::string> issues;
    const std::size_t H = mdp.horizon();
    if (mdp.layer_size(0) != 1) issues.push_back("initial layer: |S_0| must be 1");
    if (H > mdp.num_states()) issues.push_back("horizon: H must not exceed S");

    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const std::size_t h = mdp.layer_of(s);
        const bool last = h + 1 == H;
        for (ActionId a = 0; a < mdp.num_actions(); ++a) {
            const auto row = mdp.transition_row(s, a);
            double sum = 0.0;
            bool negative = false;
            bool nonfinite = false;
            bool off_layer = false;
            for (StateId n = 0; n < row.size(); ++n) {
                const double p = row[n];
                if (!std::isfinite(p)) nonfinite = true;
                if (p < 0.0) negative = true;
                if (p != 0.0 && (last || mdp.layer_of(n) != h + 1)) off_layer = true;
                sum += p;
            }
            std::ostringstream where;
            where << " at (s=" << s << ", a=" << a << ")";
            if (nonfinite) issues.push_back("non-finite entry" + where.str());
            if (negative) issues.push_back("negative probability" + where.str());
            if (off_layer) issues.push_back("layer support: mass outside the next layer" + where.str());
            const double target = last ? 0.0 : 1.0;
            if (std::abs(sum - target) > 1e-12) {
                std::ostringstream msg;
                msg << "row sum " << sum << " != " << target << where.str();
                issues.push_back(msg.str());
            }
        }
    }
    return issues;
}

LayeredMdp uniform_layered_mdp(std::span<const std::size_t> layer_sizes, std::size_t num_actions) {
    std::vector<std::size_t> sizes(layer_sizes.begin(), layer_sizes.end());
    const std::size_t S = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<double> P(S * num_actions * S, 0.0);
    std::size_t begin = 0;
    for (std::size_t h = 0; h + 1 < sizes.size(); ++h) {
        const std::size_t next_begin = begin + sizes[h];
        for (StateId s = begin; s < next_begin; ++s)
            for (ActionId a = 0; a < num_actions; ++a)
                for (StateId n = next_begin; n < next_begin + sizes[h + 1]; ++n)
                    P[(s * num_actions + a) * S + n] = 1.0 / static_cast<double>(sizes[h + 1]);
        begin = next_begin;
    }
    return LayeredMdp(std::move(sizes), num_actions, std::move(P));
}

LayeredMdp random_layered_mdp(std::span<const std::size_t> layer_sizes, std::size_t num_actions,
                              Rng& rng) {
    std::vector<std::size_t> sizes(layer_sizes.begin(), layer_sizes.end());
    const std::size_t S = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<double> P(S * num_actions * S, 0.0);
    std::size_t begin = 0;
    for (std::size_t h = 0; h + 1 < sizes.size(); ++h) {
        const std::size_t next_begin = begin + sizes[h];
        for (StateId s = begin; s < next_begin; ++s)
            for (ActionId a = 0; a < num_actions; ++a) {
                double total = 0.0;
                for (StateId n = next_begin; n < next_begin + sizes[h + 1]; ++n) {
                    const double w = 0.05 + uniform01(rng);
                    P[(s * num_actions + a) * S + n] = w;
                    total += w;
                }
                for (StateId n = next_begin; n < next_begin + sizes[h + 1]; ++n)
                    P[(s * num_actions + a) * S + n] /= total;
            }
        begin = next_begin;
    }
    return LayeredMdp(std::move(sizes), num_actions, std::move(P));
}

namespace {

/// Expected next-state value sum_{s'} P(s'|s,a) v(s') restricted to the next layer.
double next_value(const LayeredMdp& mdp, StateId s, ActionId a, std::span<const double> v) {
    const std::size_t h = mdp.layer_of(s);
    if (h + 1 >= mdp.horizon()) return 0.0;
    double acc = 0.0;
    for (StateId n = mdp.layer_begin(h + 1); n < mdp.layer_end(h + 1); ++n)
        acc += mdp.transition(s, a, n) * v[n];
    return acc;
}

void check_shapes(const LayeredMdp& mdp, const SATable& t, const char* what) {
    if (t.num_states() != mdp.num_states() || t.num_actions() != mdp.num_actions())
        throw std::invalid_argument(std::string(what) + ": table shape does not match the MDP");
}

/// Pushes the state mass of layer h through pi and P into layer h+1.
void propagate_layer(const LayeredMdp& mdp, const Policy& policy, std::size_t h,
                     OccupancyMeasure& q) {
    const std::size_t A = mdp.num_actions();
    for (StateId n = mdp.layer_begin(h + 1); n < mdp.layer_end(h + 1); ++n) {
        double mass = 0.0;
        for (StateId s = mdp.layer_begin(h); s < mdp.layer_end(h); ++s)
            for (ActionId a = 0; a < A; ++a) mass += q(s, a) * mdp.transition(s, a, n);
        for (ActionId a = 0; a < A; ++a) q(n, a) = mass * policy(n, a);
    }
}

}  // namespace

ValueFunctions value_functions(const LayeredMdp& mdp, const Policy& policy, const SATable& loss) {
    check_shapes(mdp, policy, "value_functions");
    check_shapes(mdp, loss, "value_functions");
    const std::size_t A = mdp.num_actions();
    ValueFunctions out{std::vector<double>(mdp.num_states(), 0.0),
                       LossTable(mdp.num_states(), A, 0.0)};
    for (std::size_t h = mdp.horizon(); h-- > 0;) {
        for (StateId s = mdp.layer_begin(h); s < mdp.layer_end(h); ++s) {
            double v = 0.0;
            for (ActionId a = 0; a < A; ++a) {
                const double qsa = loss(s, a) + next_value(mdp, s, a, out.v);
                out.q(s, a) = qsa;
                v += policy(s, a) * qsa;
            }
            out.v[s] = v;
        }
    }
    return out;
}

OccupancyMeasure occupancy(const LayeredMdp& mdp, const Policy& policy) {
    check_shapes(mdp, policy, "occupancy");
    OccupancyMeasure q(mdp.num_states(), mdp.num_actions(), 0.0);
    const StateId s0 = mdp.initial_state();
    for (ActionId a = 0; a < mdp.num_actions(); ++a) q(s0, a) = policy(s0, a);
    for (std::size_t h = 0; h + 1 < mdp.horizon(); ++h) propagate_layer(mdp, policy, h, q);
    return q;
}

OccupancyMeasure conditional_occupancy(const LayeredMdp& mdp, const Policy& policy, StateId s,
                                       ActionId a) {
    check_shapes(mdp, policy, "conditional_occupancy");
    OccupancyMeasure q(mdp.num_states(), mdp.num_actions(), 0.0);
    q(s, a) = 1.0;
    for (std::size_t h = mdp.layer_of(s); h + 1 < mdp.horizon(); ++h)
        propagate_layer(mdp, policy, h, q);
    return q;
}

Policy policy_from_occupancy(const OccupancyMeasure& q) {
    const std::size_t A = q.num_actions();
    Policy pi(q.num_states(), A, 0.0);
    for (StateId s = 0; s < q.num_states(); ++s) {
        const double mass = q.row_sum(s);
        for (ActionId a = 0; a < A; ++a)
            pi(s, a) = mass < 1e-300 ? 1.0 / static_cast<double>(A) : q(s, a) / mass;
    }
    return pi;
}

ActionId sample_action(std::span<const double> probs, Rng& rng) {
    const double u = uniform01(rng);
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return i;
    }
    // rounding left u >= cum; return the last action with positive mass
    for (std::size_t i = probs.size(); i-- > 0;)
        if (probs[i] > 0.0) return i;
    return probs.size() - 1;
}

Trajectory sample_trajectory(const LayeredMdp& mdp, const Policy& policy, Rng& rng) {
    Trajectory traj;
    traj.steps.reserve(mdp.horizon());
    StateId s = mdp.initial_state();
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        const ActionId a = sample_action(policy.row(s), rng);
        traj.steps.push_back({s, a, 0.0});
        if (h + 1 == mdp.horizon()) break;
        const auto row = mdp.transition_row(s, a);
        const StateId begin = mdp.layer_begin(h + 1);
        const StateId end = mdp.layer_end(h + 1);
        s = begin + sample_action(row.subspan(begin, end - begin), rng);
    }
    return traj;
}

DeterministicPolicy best_deterministic_policy(const LayeredMdp& mdp, const SATable& loss) {
    check_shapes(mdp, loss, "best_deterministic_policy");
    const std::size_t A = mdp.num_actions();
    std::vector<double> v(mdp.num_states(), 0.0);
    std::vector<ActionId> actions(mdp.num_states(), 0);
    for (std::size_t h = mdp.horizon(); h-- > 0;) {
        for (StateId s = mdp.layer_begin(h); s < mdp.layer_end(h); ++s) {
            double best = 0.0;
            ActionId arg = 0;
            for (ActionId a = 0; a < A; ++a) {
                const double qsa = loss(s, a) + next_value(mdp, s, a, v);
                if (a == 0 || qsa < best) {
                    best = qsa;
                    arg = a;
                }
            }
            v[s] = best;
            actions[s] = arg;
        }
    }
    DeterministicPolicy out;
    out.policy = Policy::deterministic(actions, A);
    out.actions = std::move(actions);
    out.value = v[mdp.initial_state()];
    return out;
}

LossTable suboptimality_gaps(const LayeredMdp& mdp, const SATable& mu) {
    const DeterministicPolicy star = best_deterministic_policy(mdp, mu);
    const ValueFunctions vf = value_functions(mdp, star.policy, mu);
    LossTable gaps(mdp.num_states(), mdp.num_actions(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const auto row = vf.q.row(s);
        const double best = *std::min_element(row.begin(), row.end());
        for (ActionId a = 0; a < mdp.num_actions(); ++a) gaps(s, a) = vf.q(s, a) - best;
    }
    return gaps;
}

}  // namespace bobw
