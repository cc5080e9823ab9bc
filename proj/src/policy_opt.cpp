#include "bobw/policy_opt.hpp"

#include <cmath>

namespace bobw {

PolicyOpt::PolicyOpt(LayeredMdp mdp, std::size_t T, PolicyOptConfig config)
    : mdp_(std::move(mdp)), T_(T), log_T_(std::log(static_cast<double>(T))), config_(config),
      cumulative_(mdp_.num_states(), mdp_.num_actions(), 0.0),
      eta_(mdp_.num_states(), mdp_.num_actions(),
           1.0 / (180.0 * std::pow(static_cast<double>(mdp_.horizon()), 3))),
      scaled_zeta_sum_(mdp_.num_states(), mdp_.num_actions(), 0.0),
      predictor_(mdp_.num_states(), mdp_.num_actions(), config.predictor) {
    require_horizon(mdp_, T_);
}

double PolicyOpt::virtual_cap() const {
    const double H = static_cast<double>(mdp_.horizon());
    const double S = static_cast<double>(mdp_.num_states());
    const double A = static_cast<double>(mdp_.num_actions());
    return config_.virtual_cap_constant * H * S * A * log_T_ * log_T_;
}

PolicyDecision PolicyOpt::optimize_policy() const {
    const std::size_t S = mdp_.num_states();
    const std::size_t A = mdp_.num_actions();
    const LossTable& m = predictor_.current();
    PolicyDecision d{Policy(S, A, 0.0), LossTable(S, A, 0.0), std::vector<double>(S, 0.0)};
    std::vector<double> L(A);
    for (std::size_t h = mdp_.horizon(); h-- > 0;) {
        for (StateId s = mdp_.layer_begin(h); s < mdp_.layer_end(h); ++s) {
            for (ActionId a = 0; a < A; ++a) {
                double next = 0.0;
                if (h + 1 < mdp_.horizon())
                    for (StateId n = mdp_.layer_begin(h + 1); n < mdp_.layer_end(h + 1); ++n)
                        next += mdp_.transition(s, a, n) * d.v_pred[n];
                d.q_pred(s, a) = m(s, a) + next;
                L[a] = cumulative_(s, a) + d.q_pred(s, a);
            }
            const auto p = solve_simplex({L, eta_.row(s)}, config_.simplex_tol);
            double v = 0.0;
            for (ActionId a = 0; a < A; ++a) {
                d.pi(s, a) = p[a];
                v += p[a] * d.q_pred(s, a);
            }
            d.v_pred[s] = v;
        }
    }
    return d;
}

double PolicyOpt::gamma() const {
    const double HS = static_cast<double>(mdp_.horizon() * mdp_.num_states());
    return std::sqrt(HS) / static_cast<double>(real_t_ + 1);
}

std::vector<double> PolicyOpt::exploration_mass(const OccupancyMeasure& q_pi) const {
    const double g = gamma();
    std::vector<double> out(mdp_.num_states());
    for (StateId s = 0; s < out.size(); ++s) out[s] = q_pi.state_mass(s) + g;
    return out;
}

std::pair<StateId, ActionId> PolicyOpt::argmax_ratio(const std::vector<double>& q_explore) const {
    std::pair<StateId, ActionId> arg{0, 0};
    double best = -1.0;
    for (StateId s = 0; s < mdp_.num_states(); ++s)
        for (ActionId a = 0; a < mdp_.num_actions(); ++a) {
            const double r = eta_(s, a) / q_explore[s];
            if (r > best) {
                best = r;
                arg = {s, a};
            }
        }
    return arg;
}

bool PolicyOpt::check_virtual(const std::vector<double>& q_explore) const {
    const auto [s, a] = argmax_ratio(q_explore);
    const double H = static_cast<double>(mdp_.horizon());
    const double S = static_cast<double>(mdp_.num_states());
    const double threshold = 1.0 / (18.0 * std::sqrt(H * H * H * S));
    return eta_(s, a) / q_explore[s] <= threshold;
}

std::pair<StateId, ActionId> PolicyOpt::virtual_update(const std::vector<double>& q_explore) {
    if (static_cast<double>(virtual_count_ + 1) > virtual_cap())
        throw InvariantViolation("policy optimization: virtual-episode cap exceeded");
    const auto dagger = argmax_ratio(q_explore);
    const double H = static_cast<double>(mdp_.horizon());
    double& eta = eta_(dagger.first, dagger.second);
    eta = 1.0 / ((1.0 / eta) * (1.0 + 1.0 / (324.0 * H * log_T_)));
    ++virtual_count_;
    ++total_t_;
    return dagger;
}

std::vector<double> PolicyOpt::suffix_gap(const Trajectory& traj, const LossTable& m) const {
    std::vector<double> gap(traj.steps.size() + 1, 0.0);
    for (std::size_t h = traj.steps.size(); h-- > 0;) {
        const Step& st = traj.steps[h];
        gap[h] = gap[h + 1] + st.loss - m(st.state, st.action);
    }
    gap.pop_back();
    return gap;
}

LossTable PolicyOpt::q_estimate(const PolicyDecision& decision,
                                const std::vector<double>& q_explore, const Trajectory& traj,
                                bool real) const {
    const double g = gamma();
    const double H = static_cast<double>(mdp_.horizon());
    LossTable q_hat(mdp_.num_states(), mdp_.num_actions(), 0.0);
    for (StateId s = 0; s < mdp_.num_states(); ++s)
        for (ActionId a = 0; a < mdp_.num_actions(); ++a)
            q_hat(s, a) = decision.q_pred(s, a) - g * H / q_explore[s];
    if (real) {
        const auto gap = suffix_gap(traj, predictor_.current());
        for (std::size_t h = 0; h < traj.steps.size(); ++h) {
            const Step& st = traj.steps[h];
            q_hat(st.state, st.action) +=
                gap[h] / (q_explore[st.state] * decision.pi(st.state, st.action));
        }
    }
    return q_hat;
}

LossTable PolicyOpt::real_update_learning_rate(const Policy& pi,
                                               const std::vector<double>& q_explore,
                                               const Trajectory& traj, const LossTable& m) {
    LossTable zeta(mdp_.num_states(), mdp_.num_actions(), 0.0);
    const auto gap = suffix_gap(traj, m);
    for (std::size_t h = 0; h < traj.steps.size(); ++h) {
        const StateId s = traj.steps[h].state;
        for (ActionId a = 0; a < mdp_.num_actions(); ++a) {
            const double ind = traj.steps[h].action == a ? 1.0 : 0.0;
            const double diff = ind - pi(s, a);
            zeta(s, a) = diff * diff * gap[h] * gap[h];
        }
    }
    for (StateId s = 0; s < mdp_.num_states(); ++s) {
        const double qs2 = q_explore[s] * q_explore[s];
        for (ActionId a = 0; a < mdp_.num_actions(); ++a) {
            const double z = zeta(s, a);
            if (z == 0.0) continue;
            const double eta = eta_(s, a);
            eta_(s, a) = 1.0 / (1.0 / eta + eta * z / (qs2 * log_T_));
            scaled_zeta_sum_(s, a) += z / qs2;
        }
    }
    return zeta;
}

DilatedBonus PolicyOpt::bonus(const Policy& pi, const std::vector<double>& q_explore,
                              const SATable& eta_before) const {
    const std::size_t S = mdp_.num_states();
    const std::size_t A = mdp_.num_actions();
    const double H = static_cast<double>(mdp_.horizon());
    const double g = gamma();
    DilatedBonus out{std::vector<double>(S, 0.0), LossTable(S, A, 0.0)};
    for (StateId s = 0; s < S; ++s) {
        double penalty = 0.0;
        for (ActionId a = 0; a < A; ++a) penalty += 1.0 / eta_(s, a) - 1.0 / eta_before(s, a);
        out.local[s] = 6.0 * penalty * log_T_ + 5.0 * g * H / q_explore[s];
    }
    // B(s,a) = b(s) + (1 + 1/H) E_{s'~P, a'~pi}[B(s',a')], zero past the last layer.
    std::vector<double> cont(S, 0.0);  // E_{a'~pi}[B(s',a')]
    for (std::size_t h = mdp_.horizon(); h-- > 0;) {
        for (StateId s = mdp_.layer_begin(h); s < mdp_.layer_end(h); ++s) {
            double v = 0.0;
            for (ActionId a = 0; a < A; ++a) {
                double next = 0.0;
                if (h + 1 < mdp_.horizon())
                    for (StateId n = mdp_.layer_begin(h + 1); n < mdp_.layer_end(h + 1); ++n)
                        next += mdp_.transition(s, a, n) * cont[n];
                out.dilated(s, a) = out.local[s] + (1.0 + 1.0 / H) * next;
                v += pi(s, a) * out.dilated(s, a);
            }
            cont[s] = v;
        }
    }
    return out;
}

PolicyOptStep PolicyOpt::step(Rng& rng, const Observe& observe) {
    PolicyOptStep out;
    PolicyDecision decision = optimize_policy();
    out.q_pi = occupancy(mdp_, decision.pi);
    out.q_explore = exploration_mass(out.q_pi);
    out.gamma = gamma();
    out.m = predictor_.current();
    out.eta_before = eta_;
    out.real_index = real_t_ + 1;
    out.real = check_virtual(out.q_explore);

    if (out.real) {
        out.traj = sample_trajectory(mdp_, decision.pi, rng);
        observe(out.traj);
        out.dagger = argmax_ratio(out.q_explore);
        out.q_hat = q_estimate(decision, out.q_explore, out.traj, true);
        out.zeta = real_update_learning_rate(decision.pi, out.q_explore, out.traj, out.m);
    } else {
        out.q_hat = q_estimate(decision, out.q_explore, out.traj, false);
        out.dagger = virtual_update(out.q_explore);
        out.zeta = LossTable(mdp_.num_states(), mdp_.num_actions(), 0.0);
    }
    out.bonus = bonus(decision.pi, out.q_explore, out.eta_before);
    out.eta_after = eta_;

    auto cum = cumulative_.values();
    const auto qh = out.q_hat.values();
    const auto B = out.bonus.dilated.values();
    for (std::size_t i = 0; i < cum.size(); ++i) cum[i] += qh[i] - B[i];

    if (out.real) {
        predictor_.update(out.traj);
        ++real_t_;
        ++total_t_;
    }
    out.iteration = total_t_;
    out.pi = std::move(decision.pi);
    out.q_pred = std::move(decision.q_pred);
    return out;
}

}  // namespace bobw
