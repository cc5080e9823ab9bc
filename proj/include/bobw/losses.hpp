#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "bobw/mdp.hpp"

namespace bobw {

/// One per-pair loss distribution supported on [0, 1].
class Distribution {
public:
    enum class Kind { Bernoulli, ScaledBernoulli, Constant };

    static Distribution bernoulli(double p);
    /// Equal mass on {mean - delta, mean + delta}.
    static Distribution scaled_bernoulli(double mean, double delta);
    static Distribution constant(double c);

    Kind kind() const { return kind_; }
    double mean() const { return mean_; }
    double delta() const { return delta_; }
    double variance() const;
    double sample(Rng& rng) const;

private:
    Distribution(Kind kind, double mean, double delta) : kind_(kind), mean_(mean), delta_(delta) {}
    Kind kind_;
    double mean_;
    double delta_;
};

class DistributionSpec {
public:
    DistributionSpec(std::size_t num_states, std::size_t num_actions, Distribution fill);

    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return num_actions_; }
    Distribution& operator()(StateId s, ActionId a) { return cells_[s * num_actions_ + a]; }
    const Distribution& operator()(StateId s, ActionId a) const { return cells_[s * num_actions_ + a]; }

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<Distribution> cells_;
};

struct Moments {
    LossTable mu;
    LossTable sigma_sq;
};

Moments moments(const DistributionSpec& spec);

/// Replaces every Bernoulli(p) with a two-point law of the same mean and
/// variance p(1-p)/factor. Constants are left alone.
DistributionSpec reduce_variance(const DistributionSpec& spec, double factor);

/// The revealed loss and its uncorrupted counterpart.
struct LossPair {
    LossTable ell;
    LossTable clean;
};

/// Source of per-episode loss tables. Single consumer; owns its rng.
class LossProcess {
public:
    virtual ~LossProcess() = default;

    /// Losses for episode t (1-based). Called exactly once per real episode, in order.
    virtual LossPair next_loss(std::size_t t) = 0;

    /// Feeds the learner's trajectory back, for history-dependent scripts.
    virtual void observe(const Trajectory& /*traj*/) {}

    /// Clean-loss distribution when the process is stochastic.
    virtual const DistributionSpec* distribution() const { return nullptr; }

    virtual std::size_t num_states() const = 0;
    virtual std::size_t num_actions() const = 0;
};

/// Throws std::logic_error when called on a process without a distribution.
Moments moments(const LossProcess& process);

class StochasticIid : public LossProcess {
public:
    StochasticIid(DistributionSpec spec, std::uint64_t seed);
    LossPair next_loss(std::size_t t) override;
    const DistributionSpec* distribution() const override { return &spec_; }
    std::size_t num_states() const override { return spec_.num_states(); }
    std::size_t num_actions() const override { return spec_.num_actions(); }

private:
    DistributionSpec spec_;
    Rng rng_;
};

/// Explicit list of loss tables. Throws std::out_of_range once exhausted.
class ScriptedLosses : public LossProcess {
public:
    explicit ScriptedLosses(std::vector<LossTable> tables);
    LossPair next_loss(std::size_t t) override;
    std::size_t num_states() const override { return num_states_; }
    std::size_t num_actions() const override { return num_actions_; }
    std::size_t length() const { return tables_.size(); }

private:
    std::vector<LossTable> tables_;
    std::size_t num_states_;
    std::size_t num_actions_;
};

class LossScriptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Reads `t,s,a,loss` rows. Pairs missing from an episode keep the previous
/// episode's value; episode 1 must list every pair.
std::vector<LossTable> read_loss_script(const std::string& path, std::size_t num_states,
                                        std::size_t num_actions);
void write_loss_script(const std::string& path, std::span<const LossTable> tables);

/// Loss as a function of the episode index and the trajectories seen so far.
using LossRule = std::function<LossTable(std::size_t t, std::span<const Trajectory> history)>;

class RuleLosses : public LossProcess {
public:
    RuleLosses(std::size_t num_states, std::size_t num_actions, LossRule rule,
               bool keep_history = false);
    LossPair next_loss(std::size_t t) override;
    void observe(const Trajectory& traj) override;
    std::size_t num_states() const override { return num_states_; }
    std::size_t num_actions() const override { return num_actions_; }

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    LossRule rule_;
    bool keep_history_;
    std::vector<Trajectory> history_;
};

/// l_t(s,a) = base(s,a) + amplitude sin(2 pi t / period + phase(s,a)), clamped to [0, 1].
LossRule sine_drift_rule(LossTable base, double amplitude, double period, LossTable phase);

/// Plays the episodes of `rule` in the order t -> ((t-1) * stride mod T) + 1.
/// With gcd(stride, T) = 1 this is a permutation of the same T tables, so the
/// cumulative loss, and hence L*, is unchanged while the path length grows.
LossRule stride_permuted_rule(LossRule rule, std::size_t T, std::size_t stride);

struct CorruptionStrategy {
    enum class Kind { None, PrefixFlip, TargetedState };
    Kind kind = Kind::None;
    /// Pairs to overwrite. For PrefixFlip these are the (s, pi*(s)) pairs.
    std::vector<std::pair<StateId, ActionId>> pairs;
    double value = 1.0;
    /// Corrupt the first `episodes` episodes ...
    std::size_t episodes = 0;
    /// ... or, when positive, keep corrupting until the measured corruption reaches this budget.
    double budget = 0.0;
};

/// Sets the loss of every pi*-action pair to 1 where pi* is optimal for the clean mean.
CorruptionStrategy prefix_flip(const LayeredMdp& mdp, const DistributionSpec& spec,
                               std::size_t episodes, double budget = 0.0);

class CorruptedStochastic : public LossProcess {
public:
    CorruptedStochastic(const LayeredMdp& mdp, DistributionSpec spec, CorruptionStrategy strategy,
                        std::uint64_t seed);
    LossPair next_loss(std::size_t t) override;
    const DistributionSpec* distribution() const override { return clean_.distribution(); }
    std::size_t num_states() const override { return clean_.num_states(); }
    std::size_t num_actions() const override { return clean_.num_actions(); }
    double corruption_so_far() const { return spent_; }

private:
    LayeredMdp mdp_;
    StochasticIid clean_;
    CorruptionStrategy strategy_;
    double spent_ = 0.0;
};

/// Base losses for t <= floor(rho T), zero afterwards.
class TruncatedLosses : public LossProcess {
public:
    TruncatedLosses(std::unique_ptr<LossProcess> base, double rho, std::size_t T);
    LossPair next_loss(std::size_t t) override;
    void observe(const Trajectory& traj) override;
    std::size_t num_states() const override { return base_->num_states(); }
    std::size_t num_actions() const override { return base_->num_actions(); }
    std::size_t active_episodes() const { return active_; }

private:
    std::unique_ptr<LossProcess> base_;
    std::size_t active_;
};

std::unique_ptr<LossProcess> make_truncated_instance(double rho, std::unique_ptr<LossProcess> base,
                                                     std::size_t T);

struct HardInstance {
    LayeredMdp mdp;
    DistributionSpec spec;
    std::vector<ActionId> pin;
};

/// Uniform-transition layered MDP with one initial state and H-1 layers of
/// `layer_width` states. Loss of (s, pin(s)) ~ Ber(alpha), every other pair ~ Ber(alpha + epsilon).
HardInstance make_hard_instance(std::size_t H, std::size_t layer_width, std::size_t A, double alpha,
                                double epsilon, std::span<const ActionId> pin);

/// Same, for the total state count S; rejects S - 1 not divisible by H - 1.
HardInstance make_hard_instance_by_states(std::size_t H, std::size_t S, std::size_t A, double alpha,
                                          double epsilon, std::span<const ActionId> pin);

std::vector<ActionId> random_pin(std::size_t num_states, std::size_t num_actions, Rng& rng);

/// sum over layers h of max_{s in layer h, a} |clean - ell|.
double corruption_increment(const LayeredMdp& mdp, const LossPair& pair);
double measured_corruption(const LayeredMdp& mdp, std::span<const LossPair> history);

}  // namespace bobw
