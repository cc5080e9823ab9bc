#include "bobw/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace bobw {

namespace {

void require_unit(double x, const char* what) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument(std::string(what) + " outside [0, 1]");
}

}  // namespace

Distribution Distribution::bernoulli(double p) {
    require_unit(p, "Bernoulli parameter");
    return {Kind::Bernoulli, p, 0.0};
}

Distribution Distribution::scaled_bernoulli(double mean, double delta) {
    if (!(delta >= 0.0)) throw std::invalid_argument("scaled Bernoulli: negative delta");
    require_unit(mean - delta, "scaled Bernoulli support");
    require_unit(mean + delta, "scaled Bernoulli support");
    return {Kind::ScaledBernoulli, mean, delta};
}

Distribution Distribution::constant(double c) {
    require_unit(c, "constant loss");
    return {Kind::Constant, c, 0.0};
}

double Distribution::variance() const {
    switch (kind_) {
        case Kind::Bernoulli: return mean_ * (1.0 - mean_);
        case Kind::ScaledBernoulli: return delta_ * delta_;
        case Kind::Constant: return 0.0;
    }
    return 0.0;
}

double Distribution::sample(Rng& rng) const {
    switch (kind_) {
        case Kind::Bernoulli: return uniform01(rng) < mean_ ? 1.0 : 0.0;
        case Kind::ScaledBernoulli: return uniform01(rng) < 0.5 ? mean_ - delta_ : mean_ + delta_;
        case Kind::Constant: return mean_;
    }
    return mean_;
}

DistributionSpec::DistributionSpec(std::size_t num_states, std::size_t num_actions,
                                   Distribution fill)
    : num_states_(num_states), num_actions_(num_actions), cells_(num_states * num_actions, fill) {}

Moments moments(const DistributionSpec& spec) {
    Moments m{LossTable(spec.num_states(), spec.num_actions()),
              LossTable(spec.num_states(), spec.num_actions())};
    for (StateId s = 0; s < spec.num_states(); ++s)
        for (ActionId a = 0; a < spec.num_actions(); ++a) {
            m.mu(s, a) = spec(s, a).mean();
            m.sigma_sq(s, a) = spec(s, a).variance();
        }
    return m;
}

Moments moments(const LossProcess& process) {
    const DistributionSpec* spec = process.distribution();
    if (spec == nullptr) throw std::logic_error("moments: loss process is not stochastic");
    return moments(*spec);
}

DistributionSpec reduce_variance(const DistributionSpec& spec, double factor) {
    if (!(factor >= 1.0)) throw std::invalid_argument("reduce_variance: factor must be >= 1");
    DistributionSpec out = spec;
    for (StateId s = 0; s < spec.num_states(); ++s)
        for (ActionId a = 0; a < spec.num_actions(); ++a) {
            const Distribution& d = spec(s, a);
            if (d.kind() == Distribution::Kind::Constant) continue;
            out(s, a) = Distribution::scaled_bernoulli(d.mean(), std::sqrt(d.variance() / factor));
        }
    return out;
}

StochasticIid::StochasticIid(DistributionSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(seed) {}

LossPair StochasticIid::next_loss(std::size_t /*t*/) {
    LossTable ell(spec_.num_states(), spec_.num_actions());
    for (StateId s = 0; s < spec_.num_states(); ++s)
        for (ActionId a = 0; a < spec_.num_actions(); ++a) ell(s, a) = spec_(s, a).sample(rng_);
    return {ell, ell};
}

ScriptedLosses::ScriptedLosses(std::vector<LossTable> tables) : tables_(std::move(tables)) {
    if (tables_.empty()) throw std::invalid_argument("scripted losses: empty script");
    num_states_ = tables_.front().num_states();
    num_actions_ = tables_.front().num_actions();
    for (const LossTable& t : tables_) {
        if (t.num_states() != num_states_ || t.num_actions() != num_actions_)
            throw std::invalid_argument("scripted losses: inconsistent table shapes");
        for (double v : t.values()) require_unit(v, "scripted loss");
    }
}

LossPair ScriptedLosses::next_loss(std::size_t t) {
    if (t == 0 || t > tables_.size())
        throw std::out_of_range("scripted losses: episode " + std::to_string(t) +
                                " past the end of a script of length " +
                                std::to_string(tables_.size()));
    return {tables_[t - 1], tables_[t - 1]};
}

std::vector<LossTable> read_loss_script(const std::string& path, std::size_t num_states,
                                        std::size_t num_actions) {
    std::ifstream in(path);
    if (!in) throw LossScriptError("cannot open loss script " + path);
    std::string line;
    if (!std::getline(in, line)) throw LossScriptError(path + ": empty file");
    line.erase(std::remove_if(line.begin(), line.end(), ::isspace), line.end());
    if (line != "t,s,a,loss") throw LossScriptError(path + ": expected header t,s,a,loss");

    std::vector<LossTable> tables;
    std::vector<char> seen_first(num_states * num_actions, 0);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        long long t = 0, s = 0, a = 0;
        double loss = 0.0;
        std::string extra;
        if (!(row >> t >> s >> a >> loss) || (row >> extra))
            throw LossScriptError(path + ":" + std::to_string(lineno) + ": malformed row");
        if (t < 1 || s < 0 || a < 0 || static_cast<std::size_t>(s) >= num_states ||
            static_cast<std::size_t>(a) >= num_actions)
            throw LossScriptError(path + ":" + std::to_string(lineno) + ": index out of range");
        if (!(loss >= 0.0 && loss <= 1.0))
            throw LossScriptError(path + ":" + std::to_string(lineno) + ": loss outside [0, 1]");
        const auto ep = static_cast<std::size_t>(t);
        if (ep < tables.size())
            throw LossScriptError(path + ":" + std::to_string(lineno) + ": episodes out of order");
        while (tables.size() < ep)
            tables.push_back(tables.empty() ? LossTable(num_states, num_actions, 0.0) : tables.back());
        tables[ep - 1](static_cast<StateId>(s), static_cast<ActionId>(a)) = loss;
        if (ep == 1) seen_first[static_cast<std::size_t>(s) * num_actions + static_cast<std::size_t>(a)] = 1;
    }
    if (tables.empty()) throw LossScriptError(path + ": no rows");
    if (std::find(seen_first.begin(), seen_first.end(), 0) != seen_first.end())
        throw LossScriptError(path + ": episode 1 must specify every (s,a) pair");
    return tables;
}

void write_loss_script(const std::string& path, std::span<const LossTable> tables) {
    std::ofstream out(path);
    if (!out) throw LossScriptError("cannot write loss script " + path);
    out << "t,s,a,loss\n";
    char buf[64];
    for (std::size_t t = 0; t < tables.size(); ++t)
        for (StateId s = 0; s < tables[t].num_states(); ++s)
            for (ActionId a = 0; a < tables[t].num_actions(); ++a) {
                if (t > 0 && tables[t](s, a) == tables[t - 1](s, a)) continue;
                std::snprintf(buf, sizeof buf, "%.17g", tables[t](s, a));
                out << t + 1 << ',' << s << ',' << a << ',' << buf << '\n';
            }
}

RuleLosses::RuleLosses(std::size_t num_states, std::size_t num_actions, LossRule rule,
                       bool keep_history)
    : num_states_(num_states), num_actions_(num_actions), rule_(std::move(rule)),
      keep_history_(keep_history) {}

LossPair RuleLosses::next_loss(std::size_t t) {
    LossTable ell = rule_(t, history_);
    if (ell.num_states() != num_states_ || ell.num_actions() != num_actions_)
        throw std::logic_error("loss rule returned a table of the wrong shape");
    for (double v : ell.values()) require_unit(v, "rule loss");
    return {ell, ell};
}

void RuleLosses::observe(const Trajectory& traj) {
    if (keep_history_) history_.push_back(traj);
}

LossRule sine_drift_rule(LossTable base, double amplitude, double period, LossTable phase) {
    if (!base.same_shape(phase)) throw std::invalid_argument("sine drift: shape mismatch");
    if (!(period > 0.0)) throw std::invalid_argument("sine drift: period must be positive");
    return [base = std::move(base), amplitude, period, phase = std::move(phase)](
               std::size_t t, std::span<const Trajectory>) {
        LossTable ell(base.num_states(), base.num_actions());
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / period;
        for (StateId s = 0; s < base.num_states(); ++s)
            for (ActionId a = 0; a < base.num_actions(); ++a)
                ell(s, a) = std::clamp(base(s, a) + amplitude * std::sin(angle + phase(s, a)), 0.0, 1.0);
        return ell;
    };
}

LossRule stride_permuted_rule(LossRule rule, std::size_t T, std::size_t stride) {
    if (T == 0 || stride == 0 || std::gcd(T, stride) != 1)
        throw std::invalid_argument("stride permutation needs gcd(stride, T) = 1");
    return [rule = std::move(rule), T, stride](std::size_t t, std::span<const Trajectory> history) {
        const std::size_t mapped = ((t - 1) % T) * stride % T + 1;
        return rule(mapped, history);
    };
}

CorruptionStrategy prefix_flip(const LayeredMdp& mdp, const DistributionSpec& spec,
                               std::size_t episodes, double budget) {
    const Moments mo = moments(spec);
    const DeterministicPolicy star = best_deterministic_policy(mdp, mo.mu);
    CorruptionStrategy c;
    c.kind = CorruptionStrategy::Kind::PrefixFlip;
    c.value = 1.0;
    c.episodes = episodes;
    c.budget = budget;
    for (StateId s = 0; s < mdp.num_states(); ++s) c.pairs.emplace_back(s, star.actions[s]);
    return c;
}

CorruptedStochastic::CorruptedStochastic(const LayeredMdp& mdp, DistributionSpec spec,
                                         CorruptionStrategy strategy, std::uint64_t seed)
    : mdp_(mdp), clean_(std::move(spec), seed), strategy_(std::move(strategy)) {
    require_unit(strategy_.value, "corruption value");
    for (const auto& [s, a] : strategy_.pairs)
        if (s >= mdp_.num_states() || a >= mdp_.num_actions())
            throw std::invalid_argument("corruption pair out of range");
}

LossPair CorruptedStochastic::next_loss(std::size_t t) {
    LossPair pair = clean_.next_loss(t);
    if (strategy_.kind == CorruptionStrategy::Kind::None) return pair;
    const bool active = strategy_.budget > 0.0 ? spent_ < strategy_.budget : t <= strategy_.episodes;
    if (!active) return pair;
    for (const auto& [s, a] : strategy_.pairs) pair.ell(s, a) = strategy_.value;
    spent_ += corruption_increment(mdp_, pair);
    return pair;
}

TruncatedLosses::TruncatedLosses(std::unique_ptr<LossProcess> base, double rho, std::size_t T)
    : base_(std::move(base)) {
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("truncation rho outside (0, 1]");
    active_ = static_cast<std::size_t>(std::floor(rho * static_cast<double>(T)));
}

LossPair TruncatedLosses::next_loss(std::size_t t) {
    if (t <= active_) return base_->next_loss(t);
    LossTable zero(base_->num_states(), base_->num_actions(), 0.0);
    return {zero, zero};
}

void TruncatedLosses::observe(const Trajectory& traj) { base_->observe(traj); }

std::unique_ptr<LossProcess> make_truncated_instance(double rho, std::unique_ptr<LossProcess> base,
                                                     std::size_t T) {
    return std::make_unique<TruncatedLosses>(std::move(base), rho, T);
}

HardInstance make_hard_instance(std::size_t H, std::size_t layer_width, std::size_t A, double alpha,
                                double epsilon, std::span<const ActionId> pin) {
    if (H < 3) throw std::invalid_argument("hard instance needs H >= 3");
    if (A < 3) throw std::invalid_argument("hard instance needs A >= 3");
    if (layer_width < 1) throw std::invalid_argument("hard instance needs a positive layer width");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("hard instance needs alpha in (0, 1)");
    if (!(epsilon >= 0.0 && epsilon < 1.0 - alpha))
        throw std::invalid_argument("hard instance needs epsilon in [0, 1 - alpha)");

    std::vector<std::size_t> sizes(H, layer_width);
    sizes[0] = 1;
    LayeredMdp mdp = uniform_layered_mdp(sizes, A);
    if (pin.size() != mdp.num_states())
        throw std::invalid_argument("hard instance: pin must name one action per state");
    DistributionSpec spec(mdp.num_states(), A, Distribution::bernoulli(alpha + epsilon));
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        if (pin[s] >= A) throw std::invalid_argument("hard instance: pin action out of range");
        spec(s, pin[s]) = Distribution::bernoulli(alpha);
    }
    return {std::move(mdp), std::move(spec), std::vector<ActionId>(pin.begin(), pin.end())};
}

HardInstance make_hard_instance_by_states(std::size_t H, std::size_t S, std::size_t A, double alpha,
                                          double epsilon, std::span<const ActionId> pin) {
    if (H < 3) throw std::invalid_argument("hard instance needs H >= 3");
    if (S < H || (S - 1) % (H - 1) != 0)
        throw std::invalid_argument("hard instance needs (S - 1) divisible by (H - 1)");
    return make_hard_instance(H, (S - 1) / (H - 1), A, alpha, epsilon, pin);
}

std::vector<ActionId> random_pin(std::size_t num_states, std::size_t num_actions, Rng& rng) {
    // Plain modulo keeps the draw identical across standard libraries.
    std::vector<ActionId> pin(num_states);
    for (auto& a : pin) a = static_cast<ActionId>(rng() % num_actions);
    return pin;
}

double corruption_increment(const LayeredMdp& mdp, const LossPair& pair) {
    double total = 0.0;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        double sup = 0.0;
        for (StateId s = mdp.layer_begin(h); s < mdp.layer_end(h); ++s)
            for (ActionId a = 0; a < mdp.num_actions(); ++a)
                sup = std::max(sup, std::abs(pair.clean(s, a) - pair.ell(s, a)));
        total += sup;
    }
    return total;
}

double measured_corruption(const LayeredMdp& mdp, std::span<const LossPair> history) {
    double total = 0.0;
    for (const LossPair& p : history) total += corruption_increment(mdp, p);
    return total;
}

}  // namespace bobw
