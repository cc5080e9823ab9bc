#include "bobw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "bobw/mdp_io.hpp"

namespace bobw {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t child_seed(std::uint64_t master, std::string_view label) {
    // splitmix64 finaliser over the master seed mixed with the label hash
    std::uint64_t z = master ^ fnv1a64(label);
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// baseline

double default_oreps_eta(const LayeredMdp& mdp, std::size_t T) {
    const double H = static_cast<double>(mdp.horizon());
    const double SA = static_cast<double>(mdp.num_states() * mdp.num_actions());
    const double ratio = std::max(SA / H, std::numbers::e);
    return std::sqrt(H * std::log(ratio) / (static_cast<double>(T) * SA));
}

OrepsBaseline::OrepsBaseline(LayeredMdp mdp, std::size_t T, double eta, NewtonOptions options)
    : mdp_(std::move(mdp)), T_(T), eta_(eta), options_(options),
      cumulative_(mdp_.num_states(), mdp_.num_actions(), 0.0) {
    require_horizon(mdp_, T_);
    if (!(eta_ > 0.0) || !std::isfinite(eta_))
        throw std::invalid_argument("baseline learning rate must be positive");
}

OrepsBaseline::Decision OrepsBaseline::act() const {
    OccupancySolution sol =
        solve_occupancy_entropy(mdp_, cumulative_, eta_, options_, last_q_ ? &*last_q_ : nullptr);
    Decision d;
    d.pi = policy_from_occupancy(sol.q);
    d.q = std::move(sol.q);
    d.solver_iterations = sol.iterations;
    return d;
}

OrepsBaseline::Decision OrepsBaseline::step(Rng& rng, const Observe& observe) {
    Decision d = act();
    Trajectory traj = sample_trajectory(mdp_, d.pi, rng);
    observe(traj);
    for (const Step& st : traj.steps) {
        const double q = d.q(st.state, st.action);
        if (!(q >= 1e-300)) throw InvariantViolation("baseline: visited pair has vanishing occupancy");
        cumulative_(st.state, st.action) += st.loss / q;
    }
    ++t_;
    last_q_ = d.q;
    return d;
}

namespace {

double max_entry(const SATable& t) {
    const auto v = t.values();
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

class GlobalAdapter : public Learner {
public:
    GlobalAdapter(const LayeredMdp& mdp, std::size_t T, GlobalOptConfig cfg) : impl_(mdp, T, cfg) {}
    LearnerOutcome step(Rng& rng, const Observe& observe) override {
        GlobalOptStep s = impl_.step(rng, observe);
        return {true, std::move(s.q), s.solver_iterations, max_entry(s.eta), 0};
    }
    std::size_t real_episodes() const override { return impl_.episode() - 1; }

private:
    GlobalOpt impl_;
};

class PolicyAdapter : public Learner {
public:
    PolicyAdapter(const LayeredMdp& mdp, std::size_t T, PolicyOptConfig cfg) : impl_(mdp, T, cfg) {}
    LearnerOutcome step(Rng& rng, const Observe& observe) override {
        PolicyOptStep s = impl_.step(rng, observe);
        return {s.real, std::move(s.q_pi), 0, max_entry(s.eta_before), impl_.virtual_count()};
    }
    std::size_t real_episodes() const override { return impl_.real_episodes(); }

private:
    PolicyOpt impl_;
};

class OrepsAdapter : public Learner {
public:
    OrepsAdapter(const LayeredMdp& mdp, std::size_t T, double eta, NewtonOptions opt)
        : impl_(mdp, T, eta, opt) {}
    LearnerOutcome step(Rng& rng, const Observe& observe) override {
        OrepsBaseline::Decision d = impl_.step(rng, observe);
        return {true, std::move(d.q), d.solver_iterations, impl_.eta(), 0};
    }
    std::size_t real_episodes() const override { return impl_.episode() - 1; }

private:
    OrepsBaseline impl_;
};

}  // namespace

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, const LayeredMdp& mdp,
                                      std::size_t T, const SolverSettings& solver) {
    switch (spec.kind) {
        case LearnerKind::GlobalOpt:
            return std::make_unique<GlobalAdapter>(mdp, T, GlobalOptConfig{spec.predictor, solver.newton});
        case LearnerKind::PolicyOpt:
            return std::make_unique<PolicyAdapter>(
                mdp, T, PolicyOptConfig{spec.predictor, solver.simplex_tol, spec.virtual_cap_constant});
        case LearnerKind::Oreps:
            return std::make_unique<OrepsAdapter>(
                mdp, T, spec.oreps_eta.value_or(default_oreps_eta(mdp, T)), solver.newton);
    }
    throw std::logic_error("unknown learner kind");
}

// ---------------------------------------------------------------------------
// environment

namespace {

Distribution parse_distribution(const json& j) {
    if (j.contains("bernoulli")) return Distribution::bernoulli(j.at("bernoulli").get<double>());
    if (j.contains("constant")) return Distribution::constant(j.at("constant").get<double>());
    if (j.contains("scaled_bernoulli")) {
        const json& sb = j.at("scaled_bernoulli");
        return Distribution::scaled_bernoulli(sb.at("mean").get<double>(), sb.at("delta").get<double>());
    }
    throw ConfigError("distribution needs one of bernoulli, scaled_bernoulli, constant");
}

LayeredMdp parse_mdp(const json& j, const fs::path& base_dir) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "file") {
        fs::path p = j.at("path").get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        try {
            return load_mdp(p.string());
        } catch (const MdpFormatError& e) {
            throw ConfigError(e.what());
        }
    }
    if (type == "hard") {
        const auto H = j.at("H").get<std::size_t>();
        const auto w = j.at("width").get<std::size_t>();
        const auto A = j.at("A").get<std::size_t>();
        std::vector<std::size_t> sizes(H, w);
        if (!sizes.empty()) sizes[0] = 1;
        return uniform_layered_mdp(sizes, A);
    }
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto A = j.at("A").get<std::size_t>();
    if (type == "uniform") return uniform_layered_mdp(sizes, A);
    if (type == "random") {
        Rng rng(child_seed(j.value("seed", std::uint64_t{0}), "mdp"));
        return random_layered_mdp(sizes, A, rng);
    }
    throw ConfigError("unknown mdp type '" + type + "'");
}

LossTable pinned_table(std::size_t S, std::size_t A, double good, double bad,
                       const std::vector<ActionId>& pin) {
    LossTable t(S, A, bad);
    for (StateId s = 0; s < S; ++s) t(s, pin[s]) = good;
    return t;
}

std::vector<ActionId> pin_from_seed(std::size_t S, std::size_t A, std::uint64_t pin_seed) {
    Rng rng(child_seed(pin_seed, "pin"));
    return random_pin(S, A, rng);
}

CorruptionStrategy parse_corruption(const json& j, const LayeredMdp& mdp,
                                    const DistributionSpec& spec, std::size_t T) {
    const std::string type = j.value("type", std::string("none"));
    const double HT = static_cast<double>(mdp.horizon() * T);
    const std::size_t episodes = j.value("episodes", std::size_t{0});
    const double budget = j.value("budget_fraction", 0.0) * HT;
    if (type == "none") return {};
    if (type == "prefix_flip") return prefix_flip(mdp, spec, episodes, budget);
    if (type == "targeted") {
        CorruptionStrategy c;
        c.kind = CorruptionStrategy::Kind::TargetedState;
        for (const auto& p : j.at("pairs"))
            c.pairs.emplace_back(p.at(0).get<StateId>(), p.at(1).get<ActionId>());
        c.value = j.value("value", 1.0);
        c.episodes = episodes;
        c.budget = budget;
        return c;
    }
    throw ConfigError("unknown corruption type '" + type + "'");
}

}  // namespace

Environment build_environment(const json& env, std::size_t T, std::uint64_t env_seed,
                              const fs::path& base_dir) {
    try {
        const json& mj = env.at("mdp");
        const json& lj = env.at("losses");
        LayeredMdp mdp = parse_mdp(mj, base_dir);
        const std::size_t S = mdp.num_states();
        const std::size_t A = mdp.num_actions();
        const std::string type = lj.at("type").get<std::string>();

        std::optional<DistributionSpec> spec;
        std::optional<std::vector<ActionId>> pin;
        std::unique_ptr<LossProcess> process;

        if (type == "hard_instance") {
            if (mj.at("type").get<std::string>() != "hard")
                throw ConfigError("hard_instance losses need an mdp of type 'hard'");
            pin = pin_from_seed(S, A, lj.value("pin_seed", std::uint64_t{0}));
            HardInstance hi = make_hard_instance(mdp.horizon(), mj.at("width").get<std::size_t>(), A,
                                                 lj.at("alpha").get<double>(),
                                                 lj.at("epsilon").get<double>(), *pin);
            const double factor = lj.value("variance_factor", 1.0);
            spec = factor == 1.0 ? hi.spec : reduce_variance(hi.spec, factor);
        } else if (type == "distribution") {
            spec = DistributionSpec(S, A, parse_distribution(lj.at("default")));
            for (const auto& p : lj.value("pairs", json::array())) {
                const auto s = p.at("s").get<StateId>();
                const auto a = p.at("a").get<ActionId>();
                if (s >= S || a >= A) throw ConfigError("distribution pair out of range");
                (*spec)(s, a) = parse_distribution(p.at("dist"));
            }
        } else if (type == "script") {
            fs::path p = lj.at("path").get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            try {
                process = std::make_unique<ScriptedLosses>(read_loss_script(p.string(), S, A));
            } catch (const LossScriptError& e) {
                throw ConfigError(e.what());
            }
        } else if (type == "sine_drift") {
            LossTable base(S, A, 0.5);
            const json& bj = lj.at("base");
            if (bj.is_number()) {
                base = LossTable(S, A, bj.get<double>());
            } else {
                pin = pin_from_seed(S, A, bj.value("pin_seed", std::uint64_t{0}));
                base = pinned_table(S, A, bj.at("good").get<double>(), bj.at("bad").get<double>(), *pin);
            }
            LossTable phase(S, A, 0.0);
            const json pj = lj.value("phase", json("shared"));
            if (pj.is_object()) {
                Rng rng(child_seed(pj.at("seed").get<std::uint64_t>(), "phase"));
                for (double& v : phase.values()) v = 2.0 * std::numbers::pi * uniform01(rng);
            }
            LossRule rule = sine_drift_rule(base, lj.at("amplitude").get<double>(),
                                            lj.at("period").get<double>(), phase);
            const std::size_t stride = lj.value("stride", std::size_t{0});
            if (stride > 0) rule = stride_permuted_rule(std::move(rule), T, stride);
            process = std::make_unique<RuleLosses>(S, A, std::move(rule));
        } else {
            throw ConfigError("unknown loss type '" + type + "'");
        }

        if (spec) {
            const json cj = env.value("corruption", json::object());
            CorruptionStrategy c = parse_corruption(cj, mdp, *spec, T);
            if (c.kind == CorruptionStrategy::Kind::None)
                process = std::make_unique<StochasticIid>(*spec, env_seed);
            else
                process = std::make_unique<CorruptedStochastic>(mdp, *spec, std::move(c), env_seed);
        } else if (env.contains("corruption") &&
                   env.at("corruption").value("type", std::string("none")) != "none") {
            throw ConfigError("corruption needs a stochastic loss process");
        }

        const double rho = env.value("truncate_rho", 1.0);
        if (rho != 1.0) process = make_truncated_instance(rho, std::move(process), T);
        return {std::move(mdp), std::move(process), std::move(pin)};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("environment: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("environment: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// config

namespace {

const char* learner_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::GlobalOpt: return "global-opt";
        case LearnerKind::PolicyOpt: return "policy-opt";
        case LearnerKind::Oreps: return "oreps-baseline";
    }
    return "?";
}

json normalized(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["environment"] = c.environment;
    json l;
    l["type"] = learner_name(c.learner.kind);
    l["predictor"] = c.learner.predictor.kind == PredictorKind::GradientDescent ? "gd" : "em";
    l["xi"] = c.learner.predictor.xi;
    l["eta"] = c.learner.oreps_eta ? json(*c.learner.oreps_eta) : json(nullptr);
    l["virtual_cap_constant"] = c.learner.virtual_cap_constant;
    j["learner"] = l;
    j["T"] = c.T;
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir.string();
    j["solver"] = {{"tol", c.solver.newton.tol},
                   {"feasibility_tol", c.solver.newton.feasibility_tol},
                   {"max_iterations", c.solver.newton.max_iterations},
                   {"simplex_tol", c.solver.simplex_tol}};
    j["measures"] = {{"enabled", c.measures.enabled},
                     {"q_inf_iterations", c.measures.q_inf_iterations},
                     {"overlay_points", c.measures.overlay_points}};
    return j;
}

}  // namespace

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
    ExperimentConfig c;
    c.base_dir = base_dir;
    try {
        c.name = j.value("name", std::string("run"));
        c.environment = j.at("environment");
        const json& l = j.at("learner");
        const std::string type = l.at("type").get<std::string>();
        if (type == "global-opt") c.learner.kind = LearnerKind::GlobalOpt;
        else if (type == "policy-opt") c.learner.kind = LearnerKind::PolicyOpt;
        else if (type == "oreps-baseline") c.learner.kind = LearnerKind::Oreps;
        else throw ConfigError("unknown learner type '" + type + "'");
        const std::string pred = l.value("predictor", std::string("gd"));
        if (pred == "gd") c.learner.predictor.kind = PredictorKind::GradientDescent;
        else if (pred == "em") c.learner.predictor.kind = PredictorKind::EmpiricalMean;
        else throw ConfigError("unknown predictor '" + pred + "'");
        c.learner.predictor.xi = l.value("xi", 0.25);
        if (l.contains("eta") && !l.at("eta").is_null()) c.learner.oreps_eta = l.at("eta").get<double>();
        c.learner.virtual_cap_constant = l.value("virtual_cap_constant", 2000.0);

        c.T = j.at("T").get<std::size_t>();
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        c.output_dir = j.value("output_dir", std::string());
        if (!c.output_dir.empty() && c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            c.solver.newton.tol = s.value("tol", c.solver.newton.tol);
            c.solver.newton.feasibility_tol = s.value("feasibility_tol", c.solver.newton.feasibility_tol);
            c.solver.newton.max_iterations = s.value("max_iterations", c.solver.newton.max_iterations);
            c.solver.simplex_tol = s.value("simplex_tol", c.solver.simplex_tol);
        }
        if (j.contains("measures")) {
            const json& m = j.at("measures");
            c.measures.enabled = m.value("enabled", true);
            c.measures.q_inf_iterations = m.value("q_inf_iterations", c.measures.q_inf_iterations);
            c.measures.overlay_points = m.value("overlay_points", c.measures.overlay_points);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.seeds.empty()) throw ConfigError("config: at least one seed is required");
    if (c.T < 2) throw ConfigError("config: T must be at least 2");
    if (c.learner.predictor.kind == PredictorKind::GradientDescent &&
        !(c.learner.predictor.xi > 0.0 && c.learner.predictor.xi <= 0.5))
        throw ConfigError("config: xi must lie in (0, 1/2]");
    c.raw = normalized(c);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

void override_config(ExperimentConfig& c, std::optional<std::uint64_t> seed,
                     std::optional<fs::path> out, std::optional<std::size_t> T) {
    if (seed) c.seeds = {*seed};
    if (out) c.output_dir = *out;
    if (T) {
        if (*T < 2) throw ConfigError("T must be at least 2");
        c.T = *T;
    }
    c.raw = normalized(c);
}

std::string config_hash(const ExperimentConfig& c) {
    json j = c.raw;
    j.erase("output_dir");
    j.erase("seeds");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

// ---------------------------------------------------------------------------
// csv

namespace {

std::string fmt17(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string format_record(const EpisodeRecord& r) {
    std::string s = std::to_string(r.t);
    s += r.real ? ",1," : ",0,";
    s += fmt17(r.expected_loss) + ',' + fmt17(r.comp_hindsight) + ',' + fmt17(r.comp_mustar) + ',' +
         fmt17(r.corruption_inc) + ',' + std::to_string(r.virtual_count) + ',' + fmt17(r.max_eta) +
         ',' + std::to_string(r.solver_iters);
    return s;
}

void write_episode_csv(const fs::path& path, const std::vector<EpisodeRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << kEpisodeCsvHeader << '\n';
    for (const EpisodeRecord& r : records) out << format_record(r) << '\n';
}

std::vector<EpisodeRecord> read_episode_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kEpisodeCsvHeader) throw std::runtime_error(path.string() + ": unexpected header");
    std::vector<EpisodeRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 9) throw std::runtime_error(path.string() + ": malformed row");
        EpisodeRecord r;
        r.t = std::stoull(f[0]);
        r.real = f[1] == "1";
        r.expected_loss = std::stod(f[2]);
        r.comp_hindsight = std::stod(f[3]);
        r.comp_mustar = std::stod(f[4]);
        r.corruption_inc = std::stod(f[5]);
        r.virtual_count = std::stoull(f[6]);
        r.max_eta = std::stod(f[7]);
        r.solver_iters = std::stoi(f[8]);
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// runs

namespace {

std::vector<std::size_t> overlay_prefixes(std::size_t T, std::size_t points) {
    std::vector<std::size_t> out;
    if (points == 0) return out;
    for (std::size_t i = 1; i <= points; ++i) {
        const double x = std::pow(static_cast<double>(T), static_cast<double>(i) / static_cast<double>(points));
        const auto t = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(x)), 1, T);
        if (out.empty() || t > out.back()) out.push_back(t);
    }
    return out;
}

fs::path run_dir(const ExperimentConfig& c) {
    return c.output_dir / (c.name + "-" + config_hash(c));
}

void write_run_files(const ExperimentConfig& c, RunSummary& run) {
    const fs::path dir = run_dir(c);
    fs::create_directories(dir);
    run.csv_path = dir / ("seed" + std::to_string(run.seed) + ".csv");
    write_episode_csv(run.csv_path, run.records);
    json m;
    m["seed"] = run.seed;
    m["config_hash"] = run.config_hash;
    m["measures"] = run.measures ? to_json(*run.measures) : json(nullptr);
    m["overlays"] = run.overlays ? *run.overlays : json(nullptr);
    m["error"] = run.error.empty() ? json(nullptr) : json(run.error);
    run.measures_path = dir / ("seed" + std::to_string(run.seed) + ".measures.json");
    std::ofstream(run.measures_path) << m.dump(2) << '\n';
}

}  // namespace

RunSummary run_single(const ExperimentConfig& config, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    RunSummary run;
    run.name = config.name;
    run.config_hash = config_hash(config);
    run.seed = seed;

    Environment env = build_environment(config.environment, config.T, child_seed(seed, "env"),
                                        config.base_dir);
    const LayeredMdp& mdp = env.mdp;
    const std::size_t T = config.T;
    try {
        require_horizon(mdp, T);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (env.process->num_states() != mdp.num_states() || env.process->num_actions() != mdp.num_actions())
        throw ConfigError("loss process shape does not match the mdp");

    std::optional<Moments> mo;
    std::optional<OccupancyMeasure> q_star;
    double star_mean = 0.0;
    if (const DistributionSpec* d = env.process->distribution()) {
        mo = moments(*d);
        const DeterministicPolicy star = best_deterministic_policy(mdp, mo->mu);
        q_star = occupancy(mdp, star.policy);
        star_mean = star.value;
    }

    MeasureAccumulator acc(mdp);
    std::vector<double> pseudo_inc;
    Rng rng(child_seed(seed, "learner"));
    try {
        auto learner = make_learner(config.learner, mdp, T, config.solver);
        std::size_t iteration = 0;
        while (learner->real_episodes() < T) {
            LossPair pair;
            const std::size_t t_real = learner->real_episodes() + 1;
            const Observe observe = [&](Trajectory& traj) {
                pair = env.process->next_loss(t_real);
                for (Step& st : traj.steps) st.loss = pair.ell(st.state, st.action);
                env.process->observe(traj);
            };
            LearnerOutcome out = learner->step(rng, observe);
            EpisodeRecord rec;
            rec.t = ++iteration;
            rec.real = out.real;
            rec.virtual_count = out.virtual_count;
            rec.max_eta = out.max_eta;
            rec.solver_iters = out.solver_iterations;
            if (out.real) {
                rec.expected_loss = inner(out.q, pair.ell);
                rec.corruption_inc = corruption_increment(mdp, pair);
                rec.comp_mustar = q_star ? inner(*q_star, pair.ell) : std::numeric_limits<double>::quiet_NaN();
                if (mo) pseudo_inc.push_back(inner(out.q, mo->mu) - star_mean);
                acc.add(pair.ell, rec.corruption_inc);
            }
            run.records.push_back(rec);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        run.error = e.what();
    }

    run.real_episodes = acc.episodes();
    if (!run.records.empty()) run.virtual_episodes = run.records.back().virtual_count;
    if (acc.episodes() > 0) {
        const DeterministicPolicy hind = best_deterministic_policy(mdp, acc.sum());
        const OccupancyMeasure q_hind = occupancy(mdp, hind.policy);
        std::size_t k = 0;
        double rh = 0.0, rs = 0.0, rp = 0.0;
        for (EpisodeRecord& rec : run.records) {
            if (!rec.real) continue;
            rec.comp_hindsight = inner(q_hind, acc.losses()[k]);
            rh += rec.expected_loss - rec.comp_hindsight;
            run.regret_hindsight.push_back(rh);
            if (q_star) {
                rs += rec.expected_loss - rec.comp_mustar;
                run.regret_mustar.push_back(rs);
                rp += pseudo_inc[k];
                run.pseudo_regret.push_back(rp);
            }
            ++k;
        }
        if (config.measures.enabled && run.error.empty()) {
            run.measures = measure_report(mdp, acc, mo ? &mo->mu : nullptr,
                                          mo ? &mo->sigma_sq : nullptr,
                                          {config.measures.q_inf_iterations});
            const auto prefixes = overlay_prefixes(T, config.measures.overlay_points);
            run.overlays = theoretical_overlays(
                mdp, T, *run.measures,
                config.learner.kind == LearnerKind::PolicyOpt ? LearnerFamily::Policy : LearnerFamily::Global,
                prefixes);
        }
    }
    run.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

MeasureReport measures_only(const ExperimentConfig& config, std::uint64_t seed) {
    Environment env = build_environment(config.environment, config.T, child_seed(seed, "env"),
                                        config.base_dir);
    MeasureAccumulator acc(env.mdp);
    for (std::size_t t = 1; t <= config.T; ++t) {
        const LossPair pair = env.process->next_loss(t);
        acc.add(pair.ell, corruption_increment(env.mdp, pair));
        env.process->observe(Trajectory{});
    }
    std::optional<Moments> mo;
    if (const DistributionSpec* d = env.process->distribution()) mo = moments(*d);
    return measure_report(env.mdp, acc, mo ? &mo->mu : nullptr, mo ? &mo->sigma_sq : nullptr,
                          {config.measures.q_inf_iterations});
}

json manifest_entry(const RunSummary& run) {
    json j;
    j["name"] = run.name;
    j["config_hash"] = run.config_hash;
    j["seed"] = run.seed;
    j["csv"] = run.csv_path.string();
    j["measures"] = run.measures_path.string();
    j["real_episodes"] = run.real_episodes;
    j["virtual_episodes"] = run.virtual_episodes;
    j["final_regret_hindsight"] = run.regret_hindsight.empty() ? json(nullptr) : json(run.regret_hindsight.back());
    j["final_regret_mustar"] = run.regret_mustar.empty() ? json(nullptr) : json(run.regret_mustar.back());
    j["wall_clock_seconds"] = run.wall_clock;
    j["error"] = run.error.empty() ? json(nullptr) : json(run.error);
    return j;
}

std::vector<RunSummary> run_experiment(const ExperimentConfig& config) {
    std::vector<RunSummary> runs;
    for (std::uint64_t seed : config.seeds) {
        runs.push_back(run_single(config, seed));
        if (!config.output_dir.empty()) write_run_files(config, runs.back());
    }
    if (!config.output_dir.empty()) {
        json m;
        m["config_hash"] = config_hash(config);
        m["config"] = config.raw;
        m["seeds"] = config.seeds;
        m["csv_header"] = kEpisodeCsvHeader;
        m["runs"] = json::array();
        for (const RunSummary& r : runs) m["runs"].push_back(manifest_entry(r));
        std::ofstream(run_dir(config) / "manifest.json") << m.dump(2) << '\n';
    }
    return runs;
}

std::size_t thread_budget() {
    if (const char* env = std::getenv("BOBW_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult sweep(const std::vector<ExperimentConfig>& configs, const fs::path& out_dir,
                  std::size_t threads) {
    if (configs.empty()) throw ConfigError("sweep: no configs");
    struct Task {
        std::size_t config;
        std::uint64_t seed;
    };
    std::vector<ExperimentConfig> local = configs;
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < local.size(); ++i) {
        override_config(local[i], std::nullopt, out_dir, std::nullopt);
        for (std::uint64_t s : local[i].seeds) tasks.push_back({i, s});
    }
    std::vector<RunSummary> results(tasks.size());
    std::atomic<std::size_t> next{0};
    const std::size_t n = std::min(tasks.size(), threads ? threads : thread_budget());
    auto worker = [&] {
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
            const ExperimentConfig& c = local[tasks[k].config];
            try {
                results[k] = run_single(c, tasks[k].seed);
            } catch (const std::exception& e) {
                results[k].name = c.name;
                results[k].config_hash = config_hash(c);
                results[k].seed = tasks[k].seed;
                results[k].error = e.what();
            }
            try {
                write_run_files(c, results[k]);
            } catch (const std::exception& e) {
                if (results[k].error.empty()) results[k].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    SweepResult out;
    fs::create_directories(out_dir);
    out.aggregate = out_dir / "aggregate.csv";
    {
        std::ofstream agg(out.aggregate, std::ios::binary);
        agg << "config_hash,seed," << kEpisodeCsvHeader << '\n';
        for (const RunSummary& r : results)
            for (const EpisodeRecord& rec : r.records)
                agg << r.config_hash << ',' << r.seed << ',' << format_record(rec) << '\n';
    }
    json m;
    m["aggregate"] = out.aggregate.string();
    m["csv_header"] = kEpisodeCsvHeader;
    m["configs"] = json::array();
    for (const ExperimentConfig& c : local)
        m["configs"].push_back({{"config_hash", config_hash(c)}, {"config", c.raw}});
    m["runs"] = json::array();
    for (const RunSummary& r : results) m["runs"].push_back(manifest_entry(r));
    out.manifest = out_dir / "manifest.json";
    std::ofstream(out.manifest) << m.dump(2) << '\n';
    out.runs = std::move(results);
    return out;
}

}  // namespace bobw
