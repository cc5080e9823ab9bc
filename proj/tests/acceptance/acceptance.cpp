// Acceptance suite: one PASS/FAIL line per criterion P1..P10.
//
//   acceptance            run everything
//   acceptance P4 P6      run a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bobw/complexity.hpp"
#include "bobw/global_opt.hpp"
#include "bobw/harness.hpp"
#include "bobw/losses.hpp"
#include "bobw/mdp.hpp"
#include "bobw/policy_opt.hpp"
#include "bobw/solver.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bobw;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes.push_back(std::string(ok ? "" : "!") + what);
    }
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

const std::vector<std::size_t> kWide{1, 3, 3};
constexpr std::size_t kA = 3;
constexpr std::size_t kSeeds = 10;

std::vector<std::uint64_t> seed_list() {
    std::vector<std::uint64_t> s(kSeeds);
    std::iota(s.begin(), s.end(), 1);
    return s;
}

Observe table_observer(const LossTable& l) {
    return [l](Trajectory& tr) {
        for (Step& st : tr.steps) st.loss = l(st.state, st.action);
    };
}

LossTable draw(const DistributionSpec& spec, Rng& rng) {
    LossTable l(spec.num_states(), spec.num_actions());
    for (StateId s = 0; s < spec.num_states(); ++s)
        for (ActionId a = 0; a < spec.num_actions(); ++a) l(s, a) = spec(s, a).sample(rng);
    return l;
}

HardInstance desk_hard(double alpha, double eps, std::uint64_t pin_seed) {
    Rng rng(pin_seed);
    const auto pin = random_pin(7, kA, rng);
    return make_hard_instance(3, 3, kA, alpha, eps, pin);
}

// ---------------------------------------------------------------------------
// experiment plumbing

json base_config(const json& environment, const std::string& learner, const std::string& predictor,
                 std::size_t T) {
    return json{{"name", "acceptance"},
                {"environment", environment},
                {"learner", {{"type", learner}, {"predictor", predictor}}},
                {"T", T},
                {"seeds", seed_list()},
                {"measures", {{"enabled", false}}}};
}

json hard_env(double alpha, double eps, double variance_factor = 1.0) {
    return json{{"mdp", {{"type", "hard"}, {"H", 3}, {"width", 3}, {"A", 3}}},
                {"losses",
                 {{"type", "hard_instance"},
                  {"alpha", alpha},
                  {"epsilon", eps},
                  {"pin_seed", 7},
                  {"variance_factor", variance_factor}}}};
}

enum class Series { Hindsight, Mustar, Pseudo };

const std::vector<double>& pick(const RunSummary& r, Series s) {
    switch (s) {
        case Series::Hindsight: return r.regret_hindsight;
        case Series::Mustar: return r.regret_mustar;
        case Series::Pseudo: return r.pseudo_regret;
    }
    return r.regret_hindsight;
}

/// Seed-averaged cumulative regret after each real episode.
std::vector<double> mean_curve(const json& config, Series series, std::string& error) {
    const ExperimentConfig c = parse_config(config);
    std::vector<double> mean(c.T, 0.0);
    for (std::uint64_t seed : c.seeds) {
        const RunSummary r = run_single(c, seed);
        if (!r.error.empty()) {
            error = r.error;
            return {};
        }
        const auto& v = pick(r, series);
        for (std::size_t i = 0; i < c.T; ++i) mean[i] += v[i] / static_cast<double>(c.seeds.size());
    }
    return mean;
}

std::string learner_tag(const std::string& learner, const std::string& predictor) {
    return (learner == "global-opt" ? "GO" : "PO") + std::string("/") + predictor;
}

// ---------------------------------------------------------------------------
// P1

Outcome p1() {
    Outcome out;
    Rng rng(2024);
    const std::vector<std::pair<std::vector<std::size_t>, std::size_t>> shapes{
        {{1, 2, 2}, 2}, {{1, 3, 3}, 3}, {{1, 2, 2, 2}, 2}, {{1, 2, 3}, 3}, {{1, 4}, 4}};
    double worst = 0.0;
    std::size_t mdps = 0;
    for (const auto& [sizes, A] : shapes) {
        for (int rep = 0; rep < 40; ++rep) {
            const LayeredMdp mdp =
                rep % 2 == 0 ? random_layered_mdp(sizes, A, rng) : fixture::sparse_random(sizes, A, rng);
            const std::size_t S = mdp.num_states();
            if (oracle::path_count(mdp) > 1e5 || std::pow(static_cast<double>(A), static_cast<double>(S)) > 1e5)
                continue;
            ++mdps;
            const Policy pi = oracle::random_policy(S, A, rng);
            const LossTable loss = fixture::random_loss(S, A, rng);

            const ValueFunctions vf = value_functions(mdp, pi, loss);
            for (StateId s = 0; s < S; ++s) {
                worst = std::max(worst, std::abs(vf.v[s] - oracle::value(mdp, pi, loss, s)));
                for (ActionId a = 0; a < A; ++a)
                    worst = std::max(worst, std::abs(vf.q(s, a) - oracle::value(mdp, pi, loss, s, static_cast<int>(a))));
            }
            worst = std::max(worst, fixture::max_diff(occupancy(mdp, pi), oracle::occupancy(mdp, pi)));
            for (StateId s = 0; s < S; ++s)
                for (ActionId a = 0; a < A; ++a)
                    worst = std::max(worst, fixture::max_diff(conditional_occupancy(mdp, pi, s, a),
                                                              oracle::conditional_occupancy(mdp, pi, s, a)));
            const DeterministicPolicy best = best_deterministic_policy(mdp, loss);
            worst = std::max(worst, std::abs(best.value - oracle::best_value(mdp, loss)));
            worst = std::max(worst, std::abs(best.value - oracle::dot(oracle::occupancy(mdp, best.policy), loss)));
        }
    }
    out.require(mdps >= 150, std::to_string(mdps) + " enumerable MDPs");
    out.require(worst <= 1e-10, "max deviation " + fmt(worst) + " (<= 1e-10)");
    return out;
}

// ---------------------------------------------------------------------------
// P2

Outcome p2() {
    Outcome out;
    {
        const std::vector<double> L{0.0, 1.0}, eta{1.0, 1.0};
        const auto p = solve_simplex({L, eta}, 1e-12);
        const double err = std::abs(p[1] - (3.0 - std::sqrt(5.0)) / 2.0);
        out.require(err <= 1e-9, "closed form err " + fmt(err));
    }
    Rng rng(77);
    bool beaten = false;
    double kkt = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t A = 2 + rep % 4;
        std::vector<double> L(A), eta(A);
        for (std::size_t a = 0; a < A; ++a) {
            L[a] = 10.0 * uniform01(rng);
            eta[a] = 0.02 + uniform01(rng);
        }
        const SimplexProblem prob{L, eta};
        const auto sol = solve_simplex_full(prob);
        kkt = std::max(kkt, simplex_kkt_residual(prob, sol) / (1.0 + *std::max_element(L.begin(), L.end())));
        const double f = simplex_objective(prob, sol.p);
        for (int k = 0; k < 10000; ++k)
            if (simplex_objective(prob, oracle::random_simplex(A, rng)) < f - 1e-9) beaten = true;
    }
    out.require(!beaten, "simplex beats 1e4 samples x 40");
    out.require(kkt <= 1e-10, "simplex KKT " + fmt(kkt));

    const LayeredMdp one = fixture::from_rows({1}, 4, {{{0}, {0}, {0}, {0}}});
    double reduce = 0.0;
    for (int rep = 0; rep < 40; ++rep) {
        LossTable L(1, 4);
        SATable eta(1, 4);
        for (ActionId a = 0; a < 4; ++a) {
            L(0, a) = 10.0 * uniform01(rng);
            eta(0, a) = 0.02 + uniform01(rng);
        }
        const auto q = solve_occupancy({one, L, eta}).q;
        const auto p = solve_simplex({L.row(0), eta.row(0)});
        for (ActionId a = 0; a < 4; ++a) reduce = std::max(reduce, std::abs(q(0, a) - p[a]));
    }
    out.require(reduce <= 1e-9, "H=1 reduction " + fmt(reduce));

    double stat = 0.0, feas = 0.0;
    bool poly_beaten = false;
    for (int rep = 0; rep < 20; ++rep) {
        const LayeredMdp mdp = random_layered_mdp(kWide, kA, rng);
        LossTable L = fixture::random_loss(7, kA, rng);
        for (double& x : L.values()) x *= 30.0;
        SATable eta(7, kA);
        for (double& x : eta.values()) x = 0.05 + 2.0 * uniform01(rng);
        const PolytopeProblem prob{mdp, L, eta};
        const auto sol = solve_occupancy(prob);
        stat = std::max(stat, sol.stationarity);
        feas = std::max({feas, sol.feasibility, flow_residual(mdp, sol.q)});
        const double f = occupancy_objective(prob, sol.q);
        for (int k = 0; k < 10000; ++k)
            if (occupancy_objective(prob, occupancy(mdp, oracle::random_policy(7, kA, rng))) < f - 1e-9)
                poly_beaten = true;
    }
    out.require(stat <= 1e-10, "polytope stationarity " + fmt(stat));
    out.require(feas <= 1e-10, "feasibility " + fmt(feas));
    out.require(!poly_beaten, "polytope beats 1e4 samples x 20");
    return out;
}

// ---------------------------------------------------------------------------
// P3

struct Welford {
    std::vector<double> mean, m2;
    std::size_t n = 0;
    explicit Welford(std::size_t k) : mean(k, 0.0), m2(k, 0.0) {}
    void add(std::span<const double> x) {
        ++n;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - mean[i];
            mean[i] += d / static_cast<double>(n);
            m2[i] += d * (x[i] - mean[i]);
        }
    }
    double se(std::size_t i) const { return std::sqrt(m2[i] / static_cast<double>(n - 1) / static_cast<double>(n)); }
};

Outcome p3() {
    Outcome out;
    const HardInstance hi = desk_hard(0.3, 0.2, 5);
    const Moments mo = moments(hi.spec);
    const std::size_t n = 200000;
    const std::size_t T = 10000;
    Rng env(31), rng(32);

    // Occupancy learner, frozen after a warm-up.
    GlobalOpt g(hi.mdp, T);
    for (int t = 0; t < 300; ++t) g.step(rng, table_observer(draw(hi.spec, env)));
    const auto d = g.act();
    const LossTable m = g.prediction();
    Welford w(7 * kA);
    for (std::size_t k = 0; k < n; ++k) {
        Trajectory tr = sample_trajectory(hi.mdp, d.pi, rng);
        const LossTable l = draw(hi.spec, env);
        for (Step& st : tr.steps) st.loss = l(st.state, st.action);
        w.add(GlobalOpt::estimate(d.q, tr, m).values());
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < w.mean.size(); ++i)
        worst = std::max(worst, std::abs(w.mean[i] - mo.mu.values()[i]) / w.se(i));
    out.require(worst <= 3.0, "ell_hat max |z| " + fmt(worst));

    // Policy learner, frozen after a warm-up.
    PolicyOpt p(hi.mdp, T);
    for (int t = 0; t < 300; ++t) p.step(rng, table_observer(draw(hi.spec, env)));
    const PolicyDecision dec = p.optimize_policy();
    const OccupancyMeasure qpi = occupancy(hi.mdp, dec.pi);
    const auto qx = p.exploration_mass(qpi);
    const bool Y = p.check_virtual(qx);
    out.require(Y, "frozen episode is real");
    const double gamma = p.gamma();
    const double H = 3.0;
    LossTable diff = mo.mu;
    for (std::size_t i = 0; i < diff.values().size(); ++i) diff.values()[i] -= p.prediction().values()[i];
    const LossTable Q_diff = value_functions(hi.mdp, dec.pi, diff).q;
    const LossTable Q_mu = value_functions(hi.mdp, dec.pi, mo.mu).q;

    Welford wq(7 * kA);
    for (std::size_t k = 0; k < n; ++k) {
        Trajectory tr = sample_trajectory(hi.mdp, dec.pi, rng);
        const LossTable l = draw(hi.spec, env);
        for (Step& st : tr.steps) st.loss = l(st.state, st.action);
        wq.add(p.q_estimate(dec, qx, tr, true).values());
    }
    double zq = 0.0, below = -1e300, above = -1e300;
    for (StateId s = 0; s < 7; ++s)
        for (ActionId a = 0; a < kA; ++a) {
            const std::size_t i = s * kA + a;
            const double expect = dec.q_pred(s, a) + qpi.state_mass(s) / qx[s] * Q_diff(s, a) * (Y ? 1.0 : 0.0) -
                                  gamma * H / qx[s];
            zq = std::max(zq, std::abs(wq.mean[i] - expect) / wq.se(i));
            const double gap = Q_mu(s, a) - wq.mean[i];
            below = std::max(below, -gap / wq.se(i));
            above = std::max(above, (gap - 2.0 * gamma * H / qx[s]) / wq.se(i));
        }
    out.require(zq <= 3.0, "Q_hat identity max |z| " + fmt(zq));
    out.require(below <= 3.0 && above <= 3.0,
                "optimism window excess (SE units) low " + fmt(below) + " high " + fmt(above));
    return out;
}

// ---------------------------------------------------------------------------
// P4

struct P4Env {
    std::string name;
    LayeredMdp mdp;
    std::function<LossTable(Rng&)> draw;
};

std::vector<P4Env> p4_envs() {
    std::vector<P4Env> envs;
    const HardInstance hi = desk_hard(0.5, 0.1, 7);
    envs.push_back({"hard", hi.mdp, [spec = hi.spec](Rng& r) { return draw(spec, r); }});
    Rng rng(404);
    const LayeredMdp random = random_layered_mdp(kWide, kA, rng);
    envs.push_back({"random", random, [](Rng& r) { return fixture::random_loss(7, kA, r); }});
    return envs;
}

void p4_global(Outcome& out, const P4Env& e, std::size_t T) {
    GlobalOpt g(e.mdp, T);
    const double H = static_cast<double>(e.mdp.horizon());
    const double lnT = std::log(static_cast<double>(T));
    const std::size_t S = e.mdp.num_states();
    Rng env(1), rng(2), side(3);
    LossTable shifted(S, kA, 0.0);
    double identity = 0.0, equiv = 0.0, rate_ratio = 0.0, zeta_lo = 0.0, zeta_hi = 0.0, lower = 0.0;
    for (std::size_t t = 1; t <= T; ++t) {
        const auto st = g.step(rng, table_observer(e.draw(env)));
        const double v0 = value_functions(e.mdp, st.pi, st.ell_tilde).v[0];
        const Policy other = oracle::random_policy(S, kA, side);
        identity = std::max({identity, std::abs(inner(st.q, st.shift) + v0),
                             std::abs(inner(occupancy(e.mdp, other), st.shift) + v0)});
        for (std::size_t i = 0; i < st.zeta.values().size(); ++i) {
            const double z = st.zeta.values()[i];
            zeta_lo = std::min(zeta_lo, z);
            zeta_hi = std::max(zeta_hi, z);
            rate_ratio = std::max(rate_ratio, st.eta.values()[i] *
                                                  std::sqrt(2.0 * H * H * lnT + g.zeta_sum().values()[i]) /
                                                  std::sqrt(lnT));
            lower = std::max(lower, -H / st.q.values()[i] -
                                        (st.ell_hat.values()[i] + st.shift.values()[i] - st.m.values()[i]));
            shifted.values()[i] += st.ell_hat.values()[i] + st.shift.values()[i];
        }
        LossTable L = shifted;
        for (std::size_t i = 0; i < L.values().size(); ++i) L.values()[i] += g.prediction().values()[i];
        const auto alt = solve_occupancy({e.mdp, L, g.eta()});
        equiv = std::max(equiv, fixture::max_diff(alt.q, g.act().q));
    }
    const std::string tag = "GO/" + e.name + ": ";
    out.require(identity <= 1e-8, tag + "shift identity " + fmt(identity));
    out.require(equiv <= 1e-6, tag + "shift equivalence " + fmt(equiv));
    out.require(rate_ratio <= 1.0 + 1e-12, tag + "rate bound ratio " + fmt(rate_ratio));
    out.require(zeta_lo >= 0.0 && zeta_hi <= 1.0 + 1e-9, tag + "zeta in [" + fmt(zeta_lo) + ", " + fmt(zeta_hi) + "]");
    out.require(lower <= 1e-9, tag + "estimator lower bound excess " + fmt(lower));
}

void p4_policy(Outcome& out, const P4Env& e, std::size_t T) {
    PolicyOpt p(e.mdp, T);
    const double H = static_cast<double>(e.mdp.horizon());
    const double S = static_cast<double>(e.mdp.num_states());
    const double lnT = std::log(static_cast<double>(T));
    Rng env(1), rng(2);
    double rate_ratio = 0.0, etaB = 0.0, Bratio = 0.0, recursion = 0.0, zeta_lo = 0.0, zeta_hi = 0.0;
    while (!p.finished()) {
        const auto st = p.step(rng, table_observer(e.draw(env)));
        for (StateId s = 0; s < e.mdp.num_states(); ++s)
            for (ActionId a = 0; a < kA; ++a) {
                const double z = st.zeta(s, a);
                zeta_lo = std::min(zeta_lo, z);
                zeta_hi = std::max(zeta_hi, z);
                const double zs = p.scaled_zeta_sum()(s, a);
                if (zs > 0.0) rate_ratio = std::max(rate_ratio, st.eta_before(s, a) * std::sqrt(zs) / (2.0 * std::sqrt(lnT)));
                etaB = std::max(etaB, st.eta_before(s, a) * st.pi(s, a) * st.bonus.dilated(s, a) * 6.0 * H);
                Bratio = std::max(Bratio, st.bonus.dilated(s, a) / (std::sqrt(H * S) / st.gamma + 15.0 * H * H));
                double next = 0.0;
                for (StateId n2 = 0; n2 < e.mdp.num_states(); ++n2) {
                    const double pr = e.mdp.transition(s, a, n2);
                    if (pr == 0.0) continue;
                    for (ActionId b = 0; b < kA; ++b) next += pr * st.pi(n2, b) * st.bonus.dilated(n2, b);
                }
                recursion = std::max(recursion, std::abs(st.bonus.dilated(s, a) - st.bonus.local[s] - (1.0 + 1.0 / H) * next));
            }
    }
    const std::string tag = "PO/" + e.name + ": ";
    out.require(rate_ratio <= 1.0 + 1e-12, tag + "rate bound ratio " + fmt(rate_ratio));
    out.require(etaB <= 1.0 + 1e-12, tag + "6H eta pi B " + fmt(etaB));
    out.require(Bratio <= 1.0 + 1e-12, tag + "B bound ratio " + fmt(Bratio));
    out.require(recursion <= 1e-10, tag + "recursion residual " + fmt(recursion));
    out.require(zeta_lo >= 0.0 && zeta_hi <= H * H + 1e-12, tag + "zeta in [" + fmt(zeta_lo) + ", " + fmt(zeta_hi) + "]");
    out.require(static_cast<double>(p.virtual_count()) <= p.virtual_cap(),
                tag + "virtual " + std::to_string(p.virtual_count()) + " <= cap " + fmt(p.virtual_cap()));
}

Outcome p4() {
    Outcome out;
    const std::size_t T = 10000;
    for (const P4Env& e : p4_envs()) {
        p4_global(out, e, T);
        p4_policy(out, e, T);
    }
    return out;
}

// ---------------------------------------------------------------------------
// P5

Outcome p5() {
    Outcome out;
    const std::vector<double> Ts{1e3, 3e3, 1e4, 3e4, 1e5};
    std::vector<double> finals[2];
    const char* learners[2] = {"global-opt", "policy-opt"};
    for (int k = 0; k < 2; ++k) {
        for (double T : Ts) {
            std::string err;
            const auto curve = mean_curve(base_config(hard_env(0.5, 0.1), learners[k], "gd", static_cast<std::size_t>(T)),
                                          Series::Mustar, err);
            if (!err.empty()) {
                out.require(false, std::string(learners[k]) + " failed: " + err);
                return out;
            }
            finals[k].push_back(curve.back());
        }
        std::string series;
        for (double r : finals[k]) series += fmt(r) + " ";
        const double slope = oracle::loglog_slope(Ts, finals[k]);
        out.require(slope >= 0.35 && slope <= 0.65,
                    learner_tag(learners[k], "gd") + " slope " + fmt(slope) + " (regret " + series + ")");
    }
    const double ratio = finals[1].back() / finals[0].back();
    out.require(ratio <= 5.0, "PO/GO final ratio " + fmt(ratio));
    return out;
}

// ---------------------------------------------------------------------------
// P6

std::vector<double> log_points(std::size_t lo, std::size_t hi, std::size_t n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(std::round(static_cast<double>(lo) *
                                 std::pow(static_cast<double>(hi) / static_cast<double>(lo),
                                          static_cast<double>(i) / static_cast<double>(n - 1))));
    return out;
}

Outcome p6() {
    Outcome out;
    const std::size_t T = 50000;
    const auto ts = log_points(1000, T, 20);
    for (const char* learner : {"global-opt", "policy-opt"})
        for (const char* pred : {"gd", "em"}) {
            std::string err;
            const auto curve = mean_curve(base_config(hard_env(0.3, 0.2), learner, pred, T), Series::Pseudo, err);
            const std::string tag = learner_tag(learner, pred);
            if (!err.empty()) {
                out.require(false, tag + " failed: " + err);
                continue;
            }
            const std::size_t dec = T / 10;
            const double first = curve[dec - 1] / static_cast<double>(dec);
            const double last = (curve[T - 1] - curve[T - 1 - dec]) / static_cast<double>(dec);
            std::vector<double> ys;
            for (double t : ts) ys.push_back(curve[static_cast<std::size_t>(t) - 1]);
            const double slope = oracle::loglog_slope(ts, ys);
            out.require(last <= 0.25 * first, tag + " decile ratio " + fmt(last / first));
            out.require(slope <= 0.35, tag + " slope " + fmt(slope));
        }
    return out;
}

// ---------------------------------------------------------------------------
// P7

Outcome p7() {
    Outcome out;
    const std::size_t T = 50000;
    for (const char* learner : {"global-opt", "policy-opt"}) {
        std::string err;
        const auto high = mean_curve(base_config(hard_env(0.5, 0.05, 1.0), learner, "em", T), Series::Pseudo, err);
        const auto low = mean_curve(base_config(hard_env(0.5, 0.05, 16.0), learner, "em", T), Series::Pseudo, err);
        const std::string tag = learner_tag(learner, "em");
        if (!err.empty()) {
            out.require(false, tag + " failed: " + err);
            continue;
        }
        const double ratio = low.back() / high.back();
        out.require(ratio <= 0.7, tag + " low/high " + fmt(ratio) + " (" + fmt(low.back()) + " / " + fmt(high.back()) + ")");
    }
    return out;
}

// ---------------------------------------------------------------------------
// P8

Outcome p8() {
    Outcome out;
    const std::size_t T = 20000;
    for (const char* learner : {"global-opt", "policy-opt"}) {
        std::vector<double> R;
        std::string err;
        for (double frac : {0.0, 0.01, 0.05}) {
            json env = hard_env(0.5, 0.05);
            if (frac > 0.0) env["corruption"] = {{"type", "prefix_flip"}, {"budget_fraction", frac}};
            const auto curve = mean_curve(base_config(env, learner, "gd", T), Series::Pseudo, err);
            if (!err.empty()) break;
            R.push_back(curve.back());
        }
        const std::string tag = learner_tag(learner, "gd");
        if (!err.empty()) {
            out.require(false, tag + " failed: " + err);
            continue;
        }
        const bool monotone = R[0] <= R[1] && R[1] <= R[2];
        const bool concave = R[2] - R[0] <= 5.0 * (R[1] - R[0]);
        out.require(monotone && concave,
                    tag + " R(0, .01, .05 HT) = " + fmt(R[0]) + ", " + fmt(R[1]) + ", " + fmt(R[2]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// P9

Outcome p9() {
    Outcome out;
    const std::size_t T = 20000;
    const std::size_t stride = 7919;
    json slow{{"mdp", {{"type", "hard"}, {"H", 3}, {"width", 3}, {"A", 3}}},
              {"losses",
               {{"type", "sine_drift"},
                {"base", {{"good", 0.49}, {"bad", 0.51}, {"pin_seed", 5}}},
                {"amplitude", 0.4},
                {"period", 10000},
                {"phase", "shared"}}}};
    json fast = slow;
    fast["losses"]["stride"] = stride;
    {
        const ExperimentConfig a = parse_config(base_config(slow, "global-opt", "gd", T));
        const ExperimentConfig b = parse_config(base_config(fast, "global-opt", "gd", T));
        const MeasureReport ma = measures_only(a, 1), mb = measures_only(b, 1);
        out.require(std::abs(ma.L_star - mb.L_star) <= 1e-6 * ma.L_star,
                    "matched L* " + fmt(ma.L_star) + " / " + fmt(mb.L_star) + ", V1 " + fmt(ma.V1) + " vs " + fmt(mb.V1));
    }
    for (const char* learner : {"global-opt", "policy-opt"}) {
        std::string err;
        const auto rs = mean_curve(base_config(slow, learner, "gd", T), Series::Hindsight, err);
        const auto rf = mean_curve(base_config(fast, learner, "gd", T), Series::Hindsight, err);
        const std::string tag = learner_tag(learner, "gd");
        if (!err.empty()) {
            out.require(false, tag + " failed: " + err);
            continue;
        }
        const double ratio = rs.back() / rf.back();
        out.require(ratio <= 0.8, tag + " slow/fast " + fmt(ratio) + " (" + fmt(rs.back()) + " / " + fmt(rf.back()) + ")");
    }
    return out;
}

// ---------------------------------------------------------------------------
// P10

Outcome p10() {
    Outcome out;
    Rng rng(1010);
    double worst = 0.0;
    for (int rep = 0; rep < 30; ++rep) {
        const std::vector<std::size_t> sizes = rep % 2 ? std::vector<std::size_t>{1, 2, 2} : std::vector<std::size_t>{1, 3, 2};
        const LayeredMdp mdp = rep % 3 ? random_layered_mdp(sizes, kA, rng) : fixture::sparse_random(sizes, kA, rng);
        const std::size_t S = mdp.num_states();
        LossTable sig = fixture::random_loss(S, kA, rng);
        for (double& x : sig.values()) x *= 0.25;
        const LossTable mu = fixture::random_loss(S, kA, rng);
        worst = std::max(worst, std::abs(occupancy_weighted_variance(mdp, sig) - oracle::max_weighted(mdp, sig)));
        const auto vc = conditional_variance(mdp, sig);
        const auto vo = oracle::conditional_max(mdp, sig);
        for (StateId s = 0; s < S; ++s) worst = std::max(worst, std::abs(vc[s] - vo[s]));
        worst = std::max(worst, fixture::max_diff(suboptimality_gaps(mdp, mu), oracle::gaps(mdp, mu)));
        std::vector<LossTable> seq;
        LossTable sum(S, kA, 0.0);
        for (int t = 0; t < 6; ++t) {
            seq.push_back(fixture::random_loss(S, kA, rng));
            for (std::size_t i = 0; i < sum.values().size(); ++i) sum.values()[i] += seq.back().values()[i];
        }
        worst = std::max(worst, std::abs(first_order(mdp, seq) - oracle::best_value(mdp, sum)));
    }
    out.require(worst <= 1e-12, "V, V^c, Delta, L* max deviation " + fmt(worst));

    // Q_inf on layers of two coordinates: a one-step MDP and a two-layer chain.
    double q_err = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
        const bool chain = rep % 2 == 1;
        const LayeredMdp mdp = chain ? fixture::from_rows({1, 1}, 2, {{{0, 1}, {0, 1}}, {{0, 0}, {0, 0}}})
                                     : fixture::from_rows({1}, 2, {{{0}, {0}}});
        std::vector<LossTable> seq;
        for (int t = 0; t < 8; ++t) seq.push_back(fixture::random_loss(mdp.num_states(), 2, rng));
        double grid = 0.0;
        for (StateId s = 0; s < mdp.num_states(); ++s) {
            std::vector<std::vector<double>> rows;
            for (const LossTable& l : seq) rows.push_back({l(s, 0), l(s, 1)});
            grid += oracle::grid_min(rows, std::vector<double>(rows.size(), 1.0));
        }
        q_err = std::max(q_err, std::abs(second_order(mdp, seq).opt - grid));
    }
    out.require(q_err <= 1e-3, "Q_inf vs grid " + fmt(q_err));

    // Truncated hard instance.
    const std::size_t T = 4000;
    const double H = 3.0, SA = 21.0;
    std::vector<double> v1, qinf;
    for (double rho : {1.0, 0.5, 0.25}) {
        json j = base_config(hard_env(0.5, 0.1), "global-opt", "gd", T);
        j["environment"]["truncate_rho"] = rho;
        j["measures"] = {{"q_inf_iterations", 2000}};
        const MeasureReport r = measures_only(parse_config(j), 1);
        const double HT = H * static_cast<double>(T);
        out.require(r.L_star <= rho * HT + 1e-9 && r.Q_inf.opt <= rho * HT + 1e-9 &&
                        r.V1 <= rho * SA * static_cast<double>(T) + 1e-9,
                    "rho " + fmt(rho) + ": L*/HT " + fmt(r.L_star / HT) + ", Q_inf/HT " + fmt(r.Q_inf.opt / HT) +
                        ", V1/SAT " + fmt(r.V1 / (SA * static_cast<double>(T))));
        v1.push_back(r.V1);
        qinf.push_back(r.Q_inf.opt);
    }
    out.require(std::abs(v1[1] / v1[0] - 0.5) <= 0.02 && std::abs(v1[2] / v1[0] - 0.25) <= 0.02,
                "V1 ratios " + fmt(v1[1] / v1[0]) + ", " + fmt(v1[2] / v1[0]));
    out.require(qinf[1] <= qinf[0] * (1.0 + 1e-3) && qinf[2] < qinf[1],
                "Q_inf " + fmt(qinf[0]) + ", " + fmt(qinf[1]) + ", " + fmt(qinf[2]) + " non-increasing in rho");
    return out;
}

struct Criterion {
    const char* id;
    const char* title;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"P1", "DP oracle equivalence", p1},
    {"P2", "solver optimality", p2},
    {"P3", "estimator laws", p3},
    {"P4", "live-run invariants", p4},
    {"P5", "adversarial scaling", p5},
    {"P6", "stochastic log-regret", p6},
    {"P7", "variance adaptivity", p7},
    {"P8", "graceful corruption", p8},
    {"P9", "path-length adaptivity", p9},
    {"P10", "complexity measures", p10},
};

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> only(argv + 1, argv + argc);
    int failed = 0;
    for (const Criterion& c : kCriteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string detail;
        for (const std::string& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
        std::cout << c.id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << c.title << " [" << fmt(secs) << "s]  "
                  << detail << std::endl;
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
