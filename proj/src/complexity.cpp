#include "bobw/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace bobw {

using nlohmann::json;

double first_order(const LayeredMdp& mdp, std::span<const LossTable> losses) {
    if (losses.empty()) throw std::invalid_argument("first_order: empty loss sequence");
    LossTable sum(mdp.num_states(), mdp.num_actions(), 0.0);
    for (const LossTable& l : losses) {
        auto sv = sum.values();
        const auto lv = l.values();
        for (std::size_t i = 0; i < sv.size(); ++i) sv[i] += lv[i];
    }
    return best_deterministic_policy(mdp, sum).value;
}

double second_order_layer_value(std::span<const std::vector<double>> rows,
                                std::span<const double> weights, std::span<const double> c) {
    double f = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) {
        double sup = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) sup = std::max(sup, std::abs(rows[j][i] - c[i]));
        f += weights[j] * sup * sup;
    }
    return f;
}

namespace {

SecondOrder minimise_layer(const std::vector<std::vector<double>>& rows,
                           const std::vector<double>& weights, std::size_t iterations) {
    const std::size_t n = rows.front().size();
    std::vector<double> lo(n, 1.0), hi(n, 0.0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = std::min(lo[i], r[i]);
            hi[i] = std::max(hi[i], r[i]);
        }
    std::vector<double> c(n);
    double diam = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = 0.5 * (lo[i] + hi[i]);
        diam += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    }
    diam = std::sqrt(diam);

    SecondOrder out;
    out.upper = second_order_layer_value(rows, weights, c);
    out.opt = out.upper;

    // Projected subgradient, normalised direction, step 0.05 diam / sqrt(k); the box is [lo, hi]
    // since clamping any coordinate into the data range never increases a row's sup.
    std::vector<double> g(n);
    for (std::size_t k = 1; k <= iterations; ++k) {
        std::fill(g.begin(), g.end(), 0.0);
        double f = 0.0;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            std::size_t arg = 0;
            double sup = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = std::abs(rows[j][i] - c[i]);
                if (d > sup) {
                    sup = d;
                    arg = i;
                }
            }
            f += weights[j] * sup * sup;
            g[arg] += 2.0 * weights[j] * (c[arg] - rows[j][arg]);
        }
        out.opt = std::min(out.opt, f);
        double norm = 0.0;
        for (double x : g) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        const double step = 0.05 * diam / std::sqrt(static_cast<double>(k));
        for (std::size_t i = 0; i < n; ++i) c[i] = std::clamp(c[i] - step * g[i] / norm, lo[i], hi[i]);
    }
    out.opt = std::min(out.opt, second_order_layer_value(rows, weights, c));
    return out;
}

}  // namespace

SecondOrder second_order(const LayeredMdp& mdp, std::span<const LossTable> losses,
                         SecondOrderOptions options) {
    if (losses.empty()) throw std::invalid_argument("second_order: empty loss sequence");
    const std::size_t A = mdp.num_actions();
    SecondOrder total;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        const StateId b = mdp.layer_begin(h);
        const std::size_t n = mdp.layer_size(h) * A;
        std::map<std::vector<double>, double> merged;
        for (const LossTable& l : losses) {
            std::vector<double> row(l.values().begin() + static_cast<std::ptrdiff_t>(b * A),
                                    l.values().begin() + static_cast<std::ptrdiff_t>(b * A + n));
            merged[std::move(row)] += 1.0;
        }
        std::vector<std::vector<double>> rows;
        std::vector<double> weights;
        for (auto& [r, w] : merged) {
            rows.push_back(r);
            weights.push_back(w);
        }
        const SecondOrder layer = minimise_layer(rows, weights, options.iterations);
        total.opt += layer.opt;
        total.upper += layer.upper;
    }
    return total;
}

double path_length(std::span<const LossTable> losses) {
    double total = 0.0;
    for (std::size_t t = 1; t < losses.size(); ++t) {
        const auto a = losses[t].values();
        const auto b = losses[t - 1].values();
        for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    }
    return total;
}

namespace {

/// W(s,a) = sigma_sq(s,a) + sum_{s'} P(s'|s,a) max_{a'} W(s',a')
LossTable greedy_max_table(const LayeredMdp& mdp, const SATable& sigma_sq) {
    const std::size_t A = mdp.num_actions();
    LossTable W(mdp.num_states(), A, 0.0);
    std::vector<double> best(mdp.num_states(), 0.0);
    for (std::size_t h = mdp.horizon(); h-- > 0;) {
        for (StateId s = mdp.layer_begin(h); s < mdp.layer_end(h); ++s) {
            double m = -std::numeric_limits<double>::infinity();
            for (ActionId a = 0; a < A; ++a) {
                double next = 0.0;
                if (h + 1 < mdp.horizon())
                    for (StateId n = mdp.layer_begin(h + 1); n < mdp.layer_end(h + 1); ++n)
                        next += mdp.transition(s, a, n) * best[n];
                W(s, a) = sigma_sq(s, a) + next;
                m = std::max(m, W(s, a));
            }
            best[s] = m;
        }
    }
    return W;
}

}  // namespace

double occupancy_weighted_variance(const LayeredMdp& mdp, const SATable& sigma_sq) {
    const LossTable W = greedy_max_table(mdp, sigma_sq);
    const auto row = W.row(mdp.initial_state());
    return *std::max_element(row.begin(), row.end());
}

std::vector<double> conditional_variance(const LayeredMdp& mdp, const SATable& sigma_sq) {
    const LossTable W = greedy_max_table(mdp, sigma_sq);
    std::vector<double> out(mdp.num_states());
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        const auto row = W.row(s);
        out[s] = *std::max_element(row.begin(), row.end());
    }
    return out;
}

MeasureAccumulator::MeasureAccumulator(const LayeredMdp& mdp)
    : sum_(mdp.num_states(), mdp.num_actions(), 0.0) {}

void MeasureAccumulator::add(const LossTable& ell, double corruption_increment) {
    if (!losses_.empty()) {
        const auto a = ell.values();
        const auto b = losses_.back().values();
        for (std::size_t i = 0; i < a.size(); ++i) path_ += std::abs(a[i] - b[i]);
    }
    auto sv = sum_.values();
    const auto lv = ell.values();
    for (std::size_t i = 0; i < sv.size(); ++i) sv[i] += lv[i];
    losses_.push_back(ell);
    corruption_ += corruption_increment;
}

MeasureReport measure_report(const LayeredMdp& mdp, const MeasureAccumulator& acc,
                             const LossTable* mu, const LossTable* sigma_sq,
                             SecondOrderOptions options) {
    if (acc.episodes() == 0) throw std::invalid_argument("measure_report: no episodes recorded");
    MeasureReport r;
    r.T = acc.episodes();
    r.H = mdp.horizon();
    r.L_star = best_deterministic_policy(mdp, acc.sum()).value;
    r.Q_inf = second_order(mdp, acc.losses(), options);
    r.V1 = acc.path_length();
    r.C_realized = acc.corruption();
    if (sigma_sq != nullptr) {
        r.V_occ = occupancy_weighted_variance(mdp, *sigma_sq);
        r.V_cond = conditional_variance(mdp, *sigma_sq);
    }
    if (mu != nullptr) r.gaps = suboptimality_gaps(mdp, *mu);
    return r;
}

std::vector<std::string> check_report_ranges(const MeasureReport& r, double tol) {
    std::vector<std::string> bad;
    const double HT = static_cast<double>(r.H) * static_cast<double>(r.T);
    const double quarterH = static_cast<double>(r.H) / 4.0;
    if (r.L_star < -tol || r.L_star > HT + tol) bad.push_back("L_star outside [0, HT]");
    if (r.Q_inf.opt < -tol || r.Q_inf.opt > HT / 4.0 + tol) bad.push_back("Q_inf outside [0, HT/4]");
    if (r.Q_inf.opt > r.Q_inf.upper + tol) bad.push_back("Q_inf optimum above its upper bound");
    if (r.V1 < -tol) bad.push_back("V1 negative");
    if (r.C_realized < -tol || r.C_realized > HT + tol) bad.push_back("C outside [0, HT]");
    if (r.V_occ && (*r.V_occ < -tol || *r.V_occ > quarterH + tol))
        bad.push_back("V outside [0, H/4]");
    if (r.V_cond)
        for (double v : *r.V_cond)
            if (v < -tol || v > quarterH + tol) {
                bad.push_back("V_cond entry outside [0, H/4]");
                break;
            }
    return bad;
}

namespace {

json table_json(const SATable& t) {
    json rows = json::array();
    for (StateId s = 0; s < t.num_states(); ++s) {
        const auto r = t.row(s);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

}  // namespace

json to_json(const MeasureReport& r) {
    json j;
    j["T"] = r.T;
    j["H"] = r.H;
    j["L_star"] = r.L_star;
    j["Q_inf"] = {{"opt", r.Q_inf.opt}, {"upper", r.Q_inf.upper}};
    j["V1"] = r.V1;
    j["V_occ"] = r.V_occ ? json(*r.V_occ) : json(nullptr);
    j["V_cond"] = r.V_cond ? json(*r.V_cond) : json(nullptr);
    j["gaps"] = r.gaps ? table_json(*r.gaps) : json(nullptr);
    j["C_realized"] = r.C_realized;
    return j;
}

MeasureReport report_from_json(const json& j) {
    MeasureReport r;
    r.T = j.at("T").get<std::size_t>();
    r.H = j.at("H").get<std::size_t>();
    r.L_star = j.at("L_star").get<double>();
    r.Q_inf.opt = j.at("Q_inf").at("opt").get<double>();
    r.Q_inf.upper = j.at("Q_inf").at("upper").get<double>();
    r.V1 = j.at("V1").get<double>();
    if (!j.at("V_occ").is_null()) r.V_occ = j.at("V_occ").get<double>();
    if (!j.at("V_cond").is_null()) r.V_cond = j.at("V_cond").get<std::vector<double>>();
    if (!j.at("gaps").is_null()) {
        const auto rows = j.at("gaps").get<std::vector<std::vector<double>>>();
        LossTable g(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (StateId s = 0; s < rows.size(); ++s)
            for (ActionId a = 0; a < rows[s].size(); ++a) g(s, a) = rows[s][a];
        r.gaps = g;
    }
    r.C_realized = j.at("C_realized").get<double>();
    return r;
}

json theoretical_overlays(const LayeredMdp& mdp, std::size_t T, const MeasureReport& report,
                          LearnerFamily family, std::span<const std::size_t> prefixes) {
    const double H = static_cast<double>(mdp.horizon());
    const double S = static_cast<double>(mdp.num_states());
    const double A = static_cast<double>(mdp.num_actions());
    const double lnT = std::log(static_cast<double>(T));
    const bool policy = family == LearnerFamily::Policy;
    const double scale = policy ? H * H * S * A * lnT * lnT : S * A * lnT;
    const double additive = policy ? H * H * S * S * A * lnT * lnT : H * S * A * lnT;
    const double gap_log = policy ? lnT * lnT : lnT;

    std::optional<double> U;
    if (report.gaps) {
        const double floor = 1e-12;
        double u = 0.0;
        for (StateId s = 0; s < mdp.num_states(); ++s)
            for (ActionId a = 0; a < mdp.num_actions(); ++a) {
                const double d = (*report.gaps)(s, a);
                if (d > floor) u += H * H * gap_log / d;
            }
        U = u;
    }

    json t_axis = json::array(), add = json::array(), first = json::array(), reverse = json::array(),
         second = json::array(), path = json::array(), best = json::array(), var = json::array(),
         gap = json::array();
    const double Td = static_cast<double>(T);
    for (std::size_t t : prefixes) {
        const double frac = static_cast<double>(t) / Td;
        const double Ls = report.L_star * frac;
        const double rev = std::max(0.0, H * static_cast<double>(t) - Ls);
        const double Q = report.Q_inf.opt * frac;
        const double V1 = report.V1 * frac;
        const double C = report.C_realized * frac;
        t_axis.push_back(t);
        add.push_back(additive);
        first.push_back(std::sqrt(scale * Ls));
        reverse.push_back(std::sqrt(scale * rev));
        second.push_back(std::sqrt(scale * Q));
        path.push_back(std::sqrt(scale * V1));
        best.push_back(std::sqrt(scale * std::min({Ls, rev, Q, V1})));
        if (report.V_occ) var.push_back(std::sqrt(scale * (*report.V_occ * static_cast<double>(t) + C)));
        if (U) gap.push_back(*U + std::sqrt(*U * C));
    }
    json out;
    out["note"] = "leading terms only, up to constants";
    out["family"] = policy ? "policy" : "global";
    out["T"] = T;
    out["log_T"] = lnT;
    out["t"] = t_axis;
    out["additive"] = add;
    json curves;
    curves["first_order"] = first;
    curves["reverse_first_order"] = reverse;
    curves["second_order"] = second;
    curves["path_length"] = path;
    curves["data_dependent_min"] = best;
    curves["variance"] = report.V_occ ? var : json(nullptr);
    curves["gap_dependent"] = U ? gap : json(nullptr);
    out["curves"] = curves;
    return out;
}

}  // namespace bobw
