#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "bobw/mdp.hpp"

namespace bobw {

/// Cumulative loss of the best fixed policy in hindsight.
double first_order(const LayeredMdp& mdp, std::span<const LossTable> losses);

struct SecondOrder {
    double opt = 0.0;    ///< best value found by the subgradient method
    double upper = 0.0;  ///< value at the coordinatewise midrange baseline
};

struct SecondOrderOptions {
    /// Subgradient iterations per layer; 0 skips the search and reports the midrange value.
    std::size_t iterations = 10000;
};

/// Per layer, minimises sum_t (max_{(s,a) in layer} |l_t(s,a) - c(s,a)|)^2 over c in [0,1]^n,
/// then sums over layers. Identical loss rows are merged before the search.
SecondOrder second_order(const LayeredMdp& mdp, std::span<const LossTable> losses,
                         SecondOrderOptions options = {});

/// One layer's objective for a given baseline; exposed for tests.
double second_order_layer_value(std::span<const std::vector<double>> rows,
                                std::span<const double> weights, std::span<const double> c);

/// sum_t ||l_{t+1} - l_t||_1
double path_length(std::span<const LossTable> losses);

/// max over policies of <q^pi, sigma_sq>.
double occupancy_weighted_variance(const LayeredMdp& mdp, const SATable& sigma_sq);

/// max over first action and continuation of the conditional-occupancy-weighted variance, per state.
std::vector<double> conditional_variance(const LayeredMdp& mdp, const SATable& sigma_sq);

/// Incremental accumulator so a harness run need not keep every table twice.
class MeasureAccumulator {
public:
    explicit MeasureAccumulator(const LayeredMdp& mdp);
    void add(const LossTable& ell, double corruption_increment);
    std::size_t episodes() const { return losses_.size(); }
    std::span<const LossTable> losses() const { return losses_; }
    const LossTable& sum() const { return sum_; }
    double path_length() const { return path_; }
    double corruption() const { return corruption_; }

private:
    LossTable sum_;
    std::vector<LossTable> losses_;
    double path_ = 0.0;
    double corruption_ = 0.0;
};

struct MeasureReport {
    std::size_t T = 0;
    std::size_t H = 0;
    double L_star = 0.0;
    SecondOrder Q_inf;
    double V1 = 0.0;
    std::optional<double> V_occ;
    std::optional<std::vector<double>> V_cond;
    std::optional<LossTable> gaps;
    double C_realized = 0.0;
};

/// L*, Q_inf, V1 and C from the realized sequence; V, V^c and gaps when sigma_sq and mu are given.
MeasureReport measure_report(const LayeredMdp& mdp, const MeasureAccumulator& acc,
                             const LossTable* mu, const LossTable* sigma_sq,
                             SecondOrderOptions options = {});

/// Lists range violations; empty when every field is inside its admissible range.
std::vector<std::string> check_report_ranges(const MeasureReport& report, double tol = 1e-9);

nlohmann::json to_json(const MeasureReport& report);
MeasureReport report_from_json(const nlohmann::json& j);

enum class LearnerFamily { Global, Policy };

/**
 * Leading terms of the regret bounds at prefixes of the horizon, without constants.
 * Extensive measures are prorated by t/T; ln T uses the full horizon. The policy
 * family carries an extra H^2 ln T inside the square roots.
 */
nlohmann::json theoretical_overlays(const LayeredMdp& mdp, std::size_t T,
                                    const MeasureReport& report, LearnerFamily family,
                                    std::span<const std::size_t> prefixes);

}  // namespace bobw
