#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "bobw/mdp.hpp"

namespace fixture {

using bobw::LayeredMdp;
using bobw::LossTable;
using bobw::Rng;

/// Builds an MDP from explicit rows; rows[s][a] lists P(.|s,a) over all states.
inline LayeredMdp from_rows(std::vector<std::size_t> sizes, std::size_t A,
                            const std::vector<std::vector<std::vector<double>>>& rows) {
    std::size_t S = 0;
    for (auto w : sizes) S += w;
    std::vector<double> P(S * A * S, 0.0);
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (std::size_t a = 0; a < A; ++a)
            for (std::size_t n = 0; n < S; ++n) P[(s * A + a) * S + n] = rows[s][a][n];
    return LayeredMdp(std::move(sizes), A, std::move(P));
}

/// Random kernel where each row puts mass on a random nonempty subset of the next layer.
inline LayeredMdp sparse_random(const std::vector<std::size_t>& sizes, std::size_t A, Rng& rng) {
    std::size_t S = 0;
    for (auto w : sizes) S += w;
    std::vector<std::size_t> begin(sizes.size() + 1, 0);
    for (std::size_t h = 0; h < sizes.size(); ++h) begin[h + 1] = begin[h] + sizes[h];
    std::vector<double> P(S * A * S, 0.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t h = 0; h + 1 < sizes.size(); ++h)
        for (std::size_t s = begin[h]; s < begin[h + 1]; ++s)
            for (std::size_t a = 0; a < A; ++a) {
                std::vector<double> w(sizes[h + 1], 0.0);
                double sum = 0.0;
                for (double& x : w) {
                    if (u(rng) < 0.6) x = u(rng) + 0.05;
                    sum += x;
                }
                if (sum == 0.0) {
                    w[rng() % w.size()] = 1.0;
                    sum = 1.0;
                }
                for (std::size_t i = 0; i < w.size(); ++i)
                    P[(s * A + a) * S + begin[h + 1] + i] = w[i] / sum;
            }
    return LayeredMdp(sizes, A, std::move(P));
}

inline LossTable random_loss(std::size_t S, std::size_t A, Rng& rng) {
    LossTable l(S, A, 0.0);
    for (double& x : l.values()) x = bobw::uniform01(rng);
    return l;
}

inline double max_diff(const bobw::SATable& x, const bobw::SATable& y) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.values().size(); ++i)
        d = std::max(d, std::abs(x.values()[i] - y.values()[i]));
    return d;
}

}  // namespace fixture
