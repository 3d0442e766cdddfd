#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "mixsing/kernels.hpp"
#include "mixsing/mixing.hpp"

namespace mixsing::testing {

// Central-difference oracle for d^alpha f / d eta^alpha, fully independent of
// the analytic derivative code path (nested first differences on density()).
inline double fd_partial(const ParamVec& eta, double x, const DerivIndex& alpha, double h = 5e-3) {
    DerivIndex a = alpha;
    for (int c = 0; c < 3; ++c) {
        if (a[static_cast<std::size_t>(c)] > 0) {
            --a[static_cast<std::size_t>(c)];
            auto shifted = [&](double d) {
                ParamVec e = eta;
                e[c] += d;
                return fd_partial(e, x, a, h);
            };
            // five-point stencil plus one Richardson level: O(h^6) truncation
            auto five = [&](double hh) {
                return (-shifted(2.0 * hh) + 8.0 * shifted(hh) - 8.0 * shifted(-hh) +
                        shifted(-2.0 * hh)) /
                       (12.0 * hh);
            };
            return (16.0 * five(h / 2.0) - five(h)) / 15.0;
        }
    }
    return density(eta, x);
}

inline ParamVec random_skew(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uth(-2.0, 2.0), uv(0.4, 3.0), um(0.1, 3.0);
    std::bernoulli_distribution sign(0.5);
    double m = um(rng) * (sign(rng) ? 1.0 : -1.0);
    return make_param(Family::SkewNormal, {uth(rng), uv(rng), m});
}

inline ParamVec random_gaussian(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uth(-2.0, 2.0), uv(0.4, 3.0);
    return make_param(Family::Gaussian, {uth(rng), uv(rng)});
}

inline ParamVec random_gamma(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ua(1.0, 6.0), ub(0.5, 4.0);
    return make_param(Family::Gamma, {ua(rng), ub(rng)});
}

}  // namespace mixsing::testing
