#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixsing/mixing.hpp"

namespace mixsing {

struct Sample {
    std::vector<double> x;
    std::uint64_t seed = 0;
    std::string generator;
};

// i.i.d. draws from the mixture; fully hand-rolled transforms over a
// mt19937_64 stream so results are reproducible across standard libraries.
Sample sample(const MixingMeasure& g0, int n, std::uint64_t seed);

struct FitConfig {
    int starts = 8;
    int max_iters = 2000;
    double tol = 1e-8;        // loglik stall tolerance
    std::uint64_t seed = 0;
    bool location_only = false;  // gaussian: freeze variances at their seeds
    double fixed_variance = 0.0;  // with location_only, > 0 pins every variance here
    bool fix_weights = false;    // pin mixing weights at their initial values
    // warm start for local-MLE experiments: start 0 begins here instead of at
    // the quantile seed; the remaining starts stay global
    std::optional<MixingMeasure> init;
};

struct FitResult {
    MixingMeasure g;
    double loglik = 0.0;
    int starts_used = 0;
    bool converged = false;
};

// Constrained MLE over the box with weights on the c0-floored simplex.
// Gaussian mixtures run EM with box projection; skew-normal and gamma run
// multi-start projected gradient ascent on the analytic score.
FitResult fit_mle(const std::vector<double>& data, Family family, int k, const ParamBox& box,
                  const FitConfig& cfg = {});

// Composite Gauss-Legendre scheme (64 nodes per unit interval by default).
struct QuadScheme {
    std::vector<double> x;
    std::vector<double> w;
};

QuadScheme quadrature_over(double lo, double hi, int nodes_per_unit = 64);
QuadScheme envelope_quadrature(const MixingMeasure& a, const MixingMeasure& b,
                               int nodes_per_unit = 64);

using Density = std::function<double(double)>;

// Both enforce the >= 1 - 1e-10 mass-coverage precondition (GridTooCoarse).
// hellinger returns h with h^2 = (1/2) int (sqrt p - sqrt q)^2;
// tv returns (1/2) int |p - q|.
double hellinger(const Density& p, const Density& q, const QuadScheme& scheme);
double tv(const Density& p, const Density& q, const QuadScheme& scheme);

double hellinger_mixtures(const MixingMeasure& a, const MixingMeasure& b);
double tv_mixtures(const MixingMeasure& a, const MixingMeasure& b);

}  // namespace mixsing
