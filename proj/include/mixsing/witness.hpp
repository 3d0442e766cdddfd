#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mixsing/mixing.hpp"
#include "mixsing/reduce.hpp"

namespace mixsing {

// A parameterized path t -> G(t) converging to its base measure, built from
// one of the explicit singularity-certifying schedules.
struct WitnessPath {
    std::string rule;    // "s0_overfit" | "s1" | "s2" | "s33"
    int target_r = 0;    // declared singularity order; -1 for unbounded (S33)
    MixingMeasure base;
    std::function<ConvergentRep(double)> at;
};

// Single-atom generic base fitted with one extra component:
//   p = 1/2 each, dtheta = +-t, dv = -t^2, dm = t^2 (m^3 + m) / (2v).
ConvergentRep witness_s0_overfit(const MixingMeasure& g0, double t);

// dtheta = dv = dp = 0 with sum_i p_i dm_i / v_i = 0 exactly.
ConvergentRep witness_s1(const MixingMeasure& g0, double t);

// For the zero-shape atom: dm = t, dtheta = -2 dm sigma / sqrt(2 pi),
// dv = dtheta^2.
ConvergentRep witness_s2(const MixingMeasure& g0, double t);

// dm_1 / sigma_1 = -dm_2 / sigma_2, everything else frozen.
ConvergentRep witness_s33(const MixingMeasure& g0, double t);

WitnessPath make_witness_s0_overfit(const MixingMeasure& g0);
WitnessPath make_witness_s1(const MixingMeasure& g0);
WitnessPath make_witness_s2(const MixingMeasure& g0);
WitnessPath make_witness_s33(const MixingMeasure& g0);

// Declared coefficient-vanishing check of a witness construction; symbolic
// (exact rational) for the S0 path, plug-in identities for the others.
struct WitnessCheck {
    bool pass = false;
    bool symbolic = false;
    double residual = 0.0;
    std::string detail;
};

WitnessCheck verify_coefficients(const WitnessPath& path);

// Exact o(t^2) statement behind the S0 check: every order-2 minimal-form
// coefficient along the path is a polynomial in t whose degree <= 2 part
// vanishes identically.  Inputs are converted to exact rationals.
bool s0_coefficients_vanish_exactly(double v0, double m0);

struct RatioEntry {
    double t = 0.0;
    double ws = 0.0;        // W_s(G(t), G0)
    double sup_diff = 0.0;  // sup_x |p_G(t)(x) - p_G0(x)|
    double ratio = 0.0;     // sup_diff / W_s^s
    bool applicable = true; // false at t = 0 (0/0 guard)
};

struct RatioReport {
    int s = 0;
    std::vector<RatioEntry> entries;  // largest t first
    double decay_factor = 0.0;        // first applicable ratio / last
    double median_ratio = 0.0;

    std::string to_csv() const;  // columns t, W_s, sup_ratio
};

std::vector<double> default_t_grid();  // 0.2 * 2^-i, i = 0..6
std::vector<double> default_x_grid(const MixingMeasure& g0, int n = 4001);

// Requires the grid to capture >= 1 - 1e-10 of the base mixture's mass
// (throws GridTooCoarse otherwise).
RatioReport verify_density_ratio(const MixingMeasure& g0, const WitnessPath& path, int s,
                                 const std::vector<double>& x_grid,
                                 const std::vector<double>& t_grid = default_t_grid());

}  // namespace mixsing
