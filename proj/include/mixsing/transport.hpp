#pragma once

#include <Eigen/Dense>

#include "mixsing/mixing.hpp"

namespace mixsing {

// Optimal coupling between G (rows) and G' (columns):
//   row sums  = weights of G, column sums = weights of G'.
struct TransportPlan {
    Eigen::MatrixXd q;
    double value = 0.0;  // distance on the API scale (rooted)
};

// Ground cost on the API scale:
//   order r:  l_r norm of the coordinate differences
//   index k:  d_kappa = (sum |delta_c|^{kappa_c})^{1 / max kappa}
// (block costs depend on the base atom; see distance()).
double cost(const TransportSpec& spec, const ParamVec& eta, const ParamVec& etap);

// Pairwise cost on the power scale; base_atom indexes G' for the block variant.
double cost_power(const TransportSpec& spec, const ParamVec& eta, const ParamVec& etap,
                  int base_atom);

struct DistanceResult {
    double value = 0.0;        // W_r, W-tilde_kappa, or W-hat_K
    double power_value = 0.0;  // value^power  (exact LP objective, no root round-trip)
    TransportPlan plan;
};

// Exact transportation LP via the simplex method with Bland's rule
// (deterministic pivoting, immune to degenerate cycling); supports <= 64 atoms.
DistanceResult distance(const TransportSpec& spec, const MixingMeasure& g,
                        const MixingMeasure& gp);

// Coupling-weighted per-coordinate error sum_ij q_ij |eta_i^(c) - eta_j^0(c)|.
std::vector<double> per_coordinate_error(const TransportPlan& plan, const MixingMeasure& g,
                                         const MixingMeasure& g0);

// Brute-force oracle: exhaustive minimum over basic feasible solutions of the
// transportation polytope.  Only for small supports (k * k' <= 16 cells).
double brute_force_power_distance(const TransportSpec& spec, const MixingMeasure& g,
                                  const MixingMeasure& gp);

}  // namespace mixsing
