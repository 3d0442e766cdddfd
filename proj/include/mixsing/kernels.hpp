#pragma once

#include <array>
#include <vector>

#include "mixsing/mixing.hpp"

namespace mixsing {

using DerivIndex = std::array<int, 3>;  // third entry 0 for 2-parameter families

inline int order(const DerivIndex& a) { return a[0] + a[1] + a[2]; }
inline int weighted_degree(const DerivIndex& a) { return a[0] + 2 * a[1] + 2 * a[2]; }

// Standard normal pdf / cdf (cdf via erfc, safe far into both tails).
double norm_pdf(double x);
double norm_cdf(double x);
double log_norm_cdf(double x);

// Kernel density f(x | eta).  Gamma returns 0 for x <= 0 by convention.
double density(const ParamVec& eta, double x);

// Analytic partial derivative d^|alpha| f / d eta^alpha at x.
//   skew-normal: exact term-algebra evaluation for |alpha| <= 6
//   gaussian:    same algebra specialized to m = 0 (theta/v derivatives)
//   gamma:       analytic to order 2, nested central differences above
// Throws OrderTooHigh past the caps.
double partial(const ParamVec& eta, double x, const DerivIndex& alpha);

// Gradient of f in all coordinates (used by MLE ascent); analytic.
std::array<double, 3> gradient(const ParamVec& eta, double x);

// Residuals of the defining PDE identities; all should vanish identically.
//   skew:     [f_tt - 2 f_v + ((m^3+m)/v) f_m,
//              2 m f_m + (m^2+1) f_mm + 2 v m f_vm]
//   gaussian: [f_tt - 2 f_v]
//   gamma:    [f_b - (a/b) f(x|a,b) + (a/b) f(x|a+1,b)]
std::vector<double> pde_residuals(const ParamVec& eta, double x);

double mixture_density(const MixingMeasure& g, double x);
double log_mixture_density(const MixingMeasure& g, double x);

// [lo, hi] covering the +-8 sigma envelope of every atom (support-aware).
std::pair<double, double> envelope(const MixingMeasure& g, double nsigma = 8.0);

}  // namespace mixsing
