#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mixsing/kernels.hpp"
#include "mixsing/mixing.hpp"

namespace mixsing {

using Rational = boost::multiprecision::cpp_rational;

// Laurent polynomial in (m, v) with exact rational coefficients.  Keys are
// (power of m, power of v); both powers may be negative.
class Laurent {
public:
    using Key = std::pair<int, int>;

    Laurent() = default;
    static Laurent constant(Rational c);
    static Laurent mono(int pm, int pv, Rational c);

    Laurent& operator+=(const Laurent& o);
    Laurent& operator-=(const Laurent& o);
    Laurent operator+(const Laurent& o) const;
    Laurent operator-(const Laurent& o) const;
    Laurent operator*(const Laurent& o) const;
    Laurent operator-() const;

    // formal partial derivatives
    Laurent d_m() const;
    Laurent d_v() const;

    bool is_zero() const { return terms_.empty(); }
    bool operator==(const Laurent& o) const { return terms_ == o.terms_; }

    // throws DomainError when a negative power meets a zero argument
    Rational eval_exact(const Rational& m, const Rational& v) const;
    double eval(double m, double v) const;

    const std::map<Key, Rational>& terms() const { return terms_; }
    std::string str() const;

private:
    void prune();
    std::map<Key, Rational> terms_;
};

// A function expressed in the reduced basis: sum over kappa of
// L_kappa(m, v) * d^kappa f.  Every kappa satisfies kappa_theta <= 1 and
// (kappa_m == 0 or kappa_v == 0).
using FNormal = std::map<DerivIndex, Laurent>;

bool in_f_basis(const DerivIndex& kappa);

// Basis multi-indices with 1 <= |kappa| <= r, sorted by (order, lex).
std::vector<DerivIndex> f_basis(int r);

FNormal& fnormal_add_scaled(FNormal& acc, const FNormal& x, const Laurent& s);
std::string to_string(const FNormal& x);

// Rewrites d^alpha f of the skew-normal kernel into the reduced basis using
// the two kernel identities
//   d^2f/dtheta^2 = 2 df/dv - ((m^3+m)/v) df/dm
//   d^2f/dv dm    = -(1/v) df/dm - ((m^2+1)/(2vm)) d^2f/dm^2,
// eliminating theta-orders >= 2 first, then mixed (v, m) derivatives.
// Memoized; exact in the coefficient field Q(m, v).
const FNormal& reduce_skew(const DerivIndex& alpha);

// Gaussian kernel: d^{k1+k2} f / dtheta^{k1} dv^{k2} equals
// factor * d^{n} f / dtheta^{n}; returns (n, factor).
std::pair<int, Rational> reduce_gaussian(int k_theta, int k_v);

// Coefficients of the minimal polynomial form of a convergent representation
// around its base: per base atom i,
//   zeta_i          = sum_j p_ij - p_i^0
//   xi_{i, beta}    = sum_{1 <= |alpha| <= r} coeff(beta, reduce(alpha))(m_i, v_i)
//                     * sum_j p_ij (delta eta_ij)^alpha / alpha!
struct MinimalForm {
    int r = 0;
    std::vector<DerivIndex> basis;                   // f_basis(r)
    std::vector<double> zeta;                        // one per base atom
    std::vector<std::map<DerivIndex, double>> xi;    // one map per base atom
};

MinimalForm build_minimal_form(const ConvergentRep& rep, int r);

// Exact-rational minimal form for a single base atom; used by the symbolic
// witness checks where coefficients must vanish identically.
struct ExactPerturbation {
    Rational p;                      // weight of the perturbed atom
    std::array<Rational, 3> delta;   // (dtheta, dv, dm)
};

std::map<DerivIndex, Rational> minimal_form_exact_atom(const Rational& v0, const Rational& m0,
                                                       const std::vector<ExactPerturbation>& pert,
                                                       int r);

}  // namespace mixsing
