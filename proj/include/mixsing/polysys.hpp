#pragma once

#include <cstdint>
#include <vector>

#include "mixsing/kernels.hpp"
#include "mixsing/mixing.hpp"

namespace mixsing {

// One monomial of an equation, evaluated per atom j as
//   coeff(j) * prod_c x_{j,c}^{pow_c}.
// coeff holds one shared value or one value per atom.
struct SysTerm {
    std::array<int, 3> pow{0, 0, 0};
    std::vector<double> coeff;

    double at(int j) const {
        return coeff.size() == 1 ? coeff[0] : coeff[static_cast<std::size_t>(j)];
    }
};

struct SysEquation {
    std::vector<SysTerm> terms;
};

// Polynomial system  sum_j w_j * Q_e(x_j) = 0  for each equation e, where the
// atom weights w_j are either free unknowns constrained to the open simplex
// (weight_group) or fixed to 1.  Each equation is homogeneous under the
// per-coordinate scaling x_c -> t^{scale_c} x_c, which the solver exploits to
// pin the unknowns to a weighted sphere (excluding the trivial zero solution).
struct PolySystem {
    int atoms = 0;
    int unknowns = 0;  // per-atom unknown count
    bool weight_group = true;
    std::vector<int> scale;            // per-unknown homogeneity weight
    std::vector<SysEquation> equations;
    std::vector<DerivIndex> labels;    // optional: basis index per equation

    std::uint64_t hash() const;
};

// Equations indexed by the reduced-basis elements beta with
// 1 <= weighted_degree(beta) <= r; the coefficient of the monomial
// a^a1 b^a2 c^a3 / alpha! is the reduced coefficient of beta in d^alpha f,
// evaluated at (m0, v0), summed over alpha with matching weighted degree.
PolySystem build_skew_system(double v0, double m0, int atoms, int r);

// Location-scale Gaussian analogue: one equation per total order 1..r,
//   sum_j w_j sum_{n1 + 2 n2 = order} a^n1 b^n2 / (n1! n2!) = 0.
PolySystem build_gaussian_system(int atoms, int r);

// sum_i weights_i * shapes_i^u * c_i^{u+1} = 0 for u = 0..s; unknowns c_i.
PolySystem build_sbar_system(const std::vector<double>& weights,
                             const std::vector<double>& shapes, int s);

PolySystem select_equations(const PolySystem& sys, const std::vector<int>& rows);

// Rows of a skew system whose coefficients carry no (m, v) dependence
// (label has no m-derivative component).
std::vector<int> vm_free_rows(const PolySystem& sys);

enum class Verdict { Solvable, Unsolvable, Inconclusive };
std::string verdict_name(Verdict v);

struct SolveOptions {
    int starts = 500;
    double solve_tol = 1e-12;
    double unsolve_tol = 1e-4;
    std::uint64_t seed = 0;
    int max_iters = 250;
    // free weights are searched over w_j = floor + (1 - atoms * floor) * softmax;
    // without a floor, collapsing one w_j deletes an atom and fakes solvability
    double weight_floor = 0.02;
};

struct SolveReport {
    Verdict verdict = Verdict::Inconclusive;
    double best_residual = 0.0;           // max |equation| at the best point found
    std::vector<double> weights;          // w_j at the best point
    std::vector<double> vars;             // flat x_{j,c}, atom-major
    int starts_used = 0;
};

// Max absolute equation residual at an explicit candidate point.
double system_residual(const PolySystem& sys, const std::vector<double>& weights,
                       const std::vector<double>& vars);

// Multistart Levenberg-Marquardt solvability oracle.  Solvable when some
// start reaches a weighted-sphere point with residual < solve_tol; Unsolvable
// when every start bottoms out above unsolve_tol; Inconclusive in between.
SolveReport check_solvable(const PolySystem& sys, const SolveOptions& opts = {});

// Increasing ladder of nested systems; stops at the first Unsolvable rung
// (nesting makes everything beyond it Unsolvable as well).  value is the
// first Unsolvable index; exact means every earlier rung was Solvable.
struct LadderReport {
    int first = 1;                  // index of verdicts[0]
    std::vector<Verdict> verdicts;
    int value = -1;                 // -1: no Unsolvable rung found up to the cap
    bool exact = false;
};

LadderReport rho_ladder_skew(double v0, double m0, int extras, int r_max,
                             const SolveOptions& opts = {});
LadderReport rbar_ladder_gaussian(int extras, int r_max, const SolveOptions& opts = {});
LadderReport sbar_ladder(const std::vector<double>& weights, const std::vector<double>& shapes,
                         int s_max, const SolveOptions& opts = {});

}  // namespace mixsing
