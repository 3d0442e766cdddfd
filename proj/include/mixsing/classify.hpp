#pragma once

#include <string>
#include <vector>

#include "mixsing/mixing.hpp"
#include "mixsing/polysys.hpp"

namespace mixsing {

// Atom index -1 stands for an infinite index entry in reports.
constexpr int kInfIndex = -1;

struct HomologyClass {
    std::vector<int> members;
    bool conformant = true;  // false iff some pair has m_i * m_j < 0
    bool c1 = false;         // some subset S, |S| >= 2, with sum_j p_j prod_{l != j} m_l = 0
    bool c2 = false;         // some opposite-sign pair with p_i/s_i = p_j/s_j, m_i/s_i = -m_j/s_j
};

// Partition of the atoms into homologous classes (same location, same
// rescaled scale v / (1 + m^2)), with per-class degeneracy flags.
struct HomologyStructure {
    std::vector<HomologyClass> classes;

    int class_of(int atom) const;
    int max_class_size() const;
    int max_nonconformant_size() const;
};

HomologyStructure homology_structure(const MixingMeasure& g, double tol = 1e-10);

// Values of the type polynomials plus the smallest normalized magnitude seen
// among their nonzero factors (drives the boundary-proximity warning).
struct TypePolynomials {
    double p1 = 1.0;  // prod m_j
    double p2 = 1.0;  // prod over pairs of the homologous-degeneracy factor
    double p3 = 1.0;  // prod over class subsets of the weighted shape sums
    double p4 = 1.0;  // prod over opposite-sign class pairs of the scale factor
    bool p1_zero = false, p2_zero = false, p3_zero = false, p4_zero = false;
    double margin = 1.0;
};

TypePolynomials type_polynomials(const MixingMeasure& g, double tol = 1e-10);

struct LevelInfo {
    bool finite = true;
    bool exact = true;        // false: value is an upper bound
    bool conjectural = false;
    int value = 0;            // meaningful only when finite
};

struct RhoEntry {
    double v = 0.0, m = 0.0;
    int value = 0;
    bool exact = true;
};

struct SingularityReport {
    std::string label;
    LevelInfo level;
    std::vector<std::vector<int>> index_set;  // entries kInfIndex mean infinity
    bool index_exact = true;
    std::vector<std::vector<int>> matrix;     // per-atom rows; empty when not derived

    // auxiliary quantities feeding the verdict
    int r_value = 0;   // R(G0, k) for o-mixtures
    int sbar = 0;      // moment-ladder value over nonconformant classes
    int kstar = 0;     // max nonconformant homologous class length
    std::vector<RhoEntry> rho;
    bool boundary_warning = false;

    std::string to_json() const;
};

// Exact-fitted skew-normal classification into S0/S1/S2/S31/S32/S33.
SingularityReport classify_emixture(const MixingMeasure& g);

// Gamma classification; overfitted selects the constrained o-mixture table.
SingularityReport classify_gamma(const MixingMeasure& g, bool overfitted);

// Over-fitted classification with k >= k0 + 1 components and weight floor c0.
// Skew inputs must classify as S0 (throws NotS0 otherwise).
SingularityReport classify_omixture(const MixingMeasure& g, int k, double c0 = 0.02,
                                    const SolveOptions& opts = {});

// rho(v0, m0, l): first unsolvable order of the skew system with l + 1 atoms,
// closed off by the Gaussian cap rbar(l) when the top rung is inconclusive.
RhoEntry rho_skew(double v0, double m0, int extras, const SolveOptions& opts = {});

struct FisherRank {
    int dim = 0;
    int rank = 0;
    double min_eigenvalue = 0.0;
    bool full() const { return rank == dim; }
};

// Numerical rank of the Fisher information of the full parameter vector
// (all weights plus all atom coordinates) over a trapezoid grid.
FisherRank fisher_rank(const MixingMeasure& g, const std::vector<double>& grid);

}  // namespace mixsing
