#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixsing/common.hpp"

namespace mixsing {

enum class Family { SkewNormal, Gaussian, Gamma };

inline int coord_count(Family f) { return f == Family::SkewNormal ? 3 : 2; }

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// One mixture-component parameter point.
//   skew-normal: (theta, v = sigma^2, m)   gaussian: (theta, v)   gamma: (a, b)
struct ParamVec {
    Family family = Family::SkewNormal;
    std::array<double, 3> coords{0.0, 0.0, 0.0};  // unused tail entries stay 0

    int dim() const { return coord_count(family); }
    double operator[](int i) const { return coords[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return coords[static_cast<std::size_t>(i)]; }

    void validate() const;  // throws Error("BadParams") on domain violations
};

ParamVec make_param(Family f, std::initializer_list<double> cs);

// Discrete mixing measure G = sum_i p_i delta_{eta_i}.
struct MixingMeasure {
    std::vector<ParamVec> atoms;
    std::vector<double> weights;

    int k() const { return static_cast<int>(atoms.size()); }
    Family family() const { return atoms.at(0).family; }
};

// Throws DuplicateAtoms / BadWeights / MixedFamilies / BadParams.
// Weights are renormalized only when |sum - 1| <= 1e-9.
MixingMeasure make_measure(std::vector<ParamVec> atoms, std::vector<double> weights);

// Compact parameter box with a mass floor c0 (weights of fitted measures
// are constrained to p_i >= c0).
struct ParamBox {
    Family family = Family::SkewNormal;
    std::array<double, 3> lo{-10.0, 0.05, -10.0};
    std::array<double, 3> hi{10.0, 25.0, 10.0};
    double c0 = 0.02;

    void validate(int k_max) const;
    bool contains(const ParamVec& eta) const;
    ParamVec clamp(ParamVec eta) const;
};

ParamBox default_box(Family f);

// A measure G presented relative to a base G0: atoms of G are grouped by the
// G0 atom they converge to; groups i > k0 collect redundant atoms (p_i^0 = 0).
// Grouping is supplied by the caller (witness constructors know theirs).
struct ConvergentRep {
    MixingMeasure base;                                        // G0, k0 atoms
    std::vector<std::vector<std::pair<double, ParamVec>>> groups;  // size k0 + extra_count
    int extra_count = 0;

    int k0() const { return base.k(); }
    void validate() const;
    MixingMeasure measure() const;  // flatten to the represented G
};

struct DeltaQuantities {
    std::vector<std::vector<std::array<double, 3>>> delta_eta;  // [group][member][coord]
    std::vector<double> delta_p;                                // per group
    std::vector<int> group_sizes;                               // s_i
};

DeltaQuantities delta_quantities(const ConvergentRep& rep);

// Which transportation cost is in play.  Also consumed by mixing::semipoly_D.
struct TransportSpec {
    enum class Variant { Order, Index, Block } variant = Variant::Order;
    int r = 1;                              // Order
    std::vector<int> kappa;                 // Index, one exponent per coordinate
    std::vector<std::vector<int>> block;    // Block, one row K_i per base atom

    static TransportSpec order(int r);
    static TransportSpec index(std::vector<int> kappa);
    static TransportSpec blocked(std::vector<std::vector<int>> K);
    int power() const;  // exponent used on the power scale (r or max kappa)
};

// Semipolynomial D_r / D_kappa / D_K: sum_ij p_ij cost(eta_ij, eta_i^0) + sum_i |dp_i|.
double semipoly_D(const ConvergentRep& rep, const TransportSpec& spec);

// JSON round-trip per the external schema
// {"family": "skew_normal", "atoms": [[...],...], "weights": [...]}.
std::string measure_to_json(const MixingMeasure& g);
MixingMeasure measure_from_json(const std::string& text);
MixingMeasure load_measure(const std::string& path);
void save_measure(const MixingMeasure& g, const std::string& path);

}  // namespace mixsing
