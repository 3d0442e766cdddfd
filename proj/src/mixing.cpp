#include "mixsing/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mixsing {

namespace {
constexpr double kAtomTol = 1e-12;     // distinctness tolerance (decidable predicate)
constexpr double kWeightWindow = 1e-9; // renormalization window for round-off
}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::SkewNormal: return "skew_normal";
        case Family::Gaussian: return "gaussian";
        case Family::Gamma: return "gamma";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    if (name == "skew_normal" || name == "skew") return Family::SkewNormal;
    if (name == "gaussian" || name == "normal") return Family::Gaussian;
    if (name == "gamma") return Family::Gamma;
    throw make_error("BadFamily", "unknown family '" + name + "'");
}

void ParamVec::validate() const {
    auto bad = [&](const std::string& msg) { throw make_error("BadParams", msg); };
    for (int i = 0; i < dim(); ++i)
        if (!std::isfinite(coords[static_cast<std::size_t>(i)])) bad("non-finite coordinate");
    switch (family) {
        case Family::SkewNormal:
            if (coords[1] <= 0.0) bad("skew-normal requires v > 0");
            break;
        case Family::Gaussian:
            if (coords[1] <= 0.0) bad("gaussian requires v > 0");
            break;
        case Family::Gamma:
            if (coords[0] <= 0.0 || coords[1] <= 0.0) bad("gamma requires a > 0, b > 0");
            break;
    }
}

ParamVec make_param(Family f, std::initializer_list<double> cs) {
    ParamVec p;
    p.family = f;
    if (static_cast<int>(cs.size()) != coord_count(f))
        throw make_error("BadParams", "coordinate count does not match family");
    int i = 0;
    for (double c : cs) p.coords[static_cast<std::size_t>(i++)] = c;
    p.validate();
    return p;
}

MixingMeasure make_measure(std::vector<ParamVec> atoms, std::vector<double> weights) {
    if (atoms.empty() || atoms.size() != weights.size())
        throw make_error("BadWeights", "atom/weight lengths differ or empty");
    Family f = atoms[0].family;
    for (const auto& a : atoms) {
        if (a.family != f) throw make_error("MixedFamilies", "atoms span multiple families");
        a.validate();
    }
    double s = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw make_error("BadWeights", "weights must be strictly positive");
        s += w;
    }
    if (std::abs(s - 1.0) > kWeightWindow)
        throw make_error("BadWeights", "weights sum to " + std::to_string(s));
    for (double& w : weights) w /= s;
    int k = static_cast<int>(atoms.size());
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            bool same = true;
            for (int c = 0; c < atoms[static_cast<std::size_t>(i)].dim(); ++c)
                if (std::abs(atoms[static_cast<std::size_t>(i)][c] - atoms[static_cast<std::size_t>(j)][c]) > kAtomTol) {
                    same = false;
                    break;
                }
            if (same) throw make_error("DuplicateAtoms", "atoms " + std::to_string(i) + " and " + std::to_string(j));
        }
    MixingMeasure g;
    g.atoms = std::move(atoms);
    g.weights = std::move(weights);
    return g;
}

void ParamBox::validate(int k_max) const {
    int d = coord_count(family);
    for (int c = 0; c < d; ++c)
        if (!(lo[static_cast<std::size_t>(c)] < hi[static_cast<std::size_t>(c)]))
            throw make_error("BadParams", "empty box interval");
    // scale-type coordinates must stay strictly positive
    int scale_coord = (family == Family::Gamma) ? 0 : 1;
    if (lo[static_cast<std::size_t>(scale_coord)] <= 0.0)
        throw make_error("BadParams", "scale coordinate lower bound must be positive");
    if (family == Family::Gamma && lo[1] <= 0.0)
        throw make_error("BadParams", "gamma rate lower bound must be positive");
    if (k_max > 0 && !(c0 < 1.0 / k_max))
        throw make_error("BadParams", "c0 must be below 1/k_max");
}

bool ParamBox::contains(const ParamVec& eta) const {
    if (eta.family != family) return false;
    for (int c = 0; c < eta.dim(); ++c) {
        double x = eta[c];
        if (x < lo[static_cast<std::size_t>(c)] - 1e-12 || x > hi[static_cast<std::size_t>(c)] + 1e-12) return false;
    }
    return true;
}

ParamVec ParamBox::clamp(ParamVec eta) const {
    for (int c = 0; c < eta.dim(); ++c)
        eta[c] = std::min(hi[static_cast<std::size_t>(c)], std::max(lo[static_cast<std::size_t>(c)], eta[c]));
    return eta;
}

ParamBox default_box(Family f) {
    ParamBox b;
    b.family = f;
    if (f == Family::Gamma) {
        b.lo = {0.2, 0.05, 0.0};
        b.hi = {25.0, 25.0, 0.0};
    }
    return b;
}

void ConvergentRep::validate() const {
    if (static_cast<int>(groups.size()) != base.k() + extra_count)
        throw make_error("BadParams", "group count must equal k0 + extra_count");
    for (const auto& g : groups) {
        if (g.empty()) throw make_error("BadParams", "every group must be nonempty");
        for (const auto& [p, eta] : g) {
            if (!(p > 0.0)) throw make_error("BadWeights", "group member weight must be positive");
            if (eta.family != base.family()) throw make_error("MixedFamilies", "group member family mismatch");
            eta.validate();
        }
    }
    double tot = 0.0;
    for (const auto& g : groups)
        for (const auto& [p, eta] : g) tot += p;
    if (std::abs(tot - 1.0) > kWeightWindow)
        throw make_error("BadWeights", "represented measure mass " + std::to_string(tot));
}

MixingMeasure ConvergentRep::measure() const {
    std::vector<ParamVec> atoms;
    std::vector<double> weights;
    for (const auto& g : groups)
        for (const auto& [p, eta] : g) {
            atoms.push_back(eta);
            weights.push_back(p);
        }
    return make_measure(std::move(atoms), std::move(weights));
}

DeltaQuantities delta_quantities(const ConvergentRep& rep) {
    rep.validate();
    DeltaQuantities out;
    int k0 = rep.k0();
    for (int i = 0; i < static_cast<int>(rep.groups.size()); ++i) {
        const auto& g = rep.groups[static_cast<std::size_t>(i)];
        std::vector<std::array<double, 3>> deltas;
        double mass = 0.0;
        for (const auto& [p, eta] : g) {
            std::array<double, 3> d{0.0, 0.0, 0.0};
            if (i < k0)
                for (int c = 0; c < eta.dim(); ++c)
                    d[static_cast<std::size_t>(c)] = eta[c] - rep.base.atoms[static_cast<std::size_t>(i)][c];
            deltas.push_back(d);
            mass += p;
        }
        double p0 = i < k0 ? rep.base.weights[static_cast<std::size_t>(i)] : 0.0;  // p_i^0 = 0 for redundant groups
        out.delta_eta.push_back(std::move(deltas));
        out.delta_p.push_back(mass - p0);
        out.group_sizes.push_back(static_cast<int>(g.size()));
    }
    return out;
}

TransportSpec TransportSpec::order(int r) {
    TransportSpec s;
    s.variant = Variant::Order;
    s.r = r;
    return s;
}

TransportSpec TransportSpec::index(std::vector<int> kappa) {
    TransportSpec s;
    s.variant = Variant::Index;
    s.kappa = std::move(kappa);
    return s;
}

TransportSpec TransportSpec::blocked(std::vector<std::vector<int>> K) {
    TransportSpec s;
    s.variant = Variant::Block;
    s.block = std::move(K);
    return s;
}

int TransportSpec::power() const {
    switch (variant) {
        case Variant::Order: return r;
        case Variant::Index: {
            int m = 1;
            for (int k : kappa) m = std::max(m, k);
            return m;
        }
        case Variant::Block: {
            int m = 1;
            for (const auto& row : block)
                for (int k : row) m = std::max(m, k);
            return m;
        }
    }
    return 1;
}

double semipoly_D(const ConvergentRep& rep, const TransportSpec& spec) {
    auto dq = delta_quantities(rep);
    int d = coord_count(rep.base.family());
    if (spec.variant == TransportSpec::Variant::Index && static_cast<int>(spec.kappa.size()) != d)
        throw make_error("IndexMismatch", "kappa dimension does not match coordinate count");
    if (spec.variant == TransportSpec::Variant::Block) {
        if (static_cast<int>(spec.block.size()) != rep.k0())
            throw make_error("IndexMismatch", "block row count does not match k0");
        for (const auto& row : spec.block)
            if (static_cast<int>(row.size()) != d)
                throw make_error("IndexMismatch", "block row dimension does not match coordinate count");
    }
    double total = 0.0;
    for (int i = 0; i < static_cast<int>(rep.groups.size()); ++i) {
        const auto& g = rep.groups[static_cast<std::size_t>(i)];
        for (int j = 0; j < static_cast<int>(g.size()); ++j) {
            if (i >= rep.k0()) continue;  // redundant groups contribute through |dp| only
            const auto& delta = dq.delta_eta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            double cost = 0.0;
            for (int c = 0; c < d; ++c) {
                double ad = std::abs(delta[static_cast<std::size_t>(c)]);
                int e = spec.r;
                if (spec.variant == TransportSpec::Variant::Index) e = spec.kappa[static_cast<std::size_t>(c)];
                if (spec.variant == TransportSpec::Variant::Block) e = spec.block[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
                cost += std::pow(ad, e);
            }
            total += g[static_cast<std::size_t>(j)].first * cost;
        }
        total += std::abs(dq.delta_p[static_cast<std::size_t>(i)]);
    }
    return total;
}

std::string measure_to_json(const MixingMeasure& g) {
    // canonical ordering: lexicographic by atom coordinates
    std::vector<int> order(static_cast<std::size_t>(g.k()));
    for (int i = 0; i < g.k(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& x = g.atoms[static_cast<std::size_t>(a)];
        const auto& y = g.atoms[static_cast<std::size_t>(b)];
        for (int c = 0; c < x.dim(); ++c) {
            if (x[c] < y[c]) return true;
            if (x[c] > y[c]) return false;
        }
        return a < b;
    });
    nlohmann::json j;
    j["family"] = family_name(g.family());
    auto atoms = nlohmann::json::array();
    auto weights = nlohmann::json::array();
    for (int i : order) {
        auto row = nlohmann::json::array();
        for (int c = 0; c < g.atoms[static_cast<std::size_t>(i)].dim(); ++c)
            row.push_back(g.atoms[static_cast<std::size_t>(i)][c]);
        atoms.push_back(row);
        weights.push_back(g.weights[static_cast<std::size_t>(i)]);
    }
    j["atoms"] = atoms;
    j["weights"] = weights;
    return j.dump(2);
}

MixingMeasure measure_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw make_error("BadJson", e.what());
    }
    if (!j.contains("family") || !j.contains("atoms") || !j.contains("weights"))
        throw make_error("BadJson", "measure JSON needs family/atoms/weights");
    Family f = family_from_name(j["family"].get<std::string>());
    std::vector<ParamVec> atoms;
    for (const auto& row : j["atoms"]) {
        ParamVec p;
        p.family = f;
        if (static_cast<int>(row.size()) != coord_count(f))
            throw make_error("BadParams", "atom coordinate count does not match family");
        for (int c = 0; c < coord_count(f); ++c) p[c] = row[static_cast<std::size_t>(c)].get<double>();
        atoms.push_back(p);
    }
    std::vector<double> weights = j["weights"].get<std::vector<double>>();
    return make_measure(std::move(atoms), std::move(weights));
}

MixingMeasure load_measure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw make_error("IoError", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return measure_from_json(ss.str());
}

void save_measure(const MixingMeasure& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw make_error("IoError", "cannot write " + path);
    out << measure_to_json(g) << "\n";
}

}  // namespace mixsing
