#include "mixsing/classify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "mixsing/kernels.hpp"

namespace mixsing {

namespace {

// Relative zero test: |x| <= tol * max(1, scale).
bool near_zero(double x, double scale, double tol) {
    return std::abs(x) <= tol * std::max(1.0, std::abs(scale));
}

// Track how close the closest nonzero factor came to the zero threshold.
struct Margin {
    double value = 1.0;
    void observe(double normalized, bool declared_zero) {
        if (!declared_zero) value = std::min(value, normalized);
    }
};

bool homologous(const ParamVec& a, const ParamVec& b, double tol) {
    double ra = a[1] / (1.0 + a[2] * a[2]);
    double rb = b[1] / (1.0 + b[2] * b[2]);
    return near_zero(a[0] - b[0], std::max(std::abs(a[0]), std::abs(b[0])), tol) &&
           near_zero(ra - rb, std::max(ra, rb), tol);
}

double sigma(const ParamVec& eta) { return std::sqrt(eta[1]); }

// sum_{j in S} p_j prod_{l in S \ j} m_l together with its magnitude scale.
std::pair<double, double> subset_shape_sum(const MixingMeasure& g, const std::vector<int>& s) {
    double sum = 0.0, scale = 0.0;
    for (int j : s) {
        double term = g.weights[static_cast<std::size_t>(j)];
        for (int l : s)
            if (l != j) term *= g.atoms[static_cast<std::size_t>(l)][2];
        sum += term;
        scale += std::abs(term);
    }
    return {sum, scale};
}

void require_family(const MixingMeasure& g, Family f, const char* who) {
    if (g.family() != f) throw make_error("BadFamily", std::string(who) + ": wrong kernel family");
}

// Enforce the level/index consistency rule on exact singleton reports:
// level = max index entry - 1.
void check_consistency(const SingularityReport& rep) {
    if (!rep.level.finite || !rep.level.exact || !rep.index_exact) return;
    if (rep.index_set.size() != 1) return;
    int mx = 0;
    for (int e : rep.index_set[0]) {
        if (e == kInfIndex) return;
        mx = std::max(mx, e);
    }
    if (rep.level.value != mx - 1)
        throw make_error("LogicError", "level does not match the singleton index");
}

nlohmann::json level_json(const LevelInfo& l) {
    nlohmann::json out;
    if (!l.finite) {
        out["kind"] = "inf";
    } else {
        out["kind"] = l.exact ? "exact" : "bound";
        out["value"] = l.value;
    }
    if (l.conjectural) out["conjectural"] = true;
    return out;
}

nlohmann::json index_json(const std::vector<int>& kappa) {
    nlohmann::json row = nlohmann::json::array();
    for (int e : kappa) {
        if (e == kInfIndex)
            row.push_back("inf");
        else
            row.push_back(e);
    }
    return row;
}

}  // namespace

int HomologyStructure::class_of(int atom) const {
    for (std::size_t c = 0; c < classes.size(); ++c)
        for (int m : classes[c].members)
            if (m == atom) return static_cast<int>(c);
    throw make_error("LogicError", "atom outside every homology class");
}

int HomologyStructure::max_class_size() const {
    int mx = 0;
    for (const auto& c : classes) mx = std::max(mx, static_cast<int>(c.members.size()));
    return mx;
}

int HomologyStructure::max_nonconformant_size() const {
    int mx = 0;
    for (const auto& c : classes)
        if (!c.conformant) mx = std::max(mx, static_cast<int>(c.members.size()));
    return mx;
}

HomologyStructure homology_structure(const MixingMeasure& g, double tol) {
    require_family(g, Family::SkewNormal, "homology_structure");
    const int k = g.k();
    std::vector<int> parent(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) parent[static_cast<std::size_t>(i)] = i;
    auto root = [&](int i) {
        while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
        return i;
    };
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            if (homologous(g.atoms[static_cast<std::size_t>(i)], g.atoms[static_cast<std::size_t>(j)], tol)) {
                int ri = root(i), rj = root(j);
                parent[static_cast<std::size_t>(std::max(ri, rj))] = std::min(ri, rj);
            }

    HomologyStructure hs;
    for (int r = 0; r < k; ++r) {
        if (root(r) != r) continue;
        HomologyClass cls;
        for (int i = 0; i < k; ++i)
            if (root(i) == r) cls.members.push_back(i);

        for (std::size_t a = 0; a < cls.members.size(); ++a)
            for (std::size_t b = a + 1; b < cls.members.size(); ++b) {
                const auto& ea = g.atoms[static_cast<std::size_t>(cls.members[a])];
                const auto& eb = g.atoms[static_cast<std::size_t>(cls.members[b])];
                if (ea[2] * eb[2] < 0.0 && !near_zero(ea[2] * eb[2], ea[2] * eb[2], tol))
                    cls.conformant = false;
            }

        // C(1): a vanishing weighted shape sum over some subset of the class
        const int n = static_cast<int>(cls.members.size());
        for (int mask = 0; mask < (1 << n); ++mask) {
            std::vector<int> s;
            for (int b = 0; b < n; ++b)
                if (mask & (1 << b)) s.push_back(cls.members[static_cast<std::size_t>(b)]);
            if (s.size() < 2) continue;
            auto [sum, scale] = subset_shape_sum(g, s);
            if (std::abs(sum) <= tol * std::max(1.0, scale)) cls.c1 = true;
        }

        // C(2): an opposite-sign pair matched in weight/scale and shape/scale
        for (std::size_t a = 0; a < cls.members.size(); ++a)
            for (std::size_t b = a + 1; b < cls.members.size(); ++b) {
                int i = cls.members[a], j = cls.members[b];
                const auto& ei = g.atoms[static_cast<std::size_t>(i)];
                const auto& ej = g.atoms[static_cast<std::size_t>(j)];
                if (ei[2] * ej[2] >= 0.0) continue;
                double si = sigma(ei), sj = sigma(ej);
                double fw = g.weights[static_cast<std::size_t>(i)] * sj -
                            g.weights[static_cast<std::size_t>(j)] * si;
                double fm = ei[2] * sj + ej[2] * si;
                if (near_zero(fw, g.weights[static_cast<std::size_t>(i)] * sj, tol) &&
                    near_zero(fm, std::abs(ei[2]) * sj, tol))
                    cls.c2 = true;
            }
        hs.classes.push_back(std::move(cls));
    }
    return hs;
}

TypePolynomials type_polynomials(const MixingMeasure& g, double tol) {
    require_family(g, Family::SkewNormal, "type_polynomials");
    TypePolynomials tp;
    Margin margin;
    const int k = g.k();

    for (int j = 0; j < k; ++j) {
        double m = g.atoms[static_cast<std::size_t>(j)][2];
        bool z = near_zero(m, 1.0, tol);
        tp.p1 *= m;
        tp.p1_zero = tp.p1_zero || z;
        margin.observe(std::abs(m), z);
    }

    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            const auto& a = g.atoms[static_cast<std::size_t>(i)];
            const auto& b = g.atoms[static_cast<std::size_t>(j)];
            double dt = a[0] - b[0];
            double dr = a[1] * (1.0 + b[2] * b[2]) - b[1] * (1.0 + a[2] * a[2]);
            double factor = dt * dt + dr * dr;
            double scale = a[0] * a[0] + b[0] * b[0] + a[1] * a[1] + b[1] * b[1];
            bool z = homologous(a, b, tol);
            tp.p2 *= factor;
            tp.p2_zero = tp.p2_zero || z;
            margin.observe(factor / std::max(1.0, scale), z);
        }

    auto hs = homology_structure(g, tol);
    for (const auto& cls : hs.classes) {
        const int n = static_cast<int>(cls.members.size());
        for (int mask = 0; mask < (1 << n); ++mask) {
            std::vector<int> s;
            for (int b = 0; b < n; ++b)
                if (mask & (1 << b)) s.push_back(cls.members[static_cast<std::size_t>(b)]);
            if (s.size() < 2) continue;
            auto [sum, scale] = subset_shape_sum(g, s);
            bool z = std::abs(sum) <= tol * std::max(1.0, scale);
            tp.p3 *= sum;
            tp.p3_zero = tp.p3_zero || z;
            margin.observe(std::abs(sum) / std::max(1.0, scale), z);
        }

        for (std::size_t a = 0; a < cls.members.size(); ++a)
            for (std::size_t b = a + 1; b < cls.members.size(); ++b) {
                int i = cls.members[a], j = cls.members[b];
                const auto& ei = g.atoms[static_cast<std::size_t>(i)];
                const auto& ej = g.atoms[static_cast<std::size_t>(j)];
                if (ei[2] * ej[2] >= 0.0) continue;
                double si = sigma(ei), sj = sigma(ej);
                double fw = g.weights[static_cast<std::size_t>(i)] * sj -
                            g.weights[static_cast<std::size_t>(j)] * si;
                double fm = ei[2] * sj + ej[2] * si;
                double factor = fw * fw + fm * fm;
                double scale = sj * sj * (1.0 + ei[2] * ei[2]);
                bool z = factor <= tol * tol * std::max(1.0, scale);
                tp.p4 *= factor;
                tp.p4_zero = tp.p4_zero || z;
                margin.observe(factor / std::max(1.0, scale), z);
            }
    }
    tp.margin = margin.value;
    return tp;
}

namespace {

// Moment-ladder value sbar for one nonconformant class: closed forms for
// sizes 2 and 3, numeric ladder capped at |I| - 1 above that.
std::pair<int, bool> class_sbar(const MixingMeasure& g, const HomologyClass& cls,
                                const SolveOptions& opts) {
    std::vector<double> w, m;
    for (int i : cls.members) {
        w.push_back(g.weights[static_cast<std::size_t>(i)]);
        m.push_back(g.atoms[static_cast<std::size_t>(i)][2]);
    }
    const int n = static_cast<int>(m.size());
    if (n == 2) return {1, true};
    if (n == 3) {
        double s = w[0] * m[1] * m[2] + w[1] * m[0] * m[2] + w[2] * m[0] * m[1];
        return {s > 0.0 ? 1 : 2, true};
    }
    auto lad = sbar_ladder(w, m, n - 1, opts);
    if (lad.value > 0) return {lad.value, lad.exact};
    return {n - 1, false};  // theorem cap: sbar <= |I| - 1
}

SingularityReport finalize(SingularityReport rep) {
    check_consistency(rep);
    return rep;
}

}  // namespace

SingularityReport classify_emixture(const MixingMeasure& g) {
    require_family(g, Family::SkewNormal, "classify_emixture");
    const double tol = 1e-10;
    auto hs = homology_structure(g, tol);
    auto tp = type_polynomials(g, tol);

    SingularityReport rep;
    rep.boundary_warning = tp.margin < 1e-6;
    rep.kstar = hs.max_nonconformant_size();

    bool nonconformant = rep.kstar > 0;
    if (!nonconformant) {
        if (tp.p1_zero) {
            rep.label = "S2";
            rep.level = {true, true, false, 2};
            rep.index_set = {{3, 2, 3}};
            for (int i = 0; i < g.k(); ++i) {
                const auto& cls = hs.classes[static_cast<std::size_t>(hs.class_of(i))];
                if (near_zero(g.atoms[static_cast<std::size_t>(i)][2], 1.0, tol))
                    rep.matrix.push_back({3, 2, 3});
                else if (cls.members.size() > 1)
                    rep.matrix.push_back({1, 1, 2});
                else
                    rep.matrix.push_back({1, 1, 1});
            }
            return finalize(rep);
        }
        if (tp.p2_zero) {
            rep.label = "S1";
            rep.level = {true, true, false, 1};
            rep.index_set = {{1, 1, 2}};
            for (int i = 0; i < g.k(); ++i) {
                const auto& cls = hs.classes[static_cast<std::size_t>(hs.class_of(i))];
                rep.matrix.push_back(cls.members.size() > 1 ? std::vector<int>{1, 1, 2}
                                                            : std::vector<int>{1, 1, 1});
            }
            return finalize(rep);
        }
        rep.label = "S0";
        rep.level = {true, true, false, 0};
        rep.index_set = {{1, 1, 1}};
        rep.matrix.assign(static_cast<std::size_t>(g.k()), {1, 1, 1});
        return finalize(rep);
    }

    bool c1 = false, c2 = false;
    int max_c1_len = 0;
    for (const auto& cls : hs.classes) {
        if (cls.conformant) continue;
        c1 = c1 || cls.c1;
        c2 = c2 || cls.c2;
        if (cls.c1) max_c1_len = std::max(max_c1_len, static_cast<int>(cls.members.size()));
    }

    if (c2) {
        rep.label = "S33";
        rep.level = {false, true, false, 0};
        rep.index_set = {{kInfIndex, kInfIndex, kInfIndex}};
        return finalize(rep);
    }

    if (c1) {
        rep.label = "S32";
        if (max_c1_len == 2) {
            rep.level = {true, true, false, 3};
            rep.index_set = {{1, 1, 4}};
        } else {
            rep.level = {true, false, true, g.k() + 1};
            rep.index_set = {{1, 1, g.k() + 2}};
            rep.index_exact = false;
        }
        return finalize(rep);
    }

    rep.label = "S31";
    SolveOptions opts;
    opts.starts = 150;
    int sbar = 0;
    bool sbar_exact = true;
    for (const auto& cls : hs.classes) {
        if (cls.conformant) continue;
        auto [v, e] = class_sbar(g, cls, opts);
        sbar = std::max(sbar, v);
        sbar_exact = sbar_exact && e;
    }
    rep.sbar = sbar;
    if (!tp.p1_zero && sbar_exact && rep.kstar <= 3) {
        rep.level = {true, true, false, sbar};
        rep.index_set = {{1, 1, sbar + 1}};
    } else {
        int bound = std::max(tp.p1_zero ? 2 : 0, sbar);
        rep.level = {true, false, false, bound};
        rep.index_set = {{1, 1, bound + 1}};
        rep.index_exact = false;
    }
    return finalize(rep);
}

SingularityReport classify_gamma(const MixingMeasure& g, bool overfitted) {
    require_family(g, Family::Gamma, "classify_gamma");
    const double tol = 1e-10;
    for (const auto& eta : g.atoms)
        if (eta[0] < 1.0) throw make_error("BadParams", "gamma shape below 1");

    SingularityReport rep;
    double margin = 1.0;
    bool pathological = false;
    for (int i = 0; i < g.k(); ++i)
        for (int j = i + 1; j < g.k(); ++j) {
            const auto& a = g.atoms[static_cast<std::size_t>(i)];
            const auto& b = g.atoms[static_cast<std::size_t>(j)];
            double da = std::abs(a[0] - b[0]), db = std::abs(b[1] - a[1]);
            double gap = std::max(std::abs(da - 1.0), db);
            if (gap <= tol * std::max({1.0, a[0], a[1]}))
                pathological = true;
            else
                margin = std::min(margin, gap / std::max({1.0, a[0], a[1]}));
        }
    rep.boundary_warning = margin < 1e-6;

    if (pathological) {
        rep.label = "GammaPathological";
        rep.level = {false, true, false, 0};
        rep.index_set = {{kInfIndex, kInfIndex}};
        return finalize(rep);
    }
    rep.label = "GammaGeneric";
    if (overfitted) {
        rep.level = {true, true, false, 1};
        rep.index_set = {{2, 2}};
        rep.matrix.assign(static_cast<std::size_t>(g.k()), {2, 2});
    } else {
        rep.level = {true, true, false, 0};
        rep.index_set = {{1, 1}};
        rep.matrix.assign(static_cast<std::size_t>(g.k()), {1, 1});
    }
    return finalize(rep);
}

RhoEntry rho_skew(double v0, double m0, int extras, const SolveOptions& opts) {
    // Gaussian cap first: rho(v, m, l) <= rbar(l).  For l <= 2 the cap value
    // 2l + 2 is a theorem; the numeric ladder can tighten but not loosen it
    // (the l = 2 rung-6 infimum sits below the certification threshold, so
    // the ladder alone returns inconclusive there).
    auto cap_ladder = rbar_ladder_gaussian(extras, 2 * extras + 4, opts);
    int cap_theory = extras <= 2 ? 2 * extras + 2 : 2 * extras + 4;
    int rbar = cap_ladder.value > 0 ? std::min(cap_ladder.value, cap_theory) : cap_theory;
    bool cap_certified = cap_ladder.exact || extras <= 2;
    auto lad = rho_ladder_skew(v0, m0, extras, rbar, opts);
    RhoEntry out;
    out.v = v0;
    out.m = m0;
    if (lad.value > 0) {
        out.value = lad.value;
        out.exact = lad.exact;
        return out;
    }
    // No unsolvable rung up to the cap; the theorem rho <= rbar closes the
    // value, exactly when every rung below the cap was certified solvable.
    out.value = rbar;
    bool lower_solvable = static_cast<int>(lad.verdicts.size()) >= rbar - 1;
    for (int r = 0; r < rbar - 1 && r < static_cast<int>(lad.verdicts.size()); ++r)
        lower_solvable = lower_solvable && lad.verdicts[static_cast<std::size_t>(r)] == Verdict::Solvable;
    out.exact = cap_certified && lower_solvable;
    return out;
}

SingularityReport classify_omixture(const MixingMeasure& g, int k, double c0,
                                    const SolveOptions& opts) {
    if (k <= g.k()) throw make_error("BadArity", "o-mixture needs k > k0");
    (void)c0;
    const int extras = k - g.k();
    SingularityReport rep;
    rep.label = "Omixture";
    rep.index_exact = false;

    if (g.family() == Family::Gamma) {
        // second-order identifiable kernel: the constrained o-mixture table
        auto base = classify_gamma(g, true);
        base.label = "Omixture";
        base.level.exact = false;
        base.index_exact = false;
        return base;
    }

    int big_r = 0;
    if (g.family() == Family::SkewNormal) {
        auto e = classify_emixture(g);
        if (e.label != "S0")
            throw make_error("NotS0", "o-mixture classification needs a generic base measure");
        for (const auto& eta : g.atoms) {
            auto r = rho_skew(eta[1], eta[2], extras, opts);
            rep.rho.push_back(r);
            big_r = std::max(big_r, r.value);
        }
        int half = big_r % 2 == 0 ? big_r / 2 : (big_r + 1) / 2;
        rep.index_set = {{big_r, half, half}};
    } else {
        auto cap = rbar_ladder_gaussian(extras, 2 * extras + 4, opts);
        big_r = cap.value > 0 ? cap.value : (extras <= 2 ? 2 * extras + 2 : 2 * extras + 4);
        rep.index_set = {{big_r, big_r / 2}};
    }
    rep.r_value = big_r;
    rep.level = {true, false, false, big_r - 1};
    return finalize(rep);
}

FisherRank fisher_rank(const MixingMeasure& g, const std::vector<double>& grid) {
    if (grid.size() < 3) throw make_error("QuadratureFailure", "grid too small");
    const int k = g.k();
    const int d = coord_count(g.family());
    const int dim = k * (1 + d);

    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd score(dim);
    for (std::size_t ix = 0; ix < grid.size(); ++ix) {
        double x = grid[ix];
        double p = mixture_density(g, x);
        if (!(p > 0.0) || !std::isfinite(p))
            throw make_error("QuadratureFailure", "mixture density not positive on grid");
        // trapezoid weight
        double w;
        if (ix == 0)
            w = 0.5 * (grid[1] - grid[0]);
        else if (ix + 1 == grid.size())
            w = 0.5 * (grid[ix] - grid[ix - 1]);
        else
            w = 0.5 * (grid[ix + 1] - grid[ix - 1]);

        for (int j = 0; j < k; ++j) {
            const auto& eta = g.atoms[static_cast<std::size_t>(j)];
            score(j) = density(eta, x) / p;
            for (int c = 0; c < d; ++c) {
                DerivIndex a{0, 0, 0};
                a[static_cast<std::size_t>(c)] = 1;
                score(k + j * d + c) =
                    g.weights[static_cast<std::size_t>(j)] * partial(eta, x, a) / p;
            }
        }
        info.noalias() += (w * p) * (score * score.transpose());
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    double thresh = 1e-8 * info.trace();
    FisherRank out;
    out.dim = dim;
    out.min_eigenvalue = es.eigenvalues().minCoeff();
    out.rank = static_cast<int>((es.eigenvalues().array() > thresh).count());
    return out;
}

std::string SingularityReport::to_json() const {
    nlohmann::json j;
    j["label"] = label;
    j["level"] = level_json(level);
    j["index_set"] = nlohmann::json::array();
    for (const auto& kappa : index_set) j["index_set"].push_back(index_json(kappa));
    j["index_exact"] = index_exact;
    if (!matrix.empty()) {
        j["matrix"] = nlohmann::json::array();
        for (const auto& row : matrix) j["matrix"].push_back(index_json(row));
    }
    nlohmann::json aux;
    aux["R"] = r_value;
    aux["sbar"] = sbar;
    aux["kstar"] = kstar;
    aux["rho"] = nlohmann::json::array();
    for (const auto& r : rho)
        aux["rho"].push_back({{"v", r.v}, {"m", r.m}, {"value", r.value}, {"exact", r.exact}});
    j["aux"] = aux;
    if (boundary_warning) j["boundary_warning"] = true;
    return j.dump(2);
}

}  // namespace mixsing
