#include "mixsing/witness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mixsing/classify.hpp"
#include "mixsing/kernels.hpp"
#include "mixsing/transport.hpp"

namespace mixsing {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string require_label(const MixingMeasure& g0, std::initializer_list<const char*> wanted,
                          const char* who) {
    auto rep = classify_emixture(g0);
    for (const char* w : wanted)
        if (rep.label == w) return rep.label;
    throw make_error("LabelMismatch", std::string(who) + ": base measure classifies as " + rep.label);
}

ConvergentRep identity_rep(const MixingMeasure& g0) {
    ConvergentRep rep;
    rep.base = g0;
    rep.groups.resize(static_cast<std::size_t>(g0.k()));
    for (int i = 0; i < g0.k(); ++i)
        rep.groups[static_cast<std::size_t>(i)] = {
            {g0.weights[static_cast<std::size_t>(i)], g0.atoms[static_cast<std::size_t>(i)]}};
    return rep;
}

// polynomial interpolation with exact rational arithmetic; returns the
// coefficient vector of the unique degree < n interpolant
std::vector<Rational> lagrange_coefficients(const std::vector<Rational>& ts,
                                            const std::vector<Rational>& ys) {
    const std::size_t n = ts.size();
    std::vector<Rational> acc(n, Rational(0));
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<Rational> p{Rational(1)};
        Rational denom = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == k) continue;
            // p *= (x - t_j)
            std::vector<Rational> q(p.size() + 1, Rational(0));
            for (std::size_t i = 0; i < p.size(); ++i) {
                q[i + 1] += p[i];
                q[i] -= p[i] * ts[j];
            }
            p = std::move(q);
            denom *= ts[k] - ts[j];
        }
        Rational scale = ys[k] / denom;
        for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i] * scale;
    }
    return acc;
}

}  // namespace

ConvergentRep witness_s0_overfit(const MixingMeasure& g0, double t) {
    if (g0.k() != 1)
        throw make_error("NotApplicable", "s0 overfit witness needs a single-atom base");
    require_label(g0, {"S0"}, "witness_s0_overfit");
    const auto& eta = g0.atoms[0];
    double v = eta[1], m = eta[2];
    double dv = -t * t;
    double dm = t * t * (m * m * m + m) / (2.0 * v);

    ConvergentRep rep;
    rep.base = g0;
    rep.groups = {{{0.5, make_param(Family::SkewNormal, {eta[0] + t, v + dv, m + dm})},
                   {0.5, make_param(Family::SkewNormal, {eta[0] - t, v + dv, m + dm})}}};
    return rep;
}

ConvergentRep witness_s1(const MixingMeasure& g0, double t) {
    require_label(g0, {"S1"}, "witness_s1");
    auto hs = homology_structure(g0);
    auto rep = identity_rep(g0);
    for (const auto& cls : hs.classes) {
        if (cls.members.size() < 2) continue;
        int i = cls.members[0], j = cls.members[1];
        double pi = g0.weights[static_cast<std::size_t>(i)];
        double pj = g0.weights[static_cast<std::size_t>(j)];
        double vi = g0.atoms[static_cast<std::size_t>(i)][1];
        double vj = g0.atoms[static_cast<std::size_t>(j)][1];
        double norm = std::hypot(vi / pi, vj / pj);
        auto& mi = rep.groups[static_cast<std::size_t>(i)][0].second;
        auto& mj = rep.groups[static_cast<std::size_t>(j)][0].second;
        mi[2] += t * (vi / pi) / norm;
        mj[2] -= t * (vj / pj) / norm;
        break;
    }
    return rep;
}

ConvergentRep witness_s2(const MixingMeasure& g0, double t) {
    require_label(g0, {"S2"}, "witness_s2");
    auto rep = identity_rep(g0);
    for (int i = 0; i < g0.k(); ++i) {
        const auto& eta = g0.atoms[static_cast<std::size_t>(i)];
        if (std::abs(eta[2]) > 1e-10) continue;
        double dm = t;
        double dt = -2.0 * dm * std::sqrt(eta[1]) / std::sqrt(kTwoPi);
        auto& member = rep.groups[static_cast<std::size_t>(i)][0].second;
        member[0] += dt;
        // dv = dtheta^2 is what makes the order-2 limit system vanish: the
        // first and third limits reduce to (dv - dtheta^2) / (2 sigma^5) etc.
        // once dtheta = -2 dm sigma / sqrt(2 pi) is substituted
        member[1] += dt * dt;
        member[2] += dm;
        break;
    }
    return rep;
}

ConvergentRep witness_s33(const MixingMeasure& g0, double t) {
    require_label(g0, {"S33"}, "witness_s33");
    auto hs = homology_structure(g0);
    auto rep = identity_rep(g0);
    for (const auto& cls : hs.classes) {
        if (!cls.c2) continue;
        int i = cls.members[0], j = cls.members[1];
        double si = std::sqrt(g0.atoms[static_cast<std::size_t>(i)][1]);
        double sj = std::sqrt(g0.atoms[static_cast<std::size_t>(j)][1]);
        rep.groups[static_cast<std::size_t>(i)][0].second[2] += t * si;
        rep.groups[static_cast<std::size_t>(j)][0].second[2] -= t * sj;
        break;
    }
    return rep;
}

WitnessPath make_witness_s0_overfit(const MixingMeasure& g0) {
    return {"s0_overfit", 3, g0, [g0](double t) { return witness_s0_overfit(g0, t); }};
}
WitnessPath make_witness_s1(const MixingMeasure& g0) {
    return {"s1", 1, g0, [g0](double t) { return witness_s1(g0, t); }};
}
WitnessPath make_witness_s2(const MixingMeasure& g0) {
    return {"s2", 2, g0, [g0](double t) { return witness_s2(g0, t); }};
}
WitnessPath make_witness_s33(const MixingMeasure& g0) {
    return {"s33", -1, g0, [g0](double t) { return witness_s33(g0, t); }};
}

bool s0_coefficients_vanish_exactly(double v0d, double m0d) {
    Rational v0(v0d), m0(m0d);  // exact: doubles are dyadic rationals
    Rational mm = m0 * m0 * m0 + m0;

    std::vector<Rational> ts;
    for (int k = 1; k <= 7; ++k) ts.emplace_back(k, 8);

    std::map<DerivIndex, std::vector<Rational>> samples;
    for (const auto& t : ts) {
        std::vector<ExactPerturbation> pert(2);
        Rational dv = -t * t;
        Rational dm = t * t * mm / (2 * v0);
        pert[0] = {Rational(1, 2), {t, dv, dm}};
        pert[1] = {Rational(1, 2), {-t, dv, dm}};
        auto xi = minimal_form_exact_atom(v0, m0, pert, 2);
        for (const auto& [kappa, val] : xi) samples[kappa].push_back(val);
    }
    for (const auto& [kappa, ys] : samples) {
        auto poly = lagrange_coefficients(ts, ys);
        for (std::size_t d = 0; d <= 2 && d < poly.size(); ++d)
            if (poly[d] != 0) return false;
    }
    return true;
}

WitnessCheck verify_coefficients(const WitnessPath& path) {
    WitnessCheck out;
    if (path.rule == "s0_overfit") {
        const auto& eta = path.base.atoms[0];
        out.symbolic = true;
        out.pass = s0_coefficients_vanish_exactly(eta[1], eta[2]);
        out.detail = "order-2 coefficient polynomials have no monomial of degree <= 2";
        return out;
    }
    if (path.rule == "s1") {
        auto rep = path.at(0.37);
        auto dq = delta_quantities(rep);
        double sum = 0.0, scale = 0.0;
        for (int i = 0; i < rep.k0(); ++i) {
            double term = rep.base.weights[static_cast<std::size_t>(i)] *
                          dq.delta_eta[static_cast<std::size_t>(i)][0][2] /
                          rep.base.atoms[static_cast<std::size_t>(i)][1];
            sum += term;
            scale += std::abs(term);
        }
        out.residual = std::abs(sum) / std::max(1e-300, scale);
        out.pass = out.residual < 1e-12;
        out.detail = "sum_i p_i dm_i / v_i";
        return out;
    }
    if (path.rule == "s2") {
        auto rep = path.at(0.25);
        auto dq = delta_quantities(rep);
        double res = 0.0;
        for (int i = 0; i < rep.k0(); ++i) {
            const auto& d = dq.delta_eta[static_cast<std::size_t>(i)][0];
            if (d[2] == 0.0) continue;
            double s = std::sqrt(rep.base.atoms[static_cast<std::size_t>(i)][1]);
            res = std::max(res, std::abs(d[0] + 2.0 * d[2] * s / std::sqrt(kTwoPi)) / std::abs(d[0]));
            res = std::max(res, std::abs(d[1] - d[0] * d[0]) / std::abs(d[1]));
        }
        out.residual = res;
        out.pass = res < 1e-12;
        out.detail = "location/scale schedule identities";
        return out;
    }
    if (path.rule == "s33") {
        auto rep = path.at(0.3);
        auto dq = delta_quantities(rep);
        double res = 0.0;
        for (int u = 0; u <= 3; ++u)
            for (int v = 1; v <= 3; ++v) {
                if ((u + v) % 2 == 0) continue;
                double sum = 0.0, scale = 0.0;
                for (int i = 0; i < rep.k0(); ++i) {
                    const auto& eta = rep.base.atoms[static_cast<std::size_t>(i)];
                    double s = std::sqrt(eta[1]);
                    double term = rep.base.weights[static_cast<std::size_t>(i)] *
                                  std::pow(eta[2], u) *
                                  std::pow(dq.delta_eta[static_cast<std::size_t>(i)][0][2], v) /
                                  std::pow(s, u + v + 1);
                    sum += term;
                    scale += std::abs(term);
                }
                if (scale > 0.0) res = std::max(res, std::abs(sum) / scale);
            }
        out.residual = res;
        out.pass = res < 1e-12;
        out.detail = "odd-parity weighted shape moments";
        return out;
    }
    throw make_error("LogicError", "unknown witness rule " + path.rule);
}

std::vector<double> default_t_grid() {
    std::vector<double> ts;
    for (int i = 0; i <= 6; ++i) ts.push_back(0.2 * std::ldexp(1.0, -i));
    return ts;
}

std::vector<double> default_x_grid(const MixingMeasure& g0, int n) {
    auto [lo, hi] = envelope(g0);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1.0);
    return xs;
}

RatioReport verify_density_ratio(const MixingMeasure& g0, const WitnessPath& path, int s,
                                 const std::vector<double>& x_grid,
                                 const std::vector<double>& t_grid) {
    if (x_grid.size() < 3) throw make_error("GridTooCoarse", "x grid too small");
    std::vector<double> base(x_grid.size());
    double mass = 0.0;
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        base[i] = mixture_density(g0, x_grid[i]);
        double w = i == 0              ? 0.5 * (x_grid[1] - x_grid[0])
                   : i + 1 == x_grid.size() ? 0.5 * (x_grid[i] - x_grid[i - 1])
                                            : 0.5 * (x_grid[i + 1] - x_grid[i - 1]);
        mass += w * base[i];
    }
    if (mass < 1.0 - 1e-10)
        throw make_error("GridTooCoarse", "x grid captures mass " + std::to_string(mass));

    RatioReport report;
    report.s = s;
    auto spec = TransportSpec::order(s);
    for (double t : t_grid) {
        RatioEntry entry;
        entry.t = t;
        if (t == 0.0) {
            entry.applicable = false;
            report.entries.push_back(entry);
            continue;
        }
        auto g = path.at(t).measure();
        auto d = distance(spec, g, g0);
        entry.ws = d.value;
        double sup = 0.0;
        for (std::size_t i = 0; i < x_grid.size(); ++i)
            sup = std::max(sup, std::abs(mixture_density(g, x_grid[i]) - base[i]));
        entry.sup_diff = sup;
        entry.ratio = sup / d.power_value;
        report.entries.push_back(entry);
    }

    std::vector<double> ratios;
    for (const auto& e : report.entries)
        if (e.applicable) ratios.push_back(e.ratio);
    if (!ratios.empty()) {
        report.decay_factor = ratios.front() / ratios.back();
        auto sorted = ratios;
        std::sort(sorted.begin(), sorted.end());
        report.median_ratio = sorted[sorted.size() / 2];
    }
    return report;
}

std::string RatioReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "t,W_s,sup_ratio\n";
    for (const auto& e : entries) {
        if (!e.applicable) continue;
        os << e.t << "," << e.ws << "," << e.ratio << "\n";
    }
    return os.str();
}

}  // namespace mixsing
