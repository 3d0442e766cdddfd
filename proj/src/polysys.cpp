#include "mixsing/polysys.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>

#include "mixsing/reduce.hpp"

namespace mixsing {

namespace {

std::uint64_t fold_u64(std::uint64_t h, std::uint64_t v) { return hash_combine(h, v); }

std::uint64_t fold_double(std::uint64_t h, double x) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof(bits));
    return hash_combine(h, bits);
}

double int_pow(double x, int e) {
    double out = 1.0;
    for (int i = 0; i < e; ++i) out *= x;
    return out;
}

double factorial_d(int n) {
    double out = 1.0;
    for (int i = 2; i <= n; ++i) out *= i;
    return out;
}

}  // namespace

std::uint64_t PolySystem::hash() const {
    std::uint64_t h = fnv1a("polysys", 7);
    h = fold_u64(h, static_cast<std::uint64_t>(atoms));
    h = fold_u64(h, static_cast<std::uint64_t>(unknowns));
    h = fold_u64(h, weight_group ? 1 : 0);
    for (int s : scale) h = fold_u64(h, static_cast<std::uint64_t>(s));
    for (const auto& eq : equations) {
        h = fold_u64(h, eq.terms.size());
        for (const auto& t : eq.terms) {
            for (int p : t.pow) h = fold_u64(h, static_cast<std::uint64_t>(p));
            for (double c : t.coeff) h = fold_double(h, c);
        }
    }
    return h;
}

PolySystem build_skew_system(double v0, double m0, int atoms, int r) {
    if (atoms < 1 || r < 1) throw make_error("BadParams", "need atoms >= 1 and r >= 1");
    if (m0 == 0.0 || v0 <= 0.0)
        throw make_error("DomainError", "skew system coefficients need m0 != 0, v0 > 0");
    PolySystem sys;
    sys.atoms = atoms;
    sys.unknowns = 3;
    sys.weight_group = true;
    sys.scale = {1, 2, 2};
    for (const auto& beta : f_basis(r)) {
        int w = weighted_degree(beta);
        if (w > r) continue;
        SysEquation eq;
        // all alpha sharing beta's weighted degree (|alpha| <= wd is automatic)
        for (int a23 = 0; 2 * a23 <= w; ++a23) {
            int a1 = w - 2 * a23;
            for (int a2 = 0; a2 <= a23; ++a2) {
                DerivIndex alpha{a1, a2, a23 - a2};
                auto it = reduce_skew(alpha).find(beta);
                if (it == reduce_skew(alpha).end()) continue;
                double c = it->second.eval(m0, v0) /
                           (factorial_d(alpha[0]) * factorial_d(alpha[1]) * factorial_d(alpha[2]));
                if (c == 0.0) continue;
                SysTerm t;
                t.pow = alpha;
                t.coeff = {c};
                eq.terms.push_back(t);
            }
        }
        sys.equations.push_back(std::move(eq));
        sys.labels.push_back(beta);
    }
    return sys;
}

PolySystem build_gaussian_system(int atoms, int r) {
    if (atoms < 1 || r < 1) throw make_error("BadParams", "need atoms >= 1 and r >= 1");
    PolySystem sys;
    sys.atoms = atoms;
    sys.unknowns = 2;
    sys.weight_group = true;
    sys.scale = {1, 2};
    for (int o = 1; o <= r; ++o) {
        SysEquation eq;
        for (int n2 = 0; 2 * n2 <= o; ++n2) {
            int n1 = o - 2 * n2;
            SysTerm t;
            t.pow = {n1, n2, 0};
            t.coeff = {1.0 / (factorial_d(n1) * factorial_d(n2))};
            eq.terms.push_back(t);
        }
        sys.equations.push_back(std::move(eq));
        sys.labels.push_back({o, 0, 0});
    }
    return sys;
}

PolySystem build_sbar_system(const std::vector<double>& weights,
                             const std::vector<double>& shapes, int s) {
    if (weights.size() != shapes.size() || weights.empty())
        throw make_error("BadParams", "weights and shapes must have equal positive length");
    for (double w : weights)
        if (!(w > 0.0)) throw make_error("BadWeights", "sbar system weights must be positive");
    PolySystem sys;
    sys.atoms = static_cast<int>(weights.size());
    sys.unknowns = 1;
    sys.weight_group = false;
    sys.scale = {1};
    for (int u = 0; u <= s; ++u) {
        SysTerm t;
        t.pow = {u + 1, 0, 0};
        t.coeff.resize(weights.size());
        for (std::size_t i = 0; i < weights.size(); ++i)
            t.coeff[i] = weights[i] * int_pow(shapes[i], u);
        SysEquation eq;
        eq.terms.push_back(std::move(t));
        sys.equations.push_back(std::move(eq));
        sys.labels.push_back({u + 1, 0, 0});
    }
    return sys;
}

PolySystem select_equations(const PolySystem& sys, const std::vector<int>& rows) {
    PolySystem out = sys;
    out.equations.clear();
    out.labels.clear();
    for (int r : rows) {
        out.equations.push_back(sys.equations.at(static_cast<std::size_t>(r)));
        if (!sys.labels.empty()) out.labels.push_back(sys.labels.at(static_cast<std::size_t>(r)));
    }
    // drop per-atom unknowns that no retained equation touches; leaving them in
    // would let the nontriviality constraint be met by an inert coordinate
    std::array<bool, 3> used{false, false, false};
    for (const auto& eq : out.equations)
        for (const auto& t : eq.terms)
            for (int c = 0; c < sys.unknowns; ++c)
                if (t.pow[static_cast<std::size_t>(c)] > 0) used[static_cast<std::size_t>(c)] = true;
    std::vector<int> keep;
    for (int c = 0; c < sys.unknowns; ++c)
        if (used[static_cast<std::size_t>(c)]) keep.push_back(c);
    if (static_cast<int>(keep.size()) < sys.unknowns) {
        out.unknowns = static_cast<int>(keep.size());
        out.scale.clear();
        for (int c : keep) out.scale.push_back(sys.scale[static_cast<std::size_t>(c)]);
        for (auto& eq : out.equations)
            for (auto& t : eq.terms) {
                std::array<int, 3> pow{0, 0, 0};
                for (std::size_t i = 0; i < keep.size(); ++i)
                    pow[i] = t.pow[static_cast<std::size_t>(keep[i])];
                t.pow = pow;
            }
    }
    return out;
}

std::vector<int> vm_free_rows(const PolySystem& sys) {
    std::vector<int> rows;
    for (std::size_t e = 0; e < sys.labels.size(); ++e)
        if (sys.labels[e][2] == 0) rows.push_back(static_cast<int>(e));
    return rows;
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Solvable: return "solvable";
        case Verdict::Unsolvable: return "unsolvable";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

double eval_equation(const PolySystem& sys, const SysEquation& eq, const std::vector<double>& w,
                     const double* z) {
    Kahan acc;
    for (int j = 0; j < sys.atoms; ++j) {
        const double* x = z + static_cast<std::ptrdiff_t>(j) * sys.unknowns;
        double q = 0.0;
        for (const auto& t : eq.terms) {
            double mono = t.at(j);
            for (int c = 0; c < sys.unknowns; ++c)
                mono *= int_pow(x[c], t.pow[static_cast<std::size_t>(c)]);
            q += mono;
        }
        acc.add(w[static_cast<std::size_t>(j)] * q);
    }
    return acc.sum;
}

// scale z by t^{scale_c} so that the plain norm lands on the unit sphere;
// valid because every equation is homogeneous under this scaling
bool renormalize(const PolySystem& sys, std::vector<double>& z) {
    double n2 = 0.0;
    for (double x : z) n2 += x * x;
    if (!(n2 > 1e-24) || !std::isfinite(n2)) return false;
    auto norm_at = [&](double t) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            int sc = sys.scale[i % static_cast<std::size_t>(sys.unknowns)];
            double zi = z[i] * std::pow(t, sc);
            s += zi * zi;
        }
        return s;
    };
    double lo = 1e-9, hi = 1e9;
    if (norm_at(lo) > 1.0 || norm_at(hi) < 1.0) return false;
    for (int it = 0; it < 200; ++it) {
        double mid = std::sqrt(lo * hi);
        (norm_at(mid) < 1.0 ? lo : hi) = mid;
    }
    double t = std::sqrt(lo * hi);
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] *= std::pow(t, sys.scale[i % static_cast<std::size_t>(sys.unknowns)]);
    return true;
}

struct Objective {
    const PolySystem& sys;
    int nlogit;  // atoms when the weight group is free, else 0
    int nz;
    double floor = 0.0;

    int dim() const { return nlogit + nz; }
    int res_dim() const { return static_cast<int>(sys.equations.size()) + 1; }

    std::vector<double> weights_of(const Eigen::VectorXd& y) const {
        std::vector<double> w(static_cast<std::size_t>(sys.atoms), 1.0);
        if (nlogit > 0) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < nlogit; ++j) mx = std::max(mx, y(j));
            double tot = 0.0;
            for (int j = 0; j < nlogit; ++j) {
                w[static_cast<std::size_t>(j)] = std::exp(y(j) - mx);
                tot += w[static_cast<std::size_t>(j)];
            }
            double open_mass = 1.0 - floor * sys.atoms;
            for (auto& x : w) x = floor + open_mass * x / tot;
        }
        return w;
    }

    Eigen::VectorXd residual(const Eigen::VectorXd& y) const {
        auto w = weights_of(y);
        const double* z = y.data() + nlogit;
        Eigen::VectorXd r(res_dim());
        for (std::size_t e = 0; e < sys.equations.size(); ++e)
            r(static_cast<int>(e)) = eval_equation(sys, sys.equations[e], w, z);
        double n2 = 0.0;
        for (int i = 0; i < nz; ++i) n2 += z[i] * z[i];
        r(res_dim() - 1) = n2 - 1.0;
        return r;
    }
};

void lm_minimize(const Objective& obj, Eigen::VectorXd& y, int max_iters) {
    const int n = obj.dim();
    Eigen::VectorXd r = obj.residual(y);
    double f = r.squaredNorm();
    double lambda = 1e-3;
    Eigen::MatrixXd J(obj.res_dim(), n);
    for (int iter = 0; iter < max_iters; ++iter) {
        for (int i = 0; i < n; ++i) {
            double h = 1e-7 * std::max(1.0, std::abs(y(i)));
            Eigen::VectorXd yp = y, ym = y;
            yp(i) += h;
            ym(i) -= h;
            J.col(i) = (obj.residual(yp) - obj.residual(ym)) / (2.0 * h);
        }
        Eigen::MatrixXd A = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < 1e-16) break;
        bool accepted = false;
        for (int tries = 0; tries < 40; ++tries) {
            Eigen::MatrixXd M = A;
            M.diagonal().array() += lambda;
            Eigen::VectorXd step = M.ldlt().solve(-g);
            Eigen::VectorXd y2 = y + step;
            Eigen::VectorXd r2 = obj.residual(y2);
            double f2 = r2.squaredNorm();
            if (std::isfinite(f2) && f2 < f) {
                y = y2;
                r = r2;
                f = f2;
                lambda = std::max(lambda / 3.0, 1e-14);
                accepted = true;
                if (step.norm() < 1e-15 * (1.0 + y.norm())) iter = max_iters;
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e14) break;
        }
        if (!accepted || f < 1e-30) break;
    }
}

}  // namespace

double system_residual(const PolySystem& sys, const std::vector<double>& weights,
                       const std::vector<double>& vars) {
    if (static_cast<int>(weights.size()) != sys.atoms ||
        static_cast<int>(vars.size()) != sys.atoms * sys.unknowns)
        throw make_error("BadParams", "candidate dimensions do not match the system");
    double worst = 0.0;
    for (const auto& eq : sys.equations)
        worst = std::max(worst, std::abs(eval_equation(sys, eq, weights, vars.data())));
    return worst;
}

SolveReport check_solvable(const PolySystem& sys, const SolveOptions& opts) {
    if (sys.equations.empty()) throw make_error("BadParams", "empty system");
    if (sys.weight_group && !(opts.weight_floor >= 0.0 && opts.weight_floor * sys.atoms < 1.0))
        throw make_error("BadParams", "weight floor must satisfy 0 <= floor * atoms < 1");
    Objective obj{sys, sys.weight_group ? sys.atoms : 0, sys.atoms * sys.unknowns,
                  opts.weight_floor};
    std::uint64_t key = hash_combine(opts.seed, sys.hash());

    SolveReport rep;
    rep.best_residual = std::numeric_limits<double>::infinity();
    for (int start = 0; start < opts.starts; ++start) {
        ++rep.starts_used;
        auto rng = make_rng(key, static_cast<std::uint64_t>(start));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::cauchy_distribution<double> cauchy(0.0, 1.0);
        Eigen::VectorXd y(obj.dim());
        for (int i = 0; i < obj.nlogit; ++i) y(i) = gauss(rng);
        std::vector<double> z(static_cast<std::size_t>(obj.nz));
        for (auto& x : z) x = std::clamp(cauchy(rng), -50.0, 50.0);
        if (!renormalize(sys, z)) {
            for (auto& x : z) x = gauss(rng);
            renormalize(sys, z);
        }
        for (int i = 0; i < obj.nz; ++i) y(obj.nlogit + i) = z[static_cast<std::size_t>(i)];

        lm_minimize(obj, y, opts.max_iters);

        auto w = obj.weights_of(y);
        for (int i = 0; i < obj.nz; ++i) z[static_cast<std::size_t>(i)] = y(obj.nlogit + i);
        if (!renormalize(sys, z)) continue;  // collapsed to the trivial point
        double resid = system_residual(sys, w, z);
        if (resid < rep.best_residual) {
            rep.best_residual = resid;
            rep.weights = w;
            rep.vars = z;
        }
        if (rep.best_residual < opts.solve_tol) break;
    }

    if (rep.best_residual < opts.solve_tol)
        rep.verdict = Verdict::Solvable;
    else if (rep.best_residual > opts.unsolve_tol)
        rep.verdict = Verdict::Unsolvable;
    else
        rep.verdict = Verdict::Inconclusive;
    return rep;
}

namespace {

LadderReport run_ladder(const std::function<PolySystem(int)>& make, int first, int last,
                        const SolveOptions& opts) {
    LadderReport out;
    out.first = first;
    bool clean = true;
    for (int idx = first; idx <= last; ++idx) {
        auto rep = check_solvable(make(idx), opts);
        out.verdicts.push_back(rep.verdict);
        if (rep.verdict == Verdict::Unsolvable) {
            out.value = idx;
            out.exact = clean;
            break;
        }
        if (rep.verdict != Verdict::Solvable) clean = false;
    }
    return out;
}

}  // namespace

LadderReport rho_ladder_skew(double v0, double m0, int extras, int r_max,
                             const SolveOptions& opts) {
    if (extras < 1) throw make_error("BadParams", "need at least one extra atom");
    return run_ladder([&](int r) { return build_skew_system(v0, m0, extras + 1, r); }, 1, r_max,
                      opts);
}

LadderReport rbar_ladder_gaussian(int extras, int r_max, const SolveOptions& opts) {
    if (extras < 1) throw make_error("BadParams", "need at least one extra atom");
    return run_ladder([&](int r) { return build_gaussian_system(extras + 1, r); }, 1, r_max, opts);
}

LadderReport sbar_ladder(const std::vector<double>& weights, const std::vector<double>& shapes,
                         int s_max, const SolveOptions& opts) {
    return run_ladder([&](int s) { return build_sbar_system(weights, shapes, s); }, 0, s_max,
                      opts);
}

}  // namespace mixsing
