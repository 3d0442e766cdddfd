#include "mixsing/reduce.hpp"

#include <mutex>
#include <sstream>

namespace mixsing {

namespace {

Rational pow_rat(const Rational& base, int e) {
    if (e == 0) return Rational(1);
    Rational b = e > 0 ? base : Rational(1) / base;
    int n = e > 0 ? e : -e;
    Rational out(1);
    for (int i = 0; i < n; ++i) out *= b;
    return out;
}

int weighted(const DerivIndex& k) { return k[0] + 2 * k[1] + 2 * k[2]; }

}  // namespace

Laurent Laurent::constant(Rational c) { return mono(0, 0, std::move(c)); }

Laurent Laurent::mono(int pm, int pv, Rational c) {
    Laurent out;
    if (c != 0) out.terms_[{pm, pv}] = std::move(c);
    return out;
}

void Laurent::prune() {
    for (auto it = terms_.begin(); it != terms_.end();)
        it = it->second == 0 ? terms_.erase(it) : std::next(it);
}

Laurent& Laurent::operator+=(const Laurent& o) {
    for (const auto& [k, c] : o.terms_) terms_[k] += c;
    prune();
    return *this;
}

Laurent& Laurent::operator-=(const Laurent& o) {
    for (const auto& [k, c] : o.terms_) terms_[k] -= c;
    prune();
    return *this;
}

Laurent Laurent::operator+(const Laurent& o) const {
    Laurent out = *this;
    out += o;
    return out;
}

Laurent Laurent::operator-(const Laurent& o) const {
    Laurent out = *this;
    out -= o;
    return out;
}

Laurent Laurent::operator*(const Laurent& o) const {
    Laurent out;
    for (const auto& [ka, ca] : terms_)
        for (const auto& [kb, cb] : o.terms_)
            out.terms_[{ka.first + kb.first, ka.second + kb.second}] += ca * cb;
    out.prune();
    return out;
}

Laurent Laurent::operator-() const {
    Laurent out = *this;
    for (auto& [k, c] : out.terms_) c = -c;
    return out;
}

Laurent Laurent::d_m() const {
    Laurent out;
    for (const auto& [k, c] : terms_)
        if (k.first != 0) out.terms_[{k.first - 1, k.second}] += c * k.first;
    out.prune();
    return out;
}

Laurent Laurent::d_v() const {
    Laurent out;
    for (const auto& [k, c] : terms_)
        if (k.second != 0) out.terms_[{k.first, k.second - 1}] += c * k.second;
    out.prune();
    return out;
}

Rational Laurent::eval_exact(const Rational& m, const Rational& v) const {
    Rational out(0);
    for (const auto& [k, c] : terms_) {
        if ((m == 0 && k.first < 0) || (v == 0 && k.second < 0))
            throw make_error("DomainError", "Laurent pole at evaluation point");
        out += c * pow_rat(m, k.first) * pow_rat(v, k.second);
    }
    return out;
}

double Laurent::eval(double m, double v) const {
    double out = 0.0;
    for (const auto& [k, c] : terms_)
        out += static_cast<double>(c) * std::pow(m, k.first) * std::pow(v, k.second);
    return out;
}

std::string Laurent::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << c;
        if (k.first != 0) os << " m^" << k.first;
        if (k.second != 0) os << " v^" << k.second;
    }
    return os.str();
}

bool in_f_basis(const DerivIndex& kappa) {
    return kappa[0] <= 1 && (kappa[2] == 0 || kappa[1] == 0);
}

std::vector<DerivIndex> f_basis(int r) {
    if (r < 1) throw make_error("BadParams", "basis order must be >= 1");
    std::vector<DerivIndex> out;
    for (int n = 1; n <= r; ++n)
        for (int k1 = 0; k1 <= std::min(1, n); ++k1)
            for (int k2 = 0; k2 <= n - k1; ++k2) {
                DerivIndex k{k1, k2, n - k1 - k2};
                if (in_f_basis(k)) out.push_back(k);
            }
    return out;
}

FNormal& fnormal_add_scaled(FNormal& acc, const FNormal& x, const Laurent& s) {
    for (const auto& [k, L] : x) {
        acc[k] += s * L;
        if (acc[k].is_zero()) acc.erase(k);
    }
    return acc;
}

std::string to_string(const FNormal& x) {
    if (x.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, L] : x) {
        if (!first) os << "  +  ";
        first = false;
        os << "(" << L.str() << ") d^(" << k[0] << "," << k[1] << "," << k[2] << ")";
    }
    return os.str();
}

namespace {

// Right-hand sides of the two rewrite rules, as reduced-basis expressions.
FNormal rule1_rhs() {
    FNormal out;
    out[{0, 1, 0}] = Laurent::constant(2);
    out[{0, 0, 1}] = Laurent::mono(3, -1, -1) + Laurent::mono(1, -1, -1);
    return out;
}

FNormal rule2_rhs() {
    FNormal out;
    out[{0, 0, 1}] = Laurent::mono(0, -1, -1);
    out[{0, 0, 2}] = Laurent::mono(1, -1, Rational(-1, 2)) + Laurent::mono(-1, -1, Rational(-1, 2));
    return out;
}

// Formal derivative of a reduced expression along coordinate c; the result
// is generally off-basis and must be normalized afterwards.
FNormal d_formal(const FNormal& x, int c) {
    FNormal out;
    auto add = [&](const DerivIndex& k, const Laurent& L) {
        if (L.is_zero()) return;
        out[k] += L;
        if (out[k].is_zero()) out.erase(k);
    };
    for (const auto& [k, L] : x) {
        DerivIndex up = k;
        ++up[static_cast<std::size_t>(c)];
        add(up, L);
        if (c == 1) add(k, L.d_v());
        if (c == 2) add(k, L.d_m());
    }
    return out;
}

std::map<DerivIndex, FNormal> g_cache;
std::recursive_mutex g_mutex;

const FNormal& normal_of(const DerivIndex& kappa);

FNormal normalize(const FNormal& x) {
    FNormal out;
    for (const auto& [k, L] : x) fnormal_add_scaled(out, normal_of(k), L);
    return out;
}

const FNormal& normal_of(const DerivIndex& kappa) {
    std::lock_guard<std::recursive_mutex> lock(g_mutex);
    auto it = g_cache.find(kappa);
    if (it != g_cache.end()) return it->second;

    FNormal result;
    if (in_f_basis(kappa)) {
        result[kappa] = Laurent::constant(1);
    } else {
        // eliminate theta-orders >= 2 first, then mixed (v, m) derivatives
        FNormal rhs;
        DerivIndex rem{};
        if (kappa[0] >= 2) {
            rhs = rule1_rhs();
            rem = {kappa[0] - 2, kappa[1], kappa[2]};
        } else {
            rhs = rule2_rhs();
            rem = {kappa[0], kappa[1] - 1, kappa[2] - 1};
        }
        for (int c = 0; c < 3; ++c)
            for (int n = 0; n < rem[static_cast<std::size_t>(c)]; ++n) rhs = d_formal(rhs, c);
        result = normalize(rhs);
    }
    return g_cache.emplace(kappa, std::move(result)).first->second;
}

}  // namespace

const FNormal& reduce_skew(const DerivIndex& alpha) {
    for (int c : alpha)
        if (c < 0) throw make_error("BadParams", "derivative orders must be >= 0");
    const FNormal& out = normal_of(alpha);
    // invariant: reduction preserves weighted-degree parity and never raises it
    for (const auto& [k, L] : out) {
        (void)L;
        if (!in_f_basis(k) || weighted(k) > weighted(alpha) ||
            (weighted(k) - weighted(alpha)) % 2 != 0)
            throw make_error("LogicError", "reduction left the admissible cone");
    }
    return out;
}

std::pair<int, Rational> reduce_gaussian(int k_theta, int k_v) {
    if (k_theta < 0 || k_v < 0) throw make_error("BadParams", "derivative orders must be >= 0");
    return {k_theta + 2 * k_v, pow_rat(Rational(1, 2), k_v)};
}

namespace {

Rational factorial(int n) {
    Rational out(1);
    for (int i = 2; i <= n; ++i) out *= i;
    return out;
}

template <typename Scalar, typename Eval>
std::map<DerivIndex, Scalar> assemble_xi(const std::vector<std::pair<Scalar, std::array<Scalar, 3>>>& pert,
                                         int r, Eval&& eval_coeff) {
    std::map<DerivIndex, Scalar> xi;
    for (int n = 1; n <= r; ++n)
        for (int a1 = 0; a1 <= n; ++a1)
            for (int a2 = 0; a2 <= n - a1; ++a2) {
                DerivIndex alpha{a1, a2, n - a1 - a2};
                Scalar moment{};
                for (const auto& [p, d] : pert) {
                    Scalar term = p;
                    for (int c = 0; c < 3; ++c)
                        for (int e = 0; e < alpha[static_cast<std::size_t>(c)]; ++e)
                            term *= d[static_cast<std::size_t>(c)];
                    moment += term;
                }
                Scalar fact = static_cast<Scalar>(factorial(alpha[0]) * factorial(alpha[1]) *
                                                  factorial(alpha[2]));
                moment /= fact;
                for (const auto& [kappa, L] : reduce_skew(alpha)) {
                    Scalar c = eval_coeff(L);
                    xi[kappa] += c * moment;
                }
            }
    return xi;
}

}  // namespace

MinimalForm build_minimal_form(const ConvergentRep& rep, int r) {
    rep.validate();
    if (rep.base.family() != Family::SkewNormal)
        throw make_error("BadFamily", "minimal form is implemented for the skew-normal kernel");
    if (rep.extra_count != 0)
        throw make_error("BadParams", "minimal form requires all atoms grouped to base atoms");
    auto dq = delta_quantities(rep);
    MinimalForm out;
    out.r = r;
    out.basis = f_basis(r);
    for (int i = 0; i < rep.k0(); ++i) {
        const auto& g = rep.groups[static_cast<std::size_t>(i)];
        double m0 = rep.base.atoms[static_cast<std::size_t>(i)][2];
        double v0 = rep.base.atoms[static_cast<std::size_t>(i)][1];
        std::vector<std::pair<double, std::array<double, 3>>> pert;
        for (std::size_t j = 0; j < g.size(); ++j)
            pert.emplace_back(g[j].first, dq.delta_eta[static_cast<std::size_t>(i)][j]);
        out.zeta.push_back(dq.delta_p[static_cast<std::size_t>(i)]);
        out.xi.push_back(
            assemble_xi<double>(pert, r, [&](const Laurent& L) { return L.eval(m0, v0); }));
    }
    return out;
}

std::map<DerivIndex, Rational> minimal_form_exact_atom(const Rational& v0, const Rational& m0,
                                                       const std::vector<ExactPerturbation>& pert,
                                                       int r) {
    std::vector<std::pair<Rational, std::array<Rational, 3>>> p2;
    for (const auto& e : pert) p2.emplace_back(e.p, e.delta);
    return assemble_xi<Rational>(p2, r,
                                 [&](const Laurent& L) { return L.eval_exact(m0, v0); });
}

}  // namespace mixsing
