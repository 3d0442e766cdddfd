#include "mixsing/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

namespace mixsing {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kSqrt2 = 1.4142135623730950488;

// ---------------------------------------------------------------------------
// Skew-normal derivative term algebra.
//
// Every partial derivative of f(x|theta,v,m) = 2 v^{-1/2} phi(z) Phi(m z),
// z = (x - theta) / sqrt(v), is a finite sum of terms
//
//     c * m^p * v^{q/2} * z^j * B(m z) * phi(z),   B in {Phi, phi},
//
// and this family is closed under d/dtheta, d/dv, d/dm.  We build the term
// map once per multi-index and evaluate it at concrete (eta, x).
// ---------------------------------------------------------------------------

enum BKind : int { BPhiCdf = 0, BPhiPdf = 1 };

struct TermKey {
    int p;  // power of m
    int q;  // power of v^{1/2}
    int j;  // power of z
    int b;  // BKind
    bool operator<(const TermKey& o) const {
        return std::tie(p, q, j, b) < std::tie(o.p, o.q, o.j, o.b);
    }
};

using TermMap = std::map<TermKey, double>;

void add_term(TermMap& t, TermKey k, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = t.emplace(k, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0.0) t.erase(it);
    }
}

// d/dz of one term, as a term map (no v/m prefactor bookkeeping here).
void dz_term(const TermKey& k, double c, TermMap& out) {
    if (k.j >= 1) add_term(out, {k.p, k.q, k.j - 1, k.b}, c * k.j);
    add_term(out, {k.p, k.q, k.j + 1, k.b}, -c);  // phi'(z) = -z phi(z)
    if (k.b == BPhiCdf)
        add_term(out, {k.p + 1, k.q, k.j, BPhiPdf}, c);  // Phi'(mz) * m
    else
        add_term(out, {k.p + 2, k.q, k.j + 1, BPhiPdf}, -c);  // phi'(mz) * m
}

TermMap d_theta(const TermMap& t) {
    TermMap dz;
    for (const auto& [k, c] : t) dz_term(k, c, dz);
    TermMap out;
    for (const auto& [k, c] : dz) add_term(out, {k.p, k.q - 1, k.j, k.b}, -c);  // dz/dtheta = -v^{-1/2}
    return out;
}

TermMap d_v(const TermMap& t) {
    TermMap out;
    for (const auto& [k, c] : t)
        add_term(out, {k.p, k.q - 2, k.j, k.b}, c * (0.5 * k.q));  // d/dv of v^{q/2}
    TermMap dz;
    for (const auto& [k, c] : t) dz_term(k, c, dz);
    for (const auto& [k, c] : dz)
        add_term(out, {k.p, k.q - 2, k.j + 1, k.b}, -0.5 * c);  // dz/dv = -z/(2v)
    return out;
}

TermMap d_m(const TermMap& t) {
    TermMap out;
    for (const auto& [k, c] : t) {
        if (k.p >= 1) add_term(out, {k.p - 1, k.q, k.j, k.b}, c * k.p);
        if (k.b == BPhiCdf)
            add_term(out, {k.p, k.q, k.j + 1, BPhiPdf}, c);  // d/dm Phi(mz) = z phi(mz)
        else
            add_term(out, {k.p + 1, k.q, k.j + 2, BPhiPdf}, -c);  // d/dm phi(mz) = -m z^2 phi(mz)
    }
    return out;
}

const TermMap& skew_terms(const DerivIndex& alpha) {
    static std::map<DerivIndex, TermMap> cache;
    static std::recursive_mutex mu;  // builder recurses into lower orders
    std::lock_guard<std::recursive_mutex> lock(mu);
    auto it = cache.find(alpha);
    if (it != cache.end()) return it->second;
    TermMap t;
    if (alpha == DerivIndex{0, 0, 0}) {
        add_term(t, {0, -1, 0, BPhiCdf}, 2.0);  // f itself
    } else {
        DerivIndex prev = alpha;
        if (prev[0] > 0) {
            --prev[0];
            t = d_theta(skew_terms(prev));
        } else if (prev[1] > 0) {
            --prev[1];
            t = d_v(skew_terms(prev));
        } else {
            --prev[2];
            t = d_m(skew_terms(prev));
        }
    }
    return cache.emplace(alpha, std::move(t)).first->second;
}

double eval_terms(const TermMap& t, double theta, double v, double m, double x) {
    double sv = std::sqrt(v);
    double z = (x - theta) / sv;
    double mz = m * z;
    double phiz = norm_pdf(z);
    double Phimz = norm_cdf(mz);
    double phimz = norm_pdf(mz);
    double lsv = std::log(sv);
    double out = 0.0;
    for (const auto& [k, c] : t) {
        double mp = 1.0;
        if (k.p != 0) {
            if (m == 0.0) continue;
            mp = std::pow(m, k.p);
        }
        double vq = std::exp(k.q * lsv);
        double zj = (k.j == 0) ? 1.0 : std::pow(z, k.j);
        double B = (k.b == BPhiCdf) ? Phimz : phimz;
        out += c * mp * vq * zj * B * phiz;
    }
    return out;
}

// -------------------------- gamma family ----------------------------------

double gamma_pdf(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    return std::exp(a * std::log(b) + (a - 1.0) * std::log(x) - b * x - std::lgamma(a));
}

double digamma(double x) {
    // standard asymptotic expansion with upward recurrence
    double s = 0.0;
    while (x < 8.0) {
        s -= 1.0 / x;
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    return s + std::log(x) - 0.5 * inv -
           inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
}

double trigamma(double x) {
    double s = 0.0;
    while (x < 8.0) {
        s += 1.0 / (x * x);
        x += 1.0;
    }
    double inv = 1.0 / x, inv2 = inv * inv;
    return s + inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 / 42.0))));
}

double gamma_partial_analytic(double a, double b, double x, int da, int db) {
    double f = gamma_pdf(a, b, x);
    if (x <= 0.0) return 0.0;
    double L = std::log(b) + std::log(x) - digamma(a);  // d log f / da
    double M = a / b - x;                               // d log f / db
    if (da == 0 && db == 0) return f;
    if (da == 1 && db == 0) return f * L;
    if (da == 0 && db == 1) return f * M;
    if (da == 2 && db == 0) return f * (L * L - trigamma(a));
    if (da == 0 && db == 2) return f * (M * M - a / (b * b));
    if (da == 1 && db == 1) return f * (L * M + 1.0 / b);
    throw make_error("OrderTooHigh", "gamma analytic derivatives stop at order 2");
}

double gamma_partial(double a, double b, double x, int da, int db);

double richardson_fd(const std::function<double(double)>& g, double h) {
    auto d = [&](double hh) { return (g(hh) - g(-hh)) / (2.0 * hh); };
    double d1 = d(h), d2 = d(h / 2.0);
    return (4.0 * d2 - d1) / 3.0;  // two-level Richardson extrapolation
}

double gamma_partial(double a, double b, double x, int da, int db) {
    if (da + db <= 2) return gamma_partial_analytic(a, b, x, da, db);
    if (da + db > 6) throw make_error("OrderTooHigh", "gamma derivatives capped at order 6");
    double h = 1e-3;
    if (da > 0) {
        auto g = [&](double hh) { return gamma_partial(a + hh, b, x, da - 1, db); };
        return richardson_fd(g, h);
    }
    auto g = [&](double hh) { return gamma_partial(a, b + hh, x, da, db - 1); };
    return richardson_fd(g, h);
}

}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double log_norm_cdf(double x) {
    if (x > -8.0) return std::log(norm_cdf(x));
    // asymptotic series Phi(x) ~ phi(x)/(-x) (1 - 1/x^2 + 3/x^4 - 15/x^6)
    double x2 = x * x;
    double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return std::log(kInvSqrt2Pi) - 0.5 * x2 - std::log(-x) + std::log(series);
}

double density(const ParamVec& eta, double x) {
    switch (eta.family) {
        case Family::SkewNormal: {
            double sv = std::sqrt(eta[1]);
            double z = (x - eta[0]) / sv;
            return (2.0 / sv) * norm_pdf(z) * norm_cdf(eta[2] * z);
        }
        case Family::Gaussian: {
            double sv = std::sqrt(eta[1]);
            return norm_pdf((x - eta[0]) / sv) / sv;
        }
        case Family::Gamma:
            return gamma_pdf(eta[0], eta[1], x);
    }
    return 0.0;
}

double partial(const ParamVec& eta, double x, const DerivIndex& alpha) {
    for (int c = 0; c < 3; ++c)
        if (alpha[static_cast<std::size_t>(c)] < 0)
            throw make_error("BadParams", "negative derivative index");
    if (eta.family != Family::SkewNormal && alpha[2] != 0)
        throw make_error("BadParams", "third derivative coordinate needs the skew-normal family");
    if (order(alpha) > 6) throw make_error("OrderTooHigh", "derivative order capped at 6");
    switch (eta.family) {
        case Family::SkewNormal:
            return eval_terms(skew_terms(alpha), eta[0], eta[1], eta[2], x);
        case Family::Gaussian:
            // gaussian f(x|theta,v) equals the skew algebra at m = 0
            return eval_terms(skew_terms(alpha), eta[0], eta[1], 0.0, x);
        case Family::Gamma:
            return gamma_partial(eta[0], eta[1], x, alpha[0], alpha[1]);
    }
    return 0.0;
}

std::array<double, 3> gradient(const ParamVec& eta, double x) {
    std::array<double, 3> g{0.0, 0.0, 0.0};
    g[0] = partial(eta, x, {1, 0, 0});
    g[1] = partial(eta, x, {0, 1, 0});
    if (eta.family == Family::SkewNormal) g[2] = partial(eta, x, {0, 0, 1});
    return g;
}

std::vector<double> pde_residuals(const ParamVec& eta, double x) {
    switch (eta.family) {
        case Family::SkewNormal: {
            double v = eta[1], m = eta[2];
            double ftt = partial(eta, x, {2, 0, 0});
            double fv = partial(eta, x, {0, 1, 0});
            double fm = partial(eta, x, {0, 0, 1});
            double fmm = partial(eta, x, {0, 0, 2});
            double fvm = partial(eta, x, {0, 1, 1});
            double r1 = ftt - 2.0 * fv + ((m * m * m + m) / v) * fm;
            double r2 = 2.0 * m * fm + (m * m + 1.0) * fmm + 2.0 * v * m * fvm;
            return {r1, r2};
        }
        case Family::Gaussian: {
            double ftt = partial(eta, x, {2, 0, 0});
            double fv = partial(eta, x, {0, 1, 0});
            return {ftt - 2.0 * fv};
        }
        case Family::Gamma: {
            double a = eta[0], b = eta[1];
            double fb = partial(eta, x, {0, 1, 0});
            ParamVec up = eta;
            up[0] = a + 1.0;
            double r = fb - (a / b) * density(eta, x) + (a / b) * density(up, x);
            return {r};
        }
    }
    return {};
}

double mixture_density(const MixingMeasure& g, double x) {
    double s = 0.0;
    for (int i = 0; i < g.k(); ++i)
        s += g.weights[static_cast<std::size_t>(i)] * density(g.atoms[static_cast<std::size_t>(i)], x);
    return s;
}

double log_mixture_density(const MixingMeasure& g, double x) {
    // log-sum-exp over component log densities; safe deep in the tails
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> ls(static_cast<std::size_t>(g.k()));
    for (int i = 0; i < g.k(); ++i) {
        const auto& eta = g.atoms[static_cast<std::size_t>(i)];
        double l;
        switch (eta.family) {
            case Family::SkewNormal: {
                double sv = std::sqrt(eta[1]);
                double z = (x - eta[0]) / sv;
                l = std::log(2.0) - std::log(sv) + std::log(kInvSqrt2Pi) - 0.5 * z * z +
                    log_norm_cdf(eta[2] * z);
                break;
            }
            case Family::Gaussian: {
                double sv = std::sqrt(eta[1]);
                double z = (x - eta[0]) / sv;
                l = -std::log(sv) + std::log(kInvSqrt2Pi) - 0.5 * z * z;
                break;
            }
            case Family::Gamma: {
                if (x <= 0.0) {
                    l = -std::numeric_limits<double>::infinity();
                } else {
                    l = eta[0] * std::log(eta[1]) + (eta[0] - 1.0) * std::log(x) - eta[1] * x -
                        std::lgamma(eta[0]);
                }
                break;
            }
            default:
                l = -std::numeric_limits<double>::infinity();
        }
        l += std::log(g.weights[static_cast<std::size_t>(i)]);
        ls[static_cast<std::size_t>(i)] = l;
        best = std::max(best, l);
    }
    if (!std::isfinite(best)) return best;
    double s = 0.0;
    for (double l : ls) s += std::exp(l - best);
    return best + std::log(s);
}

std::pair<double, double> envelope(const MixingMeasure& g, double nsigma) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& eta : g.atoms) {
        if (eta.family == Family::Gamma) {
            // gamma tails are subexponential; nsigma standard deviations keep
            // far more mass than the gaussian +-nsigma rule, so pad in the
            // exponential scale (b x ~ a + 5 sqrt(a) + 3.75 nsigma keeps the
            // survival mass below ~1e-10 for nsigma = 8)
            lo = std::min(lo, 0.0);
            hi = std::max(hi, (eta[0] + 5.0 * std::sqrt(eta[0]) + 3.75 * nsigma) / eta[1]);
        } else {
            double sd = std::sqrt(eta[1]);
            lo = std::min(lo, eta[0] - nsigma * sd);
            hi = std::max(hi, eta[0] + nsigma * sd);
        }
    }
    return {lo, hi};
}

}  // namespace mixsing
