#include "mixsing/estimate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "mixsing/kernels.hpp"

namespace mixsing {

namespace {

// portable uniform / normal / gamma transforms over a mt19937_64 stream
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_pos(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

double normal01(std::mt19937_64& rng) {
    double u1 = uniform_pos(rng), u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Marsaglia-Tsang; the a < 1 case boosts through a + 1
double gamma_draw(std::mt19937_64& rng, double a) {
    if (a < 1.0) {
        double u = uniform_pos(rng);
        return gamma_draw(rng, a + 1.0) * std::pow(u, 1.0 / a);
    }
    double d = a - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = normal01(rng);
        double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        double v = t * t * t;
        double u = uniform_pos(rng);
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

double draw_kernel(std::mt19937_64& rng, const ParamVec& eta) {
    switch (eta.family) {
        case Family::SkewNormal: {
            double m = eta[2], s = std::sqrt(eta[1]);
            double delta = m / std::sqrt(1.0 + m * m);
            double z0 = normal01(rng), z1 = normal01(rng);
            double z = delta * std::abs(z0) + std::sqrt(1.0 - delta * delta) * z1;
            return eta[0] + s * z;
        }
        case Family::Gaussian:
            return eta[0] + std::sqrt(eta[1]) * normal01(rng);
        case Family::Gamma:
            return gamma_draw(rng, eta[0]) / eta[1];
    }
    throw make_error("LogicError", "unknown family");
}

double total_loglik(const std::vector<double>& data, const MixingMeasure& g) {
    Kahan acc;
    for (double x : data) acc.add(std::log(std::max(mixture_density(g, x), 1e-300)));
    return acc.sum;
}

// Euclidean projection onto the simplex with floor c0 (clamp-and-renormalize
// fixed point; exact after at most k passes).
void project_weights(std::vector<double>& p, double c0) {
    const std::size_t k = p.size();
    std::vector<bool> fixed(k, false);
    for (std::size_t pass = 0; pass < k; ++pass) {
        double free_sum = 0.0, fixed_mass = 0.0;
        for (std::size_t j = 0; j < k; ++j)
            (fixed[j] ? fixed_mass : free_sum) += fixed[j] ? c0 : std::max(p[j], 0.0);
        double target = 1.0 - fixed_mass;
        bool changed = false;
        for (std::size_t j = 0; j < k; ++j) {
            if (fixed[j]) continue;
            double q = std::max(p[j], 0.0) / std::max(free_sum, 1e-300) * target;
            if (q < c0) {
                fixed[j] = true;
                changed = true;
            } else {
                p[j] = q;
            }
        }
        if (!changed) break;
    }
    for (std::size_t j = 0; j < k; ++j)
        if (fixed[j]) p[j] = c0;
    double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= s;
}

MixingMeasure initial_measure(const std::vector<double>& sorted, Family family, int k,
                              const ParamBox& box, std::mt19937_64& rng, bool perturb) {
    const auto n = sorted.size();
    double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double x : sorted) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n);

    std::vector<ParamVec> atoms;
    std::vector<double> w(static_cast<std::size_t>(k), 1.0 / k);
    for (int j = 0; j < k; ++j) {
        double q = sorted[static_cast<std::size_t>((j + 0.5) / k * static_cast<double>(n))];
        ParamVec eta;
        eta.family = family;
        if (family == Family::Gamma) {
            // moment seed: a = mean^2 / var, b = mean / var, spread over quantiles
            double b = std::max(mean, 1e-3) / std::max(var, 1e-6);
            eta[0] = std::max(1.0, q * b);
            eta[1] = b;
        } else {
            eta[0] = q;
            eta[1] = std::max(var / (k * k), 2.0 * box.lo[1]);
            if (family == Family::SkewNormal) eta[2] = 0.0;
        }
        if (perturb) {
            eta[0] += 0.3 * std::sqrt(var) * normal01(rng);
            eta[1] *= std::exp(0.4 * normal01(rng));
            if (family == Family::SkewNormal) eta[2] = normal01(rng);
        }
        atoms.push_back(box.clamp(eta));
    }
    MixingMeasure g;
    g.atoms = std::move(atoms);
    g.weights = std::move(w);
    return g;
}

struct StartResult {
    MixingMeasure g;
    double loglik = -std::numeric_limits<double>::infinity();
    bool converged = false;
};

StartResult em_gaussian(const std::vector<double>& data, MixingMeasure g, const ParamBox& box,
                        const FitConfig& cfg) {
    const int k = g.k();
    const auto n = data.size();
    double prev = total_loglik(data, g);
    StartResult out;
    for (int it = 0; it < cfg.max_iters; ++it) {
        std::vector<double> nj(static_cast<std::size_t>(k), 0.0);
        std::vector<double> sx(static_cast<std::size_t>(k), 0.0);
        std::vector<double> sxx(static_cast<std::size_t>(k), 0.0);
        for (double x : data) {
            double p = 0.0;
            std::array<double, 64> resp{};
            for (int j = 0; j < k; ++j) {
                resp[static_cast<std::size_t>(j)] =
                    g.weights[static_cast<std::size_t>(j)] *
                    density(g.atoms[static_cast<std::size_t>(j)], x);
                p += resp[static_cast<std::size_t>(j)];
            }
            if (p <= 0.0) continue;
            for (int j = 0; j < k; ++j) {
                double r = resp[static_cast<std::size_t>(j)] / p;
                nj[static_cast<std::size_t>(j)] += r;
                sx[static_cast<std::size_t>(j)] += r * x;
                sxx[static_cast<std::size_t>(j)] += r * x * x;
            }
        }
        if (!cfg.fix_weights) {
            std::vector<double> w(static_cast<std::size_t>(k));
            for (int j = 0; j < k; ++j) w[static_cast<std::size_t>(j)] = nj[static_cast<std::size_t>(j)] / static_cast<double>(n);
            project_weights(w, box.c0);
            g.weights = w;
        }
        for (int j = 0; j < k; ++j) {
            auto ju = static_cast<std::size_t>(j);
            if (nj[ju] < 1e-10) continue;
            auto& eta = g.atoms[ju];
            double mu = sx[ju] / nj[ju];
            eta[0] = mu;
            if (!cfg.location_only) eta[1] = sxx[ju] / nj[ju] - mu * mu;
            eta = box.clamp(eta);
        }
        double cur = total_loglik(data, g);
        if (std::abs(cur - prev) < cfg.tol * (1.0 + std::abs(cur))) {
            out.converged = true;
            prev = cur;
            break;
        }
        prev = cur;
    }
    out.g = std::move(g);
    out.loglik = prev;
    return out;
}

// unconstrained parameterization: tanh box transform per coordinate plus
// floored-softmax weights
struct AscentParam {
    Family family;
    int k;
    int d;
    ParamBox box;

    int dim() const { return k + k * d; }

    MixingMeasure decode(const Eigen::VectorXd&) const;
};

MixingMeasure AscentParam::decode(const Eigen::VectorXd& u) const {
    MixingMeasure g;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) mx = std::max(mx, u(j));
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(u(j) - mx);
    for (int j = 0; j < k; ++j)
        g.weights.push_back(box.c0 + (1.0 - k * box.c0) * std::exp(u(j) - mx) / z);
    for (int j = 0; j < k; ++j) {
        ParamVec eta;
        eta.family = family;
        for (int c = 0; c < d; ++c) {
            double lo = box.lo[static_cast<std::size_t>(c)], hi = box.hi[static_cast<std::size_t>(c)];
            eta[c] = lo + (hi - lo) * 0.5 * (std::tanh(u(k + j * d + c)) + 1.0);
        }
        g.atoms.push_back(eta);
    }
    return g;
}

// negative mean loglik and its gradient in the unconstrained coordinates
double ascent_objective(const AscentParam& ap, const std::vector<double>& data,
                        const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
    auto g = ap.decode(u);
    const int k = ap.k, d = ap.d;
    const double n = static_cast<double>(data.size());

    Eigen::VectorXd dldp = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd dldeta = Eigen::MatrixXd::Zero(k, d);
    Kahan acc;
    for (double x : data) {
        double p = mixture_density(g, x);
        if (p < 1e-300) p = 1e-300;
        acc.add(std::log(p));
        if (!grad) continue;
        for (int j = 0; j < k; ++j) {
            const auto& eta = g.atoms[static_cast<std::size_t>(j)];
            dldp(j) += density(eta, x) / p;
            auto gr = gradient(eta, x);
            for (int c = 0; c < d; ++c)
                dldeta(j, c) += g.weights[static_cast<std::size_t>(j)] * gr[static_cast<std::size_t>(c)] / p;
        }
    }
    double f = -acc.sum / n;
    if (grad) {
        grad->setZero(ap.dim());
        // weights: p_j = c0 + open * s_j with softmax s
        double open = 1.0 - k * ap.box.c0;
        Eigen::VectorXd s(k);
        for (int j = 0; j < k; ++j)
            s(j) = (g.weights[static_cast<std::size_t>(j)] - ap.box.c0) / open;
        double inner = dldp.dot(s);
        for (int l = 0; l < k; ++l) (*grad)(l) = -open * s(l) * (dldp(l) - inner) / n;
        for (int j = 0; j < k; ++j)
            for (int c = 0; c < d; ++c) {
                double lo = ap.box.lo[static_cast<std::size_t>(c)], hi = ap.box.hi[static_cast<std::size_t>(c)];
                double th = std::tanh(u(k + j * d + c));
                (*grad)(k + j * d + c) = -dldeta(j, c) * (hi - lo) * 0.5 * (1.0 - th * th) / n;
            }
    }
    return f;
}

// compact two-loop L-BFGS with Armijo backtracking
StartResult lbfgs_ascent(const std::vector<double>& data, const MixingMeasure& init,
                         const ParamBox& box, const FitConfig& cfg) {
    const int k = init.k();
    const int d = coord_count(init.family());
    AscentParam ap{init.family(), k, d, box};

    // encode the initial measure
    Eigen::VectorXd u(ap.dim());
    double open = 1.0 - k * box.c0;
    for (int j = 0; j < k; ++j) {
        double s = (std::clamp(init.weights[static_cast<std::size_t>(j)], box.c0 + 1e-9, 1.0) - box.c0) / open;
        u(j) = std::log(std::max(s, 1e-12));
    }
    for (int j = 0; j < k; ++j)
        for (int c = 0; c < d; ++c) {
            double lo = box.lo[static_cast<std::size_t>(c)], hi = box.hi[static_cast<std::size_t>(c)];
            double y = (init.atoms[static_cast<std::size_t>(j)][c] - lo) / (hi - lo) * 2.0 - 1.0;
            u(k + j * d + c) = std::atanh(std::clamp(y, -0.999999, 0.999999));
        }

    Eigen::VectorXd g(ap.dim());
    double f = ascent_objective(ap, data, u, &g);
    // zeroing the weight block of every gradient keeps the softmax coordinates
    // at their encoded values for the whole run
    if (cfg.fix_weights) g.head(k).setZero();
    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> hist;  // (s, y)
    StartResult out;
    const double n = static_cast<double>(data.size());

    for (int it = 0; it < cfg.max_iters; ++it) {
        // two-loop recursion
        Eigen::VectorXd q = g;
        std::vector<double> alpha(hist.size());
        for (std::size_t i = hist.size(); i-- > 0;) {
            const auto& [s, y] = hist[i];
            double rho = 1.0 / y.dot(s);
            alpha[i] = rho * s.dot(q);
            q -= alpha[i] * y;
        }
        if (!hist.empty()) {
            const auto& [s, y] = hist.back();
            q *= s.dot(y) / y.dot(y);
        }
        for (std::size_t i = 0; i < hist.size(); ++i) {
            const auto& [s, y] = hist[i];
            double rho = 1.0 / y.dot(s);
            q += (alpha[i] - rho * y.dot(q)) * s;
        }
        Eigen::VectorXd dir = -q;
        double slope = g.dot(dir);
        if (slope > 0.0) {
            dir = -g;
            slope = -g.squaredNorm();
        }

        double step = hist.empty() ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-12)) : 1.0;
        double fn = f;
        Eigen::VectorXd un = u;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            un = u + step * dir;
            fn = ascent_objective(ap, data, un, nullptr);
            if (fn <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        Eigen::VectorXd gn(ap.dim());
        ascent_objective(ap, data, un, &gn);
        if (cfg.fix_weights) gn.head(k).setZero();
        Eigen::VectorXd sv = un - u, yv = gn - g;
        if (yv.dot(sv) > 1e-12 * sv.norm() * yv.norm()) {
            hist.emplace_back(sv, yv);
            if (hist.size() > 6) hist.pop_front();
        }
        bool stalled = std::abs(f - fn) * n < cfg.tol * (1.0 + std::abs(fn) * n);
        u = un;
        f = fn;
        g = gn;
        if (stalled) {
            out.converged = true;
            break;
        }
    }
    out.g = ap.decode(u);
    out.loglik = -f * n;
    return out;
}

}  // namespace

Sample sample(const MixingMeasure& g0, int n, std::uint64_t seed) {
    if (n < 1) throw make_error("BadConfig", "sample size must be positive");
    auto rng = make_rng(seed, hash_string("mixsing.sample"));
    Sample s;
    s.seed = seed;
    s.generator = "mt19937_64/inverse-free transforms";
    s.x.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double u = uniform01(rng);
        int j = 0;
        double c = g0.weights[0];
        while (j + 1 < g0.k() && u > c) c += g0.weights[static_cast<std::size_t>(++j)];
        s.x.push_back(draw_kernel(rng, g0.atoms[static_cast<std::size_t>(j)]));
    }
    return s;
}

FitResult fit_mle(const std::vector<double>& data, Family family, int k, const ParamBox& box,
                  const FitConfig& cfg) {
    if (data.empty()) throw make_error("BadData", "empty data");
    if (k < 1 || k > 64) throw make_error("BadConfig", "component count out of range");
    box.validate(k);
    if (box.family != family) throw make_error("BadConfig", "box family mismatch");

    std::vector<double> sorted = data;
    std::sort(sorted.begin(), sorted.end());

    FitResult best;
    best.loglik = -std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (int start = 0; start < cfg.starts; ++start) {
        auto rng = make_rng(cfg.seed, hash_combine(hash_string("mixsing.fit"), static_cast<std::uint64_t>(start)));
        MixingMeasure init;
        if (start == 0 && cfg.init) {
            init = *cfg.init;
            if (init.k() != k || init.family() != family)
                throw make_error("BadConfig", "warm start has the wrong arity or family");
            for (auto& eta : init.atoms) eta = box.clamp(eta);
        } else {
            init = initial_measure(sorted, family, k, box, rng, start > 0);
        }
        if (cfg.location_only && cfg.fixed_variance > 0.0)
            for (auto& eta : init.atoms) eta[1] = cfg.fixed_variance;
        StartResult res = family == Family::Gaussian ? em_gaussian(data, init, box, cfg)
                                                     : lbfgs_ascent(data, init, box, cfg);
        any_converged = any_converged || res.converged;
        if (res.loglik > best.loglik) {
            best.loglik = res.loglik;
            best.g = res.g;
            best.converged = res.converged;
        }
        best.starts_used = start + 1;
    }
    if (!any_converged) throw make_error("NoConvergedStart", "no start reached the stall tolerance");
    return best;
}

namespace {

// 64-point Gauss-Legendre nodes on [-1, 1] via Newton on the recurrence
const std::pair<std::vector<double>, std::vector<double>>& gl64() {
    static const auto rule = [] {
        const int n = 64;
        std::vector<double> x(n), w(n);
        for (int i = 0; i < n / 2; ++i) {
            double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = t;
                for (int j = 2; j <= n; ++j) {
                    double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n * (t * p1 - p0) / (t * t - 1.0);
                double dt = p1 / pp;
                t -= dt;
                if (std::abs(dt) < 1e-15) break;
            }
            x[static_cast<std::size_t>(i)] = -t;
            x[static_cast<std::size_t>(n - 1 - i)] = t;
            double wi = 2.0 / ((1.0 - t * t) * pp * pp);
            w[static_cast<std::size_t>(i)] = wi;
            w[static_cast<std::size_t>(n - 1 - i)] = wi;
        }
        return std::make_pair(x, w);
    }();
    return rule;
}

}  // namespace

QuadScheme quadrature_over(double lo, double hi, int nodes_per_unit) {
    if (!(hi > lo)) throw make_error("BadConfig", "empty quadrature interval");
    const auto& [xs, ws] = gl64();
    int cells = std::max(1, static_cast<int>(std::ceil((hi - lo) * nodes_per_unit / 64.0)));
    double h = (hi - lo) / cells;
    QuadScheme q;
    for (int c = 0; c < cells; ++c) {
        double a = lo + c * h;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            q.x.push_back(a + 0.5 * h * (xs[i] + 1.0));
            q.w.push_back(0.5 * h * ws[i]);
        }
    }
    return q;
}

QuadScheme envelope_quadrature(const MixingMeasure& a, const MixingMeasure& b,
                               int nodes_per_unit) {
    auto [la, ha] = envelope(a);
    auto [lb, hb] = envelope(b);
    return quadrature_over(std::min(la, lb), std::max(ha, hb), nodes_per_unit);
}

namespace {

void check_mass(const Density& p, const Density& q, const QuadScheme& s) {
    Kahan mp, mq;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        mp.add(s.w[i] * p(s.x[i]));
        mq.add(s.w[i] * q(s.x[i]));
    }
    if (mp.sum < 1.0 - 1e-10 || mq.sum < 1.0 - 1e-10)
        throw make_error("GridTooCoarse", "quadrature misses density mass");
}

}  // namespace

double hellinger(const Density& p, const Density& q, const QuadScheme& scheme) {
    check_mass(p, q, scheme);
    Kahan acc;
    for (std::size_t i = 0; i < scheme.x.size(); ++i) {
        double dp = std::sqrt(std::max(p(scheme.x[i]), 0.0)) -
                    std::sqrt(std::max(q(scheme.x[i]), 0.0));
        acc.add(scheme.w[i] * dp * dp);
    }
    return std::sqrt(std::clamp(0.5 * acc.sum, 0.0, 1.0));
}

double tv(const Density& p, const Density& q, const QuadScheme& scheme) {
    check_mass(p, q, scheme);
    Kahan acc;
    for (std::size_t i = 0; i < scheme.x.size(); ++i)
        acc.add(scheme.w[i] * std::abs(p(scheme.x[i]) - q(scheme.x[i])));
    return std::clamp(0.5 * acc.sum, 0.0, 1.0);
}

double hellinger_mixtures(const MixingMeasure& a, const MixingMeasure& b) {
    auto scheme = envelope_quadrature(a, b);
    return hellinger([&](double x) { return mixture_density(a, x); },
                     [&](double x) { return mixture_density(b, x); }, scheme);
}

double tv_mixtures(const MixingMeasure& a, const MixingMeasure& b) {
    auto scheme = envelope_quadrature(a, b);
    return tv([&](double x) { return mixture_density(a, x); },
              [&](double x) { return mixture_density(b, x); }, scheme);
}

}  // namespace mixsing
