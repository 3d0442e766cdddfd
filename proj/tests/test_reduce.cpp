#include <doctest.h>

#include <cmath>

#include "mixsing/reduce.hpp"
#include "test_helpers.hpp"

using namespace mixsing;

TEST_SUITE_BEGIN("reduce");

namespace {

Laurent lmono(int pm, int pv, Rational c) { return Laurent::mono(pm, pv, std::move(c)); }

// numeric value of a reduced expression at (eta, x) through the kernel code
double eval_fnormal(const FNormal& f, const ParamVec& eta, double x) {
    double out = 0.0;
    for (const auto& [k, L] : f) out += L.eval(eta[2], eta[1]) * partial(eta, x, k);
    return out;
}

bool fnormal_equal(const FNormal& a, const FNormal& b) {
    FNormal diff = a;
    fnormal_add_scaled(diff, b, Laurent::constant(-1));
    return diff.empty();
}

}  // namespace

TEST_CASE("laurent arithmetic, derivatives, and evaluation") {
    auto p = lmono(3, -1, -1) + lmono(1, -1, -1);  // -(m^3 + m)/v
    CHECK(p.eval(2.0, 4.0) == doctest::Approx(-2.5).epsilon(1e-14));
    CHECK(p.eval_exact(Rational(2), Rational(4)) == Rational(-5, 2));

    auto dm = p.d_m();  // -(3m^2 + 1)/v
    CHECK(dm.eval(2.0, 4.0) == doctest::Approx(-13.0 / 4.0).epsilon(1e-14));
    auto dv = p.d_v();  // (m^3 + m)/v^2
    CHECK(dv.eval(2.0, 4.0) == doctest::Approx(10.0 / 16.0).epsilon(1e-14));

    auto prod = p * p;
    CHECK(prod.eval_exact(Rational(2), Rational(4)) == Rational(25, 4));
    CHECK((p - p).is_zero());
    CHECK_THROWS_AS((void)lmono(-1, 0, 1).eval_exact(Rational(0), Rational(1)), Error);
}

TEST_CASE("basis membership and enumeration") {
    CHECK(in_f_basis({0, 0, 0}));
    CHECK(in_f_basis({1, 3, 0}));
    CHECK(in_f_basis({1, 0, 3}));
    CHECK(!in_f_basis({2, 0, 0}));
    CHECK(!in_f_basis({0, 1, 1}));
    CHECK(!in_f_basis({1, 2, 1}));

    auto b2 = f_basis(2);
    REQUIRE(b2.size() == 7);
    for (int r = 1; r <= 6; ++r)
        CHECK(f_basis(r).size() == static_cast<std::size_t>(4 * r - 1));
    for (const auto& k : f_basis(5)) CHECK(in_f_basis(k));
}

TEST_CASE("frozen reductions of low-order theta derivatives") {
    FNormal want2;
    want2[{0, 1, 0}] = Laurent::constant(2);
    want2[{0, 0, 1}] = lmono(3, -1, -1) + lmono(1, -1, -1);
    CHECK(fnormal_equal(reduce_skew({2, 0, 0}), want2));

    // d^3 f / dtheta^2 dv  =  2 d^2v + 2 (m^3+m)/v^2 dm + (m^2+1)^2/(2v^2) d^2m
    FNormal want21;
    want21[{0, 2, 0}] = Laurent::constant(2);
    want21[{0, 0, 1}] = lmono(3, -2, 2) + lmono(1, -2, 2);
    want21[{0, 0, 2}] = lmono(4, -2, Rational(1, 2)) + lmono(2, -2, 1) + lmono(0, -2, Rational(1, 2));
    CHECK(fnormal_equal(reduce_skew({2, 1, 0}), want21));

    // d^4 f / dtheta^4 = 4 d^2v + (m^3+m)(3m^2+7)/v^2 dm + (m^2+1)^2(m^2+2)/v^2 d^2m
    FNormal want4;
    want4[{0, 2, 0}] = Laurent::constant(4);
    want4[{0, 0, 1}] = lmono(5, -2, 3) + lmono(3, -2, 10) + lmono(1, -2, 7);
    want4[{0, 0, 2}] = lmono(6, -2, 1) + lmono(4, -2, 4) + lmono(2, -2, 5) + lmono(0, -2, 2);
    CHECK(fnormal_equal(reduce_skew({4, 0, 0}), want4));
}

TEST_CASE("third-order kernel identities hold exactly in reduced form") {
    auto scaled = [](const DerivIndex& k, const Laurent& s) {
        FNormal out;
        fnormal_add_scaled(out, reduce_skew(k), s);
        return out;
    };
    auto plus = [](FNormal a, const FNormal& b) {
        fnormal_add_scaled(a, b, Laurent::constant(1));
        return a;
    };
    Laurent mm_over_v = lmono(3, -1, 1) + lmono(1, -1, 1);  // (m^3+m)/v

    // theta^3 = 2 theta v - ((m^3+m)/v) theta m
    CHECK(fnormal_equal(reduce_skew({3, 0, 0}),
                        plus(scaled({1, 1, 0}, Laurent::constant(2)), scaled({1, 0, 1}, -mm_over_v))));

    // theta^2 v = 2 v^2 + ((m^3+m)/v^2) m - ((m^3+m)/v) v m
    CHECK(fnormal_equal(reduce_skew({2, 1, 0}),
                        plus(plus(scaled({0, 2, 0}, Laurent::constant(2)),
                                  scaled({0, 0, 1}, lmono(3, -2, 1) + lmono(1, -2, 1))),
                             scaled({0, 1, 1}, -mm_over_v))));

    // theta^2 m = 2 v m - ((3m^2+1)/v) m - ((m^3+m)/v) m^2
    CHECK(fnormal_equal(reduce_skew({2, 0, 1}),
                        plus(plus(scaled({0, 1, 1}, Laurent::constant(2)),
                                  scaled({0, 0, 1}, lmono(2, -1, -3) + lmono(0, -1, -1))),
                             scaled({0, 0, 2}, -mm_over_v))));

    // v m^2 = -((m^2+1)/(2vm)) m^3 - ((3m^2-1)/(2vm^2)) m^2
    CHECK(fnormal_equal(
        reduce_skew({0, 1, 2}),
        plus(scaled({0, 0, 3}, lmono(1, -1, Rational(-1, 2)) + lmono(-1, -1, Rational(-1, 2))),
             scaled({0, 0, 2}, lmono(0, -1, Rational(-3, 2)) + lmono(-2, -1, Rational(1, 2))))));

    // v^2 m = ((m^2+1)^2/(4v^2 m^2)) m^3 + ((m^2+1)(7m^2-1)/(4m^3 v^2)) m^2 + (2/v^2) m
    Laurent c3 = lmono(2, -2, Rational(1, 4)) + lmono(0, -2, Rational(1, 2)) +
                 lmono(-2, -2, Rational(1, 4));
    Laurent c2 = lmono(1, -2, Rational(7, 4)) + lmono(-1, -2, Rational(6, 4)) +
                 lmono(-3, -2, Rational(-1, 4));
    CHECK(fnormal_equal(reduce_skew({0, 2, 1}),
                        plus(plus(scaled({0, 0, 3}, c3), scaled({0, 0, 2}, c2)),
                             scaled({0, 0, 1}, lmono(0, -2, 2)))));

    // theta v m = -((m^2+1)/(2vm)) theta m^2 - (1/v) theta m
    CHECK(fnormal_equal(
        reduce_skew({1, 1, 1}),
        plus(scaled({1, 0, 2}, lmono(1, -1, Rational(-1, 2)) + lmono(-1, -1, Rational(-1, 2))),
             scaled({1, 0, 1}, lmono(0, -1, -1)))));
}

TEST_CASE("reduced expressions reproduce the analytic derivatives") {
    auto rng = make_rng(909);
    std::uniform_real_distribution<double> ux(-2.5, 2.5);
    for (int t = 0; t < 10; ++t) {
        ParamVec eta = mixsing::testing::random_skew(rng);
        double x = eta[0] + std::sqrt(eta[1]) * ux(rng);
        for (int n = 1; n <= 5; ++n)
            for (int a1 = 0; a1 <= n; ++a1)
                for (int a2 = 0; a2 <= n - a1; ++a2) {
                    DerivIndex alpha{a1, a2, n - a1 - a2};
                    double direct = partial(eta, x, alpha);
                    double reduced = eval_fnormal(reduce_skew(alpha), eta, x);
                    double tol = 1e-9 * std::max(1.0, std::abs(direct));
                    CHECK(std::abs(direct - reduced) <= tol);
                }
    }
}

TEST_CASE("reduction invariants across all orders up to six") {
    for (int n = 0; n <= 6; ++n)
        for (int a1 = 0; a1 <= n; ++a1)
            for (int a2 = 0; a2 <= n - a1; ++a2) {
                DerivIndex alpha{a1, a2, n - a1 - a2};
                const auto& red = reduce_skew(alpha);  // throws if invariants break
                for (const auto& [k, L] : red) {
                    CHECK(in_f_basis(k));
                    CHECK(!L.is_zero());
                    CHECK(order(k) <= n);
                }
            }
}

TEST_CASE("gaussian reduction to pure location derivatives") {
    auto [n0, c0] = reduce_gaussian(1, 0);
    CHECK(n0 == 1);
    CHECK(c0 == 1);
    auto [n1, c1] = reduce_gaussian(0, 2);
    CHECK(n1 == 4);
    CHECK(c1 == Rational(1, 4));
    auto [n2, c2] = reduce_gaussian(1, 3);
    CHECK(n2 == 7);
    CHECK(c2 == Rational(1, 8));

    auto rng = make_rng(910);
    std::uniform_real_distribution<double> ux(-2.5, 2.5);
    for (int t = 0; t < 10; ++t) {
        ParamVec eta = mixsing::testing::random_gaussian(rng);
        double x = eta[0] + std::sqrt(eta[1]) * ux(rng);
        for (int k1 = 0; k1 <= 2; ++k1)
            for (int k2 = 0; k2 <= 2; ++k2) {
                if (k1 + 2 * k2 > 6) continue;
                auto [n, c] = reduce_gaussian(k1, k2);
                double direct = partial(eta, x, {k1, k2, 0});
                double via = static_cast<double>(c) * partial(eta, x, {n, 0, 0});
                CHECK(std::abs(direct - via) <= 1e-9 * std::max(1.0, std::abs(direct)));
            }
    }
}

TEST_CASE("second-order minimal form matches hand-expanded coefficients") {
    // one base atom, two perturbed atoms, exact rational data
    Rational v0(2), m0(3);
    std::vector<ExactPerturbation> pert = {
        {Rational(2, 5), {Rational(1, 7), Rational(-1, 11), Rational(1, 13)}},
        {Rational(3, 5), {Rational(-2, 7), Rational(2, 11), Rational(-3, 13)}}};

    auto xi = minimal_form_exact_atom(v0, m0, pert, 2);

    auto S = [&](int e1, int e2, int e3) {
        Rational out(0);
        for (const auto& [p, d] : pert) {
            Rational t = p;
            for (int i = 0; i < e1; ++i) t *= d[0];
            for (int i = 0; i < e2; ++i) t *= d[1];
            for (int i = 0; i < e3; ++i) t *= d[2];
            out += t;
        }
        return out;
    };
    Rational mm = (m0 * m0 * m0 + m0);  // m^3 + m
    Rational m2p1 = m0 * m0 + 1;

    CHECK(xi[{1, 0, 0}] == S(1, 0, 0));
    CHECK(xi[{0, 1, 0}] == S(0, 1, 0) + S(2, 0, 0));
    CHECK(xi[{0, 0, 1}] == S(0, 0, 1) - mm / (2 * v0) * S(2, 0, 0) - S(0, 1, 1) / v0);
    CHECK(xi[{0, 2, 0}] == S(0, 2, 0) / 2);
    CHECK(xi[{0, 0, 2}] == S(0, 0, 2) / 2 - m2p1 / (2 * v0 * m0) * S(0, 1, 1));
    CHECK(xi[{1, 1, 0}] == S(1, 1, 0));
    CHECK(xi[{1, 0, 1}] == S(1, 0, 1));
    CHECK(xi.size() == 7);
}

TEST_CASE("minimal form approximates the density difference to order r") {
    // residual of the degree-r expansion must shrink like t^{r+1}
    auto base = make_measure({make_param(Family::SkewNormal, {0.3, 1.4, 0.8})}, {1.0});
    std::array<double, 3> d1{0.7, -0.4, 0.5}, d2{-0.5, 0.6, -0.3};
    std::vector<double> xs = {-1.0, 0.1, 0.7, 1.9, 3.2};

    for (int r = 2; r <= 3; ++r) {
        std::vector<double> resid;
        for (double t : {0.02, 0.01}) {
            ConvergentRep rep;
            rep.base = base;
            ParamVec u = base.atoms[0], w = base.atoms[0];
            for (int c = 0; c < 3; ++c) {
                u[c] += t * d1[static_cast<std::size_t>(c)];
                w[c] += t * d2[static_cast<std::size_t>(c)];
            }
            rep.groups = {{{0.45, u}, {0.55, w}}};
            auto mf = build_minimal_form(rep, r);
            auto g = rep.measure();
            double worst = 0.0;
            for (double x : xs) {
                double lhs = mixture_density(g, x) - mixture_density(base, x);
                double rhs = mf.zeta[0] * density(base.atoms[0], x);
                for (const auto& [k, c] : mf.xi[0]) rhs += c * partial(base.atoms[0], x, k);
                worst = std::max(worst, std::abs(lhs - rhs));
            }
            resid.push_back(worst);
        }
        double rate = std::log2(resid[0] / resid[1]);
        CHECK(rate > r + 0.7);  // expected r + 1
    }
}

TEST_CASE("pretty printer") {
    auto s = to_string(reduce_skew({2, 0, 0}));
    CHECK(s.find("d^(0,1,0)") != std::string::npos);
    CHECK(s.find("d^(0,0,1)") != std::string::npos);
    CHECK(to_string(FNormal{}) == "0");
}

TEST_SUITE_END();
