#include <doctest.h>

#include <cmath>

#include "mixsing/classify.hpp"
#include "mixsing/kernels.hpp"

using namespace mixsing;

TEST_SUITE_BEGIN("classify");

namespace {

MixingMeasure skew(std::vector<std::array<double, 3>> atoms, std::vector<double> w) {
    std::vector<ParamVec> ps;
    for (auto& a : atoms) ps.push_back(make_param(Family::SkewNormal, {a[0], a[1], a[2]}));
    return make_measure(std::move(ps), std::move(w));
}

MixingMeasure gamma2(std::vector<std::array<double, 2>> atoms, std::vector<double> w) {
    std::vector<ParamVec> ps;
    for (auto& a : atoms) ps.push_back(make_param(Family::Gamma, {a[0], a[1]}));
    return make_measure(std::move(ps), std::move(w));
}

std::vector<double> fisher_grid(const MixingMeasure& g, int n = 400) {
    auto [lo, hi] = envelope(g);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1.0);
    return xs;
}

// the twelve-measure classification suite
const MixingMeasure g_s0 = skew({{0, 1, 1}, {1, 2, -1}}, {0.5, 0.5});
const MixingMeasure g_s1 = skew({{0, 2, 1}, {0, 5, 2}}, {0.4, 0.6});
const MixingMeasure g_s2 = skew({{0, 1, 0}, {2, 1, 1}}, {0.5, 0.5});
const MixingMeasure g_s31_k2 = skew({{0, 2, 1}, {0, 5, -2}}, {0.5, 0.5});
const MixingMeasure g_s31_k3_pos =
    skew({{0, 2, -1}, {0, 5, 2}, {0, 10, 3}}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
const MixingMeasure g_s31_k3_neg =
    skew({{0, 2, 1}, {0, 10, 3}, {0, 5, -2}}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
const MixingMeasure g_s32 = skew({{0, 2, 1}, {0, 5, -2}}, {1.0 / 3, 2.0 / 3});
const MixingMeasure g_s33 = skew({{0, 2, 1}, {0, 2, -1}}, {0.5, 0.5});
const MixingMeasure g_gam_e = gamma2({{2, 1}, {4, 3}}, {0.5, 0.5});
const MixingMeasure g_gam_path = gamma2({{2, 1}, {3, 1}}, {0.5, 0.5});
const MixingMeasure g_gam_near = gamma2({{2, 1}, {3, 1.5}}, {0.5, 0.5});
const MixingMeasure g_gauss = [] {
    return make_measure({make_param(Family::Gaussian, {0, 1}), make_param(Family::Gaussian, {2, 2})},
                        {0.5, 0.5});
}();

}  // namespace

TEST_CASE("homology structure partitions and flags") {
    auto hs = homology_structure(g_s1);
    REQUIRE(hs.classes.size() == 1);
    CHECK(hs.classes[0].members == std::vector<int>{0, 1});
    CHECK(hs.classes[0].conformant);
    CHECK_FALSE(hs.classes[0].c1);

    auto hs0 = homology_structure(g_s0);
    CHECK(hs0.classes.size() == 2);
    CHECK(hs0.max_class_size() == 1);
    CHECK(hs0.max_nonconformant_size() == 0);

    auto hs31 = homology_structure(g_s31_k2);
    REQUIRE(hs31.classes.size() == 1);
    CHECK_FALSE(hs31.classes[0].conformant);
    CHECK_FALSE(hs31.classes[0].c1);
    CHECK_FALSE(hs31.classes[0].c2);

    auto hs32 = homology_structure(g_s32);
    CHECK(hs32.classes[0].c1);
    CHECK_FALSE(hs32.classes[0].c2);

    auto hs33 = homology_structure(g_s33);
    CHECK(hs33.classes[0].c2);
}

TEST_CASE("type polynomial zero patterns") {
    auto tp0 = type_polynomials(g_s0);
    CHECK_FALSE(tp0.p1_zero);
    CHECK_FALSE(tp0.p2_zero);
    CHECK(tp0.p1 == doctest::Approx(-1.0));

    CHECK(type_polynomials(g_s2).p1_zero);
    CHECK(type_polynomials(g_s1).p2_zero);
    CHECK_FALSE(type_polynomials(g_s1).p1_zero);
    CHECK(type_polynomials(g_s32).p3_zero);
    CHECK_FALSE(type_polynomials(g_s32).p4_zero);
    CHECK(type_polynomials(g_s33).p4_zero);
}

TEST_CASE("exact-fitted skew classification hits the published table") {
    auto r0 = classify_emixture(g_s0);
    CHECK(r0.label == "S0");
    CHECK(r0.level.exact);
    CHECK(r0.level.value == 0);
    CHECK(r0.index_set == std::vector<std::vector<int>>{{1, 1, 1}});
    CHECK(r0.matrix == std::vector<std::vector<int>>{{1, 1, 1}, {1, 1, 1}});

    auto r1 = classify_emixture(g_s1);
    CHECK(r1.label == "S1");
    CHECK(r1.level.value == 1);
    CHECK(r1.index_set == std::vector<std::vector<int>>{{1, 1, 2}});
    CHECK(r1.matrix == std::vector<std::vector<int>>{{1, 1, 2}, {1, 1, 2}});

    auto r2 = classify_emixture(g_s2);
    CHECK(r2.label == "S2");
    CHECK(r2.level.value == 2);
    CHECK(r2.index_set == std::vector<std::vector<int>>{{3, 2, 3}});
    CHECK(r2.matrix == std::vector<std::vector<int>>{{3, 2, 3}, {1, 1, 1}});

    auto r31a = classify_emixture(g_s31_k2);
    CHECK(r31a.label == "S31");
    CHECK(r31a.kstar == 2);
    CHECK(r31a.level.exact);
    CHECK(r31a.level.value == 1);
    CHECK(r31a.index_set == std::vector<std::vector<int>>{{1, 1, 2}});

    auto r31p = classify_emixture(g_s31_k3_pos);
    CHECK(r31p.label == "S31");
    CHECK(r31p.kstar == 3);
    CHECK(r31p.level.exact);
    CHECK(r31p.level.value == 1);

    auto r31n = classify_emixture(g_s31_k3_neg);
    CHECK(r31n.label == "S31");
    CHECK(r31n.level.exact);
    CHECK(r31n.level.value == 2);
    CHECK(r31n.index_set == std::vector<std::vector<int>>{{1, 1, 3}});

    auto r32 = classify_emixture(g_s32);
    CHECK(r32.label == "S32");
    CHECK(r32.level.exact);
    CHECK(r32.level.value == 3);
    CHECK(r32.index_set == std::vector<std::vector<int>>{{1, 1, 4}});

    auto r33 = classify_emixture(g_s33);
    CHECK(r33.label == "S33");
    CHECK_FALSE(r33.level.finite);
    CHECK(r33.index_set == std::vector<std::vector<int>>{{kInfIndex, kInfIndex, kInfIndex}});
}

TEST_CASE("closed-form moment ladder values match the numeric ladder") {
    SolveOptions opts;
    opts.starts = 120;
    CHECK(sbar_ladder({1.0 / 3, 1.0 / 3, 1.0 / 3}, {-1.0, 2.0, 3.0}, 4, opts).value == 1);
    CHECK(sbar_ladder({1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0, 3.0, -2.0}, 4, opts).value == 2);
}

TEST_CASE("gamma classification") {
    auto re = classify_gamma(g_gam_e, false);
    CHECK(re.label == "GammaGeneric");
    CHECK(re.level.value == 0);
    CHECK(re.index_set == std::vector<std::vector<int>>{{1, 1}});

    auto ro = classify_gamma(g_gam_e, true);
    CHECK(ro.level.value == 1);
    CHECK(ro.index_set == std::vector<std::vector<int>>{{2, 2}});

    auto rp = classify_gamma(g_gam_path, false);
    CHECK(rp.label == "GammaPathological");
    CHECK_FALSE(rp.level.finite);
    CHECK(rp.index_set == std::vector<std::vector<int>>{{kInfIndex, kInfIndex}});

    CHECK(classify_gamma(g_gam_near, false).label == "GammaGeneric");

    auto bad = gamma2({{0.5, 1.0}}, {1.0});
    CHECK_THROWS_AS(classify_gamma(bad, false), Error);
}

TEST_CASE("over-fitted classification with one extra component") {
    SolveOptions opts;
    opts.starts = 150;
    auto rep = classify_omixture(g_s0, 3, 0.02, opts);
    CHECK(rep.r_value == 4);
    CHECK(rep.level.value == 3);
    CHECK_FALSE(rep.level.exact);
    CHECK(rep.index_set == std::vector<std::vector<int>>{{4, 2, 2}});
    REQUIRE(rep.rho.size() == 2);
    for (const auto& r : rep.rho) {
        CHECK(r.value == 4);
        CHECK(r.exact);
    }

    auto gg = classify_omixture(g_gauss, 3, 0.02, opts);
    CHECK(gg.r_value == 4);
    CHECK(gg.index_set == std::vector<std::vector<int>>{{4, 2}});
    CHECK(gg.level.value == 3);

    CHECK_THROWS_AS(classify_omixture(g_s1, 3, 0.02, opts), Error);  // NotS0
    CHECK_THROWS_AS(classify_omixture(g_s0, 2), Error);             // k too small
}

TEST_CASE("fisher rank is full exactly on the generic measure") {
    auto f0 = fisher_rank(g_s0, fisher_grid(g_s0));
    CHECK(f0.dim == 8);
    CHECK(f0.full());

    auto f1 = fisher_rank(g_s1, fisher_grid(g_s1));
    CHECK(f1.dim == 8);
    CHECK(f1.rank < 8);

    auto f2 = fisher_rank(g_s2, fisher_grid(g_s2));
    CHECK(f2.rank < 8);

    CHECK_THROWS_AS(fisher_rank(g_s0, std::vector<double>{0.0}), Error);
}

TEST_CASE("report serialization carries the verdict and auxiliaries") {
    auto rep = classify_emixture(g_s31_k3_neg);
    auto text = rep.to_json();
    CHECK(text.find("\"label\": \"S31\"") != std::string::npos);
    CHECK(text.find("\"sbar\": 2") != std::string::npos);
    CHECK(text.find("\"kind\": \"exact\"") != std::string::npos);

    auto inf = classify_emixture(g_s33).to_json();
    CHECK(inf.find("\"kind\": \"inf\"") != std::string::npos);
    CHECK(inf.find("\"inf\"") != std::string::npos);
}

TEST_SUITE_END();
