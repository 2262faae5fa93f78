#include <doctest.h>

#include <cmath>
#include <random>

#include "abc/analytic.hpp"
#include "oracles.hpp"

using namespace abc;

namespace {

BigRatio R(long a, long b) { return BigRatio(BigInt(a), BigInt(b)); }

StepFunction half_step(int64_t N = 1) { return StepFunction::cells(N, 2, {BigRatio(0), R(1, 2)}); }

AnalyticMap single_shear(const TrigPolynomial& tp, AnalyticStep::Kind kind) {
    AnalyticStep st;
    st.kind = kind;
    st.f = std::make_shared<TrigPolynomial>(tp);
    AnalyticMap m;
    m.steps.push_back(st);
    return m;
}

}  // namespace

TEST_CASE("constant step gives a constant polynomial") {
    TrigPolynomial tp = approximate_step(StepFunction::constant(R(1, 3)), 1, 1e-3, 0.05);
    CHECK(tp.m() == 0);
    CHECK(tp.a[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(std::abs(tp.eval(cplx(0.3, 0.7)) - cplx(1.0 / 3, 0)) < 1e-15);
    CHECK(sampled_error_outside_F(tp, StepFunction::constant(R(1, 3)), 1, 0.05, 1000) < 1e-15);
}

TEST_CASE("half step approximation example") {
    TrigPolynomial tp = approximate_step(half_step(), 1, 1e-3, 0.05);
    CHECK(std::abs(tp.value(0.25)) < 1e-3);
    CHECK(std::abs(tp.value(0.75) - 0.5) < 1e-3);
    CHECK(sampled_error_outside_F(tp, half_step(), 1, 0.05, 10000) < 1e-3);
}

TEST_CASE("series, closed form and naive sum agree on the real line") {
    for (double sig : {0.002, 0.01, 0.05}) {
        TrigPolynomial tp = smooth_step(StepFunction::cells(2, 3, {R(1, 5), R(-1, 3), BigRatio(0)}), 2, sig);
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> U(0, 1);
        for (int t = 0; t < 200; ++t) {
            const double x = U(rng);
            const long double ref = oracle::trig(tp, static_cast<long double>(x));
            REQUIRE(std::abs(tp.series(x) - static_cast<double>(ref)) < 1e-11);
            REQUIRE(std::abs(tp.value(x) - static_cast<double>(ref)) < 1e-11 + tp.tail_bound);
        }
    }
}

TEST_CASE("complex evaluation against naive sum, periodicity and cosh identity") {
    TrigPolynomial tp = smooth_step(half_step(3), 3, 0.05);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> U(0, 1), V(-0.05, 0.05);
    for (int t = 0; t < 200; ++t) {
        const cplx z(U(rng), V(rng));
        const cplx got = tp.eval(z);
        const auto ref = oracle::trig(tp, std::complex<long double>(z.real(), z.imag()));
        REQUIRE(std::abs(got - cplx(double(ref.real()), double(ref.imag()))) <= 1e-10 * (1 + std::abs(got)));
        const cplx sh = tp.eval(z + 1.0 / 3);
        REQUIRE(std::abs(sh - got) <= 1e-10 * (1 + std::abs(got)));
    }
    TrigPolynomial c;
    c.N = 2;
    c.a = {0.0, 1.0};
    c.b = {0.0, 0.0};
    const double rho = 0.1;
    CHECK(c.eval(cplx(0, rho)).real() == doctest::Approx(std::cosh(2 * M_PI * 2 * rho)).epsilon(1e-14));
}

TEST_CASE("complex evaluation overflows as a range error") {
    TrigPolynomial tp = smooth_step(half_step(50), 50, 0.001);
    CHECK_THROWS_AS(tp.eval(cplx(0.1, 40.0)), std::range_error);
}

TEST_CASE("derivative matches finite differences") {
    TrigPolynomial tp = smooth_step(half_step(2), 2, 0.03);
    for (double x : {0.1, 0.3, 0.77}) {
        const double h = 1e-6;
        CHECK(tp.derivative(x) == doctest::Approx((tp.value(x + h) - tp.value(x - h)) / (2 * h)).epsilon(1e-6));
        CHECK(std::abs(tp.eval_derivative(cplx(x, 0)).real() - tp.derivative(x)) < 1e-8);
    }
}

TEST_CASE("approximation of a single horizontal slide") {
    BlockSlideMap m;
    m.steps.push_back({Axis::H, StepFunction::cells(1, 2, {R(1, 2), BigRatio(0)})});
    const double eps = 1e-3, delta = 0.05;
    ApproxResult ar = approx_blockslide(m, 1, eps, delta);
    CHECK(ar.map.shear_count() == 1);
    // exceptional set: x2 within delta/4 of 0 or 1/2 (two breakpoints of total width delta/2 each)
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> U(0, 1);
    double worst = 0;
    int used = 0;
    for (int t = 0; t < 10000; ++t) {
        Vec2 x{U(rng), U(rng)};
        const double d0 = std::min({x[1], std::abs(x[1] - 0.5), 1 - x[1]});
        if (d0 < delta / 2) continue;
        ++used;
        Vec2 y = ar.map.apply(x);
        const double exact = x[0] + (x[1] < 0.5 ? 0.5 : 0.0);
        worst = std::max(worst, torus_distance(y[0], exact));
        REQUIRE(y[1] == x[1]);
    }
    CHECK(used > 8000);
    CHECK(worst < eps);
}

TEST_CASE("approximated column interchange lands in the right cell") {
    BlockSlideMap m = column_interchange(0, 2, 2);
    Grid g{2, 2, 1};
    GridPermutation perm = GridPermutation::from_full(g, atom_images(m, g));
    ApproxResult ar = approx_blockslide(m, 2, 1e-3, 0.01);
    CHECK(ar.map.shear_count() <= 8);
    CHECK(good_set_fraction(ar.map, perm, 10000, 3) >= 1 - 0.05);
}

TEST_CASE("approx_permutation: identity, transposition, commutation") {
    ApproxOptions opt;
    opt.eps = 0.05;
    opt.samples = 20000;
    ApproxResult id = approx_permutation(GridPermutation::identity(Grid{4, 1, 2}), opt);
    CHECK(id.map.shear_count() == 0);
    CHECK(id.good_fraction == 1.0);

    Grid g{4, 2, 2};
    std::vector<int32_t> f{0, 1, 2, 3, 4, 5, 6, 7};
    std::swap(f[0], f[5]);
    auto perm = GridPermutation::from_fundamental(g, f);
    ApproxResult ar = approx_permutation(perm, opt);
    CHECK(ar.good_fraction >= 0.95);
    CHECK(commutation_residual(ar.map, 2, 5000, 4) <= 1e-12);
    CHECK(max_jacobian_defect(ar.map, 1000, 5) <= 1e-6);
}

TEST_CASE("maps compose with their exact inverses to the identity") {
    Grid g{4, 3, 2};
    std::mt19937_64 rng(21);
    ApproxOptions opt;
    opt.samples = 1000;
    ApproxResult ar = approx_permutation(oracle::random_perm(g, rng), opt);
    AnalyticMap id = ar.map.then(ar.map.inverse());
    std::uniform_real_distribution<double> U(0, 1);
    for (int t = 0; t < 500; ++t) {
        Vec2 x{U(rng), U(rng)};
        Vec2 y = id.apply(x);
        REQUIRE(std::abs(y[0] - x[0]) < 1e-9);
        REQUIRE(std::abs(y[1] - x[1]) < 1e-9);
    }
}

TEST_CASE("jacobian is the product of shear jacobians") {
    TrigPolynomial tp = smooth_step(half_step(), 1, 0.05);
    AnalyticMap m = single_shear(tp, AnalyticStep::H).then(single_shear(tp, AnalyticStep::V));
    for (double x1 : {0.1, 0.6})
        for (double x2 : {0.2, 0.45}) {
            auto J = m.jacobian({x1, x2});
            CHECK(J[0] * J[3] - J[1] * J[2] == doctest::Approx(1.0).epsilon(1e-12));
            // finite differences
            const double h = 1e-6;
            Vec2 a = m.apply(Vec2{x1 + h, x2}), b = m.apply(Vec2{x1 - h, x2});
            CHECK(J[0] == doctest::Approx((a[0] - b[0]) / (2 * h)).epsilon(1e-5));
            CHECK(J[2] == doctest::Approx((a[1] - b[1]) / (2 * h)).epsilon(1e-5));
        }
}

TEST_CASE("strip distance basics") {
    AnalyticMap r1 = AnalyticMap::rotation(R(1, 3)), r2 = AnalyticMap::rotation(R(1, 2));
    CHECK(strip_distance(r1, r1, 0.1, 8).value == 0.0);
    CHECK(strip_distance(r1, AnalyticMap::rotation(R(4, 3)), 0.1, 8).value == doctest::Approx(0.0));
    CHECK(strip_distance(r1, r2, 0.1, 8).value == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(strip_distance(r1, r2, 0.3, 8).value == doctest::Approx(1.0 / 6).epsilon(1e-14));
    AnalyticMap r3 = AnalyticMap::rotation(R(9, 10));
    CHECK(strip_distance(AnalyticMap::rotation(R(0, 1)), r3, 0.1, 8).value == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("strip distance: refinement monotone, triangle inequality") {
    std::mt19937_64 rng(30);
    ApproxOptions opt;
    opt.samples = 1000;
    opt.sigma_floor_x = 0.05;
    std::vector<AnalyticMap> maps;
    for (int i = 0; i < 3; ++i) {
        auto ar = approx_permutation(oracle::random_rotation(Grid{2, 1, 3}, false, rng), opt);
        maps.push_back(conjugated_rotation(ar.map, R(1, 2 + i)));
    }
    const double rho = 0.05;
    double prev = 0;
    for (int G : {4, 8, 16}) {
        const double v = strip_distance(maps[0], maps[1], rho, G).value;
        CHECK(v >= prev);
        prev = v;
    }
    const double ab = strip_distance(maps[0], maps[1], rho, 16).value, bc = strip_distance(maps[1], maps[2], rho, 16).value,
                 ac = strip_distance(maps[0], maps[2], rho, 16).value;
    REQUIRE(std::isfinite(ac));
    CHECK(ac <= (ab + bc) * (1 + 1e-9));
}

TEST_CASE("build_stage from identity is the rotation") {
    StageParams s0 = initial_stage(2), s1 = advance(s0, 2, 2, 2);
    StageBuild b = build_stage({}, AnalyticMap{}, s0, s1, 0.1, 8);
    Vec2 y = b.T.apply(Vec2{0.1, 0.2});
    CHECK(std::fmod(y[0] - 0.1 + 1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(b.gap == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("find_l_star") {
    StageParams s0 = initial_stage(2);
    s0.k = 2;
    LStarResult r = find_l_star(AnalyticMap{}, {AnalyticMap{}}, s0, 0.1, 1.0, 1 << 20, 8);
    CHECK(r.found);
    CHECK(r.l == 2);
    LStarResult vac = find_l_star(AnalyticMap{}, {AnalyticMap{}}, s0, 0.1, 10.0, 1 << 20, 8);
    CHECK(vac.l == 2);
    // tighter threshold forces a larger l; gaps decrease along the scan
    LStarResult t = find_l_star(AnalyticMap{}, {AnalyticMap{}}, s0, 0.1, 0.01, 1 << 20, 8);
    CHECK(t.found);
    CHECK(t.gap < 0.005);
    CHECK(l_gap(AnalyticMap{}, {AnalyticMap{}}, s0, t.l - 1, 0.1, 8) >= 0.005);
    double prev = 1e300;
    for (int64_t l = 2; l <= 32; ++l) {
        const double g = l_gap(AnalyticMap{}, {AnalyticMap{}}, s0, l, 0.1, 8);
        CHECK(g <= prev);
        prev = g;
    }
}

TEST_CASE("eps schedule") {
    CHECK(eps_schedule(1.0, 0) == 1.0);
    double tail = 0;
    for (int m = 2; m < 60; ++m) tail += eps_schedule(1.0, m);
    CHECK(tail < eps_schedule(1.0, 1) / 2);
}

TEST_CASE("json round trips are bit exact") {
    ApproxOptions opt;
    opt.samples = 1000;
    opt.sigma_floor_x = 0.02;
    std::mt19937_64 rng(40);
    auto ar = approx_permutation(oracle::random_perm(Grid{4, 2, 2}, rng), opt);
    AnalyticMap m = conjugated_rotation(ar.map, R(3, 8));
    AnalyticMap back = analytic_map_from_json(to_json(m));
    CHECK(to_json(back).dump() == to_json(m).dump());
    std::uniform_real_distribution<double> U(0, 1);
    for (int t = 0; t < 100; ++t) {
        Vec2 x{U(rng), U(rng)};
        REQUIRE(back.apply(x) == m.apply(x));
    }
    for (double v : {0.1, -3.5e-300, 1e300, 0.0})
        CHECK(parse_hex_double(hex_double(v)) == v);
}
