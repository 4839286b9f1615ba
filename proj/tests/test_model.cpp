#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "potts/model.hpp"

using namespace potts;

namespace {
CouplingParams theorem_params() {
    return CouplingParams::from_gammas(Rational(1), Rational(7, 5), Rational(23, 55), Rational(1, 11));
}
}  // namespace

TEST_CASE("rational parsing and arithmetic") {
    CHECK(Rational::parse("12/11") == Rational(12, 11));
    CHECK(Rational::parse(" 0.25 ") == Rational(1, 4));
    CHECK(Rational::parse("-3") == Rational(-3));
    CHECK(Rational(6, -4) == Rational(-3, 2));
    CHECK(Rational(19, 10).ceil() == 2);
    CHECK(Rational(-19, 10).ceil() == -1);
    CHECK_THROWS(Rational::parse("1/0"));
    CHECK_THROWS(Rational::parse("abc"));
}

TEST_CASE("coupling validation and gammas") {
    CHECK_THROWS_AS(CouplingParams(std::array<double, 6>{1.0, 1.0, 1.0, 1.0, 1.0, 1.0}), std::invalid_argument);  // J11 = J22
    CHECK_THROWS_AS(CouplingParams(std::array<double, 6>{2.0, 1.0, 0.5, 1.0, 1.0, 1.0}), std::invalid_argument);  // J22 != J33
    auto p = theorem_params();
    CHECK(p.value(Pair::J11) == doctest::Approx(12.0 / 11));
    CHECK(p.value(Pair::J12) == doctest::Approx(72.0 / 55));
    CHECK(p.value(Pair::J23) == doctest::Approx(18.0 / 55));
    CHECK(p.gamma1() == doctest::Approx(1.0));
    CHECK(p.gamma12() == doctest::Approx(1.4));
    CHECK(*p.gamma23_exact() == Rational(23, 55));
}

TEST_CASE("energy of monochromatic and single-flip states") {
    auto p = theorem_params();
    TorusLattice lat(4, 5);
    Configuration two(lat, Spin{2}), one(lat, Spin{1});
    CHECK(energy(one, p) == doctest::Approx(-2.0 * 20 * p.value(Pair::J11)));
    CHECK(energy(two, p) == doctest::Approx(-2.0 * 20 * p.value(Pair::J22)));
    Configuration s = two;
    s.set(7, 1);
    CHECK(energy(s, p) - energy(two, p) == doctest::Approx(4 * p.gamma12()));
    CHECK(energy_delta(two, 7, 1, p) == doctest::Approx(4 * p.gamma12()));
    CHECK(energy_delta(two, 7, 3, p) == doctest::Approx(4 * p.gamma23()));
    CHECK(energy_delta(two, 7, 2, p) == 0.0);
}

TEST_CASE("census on simple states") {
    TorusLattice lat(4, 4);
    auto c = edge_census(Configuration(lat, Spin{2}));
    CHECK(c.edges(2, 2) == 32);
    CHECK(c.spins(2) == 16);
    CHECK(c.edges(1, 2) == 0);
    Configuration s(lat, Spin{2});
    s.set(5, 1);
    auto d = edge_census(s);
    CHECK(d.edges(1, 2) == 4);
    CHECK(d.edges(2, 2) == 28);
    CHECK(d.spins(1) == 1);
}

TEST_CASE("dual-form energy and census identity on random states") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> side(2, 8);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int t = 0; t < 2000; ++t) {
        TorusLattice lat(side(rng), side(rng));
        double j22 = u(rng);
        auto p = CouplingParams::from_gammas(u(rng), u(rng) + j22, u(rng) + j22, j22);
        auto s = oracle::random_config(lat, rng);
        double raw = oracle::raw_energy(s, p);
        CHECK(oracle::same(energy(s, p), raw, 1e-10));
        CHECK(oracle::same(energy_gamma_form(s, p), raw, 1e-10));
        auto c = edge_census(s);
        auto o = oracle::census(s);
        for (int i = 0; i < 3; ++i) {
            CHECK(c.N[i] == o.N[i]);
            std::int64_t ends = 2 * c.n[i][i];
            for (int j = 0; j < 3; ++j) {
                CHECK(c.n[i][j] == o.n[i][j]);
                if (j != i) ends += c.n[i][j];
            }
            CHECK(ends == 4 * c.N[i]);
        }
        int v = static_cast<int>(rng() % static_cast<unsigned>(lat.size()));
        Spin sp = static_cast<Spin>(rng() % 3 + 1);
        Configuration f = s;
        f.set(v, sp);
        CHECK(std::abs(energy_delta(s, v, sp, p) - (oracle::raw_energy(f, p) - raw)) < 1e-12 * std::max(1.0, std::abs(raw)));
        EdgeCensus inc = c;
        census_apply_flip(inc, s, v, sp);
        auto fo = oracle::census(f);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(inc.n[i][j] == fo.n[i][j]);
    }
}

TEST_CASE("local delta table agrees with direct deltas") {
    auto p = theorem_params();
    LocalDeltaTable tab(p);
    std::mt19937_64 rng(5);
    TorusLattice lat(6, 7);
    for (int t = 0; t < 2000; ++t) {
        auto s = oracle::random_config(lat, rng);
        int v = static_cast<int>(rng() % 42);
        Spin to = static_cast<Spin>(rng() % 3 + 1);
        CHECK(tab(s[v], to, neighbor_counts(s, v)) == doctest::Approx(energy_delta(s, v, to, p)).epsilon(1e-12));
    }
}

TEST_CASE("f_h values and domain") {
    CHECK(f_h(1.0, 0.5) == doctest::Approx(2.0));
    CHECK(f_h(1.0, 1.4) == doctest::Approx(9.2));
    CHECK_THROWS_AS(f_h(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(f_h(1.0, -1.0), std::domain_error);
}

TEST_CASE("derived constants") {
    auto d = derive_constants(theorem_params());
    CHECK(d.ell_star == 2);
    CHECK(d.gamma_star == doctest::Approx(9.2));
    CHECK(*d.gamma_star_exact == Rational(46, 5));
    CHECK(derive_constants(CouplingParams::from_gammas(1.0, 0.6, 0.3, 0.1)).ell_star == 2);
    // Both closed forms and f_h agree on random parameters.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int t = 0; t < 500; ++t) {
        double g1 = u(rng), g12 = u(rng) + 0.2, j22 = 0.1;
        auto p = CouplingParams::from_gammas(g1, g12, 0.3, j22);
        auto dc = derive_constants(p);
        double l = dc.ell_star;
        double closed = 4 * l * g12 - 2 * g1 * (l - 1) * (l - 1);
        CHECK(dc.gamma_star == doctest::Approx(closed).epsilon(1e-12));
        CHECK(l == std::ceil((2 * g12 + g1) / (2 * g1) - 1e-12));
        CHECK(dc.gamma_star == doctest::Approx(f_h(g1, g12)).epsilon(1e-12));
    }
}

TEST_CASE("assumption checks") {
    auto a = check_assumptions(theorem_params(), TorusLattice(10, 10));
    CHECK(a.exact);
    CHECK(a.condA);
    CHECK(a.condA_value == doctest::Approx(1.9));
    CHECK(a.condB);
    CHECK(a.condC);
    CHECK(a.condC_slack == doctest::Approx(2.8 - 4.0 * 23 / 55 - 1));
    CHECK(a.all());
    // gamma12 = 1.5 makes the ratio an integer.
    auto b = check_assumptions(CouplingParams::from_gammas(Rational(1), Rational(3, 2), Rational(1, 5), Rational(1, 10)),
                               TorusLattice(10, 10));
    CHECK_FALSE(b.condA);
    // Condition C decides the smallest admissible K for gamma23 = 9.2 / (2 (K + 1)).
    int first = 0;
    for (int K = 2; K <= 20 && !first; ++K) {
        auto p = CouplingParams::from_gammas(Rational(1), Rational(7, 5), Rational(46, 10 * (K + 1)), Rational(1, 11));
        auto r = check_assumptions(p, TorusLattice(K, K));
        CHECK(r.condB);
        if (r.condC) first = K;
    }
    CHECK(first == 10);
}
