#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "potts/dynamics.hpp"

using namespace potts;

namespace {
CouplingParams generic() { return CouplingParams::from_gammas(1.0, 0.77, 0.61, 0.13); }

// Mean hitting time of the all-1 state by solving (I - P) h = 1 off the target.
double exact_mean_hitting(const TorusLattice& lat, const CouplingParams& p, double beta, const Configuration& start) {
    EnumeratedSpace sp(lat, p);
    std::uint32_t n = sp.size(), tgt = sp.index(Configuration(lat, Spin{1}));
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (std::uint32_t x = 0; x < n; ++x) {
        if (x == tgt) continue;
        for (auto& [k, q] : oracle::metropolis_row(sp.config(x), p, beta)) {
            std::uint32_t y = sp.index(Configuration::parse(lat, k));
            if (y != tgt) A(x, y) -= q;
        }
    }
    A.row(tgt).setZero();
    A.col(tgt).setZero();
    A(tgt, tgt) = 1.0;
    Eigen::VectorXd b = Eigen::VectorXd::Ones(n);
    b(tgt) = 0.0;
    Eigen::VectorXd h = A.partialPivLu().solve(b);
    return h(sp.index(start));
}
}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
    using B = Philox::Block;
    CHECK(Philox::bijection(B{0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox::bijection(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox::bijection(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("Philox streams are reproducible and distinct") {
    Philox a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 64; ++i) {
        auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs_c = differs_c || x != c.next_u64();
        differs_d = differs_d || x != d.next_u64();
    }
    CHECK(differs_c);
    CHECK(differs_d);
    Philox u(1);
    std::array<int, 7> bins{};
    for (int i = 0; i < 70000; ++i) {
        double x = u.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        ++bins[u.below(7)];
    }
    for (int k : bins) CHECK(std::abs(k - 10000) < 400);  // about 4 sd
}

TEST_CASE("acceptance table matches exp(-beta [dH]^+)") {
    auto p = generic();
    TorusLattice lat(3, 4);
    std::mt19937_64 rng(3);
    for (double beta : {0.0, 0.8, 3.0}) {
        AcceptanceTable acc(p, beta);
        for (int k = 0; k < 300; ++k) {
            auto s = oracle::random_config(lat, rng);
            int v = static_cast<int>(rng() % 12);
            std::array<int, 3> cnt{};
            for (int w : lat.neighbors(v)) ++cnt[static_cast<std::size_t>(s[w] - 1)];
            int env = LocalDeltaTable::env_index(s[v], cnt);
            double leave = 0.0;
            for (Spin t = 1; t <= 3; ++t) {
                if (t == s[v]) continue;
                Configuration f = s;
                f.set(v, t);
                double d = oracle::raw_energy(f, p) - oracle::raw_energy(s, p);
                double want = std::exp(-beta * std::max(0.0, d));
                CHECK(acc.accept(env, t) == doctest::Approx(want).epsilon(1e-12));
                leave += want;
            }
            CHECK(acc.leave(env) == doctest::Approx(leave).epsilon(1e-12));
        }
    }
    AcceptanceTable cold(p, 1e4);
    Configuration s(lat, Spin{2});
    std::array<int, 3> cnt{0, 4, 0};
    CHECK(cold.accept(LocalDeltaTable::env_index(2, cnt), 1) == 0.0);
    CHECK(cold.accept(LocalDeltaTable::env_index(1, cnt), 2) == 1.0);
}

TEST_CASE("one Metropolis step has the oracle transition law") {
    auto p = generic();
    TorusLattice lat(2, 3);
    double beta = 0.9;
    Configuration start = Configuration::parse(lat, "121332");
    auto want = oracle::metropolis_row(start, p, beta);
    AcceptanceTable acc(p, beta);
    ChainState st(start, p, Philox(17));
    const int trials = 1'000'000;
    std::map<std::string, int> seen;
    for (int t = 0; t < trials; ++t) {
        step(st, acc, p);
        ++seen[st.sigma.str()];
        for (int v = 0; v < lat.size(); ++v)
            if (st.sigma[v] != start[v]) st.apply_flip(v, start[v], p);
    }
    for (auto& [k, c] : seen) CHECK(want.count(k) == 1);
    for (auto& [k, q] : want) {
        double f = static_cast<double>(seen[k]) / trials;
        double se = std::sqrt(q * (1 - q) / trials);
        CHECK(std::abs(f - q) <= 3 * se + 1e-12);
    }
    CHECK(st.step == trials);
}

TEST_CASE("both engines reproduce the exact mean hitting time on 2x2") {
    auto p = generic();
    TorusLattice lat(2, 2);
    double beta = 0.7;
    Configuration start(lat, Spin{2});
    double exact = exact_mean_hitting(lat, p, beta, start);
    auto target = target_monochromatic({1});
    for (Engine e : {Engine::Metropolis, Engine::RejectionFree}) {
        HittingOptions o;
        o.beta = beta;
        o.seed = 99;
        o.engine = e;
        o.max_steps = 100'000'000;
        o.classify = false;
        auto recs = hitting_replicas(start, target, p, o, 20000, 2);
        double s = 0.0, s2 = 0.0;
        for (const auto& r : recs) {
            REQUIRE_FALSE(r.censored);
            s += static_cast<double>(r.tau);
            s2 += static_cast<double>(r.tau) * static_cast<double>(r.tau);
        }
        double n = static_cast<double>(recs.size()), mean = s / n;
        double se = std::sqrt((s2 / n - mean * mean) / n);
        MESSAGE("engine ", static_cast<int>(e), " mean ", mean, " exact ", exact, " se ", se);
        CHECK(std::abs(mean - exact) <= 3 * se);
    }
}

TEST_CASE("hitting runs are deterministic across thread counts") {
    auto p = generic();
    TorusLattice lat(3, 3);
    HittingOptions o;
    o.beta = 1.5;
    o.seed = 5;
    auto target = target_monochromatic({1});
    Configuration start(lat, Spin{2});
    auto a = hitting_replicas(start, target, p, o, 24, 1);
    auto b = hitting_replicas(start, target, p, o, 24, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].tau == b[i].tau);
        CHECK(a[i].stream == i);
        CHECK(a[i].moves == b[i].moves);
    }
    CHECK(records_csv(a) == records_csv(b));
    CHECK_THROWS_AS(simulate_hitting(Configuration(lat, Spin{1}), target, p, o), std::invalid_argument);
}

TEST_CASE("censoring, medians and intervals") {
    auto p = generic();
    TorusLattice lat(4, 4);
    HittingOptions o;
    o.beta = 6.0;
    o.max_steps = 50;
    auto r = simulate_hitting(Configuration(lat, Spin{2}), target_monochromatic({1}), p, o);
    CHECK(r.censored);
    CHECK(r.tau == 50);
    std::vector<HittingRecord> v(5);
    for (int i = 0; i < 5; ++i) v[static_cast<std::size_t>(i)].tau = 10 * (i + 1);
    CHECK(*censored_median(v) == 30.0);
    v[4].censored = v[3].censored = v[2].censored = true;
    CHECK_FALSE(censored_median(v).has_value());
    auto [lo, hi] = Proportion{5, 10}.wilson();
    CHECK(lo == doctest::Approx(0.23659).epsilon(1e-4));
    CHECK(hi == doctest::Approx(0.76341).epsilon(1e-4));
}

TEST_CASE("recurrence bound formula") {
    auto par = CouplingParams::from_gammas(Rational(1), Rational(12, 5), Rational(52, 55), Rational(1, 11));
    RecurrenceOptions o;
    o.betas = {0.5};
    o.replicas = 4;
    o.epsilon = 0.5;
    auto rows = recurrence_experiment(par, TorusLattice(6, 6), o);
    REQUIRE(rows.size() == 1);
    int l = derive_constants(par).ell_star;
    CHECK(rows[0].bound == doctest::Approx(std::exp(0.5 * (2 * (l - 1) * (par.gamma23() + par.gamma1()) + 0.5))));
    CHECK(rows[0].replicas + rows[0].excluded == 4);
}
