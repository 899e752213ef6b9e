#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "defport/chain.hpp"
#include "support.hpp"

using namespace defport;
using testsupport::two_state_generator;

TEST_CASE("zero elapsed time gives the identity", "[chain]") {
    std::mt19937_64 g(1);
    const Matrix a = testsupport::random_generator(g, 4);
    const Matrix p = transition_matrix(a, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) REQUIRE(p(i, j) == (i == j ? 1.0 : 0.0));
    REQUIRE_THROWS_AS(transition_matrix(a, -1.0), std::invalid_argument);
}

TEST_CASE("long-run transition rows approach the stationary law (1/8, 7/8)", "[chain]") {
    const Matrix a = two_state_generator(0.7, 0.1);
    const Matrix p = transition_matrix(a, 200.0);
    for (std::size_t i = 0; i < 2; ++i) {
        REQUIRE(p(i, 0) == Catch::Approx(0.125).margin(1e-12));
        REQUIRE(p(i, 1) == Catch::Approx(0.875).margin(1e-12));
    }
    const auto pi = stationary_distribution(a);
    REQUIRE(pi[0] == Catch::Approx(0.125).margin(1e-14));
    REQUIRE(pi[1] == Catch::Approx(0.875).margin(1e-14));
}

TEST_CASE("two-state transition matrix matches its scalar closed form", "[chain]") {
    const double a12 = 0.7, a21 = 0.1, dt = 1.3;
    const Matrix p = transition_matrix(two_state_generator(a12, a21), dt);
    const double s = a12 + a21;
    const double p11 = a21 / s + a12 / s * std::exp(-s * dt);
    REQUIRE(p(0, 0) == Catch::Approx(p11).epsilon(1e-13));
    REQUIRE(p(1, 1) == Catch::Approx(a12 / s + a21 / s * std::exp(-s * dt)).epsilon(1e-13));
}

TEST_CASE("transition rows are stochastic for random generators", "[chain][property]") {
    std::mt19937_64 g(2);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + trial % 8;
        const Matrix a = testsupport::random_generator(g, n, 0.0, 3.0);
        const double dt = testsupport::uniform(g, 0.0, 20.0);
        const Matrix p = transition_matrix(a, dt);
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                REQUIRE(p(i, j) >= 0.0);
                row += p(i, j);
            }
            REQUIRE(std::abs(row - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("transition matrices form a semigroup", "[chain][property]") {
    std::mt19937_64 g(3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const Matrix a = testsupport::random_generator(g, n);
        const double s = testsupport::uniform(g, 0.0, 3.0), t = testsupport::uniform(g, 0.0, 3.0);
        const Matrix lhs = transition_matrix(a, s + t);
        const Matrix rhs = transition_matrix(a, s) * transition_matrix(a, t);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) REQUIRE(std::abs(lhs(i, j) - rhs(i, j)) <= 1e-10);
    }
}

TEST_CASE("transition matrix agrees with an independent Taylor oracle", "[chain][property]") {
    std::mt19937_64 g(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 5;
        const Matrix a = testsupport::random_generator(g, n);
        const double dt = testsupport::uniform(g, 0.01, 5.0);
        const Matrix p = transition_matrix(a, dt);
        Matrix scaled = a;
        scaled *= dt;
        const Matrix q = testsupport::expm_taylor(scaled);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) REQUIRE(std::abs(p(i, j) - q(i, j)) <= 1e-12);
    }
}

TEST_CASE("a zero generator never jumps", "[chain]") {
    RngStream rng(5, 0);
    const ChainPath path = sample_path(Matrix(3, 3, 0.0), 2, 10.0, rng);
    REQUIRE(path.jumps() == 0);
    REQUIRE(path.state_at(7.0) == 2);
    REQUIRE(path.occupation(3)[2] == 10.0);
}

TEST_CASE("an absorbing state stops the path", "[chain]") {
    const Matrix a = Matrix::from_rows({{-1.0, 1.0}, {0.0, 0.0}});
    for (std::uint64_t k = 0; k < 200; ++k) {
        RngStream rng(6, k);
        const ChainPath path = sample_path(a, 0, 50.0, rng);
        REQUIRE(path.jumps() <= 1);
    }
}

TEST_CASE("sampled paths are well formed and reproducible", "[chain][property]") {
    std::mt19937_64 g(7);
    for (std::uint64_t k = 0; k < 300; ++k) {
        const std::size_t n = 2 + k % 4;
        const Matrix a = testsupport::random_generator(g, n);
        RngStream r1(99, k), r2(99, k);
        const ChainPath p1 = sample_path(a, k % n, 5.0, r1);
        const ChainPath p2 = sample_path(a, k % n, 5.0, r2);
        REQUIRE(p1.jump_times == p2.jump_times);
        REQUIRE(p1.states == p2.states);
        REQUIRE(p1.states.size() == p1.jump_times.size() + 1);
        for (std::size_t j = 0; j < p1.jumps(); ++j) {
            REQUIRE(p1.jump_times[j] > (j ? p1.jump_times[j - 1] : 0.0));
            REQUIRE(p1.jump_times[j] <= 5.0);
            REQUIRE(p1.states[j + 1] != p1.states[j]);
            REQUIRE(p1.states[j + 1] < n);
        }
        const auto occ = p1.occupation(n);
        double total = 0.0;
        for (double o : occ) total += o;
        REQUIRE(total == Catch::Approx(5.0).epsilon(1e-14));
        std::vector<double> ones(n, 1.0);
        REQUIRE(p1.integrate(ones) == Catch::Approx(5.0).epsilon(1e-14));
    }
}

TEST_CASE("mean first holding time from state 1 is 1/0.7", "[chain]") {
    const Matrix a = two_state_generator(0.7, 0.1);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        RngStream rng(8, static_cast<std::uint64_t>(k));
        const ChainPath path = sample_path(a, 0, 60.0, rng);
        REQUIRE(path.jumps() >= 1);
        const double t = path.jump_times.front();
        sum += t;
        sq += t * t;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    REQUIRE(std::abs(mean - 1.0 / 0.7) <= 3.0 * se);
}

TEST_CASE("long-horizon occupation fractions match the stationary law", "[chain]") {
    const Matrix a = two_state_generator(0.7, 0.1);
    const int n = 4000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < n; ++k) {
        RngStream rng(9, static_cast<std::uint64_t>(k));
        const std::size_t start = rng.uniform() < 0.125 ? 0 : 1;
        const double frac = sample_path(a, start, 200.0, rng).occupation(2)[0] / 200.0;
        sum += frac;
        sq += frac * frac;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    // started in the stationary law, so the expected fraction is exactly 1/8
    REQUIRE(std::abs(mean - 0.125) <= 3.0 * se);
}

TEST_CASE("empirical jump rates converge to the generator entries", "[chain]") {
    std::mt19937_64 g(10);
    const std::size_t n = 3;
    const Matrix a = testsupport::random_generator(g, n, 0.2, 1.5);
    Matrix counts(n, n, 0.0);
    std::vector<double> time_in(n, 0.0);
    // 1000 paths of 100 years = 10^5 path-years
    for (std::uint64_t k = 0; k < 1000; ++k) {
        RngStream rng(10, k);
        const ChainPath path = sample_path(a, k % n, 100.0, rng);
        for (std::size_t j = 0; j < path.jumps(); ++j) counts(path.states[j], path.states[j + 1]) += 1.0;
        const auto occ = path.occupation(n);
        for (std::size_t i = 0; i < n; ++i) time_in[i] += occ[i];
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double rate = counts(i, j) / time_in[i];
            const double se = std::sqrt(counts(i, j)) / time_in[i];
            REQUIRE(std::abs(rate - a(i, j)) <= 3.0 * se);
        }
}

TEST_CASE("occupation atom weight is exp(-a12 R) or exp(-a21 R)", "[chain]") {
    REQUIRE(occupation_density_2state(0.7, 0.1, 2.0, 0).atom_weight() == Catch::Approx(0.246597).margin(1e-6));
    REQUIRE(occupation_density_2state(0.7, 0.1, 2.0, 1).atom_weight() == Catch::Approx(std::exp(-0.2)).epsilon(1e-15));
}

TEST_CASE("occupation density has unit mass", "[chain]") {
    REQUIRE(std::abs(occupation_density_2state(0.7, 0.1, 2.0, 0).total_mass() - 1.0) <= 1e-8);
    REQUIRE(std::abs(occupation_density_2state(0.7, 0.1, 2.0, 1).total_mass() - 1.0) <= 1e-8);
}

TEST_CASE("occupation density has unit mass on random rate triples", "[chain][property]") {
    std::mt19937_64 g(12);
    for (int trial = 0; trial < 100; ++trial) {
        const double a12 = testsupport::uniform(g, 0.01, 5.0);
        const double a21 = testsupport::uniform(g, 0.01, 5.0);
        const double r = testsupport::uniform(g, 0.05, 10.0);
        for (std::size_t start : {0u, 1u}) REQUIRE(std::abs(occupation_density_2state(a12, a21, r, start).total_mass() - 1.0) <= 1e-8);
    }
}

TEST_CASE("occupation density matches a first-moment identity", "[chain]") {
    // E[time in state 1 over [0,R]] = integral of P_11(s) ds
    const double a12 = 0.7, a21 = 0.1, r = 2.0, s = a12 + a21;
    const double exact = a21 / s * r + a12 / (s * s) * (1.0 - std::exp(-s * r));
    const double mean = occupation_density_2state(a12, a21, r, 0).expectation([](double x) { return x; });
    REQUIRE(mean == Catch::Approx(exact).epsilon(1e-11));
}

TEST_CASE("occupation histogram from sampled paths matches the density", "[chain]") {
    const double a12 = 0.7, a21 = 0.1, r = 2.0;
    const Matrix a = two_state_generator(a12, a21);
    const auto density = occupation_density_2state(a12, a21, r, 0);
    const int n = 100000, bins = 20;
    std::vector<double> counts(bins, 0.0);
    int atoms = 0;
    for (int k = 0; k < n; ++k) {
        RngStream rng(13, static_cast<std::uint64_t>(k));
        const ChainPath path = sample_path(a, 0, r, rng);
        if (path.jumps() == 0) {
            ++atoms;
            continue;
        }
        const double x = path.occupation(2)[0];
        counts[std::min(bins - 1, static_cast<int>(x / r * bins))] += 1.0;
    }
    const double atom = density.atom_weight();
    REQUIRE(std::abs(atoms / double(n) - atom) <= 3.0 * std::sqrt(atom * (1 - atom) / n));
    const double width = r / bins;
    for (int b = 0; b < bins; ++b) {
        const double p = quad([&](double x) { return density.continuous(x); }, b * width, (b + 1) * width, 1e-12);
        const double emp = counts[b] / n;
        REQUIRE(std::abs(emp - p) <= 3.0 * std::sqrt(p * (1.0 - p) / n));
    }
}

TEST_CASE("occupation density rejects nonpositive inputs", "[chain]") {
    REQUIRE_THROWS_AS(occupation_density_2state(0.0, 0.1, 2.0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(occupation_density_2state(0.7, -0.1, 2.0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(occupation_density_2state(0.7, 0.1, 0.0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(occupation_density_2state(0.7, 0.1, 2.0, 2), std::invalid_argument);
}
