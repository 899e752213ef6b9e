#pragma once
// Shared fixtures for the test suites: canonical specs, random spec generators and
// oracles that are independent of the library code paths.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "defport/market_model.hpp"
#include "defport/numerics.hpp"

namespace testsupport {

using defport::Matrix;
using defport::MarketSpec;

inline Matrix two_state_generator(double a12, double a21) {
    return Matrix::from_rows({{-a12, a12}, {a21, -a21}});
}

/// Two-regime market of the reference parameter table: r = (0.03, 0.03),
/// mu = (0.07, 0.02), sigma = (0.2, 0.2); the same generator under both measures.
inline MarketSpec table1_spec(double h1 = 0.1, double h2 = 0.1, double horizon = 2.0, double maturity = 2.0,
                              double l1 = 0.4, double l2 = 0.45, double a12 = 0.7, double a21 = 0.1) {
    MarketSpec s;
    s.n_regimes = 2;
    s.r = {0.03, 0.03};
    s.mu = {0.07, 0.02};
    s.sigma = {0.2, 0.2};
    s.h = {h1, h2};
    s.h_hist = s.h;
    s.loss = {l1, l2};
    s.gen_p = two_state_generator(a12, a21);
    s.gen_q = s.gen_p;
    s.maturity = maturity;
    s.horizon = horizon;
    return s;
}

inline MarketSpec single_regime_spec(double r = 0.03, double mu = 0.07, double sigma = 0.2, double h = 0.1,
                                     double loss = 0.4, double maturity = 2.0, double horizon = 2.0) {
    MarketSpec s;
    s.n_regimes = 1;
    s.r = {r};
    s.mu = {mu};
    s.sigma = {sigma};
    s.h = {h};
    s.h_hist = {h};
    s.loss = {loss};
    s.gen_p = Matrix(1, 1, 0.0);
    s.gen_q = Matrix(1, 1, 0.0);
    s.maturity = maturity;
    s.horizon = horizon;
    return s;
}

/// No default anywhere and identical generators: the bond is riskless up to regime moves.
inline MarketSpec no_default_spec() {
    MarketSpec s = table1_spec(0.0, 0.0);
    s.h_hist = {0.0, 0.0};
    return s;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline Matrix random_generator(std::mt19937_64& g, std::size_t n, double lo = 0.05, double hi = 2.0) {
    Matrix a(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            a(i, j) = uniform(g, lo, hi);
            row += a(i, j);
        }
        a(i, i) = -row;
    }
    return a;
}

struct RandomSpecOptions {
    bool same_generators = false;  // gen_q = gen_p
    bool same_intensity = false;   // h_hist = h
};

/// A random valid spec with n regimes.
inline MarketSpec random_spec(std::mt19937_64& g, std::size_t n, RandomSpecOptions opts = {}) {
    MarketSpec s;
    s.n_regimes = n;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = uniform(g, 0.0, 0.06);
        s.r.push_back(r);
        s.mu.push_back(r + uniform(g, -0.05, 0.12));
        s.sigma.push_back(uniform(g, 0.1, 0.4));
        s.h.push_back(uniform(g, 0.01, 0.5));
        s.loss.push_back(uniform(g, 0.1, 1.0));
    }
    for (std::size_t i = 0; i < n; ++i) s.h_hist.push_back(opts.same_intensity ? s.h[i] : uniform(g, 0.01, 0.5));
    s.gen_p = random_generator(g, n);
    s.gen_q = opts.same_generators ? s.gen_p : random_generator(g, n);
    s.maturity = uniform(g, 0.5, 4.0);
    s.horizon = uniform(g, 0.3, s.maturity);
    return s;
}

/// exp(A) by Taylor series with scaling and squaring (different from the Pade path).
inline Matrix expm_taylor(const Matrix& a) {
    const std::size_t n = a.rows();
    int squarings = 0;
    double norm = a.norm_inf();
    Matrix scaled = a;
    while (norm > 0.125) {
        norm *= 0.5;
        ++squarings;
    }
    scaled *= std::ldexp(1.0, -squarings);
    Matrix term = Matrix::identity(n);
    Matrix sum = Matrix::identity(n);
    for (int k = 1; k < 30; ++k) {
        term = term * scaled * (1.0 / k);
        sum += term;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

/// Power series of I_order(z) summed in long double until terms vanish.
inline double bessel_series_oracle(int order, double z) {
    const long double x = static_cast<long double>(z) / 2.0L;
    long double term = order == 0 ? 1.0L : x;
    long double sum = term;
    for (int k = 1; k < 500; ++k) {
        term *= x * x / (static_cast<long double>(k) * static_cast<long double>(k + order));
        sum += term;
        if (term < sum * 1e-21L) break;
    }
    return static_cast<double>(sum);
}

inline std::string project_root() {
    const char* env = std::getenv("DEFPORT_ROOT");
    return env ? env : ".";
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace testsupport
