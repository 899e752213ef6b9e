#pragma once
// Continuous-time Markov chain utilities: transition matrices, exact path
// sampling, and the two-state occupation-time law.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "defport/numerics.hpp"
#include "defport/rng.hpp"

namespace defport {

// -----------------------------------------------------------------------------
// Transition matrices
// -----------------------------------------------------------------------------

/// exp(generator * dt) by scaling and squaring with a diagonal Pade(6,6) approximant.
/// Entries in (-1e-14, 0) are clamped to zero.
inline Matrix transition_matrix(const Matrix& generator, double dt) {
    if (dt < 0.0) throw std::invalid_argument("transition_matrix: dt must be >= 0");
    const std::size_t n = generator.rows();
    if (dt == 0.0) return Matrix::identity(n);

    Matrix a = generator * dt;
    int squarings = 0;
    const double norm = a.norm_inf();
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
        a *= std::ldexp(1.0, -squarings);
    }

    // c_k = (2q - k)! q! / ((2q)! k! (q - k)!), q = 6
    constexpr int q = 6;
    std::vector<double> coeff(q + 1);
    coeff[0] = 1.0;
    for (int k = 1; k <= q; ++k) coeff[k] = coeff[k - 1] * (q - k + 1) / (static_cast<double>(k) * (2 * q - k + 1));

    const Matrix id = Matrix::identity(n);
    Matrix power = id;
    Matrix num = id * coeff[0];
    Matrix den = id * coeff[0];
    for (int k = 1; k <= q; ++k) {
        power = power * a;
        num += power * coeff[k];
        den += power * ((k % 2 == 0) ? coeff[k] : -coeff[k]);
    }
    Matrix result = solve_linear(den, num);
    for (int s = 0; s < squarings; ++s) result = result * result;

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (result(i, j) < 0.0 && result(i, j) > -1e-14) result(i, j) = 0.0;
    return result;
}

/// Stationary distribution pi with pi G = 0, sum pi = 1 (irreducible generator).
inline std::vector<double> stationary_distribution(const Matrix& generator) {
    const std::size_t n = generator.rows();
    // Replace the last equation of G^T pi = 0 with the normalization.
    Matrix lhs(n, n);
    Matrix rhs(n, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lhs(i, j) = generator(j, i);
    for (std::size_t j = 0; j < n; ++j) lhs(n - 1, j) = 1.0;
    rhs(n - 1, 0) = 1.0;
    const Matrix pi = solve_linear(lhs, rhs);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = pi(i, 0);
    return out;
}

// -----------------------------------------------------------------------------
// Exact path sampling
// -----------------------------------------------------------------------------

struct ChainPath {
    double start_time = 0.0;
    double end_time = 0.0;
    std::vector<double> jump_times;   // strictly increasing, in (start_time, end_time]
    std::vector<std::size_t> states;  // states[0] initial, states[k] after jump k

    std::size_t initial_state() const { return states.front(); }
    std::size_t jumps() const { return jump_times.size(); }

    std::size_t state_at(double t) const {
        std::size_t k = 0;
        while (k < jump_times.size() && jump_times[k] <= t) ++k;
        return states[k];
    }

    /// Time spent in each state over [start_time, end_time].
    std::vector<double> occupation(std::size_t n_states) const {
        std::vector<double> occ(n_states, 0.0);
        double t = start_time;
        for (std::size_t k = 0; k < jump_times.size(); ++k) {
            occ[states[k]] += jump_times[k] - t;
            t = jump_times[k];
        }
        occ[states.back()] += end_time - t;
        return occ;
    }

    /// Integral over [start_time, end_time] of rate[state(s)] ds.
    double integrate(const std::vector<double>& rate) const {
        double total = 0.0;
        double t = start_time;
        for (std::size_t k = 0; k < jump_times.size(); ++k) {
            total += rate[states[k]] * (jump_times[k] - t);
            t = jump_times[k];
        }
        return total + rate[states.back()] * (end_time - t);
    }
};

/// Samples the chain on [t_start, t_end] from `initial`: holding time in state i is
/// Exponential(-a_ii), the next state is j with probability a_ij / (-a_ii).
/// A state with a_ii = 0 is absorbing.
inline ChainPath sample_path(const Matrix& generator, std::size_t initial, double t_start, double t_end,
                             RngStream& rng) {
    const std::size_t n = generator.rows();
    if (initial >= n) throw std::out_of_range("sample_path: initial state out of range");
    ChainPath path;
    path.start_time = t_start;
    path.end_time = t_end;
    path.states.push_back(initial);
    double t = t_start;
    std::size_t state = initial;
    while (true) {
        const double exit_rate = -generator(state, state);
        if (!(exit_rate > 0.0)) break;
        t += rng.exponential(exit_rate);
        if (t > t_end) break;
        double u = rng.uniform() * exit_rate;
        std::size_t next = state;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == state) continue;
            const double rate = generator(state, j);
            if (rate <= 0.0) continue;
            next = j;
            if (u < rate) break;
            u -= rate;
        }
        path.jump_times.push_back(t);
        path.states.push_back(next);
        state = next;
    }
    return path;
}

inline ChainPath sample_path(const Matrix& generator, std::size_t initial, double horizon, RngStream& rng) {
    return sample_path(generator, initial, 0.0, horizon, rng);
}

// -----------------------------------------------------------------------------
// Two-state occupation time
// -----------------------------------------------------------------------------

/// Law of the time x spent in the starting state over [0, R] by a two-state chain:
/// an atom at x = R (no exit) plus a density on (0, R).
///
/// With a = exit rate of the starting state and b = exit rate of the other state,
///   atom  = exp(-a R)
///   f(x)  = exp(-a x - b (R - x)) [a I0(z) + sqrt(a b x / (R - x)) I1(z)],
///   z     = 2 sqrt(a b x (R - x)).
/// The I1 term is evaluated as 2 a b x * I1(z)/z, which stays finite at x = R.
class OccupationDensity {
public:
    OccupationDensity(double exit_rate, double return_rate, double horizon)
        : a_(exit_rate), b_(return_rate), horizon_(horizon) {}

    double horizon() const { return horizon_; }
    double atom_weight() const { return std::exp(-a_ * horizon_); }

    double continuous(double x) const {
        if (x < 0.0 || x > horizon_) return 0.0;
        const double rest = horizon_ - x;
        const double z = 2.0 * std::sqrt(a_ * b_ * x * rest);
        return std::exp(-a_ * x - b_ * rest) *
               (a_ * bessel_i(0, z) + 2.0 * a_ * b_ * x * bessel_i1_over_z(z));
    }

    /// E[g(X)] = atom * g(R) + integral_0^R g(x) f(x) dx.
    template <class Fn>
    double expectation(Fn&& g, double tol = 1e-12) const {
        const double cont = quad([&](double x) { return g(x) * continuous(x); }, 0.0, horizon_, tol);
        return atom_weight() * g(horizon_) + cont;
    }

    double total_mass(double tol = 1e-12) const {
        return expectation([](double) { return 1.0; }, tol);
    }

private:
    double a_;
    double b_;
    double horizon_;
};

/// Occupation law of the starting regime (0 or 1) for rates a12 (1->2) and a21 (2->1).
inline OccupationDensity occupation_density_2state(double a12, double a21, double horizon, std::size_t start) {
    if (!(a12 > 0.0) || !(a21 > 0.0)) throw std::invalid_argument("occupation_density_2state: rates must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("occupation_density_2state: horizon must be > 0");
    if (start > 1) throw std::invalid_argument("occupation_density_2state: start must be regime 0 or 1");
    return start == 0 ? OccupationDensity(a12, a21, horizon) : OccupationDensity(a21, a12, horizon);
}

}  // namespace defport
