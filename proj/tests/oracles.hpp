#pragma once

// Test-only reference computations. Deliberately built from plain loops over
// std::vector (power series, distribution propagation, enumeration) so they
// share no code path with the library's factorized solves.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "dtx/mdp.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline Mat policy_matrix(const dtx::TabularMdp &m, const dtx::PolicyTable &pi) {
    const auto S = m.num_states();
    Mat p(S, Vec(S, 0.0));
    for (std::size_t x = 0; x < S; ++x)
        for (std::size_t a = 0; a < m.num_actions(); ++a)
            for (std::size_t y = 0; y < S; ++y) p[x][y] += pi(x, a) * m.p(x, a, y);
    return p;
}

inline Vec policy_reward(const dtx::TabularMdp &m, const dtx::PolicyTable &pi) {
    Vec r(m.num_states(), 0.0);
    for (std::size_t x = 0; x < m.num_states(); ++x)
        for (std::size_t a = 0; a < m.num_actions(); ++a) r[x] += pi(x, a) * m.reward(x, a);
    return r;
}

inline Vec matvec(const Mat &p, const Vec &v) {
    Vec out(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out[i] += p[i][j] * v[j];
    return out;
}

/// Row vector times matrix.
inline Vec vecmat(const Vec &d, const Mat &p) {
    Vec out(p.empty() ? 0 : p[0].size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += d[i] * p[i][j];
    return out;
}

/// sum_{t < terms} coeff(t) P^t v
inline Vec power_series(const Mat &p, const Vec &v, const std::function<double(std::size_t)> &coeff,
                        std::size_t terms) {
    Vec acc(v.size(), 0.0), cur = v;
    for (std::size_t t = 0; t < terms; ++t) {
        const double c = coeff(t);
        for (std::size_t i = 0; i < v.size(); ++i) acc[i] += c * cur[i];
        cur = matvec(p, cur);
    }
    return acc;
}

inline Vec value(const Mat &p, const Vec &r, double gamma, std::size_t terms = 3000) {
    return power_series(p, r, [gamma](std::size_t t) { return std::pow(gamma, static_cast<double>(t)); }, terms);
}

/// Binomial coefficient by the multiplicative formula in long double.
inline double binom(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0.0;
    long double c = 1.0L;
    for (std::uint64_t i = 1; i <= k; ++i) c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    return static_cast<double>(c);
}

/// Coefficient of P^t r in V_K: sum_{k <= min(K, t)} C(t, k) (gamma'-gamma)^k gamma^(t-k).
inline double series_weight(std::size_t K, std::size_t t, double gamma, double gamma_prime) {
    double s = 0.0;
    for (std::size_t k = 0; k <= std::min(K, t); ++k)
        s += binom(t, k) * std::pow(gamma_prime - gamma, static_cast<double>(k)) *
             std::pow(gamma, static_cast<double>(t - k));
    return s;
}

inline Vec taylor_value(const Mat &p, const Vec &r, double gamma, double gamma_prime, std::size_t K,
                        std::size_t terms = 600) {
    return power_series(p, r, [=](std::size_t t) { return series_weight(K, t, gamma, gamma_prime); }, terms);
}

/// Distribution of x_t from x_0 = start, t = 0..terms-1.
inline std::vector<Vec> propagate(const Mat &p, std::size_t start, std::size_t terms) {
    std::vector<Vec> out;
    Vec d(p.size(), 0.0);
    d[start] = 1.0;
    for (std::size_t t = 0; t < terms; ++t) {
        out.push_back(d);
        d = vecmat(d, p);
    }
    return out;
}

inline Vec visitation(const Mat &p, std::size_t start, double gamma, std::size_t terms = 3000) {
    Vec d(p.size(), 0.0);
    const auto mus = propagate(p, start, terms);
    for (std::size_t t = 0; t < terms; ++t)
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += (1.0 - gamma) * std::pow(gamma, double(t)) * mus[t][i];
    return d;
}

/// rho(x') = E[ sum_t gamma'^t 1{x_t = x'} ] - gamma E[ sum_t gamma'^t 1{x_{t+1} = x'} ]
inline Vec rho(const Mat &p, std::size_t start, double gamma, double gamma_prime, std::size_t terms = 600) {
    const auto mus = propagate(p, start, terms + 1);
    Vec out(p.size(), 0.0);
    for (std::size_t t = 0; t < terms; ++t) {
        const double g = std::pow(gamma_prime, double(t));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += g * (mus[t][i] - gamma * mus[t + 1][i]);
    }
    return out;
}

/// Number of vectors in Z_{>=0}^k summing to n, by recursive enumeration.
inline std::uint64_t count_compositions(std::uint64_t n, std::uint64_t k) {
    if (k == 1) return 1;
    std::uint64_t c = 0;
    for (std::uint64_t s = 0; s <= n; ++s) c += count_compositions(n - s, k - 1);
    return c;
}

/// f(K, t) with the binomial replaced by enumerated composition counts F(t-u, u) = C(t-1, u-1).
inline double f_enumerated(std::size_t K, std::size_t t, double gamma, double gamma_prime) {
    double s = 0.0;
    for (std::size_t u = 1; u <= std::min(K, t); ++u)
        s += std::pow(gamma_prime - gamma, double(u)) * std::pow(gamma, double(t - u)) *
             static_cast<double>(count_compositions(t - u, u));
    return s;
}

/// Q(x,a) = r(x,a) + gamma sum_y p(y|x,a) V(y), with V from the power series.
inline Vec q_value(const dtx::TabularMdp &m, const dtx::PolicyTable &pi, double gamma, std::size_t terms = 3000) {
    const Vec v = value(policy_matrix(m, pi), policy_reward(m, pi), gamma, terms);
    Vec q(m.num_states() * m.num_actions());
    for (std::size_t x = 0; x < m.num_states(); ++x)
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            double acc = m.reward(x, a);
            for (std::size_t y = 0; y < m.num_states(); ++y) acc += gamma * m.p(x, a, y) * v[y];
            q[x * m.num_actions() + a] = acc;
        }
    return q;
}

/// d log pi(a|x) / d theta[y][b] for a tabular softmax.
inline double score(const dtx::PolicyTable &pi, std::size_t x, std::size_t a, std::size_t y, std::size_t b) {
    if (x != y) return 0.0;
    return (a == b ? 1.0 : 0.0) - pi(y, b);
}

/// sum_t weight(t) E[ g(x_t, a_t) grad log pi(a_t|x_t) ], evaluated exactly by propagation.
/// Result indexed [y * A + b].
inline Vec expected_pg(const dtx::TabularMdp &m, const dtx::PolicyTable &pi, std::size_t start,
                       const std::function<double(std::size_t)> &weight, const Vec &g_sa, std::size_t terms) {
    const auto S = m.num_states(), A = m.num_actions();
    const auto mus = propagate(policy_matrix(m, pi), start, terms);
    Vec out(S * A, 0.0);
    for (std::size_t t = 0; t < terms; ++t) {
        const double w = weight(t);
        if (w == 0.0) continue;
        for (std::size_t x = 0; x < S; ++x) {
            if (mus[t][x] == 0.0) continue;
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t b = 0; b < A; ++b)
                    out[x * A + b] += w * mus[t][x] * pi(x, a) * g_sa[x * A + a] * score(pi, x, a, x, b);
        }
    }
    return out;
}

/// Second partial gradient in the shifted W form:
///   (gamma'-gamma) sum_s gamma'^s E[ grad log pi(a_s|x_s) sum_z p(z|x_s,a_s) W(z) ],
///   W = sum_t gamma'^t P^t V_gamma.
inline Vec second_partial_series(const dtx::TabularMdp &m, const dtx::PolicyTable &pi, std::size_t start,
                                 double gamma, double gamma_prime, std::size_t terms = 500) {
    const auto S = m.num_states(), A = m.num_actions();
    const Mat p = policy_matrix(m, pi);
    const Vec v = value(p, policy_reward(m, pi), gamma);
    const Vec w = value(p, v, gamma_prime, 4 * terms);
    Vec next_w(S * A, 0.0);
    for (std::size_t x = 0; x < S; ++x)
        for (std::size_t a = 0; a < A; ++a)
            for (std::size_t z = 0; z < S; ++z) next_w[x * A + a] += m.p(x, a, z) * w[z];
    Vec g = expected_pg(m, pi, start, [=](std::size_t s) { return std::pow(gamma_prime, double(s)); }, next_w, terms);
    for (auto &v2 : g) v2 *= gamma_prime - gamma;
    return g;
}

}  // namespace oracle
