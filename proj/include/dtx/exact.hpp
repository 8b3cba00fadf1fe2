#pragma once

// Closed-form oracles: values, Q-functions, visitation distributions and
// mixture weights at any discount, plus their K-th order expansions in the
// gap (gamma' - gamma) and the analytic weight schedules behind them.
//
// Every expansion is evaluated through the increment recursion
//   D_0 = V_gamma,   D_k = (gamma' - gamma) (I - gamma P)^{-1} P D_{k-1},
//   V_K = D_0 + ... + D_K,
// so order K costs one factorization and K triangular-solve pairs.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "dtx/errors.hpp"
#include "dtx/linalg.hpp"
#include "dtx/mdp.hpp"

namespace dtx {

/// (gamma, gamma', K) triple of a discount expansion.
///
/// gamma' == gamma is accepted as the degenerate zero-gap case; gamma' == 1 is
/// only meaningful together with an AbsorbingDecomposition.
struct ExpansionConfig {
    double gamma = 0.0;
    double gamma_prime = 0.0;
    std::size_t order = 0;

    double gap() const noexcept { return gamma_prime - gamma; }

    /// (gamma' - gamma) / (1 - gamma): per-order contraction of the expansion.
    double ratio() const noexcept { return gap() / (1.0 - gamma); }

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) {
            throw domain_error("expansion needs gamma in [0, 1)");
        }
        if (!(gamma_prime >= gamma && gamma_prime <= 1.0)) {
            throw domain_error("expansion needs gamma <= gamma' <= 1");
        }
    }
};

/// Which discount a vector was computed at. Plain oracles carry
/// gamma_prime == gamma and order 0.
struct DiscountTag {
    double gamma = 0.0;
    double gamma_prime = 0.0;
    std::size_t order = 0;

    static DiscountTag plain(double g) { return {g, g, 0}; }
    static DiscountTag expansion(const ExpansionConfig &c) { return {c.gamma, c.gamma_prime, c.order}; }
};

struct ValueVector {
    Vector values;
    DiscountTag tag;

    double operator()(State x) const { return values(static_cast<Eigen::Index>(x)); }
};

struct QVector {
    Vector values;  ///< indexed by sa_index(x, a, num_actions)
    DiscountTag tag;
    std::size_t num_actions = 1;

    double operator()(State x, Action a) const {
        return values(static_cast<Eigen::Index>(sa_index(x, a, num_actions)));
    }

    /// V(x) = sum_a pi(a|x) Q(x,a)
    Vector state_values(const PolicyTable &policy) const {
        const auto S = policy.num_states();
        Vector v = Vector::Zero(static_cast<Eigen::Index>(S));
        for (State x = 0; x < S; ++x) {
            for (Action a = 0; a < num_actions; ++a) {
                v(static_cast<Eigen::Index>(x)) += policy(x, a) * (*this)(x, a);
            }
        }
        return v;
    }

    /// A(x,a) = Q(x,a) - V(x)
    Vector advantage(const PolicyTable &policy) const {
        Vector v = state_values(policy);
        Vector adv = values;
        for (State x = 0; x < policy.num_states(); ++x) {
            for (Action a = 0; a < num_actions; ++a) {
                adv(static_cast<Eigen::Index>(sa_index(x, a, num_actions))) -= v(static_cast<Eigen::Index>(x));
            }
        }
        return adv;
    }
};

struct VisitationVector {
    Vector probs;
    State start = 0;
    DiscountTag tag;
};

/// Signed state weights rho with V_{gamma'}(x) = rho^T V_gamma.
struct RhoWeightVector {
    Vector weights;
    State start = 0;
    DiscountTag tag;
};

namespace detail {

inline void require_discount(double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) {
        std::ostringstream os;
        os << "discount " << gamma << " outside [0, 1); use the absorbing decomposition for gamma = 1";
        throw domain_error(os.str());
    }
}

inline void require_state(State x, std::size_t num_states) {
    require<parameter_error>(x < num_states, "state index out of range");
}

inline Vector dirac(State x, std::size_t n) {
    Vector d = Vector::Zero(static_cast<Eigen::Index>(n));
    d(static_cast<Eigen::Index>(x)) = 1.0;
    return d;
}

/// Partial sums S_0..S_K of sum_k ((gap) (I - gamma M)^{-1} M)^k base, or of the
/// transposed operator ((gap) (I - gamma M^T)^{-1} M^T)^k when `dual` is set.
inline std::vector<Vector> expansion_partial_sums(const ResolventSolver &solver, const Matrix &m,
                                                  const Vector &base, double gap, std::size_t order,
                                                  bool dual) {
    std::vector<Vector> sums;
    sums.reserve(order + 1);
    Vector increment = base;
    sums.push_back(base);
    for (std::size_t k = 1; k <= order; ++k) {
        if (dual) {
            increment = gap * solver.solve_transposed(m.transpose() * increment);
        } else {
            increment = gap * solver.solve(m * increment);
        }
        sums.push_back(sums.back() + increment);
    }
    return sums;
}

inline void check_bellman(const Vector &v, const Vector &r, const Matrix &p, double gamma) {
    const double residual = max_abs(v - r - gamma * (p * v));
    if (!(residual <= 1e-9 * std::max(1.0, max_abs(v)))) {
        std::ostringstream os;
        os << "Bellman residual " << residual << " exceeds tolerance";
        throw numeric_error(os.str());
    }
}

}  // namespace detail

// -- value, Q and visitation oracles -------------------------------------------

/// V_gamma = (I - gamma P^pi)^{-1} r^pi
inline ValueVector value(const InducedChain &chain, double gamma) {
    detail::require_discount(gamma);
    ResolventSolver solver(chain.p_pi, gamma);
    Vector v = solver.solve(chain.r_pi);
    detail::check_bellman(v, chain.r_pi, chain.p_pi, gamma);
    return {std::move(v), DiscountTag::plain(gamma)};
}

/// Undiscounted value of an absorbing chain: N r-tilde on transient states, 0 on absorbing ones.
inline ValueVector value_undiscounted(const AbsorbingDecomposition &dec) {
    return {dec.embed(dec.fundamental_matrix * dec.transient_rewards), DiscountTag::plain(1.0)};
}

/// Q_gamma = (I - gamma P-bar)^{-1} r
inline QVector q_value(const InducedChain &chain, double gamma) {
    detail::require_discount(gamma);
    ResolventSolver solver(chain.p_bar, gamma);
    Vector q = solver.solve(chain.r_sa);
    detail::check_bellman(q, chain.r_sa, chain.p_bar, gamma);
    return {std::move(q), DiscountTag::plain(gamma), chain.num_actions()};
}

/// d_{x,gamma} solving d = (1 - gamma) delta_x + gamma (P^pi)^T d.
inline VisitationVector visitation(const InducedChain &chain, State start, double gamma) {
    detail::require_discount(gamma);
    detail::require_state(start, chain.num_states());
    ResolventSolver solver(chain.p_pi, gamma);
    Vector d = (1.0 - gamma) * solver.solve_transposed(detail::dirac(start, chain.num_states()));
    return {std::move(d), start, DiscountTag::plain(gamma)};
}

// -- primal expansions ----------------------------------------------------------

/// V_0, ..., V_K of the expansion (all orders up to cfg.order); requires gamma' < 1.
inline std::vector<ValueVector> taylor_value_sequence(const InducedChain &chain, const ExpansionConfig &cfg) {
    cfg.validate();
    detail::require_discount(cfg.gamma_prime);
    ResolventSolver solver(chain.p_pi, cfg.gamma);
    Vector base = solver.solve(chain.r_pi);
    auto sums = detail::expansion_partial_sums(solver, chain.p_pi, base, cfg.gap(), cfg.order, false);
    std::vector<ValueVector> out;
    out.reserve(sums.size());
    for (std::size_t k = 0; k < sums.size(); ++k) {
        out.push_back({std::move(sums[k]), {cfg.gamma, cfg.gamma_prime, k}});
    }
    return out;
}

/// V_{K,gamma,gamma'} = sum_{k<=K} ((gamma'-gamma)(I - gamma P)^{-1} P)^k V_gamma, gamma' < 1.
inline ValueVector taylor_value(const InducedChain &chain, const ExpansionConfig &cfg) {
    return std::move(taylor_value_sequence(chain, cfg).back());
}

/// Expansion on an absorbing chain; admits gamma' == 1. Runs on the transient block
/// (absorbing states have value 0 at every discount).
inline ValueVector taylor_value(const AbsorbingDecomposition &dec, const ExpansionConfig &cfg) {
    cfg.validate();
    ResolventSolver solver(dec.transient_block, cfg.gamma);
    Vector base = solver.solve(dec.transient_rewards);
    auto sums = detail::expansion_partial_sums(solver, dec.transient_block, base, cfg.gap(), cfg.order, false);
    return {dec.embed(sums.back()), DiscountTag::expansion(cfg)};
}

/// Upper bound on |V_{gamma'}(x) - V_K(x)|: ((gamma'-gamma)/(1-gamma))^{K+1} R_max / (1-gamma').
inline double residual_bound(const ExpansionConfig &cfg, double r_max) {
    cfg.validate();
    if (cfg.gamma_prime >= 1.0) {
        throw domain_error("residual bound is infinite for gamma' = 1");
    }
    return std::pow(cfg.ratio(), static_cast<double>(cfg.order + 1)) * r_max / (1.0 - cfg.gamma_prime);
}

/// Q_{K,gamma,gamma'}: the same expansion driven by P-bar and the state-action rewards.
inline QVector taylor_q(const InducedChain &chain, const ExpansionConfig &cfg) {
    cfg.validate();
    detail::require_discount(cfg.gamma_prime);
    ResolventSolver solver(chain.p_bar, cfg.gamma);
    Vector base = solver.solve(chain.r_sa);
    auto sums = detail::expansion_partial_sums(solver, chain.p_bar, base, cfg.gap(), cfg.order, false);
    return {std::move(sums.back()), DiscountTag::expansion(cfg), chain.num_actions()};
}

// -- dual expansions ------------------------------------------------------------

/// d_{x,K} = (1-gamma')/(1-gamma) sum_{k<=K} ((gamma'-gamma)(I - gamma P^T)^{-1} P^T)^k d_{x,gamma}.
/// For finite K the entries need not sum to one.
inline VisitationVector taylor_visitation(const InducedChain &chain, State start, const ExpansionConfig &cfg) {
    cfg.validate();
    detail::require_discount(cfg.gamma_prime);
    detail::require_state(start, chain.num_states());
    ResolventSolver solver(chain.p_pi, cfg.gamma);
    Vector base = (1.0 - cfg.gamma) * solver.solve_transposed(detail::dirac(start, chain.num_states()));
    auto sums = detail::expansion_partial_sums(solver, chain.p_pi, base, cfg.gap(), cfg.order, true);
    Vector d = ((1.0 - cfg.gamma_prime) / (1.0 - cfg.gamma)) * sums.back();
    return {std::move(d), start, DiscountTag::expansion(cfg)};
}

/// rho_{x,gamma,gamma'} = (I - gamma P^T)(I - gamma' P^T)^{-1} delta_x. Undefined for gamma' = 1.
inline RhoWeightVector rho_weight(const InducedChain &chain, State start, double gamma, double gamma_prime) {
    ExpansionConfig{gamma, gamma_prime, 0}.validate();
    if (gamma_prime >= 1.0) {
        throw domain_error("rho weight is undefined for gamma' = 1");
    }
    detail::require_state(start, chain.num_states());
    ResolventSolver solver(chain.p_pi, gamma_prime);
    Vector y = solver.solve_transposed(detail::dirac(start, chain.num_states()));
    Vector rho = y - gamma * (chain.p_pi.transpose() * y);
    return {std::move(rho), start, {gamma, gamma_prime, 0}};
}

/// rho_{x,K} = sum_{k<=K} ((gamma'-gamma)(I - gamma P^T)^{-1} P^T)^k delta_x.
inline RhoWeightVector taylor_rho(const InducedChain &chain, State start, const ExpansionConfig &cfg) {
    cfg.validate();
    if (cfg.gamma_prime >= 1.0) {
        throw domain_error("rho weight is undefined for gamma' = 1");
    }
    detail::require_state(start, chain.num_states());
    ResolventSolver solver(chain.p_pi, cfg.gamma);
    auto sums = detail::expansion_partial_sums(solver, chain.p_pi, detail::dirac(start, chain.num_states()),
                                               cfg.gap(), cfg.order, true);
    return {std::move(sums.back()), start, DiscountTag::expansion(cfg)};
}

// -- weight schedules -------------------------------------------------------------

namespace detail {

/// log C(n, k) by the multiplicative recurrence; relative error O(k eps).
inline double log_binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) {
        return -std::numeric_limits<double>::infinity();
    }
    k = std::min(k, n - k);
    double acc = 0.0;
    for (std::uint64_t i = 1; i <= k; ++i) {
        acc += std::log(static_cast<double>(n - k + i) / static_cast<double>(i));
    }
    return acc;
}

/// sum_{j=lo}^{hi} C(n, j - shift) a^j b^{m - j}, evaluated term by term in log space.
inline double binomial_power_sum(std::uint64_t n, std::uint64_t shift, std::uint64_t lo, std::uint64_t hi,
                                 double a, double b, std::uint64_t m) {
    double total = 0.0;
    for (std::uint64_t j = lo; j <= hi; ++j) {
        const std::uint64_t b_exp = m - j;
        if ((a == 0.0 && j > 0) || (b == 0.0 && b_exp > 0)) {
            continue;
        }
        double log_term = log_binomial(n, j - shift);
        if (j > 0) {
            log_term += static_cast<double>(j) * std::log(a);
        }
        if (b_exp > 0) {
            log_term += static_cast<double>(b_exp) * std::log(b);
        }
        total += std::exp(log_term);
    }
    return total;
}

}  // namespace detail

/// f(K, t) = sum_{u=1}^{min(K,t)} (gamma'-gamma)^u gamma^{t-u} C(t-1, t-u), t >= 1.
///
/// Weight of V_gamma(x_t) in the trajectory form
///   V_K(x) = V_gamma(x) + E[ sum_{t>=1} f(K,t) V_gamma(x_t) ].
inline double f_weight(std::size_t order, std::size_t t, double gamma, double gamma_prime) {
    detail::require<parameter_error>(t >= 1, "f_weight needs t >= 1");
    ExpansionConfig{gamma, gamma_prime, order}.validate();
    const std::uint64_t hi = std::min<std::uint64_t>(order, t);
    if (hi == 0) {
        return 0.0;
    }
    // C(t-1, t-u) == C(t-1, u-1)
    return detail::binomial_power_sum(t - 1, 1, 1, hi, gamma_prime - gamma, gamma, t);
}

/// w_K(t) = sum_{k=0}^{min(K,t)} C(t,k) (gamma'-gamma)^k gamma^{t-k}.
///
/// Weight on the local gradient Q_t grad log pi(a_t|x_t) in the K-th order
/// partial-gradient update. w_0(t) = gamma^t and w_K(t) = gamma'^t once K >= t
/// (complete binomial sum); both endpoints are returned in closed form.
inline double update_weight(std::size_t order, std::size_t t, double gamma, double gamma_prime) {
    ExpansionConfig{gamma, gamma_prime, order}.validate();
    if (order == 0) {
        return std::pow(gamma, static_cast<double>(t));
    }
    if (order >= t) {
        return std::pow(gamma_prime, static_cast<double>(t));
    }
    return detail::binomial_power_sum(t, 0, 0, order, gamma_prime - gamma, gamma, t);
}

/// F(n, k) = C(n + k - 1, k - 1): number of k-tuples of non-negative integers summing to n.
inline std::uint64_t combination_count(std::uint64_t n, std::uint64_t k) {
    detail::require<parameter_error>(k >= 1, "combination_count needs k >= 1");
    const std::uint64_t top = n + k - 1;
    detail::require<range_error>(top >= n, "combination_count argument overflow");
    const std::uint64_t r = std::min(k - 1, n);
    unsigned __int128 result = 1;
    for (std::uint64_t i = 1; i <= r; ++i) {
        // result == C(top - r + i - 1, i - 1) here; the product stays exact in 128 bits.
        result = result * (top - r + i) / i;
        if (result > std::numeric_limits<std::uint64_t>::max()) {
            throw range_error("combination_count exceeds 64-bit range");
        }
    }
    return static_cast<std::uint64_t>(result);
}

}  // namespace dtx
