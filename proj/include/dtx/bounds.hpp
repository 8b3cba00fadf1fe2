#pragma once

// Finite-sample error propagation for phased TD estimation of K-th order
// expansions, and a Monte-Carlo check of how often the bound actually holds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dtx/errors.hpp"
#include "dtx/exact.hpp"
#include "dtx/linalg.hpp"
#include "dtx/mdp.hpp"
#include "dtx/random.hpp"

namespace dtx {

/// Horizon under R_max in the expected gap term E(gamma, gamma', K). The
/// propagation bound restates E with 1/(1-gamma) but defines it by reference to
/// the expansion error bound, whose denominator is 1/(1-gamma'). Only the latter
/// dominates |V_{gamma'} - V_K| in general (toy seed 1 at (0.2, 0.8) breaks the
/// other one), so it is the default.
enum class GapDenominator { gamma, gamma_prime };

/// c^{K+1} R_max / (1 - gamma') by default, or c^{K+1} R_max / (1 - gamma).
inline double expected_gap_error(const ExpansionConfig &cfg, double r_max,
                                 GapDenominator den = GapDenominator::gamma_prime) {
    cfg.validate();
    const double horizon_discount = den == GapDenominator::gamma ? cfg.gamma : cfg.gamma_prime;
    if (horizon_discount >= 1.0) {
        throw domain_error("expected gap error is unbounded at discount 1");
    }
    return std::pow(cfg.ratio(), static_cast<double>(cfg.order + 1)) * r_max / (1.0 - horizon_discount);
}

struct PhasedTdConfig {
    std::size_t n = 100;          ///< samples per state per phase
    double delta = 0.1;           ///< failure probability
    ExpansionConfig cfg{0.2, 0.8, 1};
    double r_max = 1.0;
    double a_gamma_delta = 0.0;   ///< subroutine finite-sample error A(gamma, delta)
    double b_gamma = 0.2;         ///< subroutine contraction B(gamma)
    GapDenominator gap = GapDenominator::gamma_prime;

    void validate() const {
        cfg.validate();
        detail::require<parameter_error>(n >= 1, "need at least one sample per state");
        detail::require<parameter_error>(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        detail::require<parameter_error>(b_gamma >= 0.0 && b_gamma < 1.0, "contraction B must lie in [0, 1)");
        detail::require<parameter_error>(a_gamma_delta >= 0.0 && r_max >= 0.0, "A and R_max must be >= 0");
    }
};

/// epsilon = sum_{k<=K} (gamma'-gamma)^k; equals K+1 when gamma'-gamma = 1.
inline double epsilon_factor(const ExpansionConfig &cfg) {
    cfg.validate();
    const double g = cfg.gap();
    if (g >= 1.0) {
        return static_cast<double>(cfg.order + 1);
    }
    return (1.0 - std::pow(g, static_cast<double>(cfg.order + 1))) / (1.0 - g);
}

/// U = sqrt(2 log(2(K+1)/delta) / n), and 0 for K = 0.
inline double concentration_width(std::size_t order, double delta, std::size_t n) {
    detail::require<parameter_error>(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    detail::require<parameter_error>(n >= 1, "need at least one sample");
    if (order == 0) {
        return 0.0;
    }
    return std::sqrt(2.0 * std::log(2.0 * static_cast<double>(order + 1) / delta) / static_cast<double>(n));
}

/// B(gamma) for TD(lambda): (1-lambda) gamma / (1 - gamma lambda).
inline double td_lambda_contraction(double gamma, double lambda) {
    detail::require_discount(gamma);
    detail::require<parameter_error>(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
    return (1.0 - lambda) * gamma / (1.0 - gamma * lambda);
}

/// Hoeffding-style A(gamma, delta) for phased TD(0) with a union bound over states:
/// R_max/(1-gamma) sqrt(log(2S/delta) / (2n)).
inline double hoeffding_subroutine_error(double r_max, double gamma, std::size_t num_states, double delta,
                                         std::size_t n) {
    detail::require_discount(gamma);
    detail::require<parameter_error>(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    detail::require<parameter_error>(n >= 1 && num_states >= 1, "need samples and states");
    return r_max / (1.0 - gamma) *
           std::sqrt(std::log(2.0 * static_cast<double>(num_states) / delta) / (2.0 * static_cast<double>(n)));
}

/// Contraction coefficient epsilon * B of the propagated error.
inline double bound_contraction(const PhasedTdConfig &pc) { return epsilon_factor(pc.cfg) * pc.b_gamma; }

/// One step of the error recursion:
///   epsilon (A + U) + E(gamma, gamma', K) + epsilon B delta_prev.
/// If epsilon B >= 1 the recursion no longer contracts; the value is still returned
/// (see bound_contraction).
inline double error_bound_step(const PhasedTdConfig &pc, double delta_prev) {
    pc.validate();
    detail::require<parameter_error>(delta_prev >= 0.0, "previous error must be >= 0");
    const double eps = epsilon_factor(pc.cfg);
    const double u = concentration_width(pc.cfg.order, pc.delta, pc.n);
    return eps * (pc.a_gamma_delta + u) + expected_gap_error(pc.cfg, pc.r_max, pc.gap) +
           eps * pc.b_gamma * delta_prev;
}

/// Fixed point of error_bound_step when it contracts.
inline double error_bound_fixed_point(const PhasedTdConfig &pc) {
    const double rate = bound_contraction(pc);
    if (rate >= 1.0) {
        throw domain_error("error recursion does not contract (epsilon * B >= 1)");
    }
    return (error_bound_step(pc, 0.0)) / (1.0 - rate);
}

struct CoverageReport {
    std::vector<double> bounds;            ///< bound per trial (depends on that trial's previous-phase error)
    std::vector<double> empirical_errors;  ///< max-state error of the K-th order estimate per trial
    double coverage_fraction = 0.0;
    double threshold = 0.0;
    double nominal = 0.0;                  ///< 1 - 2 delta (K >= 1) or 1 - delta (K = 0)
    bool pass = false;
};

/// Guaranteed coverage minus a two-standard-error binomial slack.
inline double coverage_threshold(std::size_t order, double delta, std::size_t trials) {
    detail::require<parameter_error>(trials >= 1, "coverage needs at least one trial");
    const double nominal = order == 0 ? 1.0 - delta : 1.0 - 2.0 * delta;
    return nominal - 2.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
}

/// Runs `trials` independent phased estimations and counts how often the final-phase
/// error of the K-th order estimate stays within error_bound_step.
///
/// Per phase, each state gets n fresh one-step samples (a ~ pi, y ~ p, noisy clamped reward)
/// and phased TD(0) sets V-hat(x) = mean(r + gamma V-hat_prev(y)), starting from 0.
/// After the last phase the estimate is
///   V-hat_K(x) = sum_k c^k mean_i V-hat(x_{i,k}),  c = (gamma'-gamma)/(1-gamma),
/// where x_{i,k} are drawn independently from the k-step law ((1-gamma)(I - gamma P)^{-1} P)^k(x, .),
/// so the expectation is exactly V_K given an exact subroutine. The error is
/// max_x |V_{gamma'}(x) - V-hat_K(x)|; the bound uses the measured subroutine error of
/// the previous phase as Delta_{t-1}.
inline CoverageReport empirical_coverage(const TabularMdp &mdp, const PolicyTable &policy, const PhasedTdConfig &pc,
                                         std::size_t trials, std::uint64_t seed, std::size_t phases = 3) {
    pc.validate();
    if (trials == 0) {
        throw parameter_error("coverage report needs at least one trial");
    }
    detail::require<parameter_error>(phases >= 1, "need at least one phase");
    detail::require<parameter_error>(pc.cfg.gamma_prime < 1.0, "coverage is measured against V_{gamma'} with gamma' < 1");
    const InducedChain chain = induce(mdp, policy);
    const std::size_t S = chain.num_states();
    const std::size_t A = chain.num_actions();
    const double gamma = pc.cfg.gamma;
    const Vector v_gamma = value(chain, gamma).values;
    const Vector v_target = value(chain, pc.cfg.gamma_prime).values;

    // Row-major k-step laws for k = 1..K.
    std::vector<Matrix> laws;
    {
        ResolventSolver solver(chain.p_pi, gamma);
        const Matrix step = (1.0 - gamma) * solver.solve_columns(chain.p_pi);
        Matrix acc = Matrix::Identity(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
        for (std::size_t k = 1; k <= pc.cfg.order; ++k) {
            acc = acc * step;
            laws.push_back(acc);
        }
    }
    // Joint (action, next state) law per state, cell index a * S + y.
    std::vector<std::vector<double>> joint(S, std::vector<double>(A * S));
    for (State x = 0; x < S; ++x) {
        for (Action a = 0; a < A; ++a) {
            for (State y = 0; y < S; ++y) {
                joint[x][a * S + y] = policy(x, a) * mdp.p(x, a, y);
            }
        }
    }

    const double c = pc.cfg.ratio();
    const double eps = epsilon_factor(pc.cfg);
    const double u = concentration_width(pc.cfg.order, pc.delta, pc.n);
    const double gap = expected_gap_error(pc.cfg, pc.r_max, pc.gap);
    const double dn = static_cast<double>(pc.n);

    CoverageReport rep;
    rep.nominal = pc.cfg.order == 0 ? 1.0 - pc.delta : 1.0 - 2.0 * pc.delta;
    rep.threshold = coverage_threshold(pc.cfg.order, pc.delta, trials);
    std::size_t covered = 0;
    std::vector<double> row(S);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng = make_rng(child_seed(seed, trial));
        Vector v_hat = Vector::Zero(static_cast<Eigen::Index>(S));
        double prev_error = max_abs(v_gamma - v_hat);
        for (std::size_t t = 0; t < phases; ++t) {
            Vector next(static_cast<Eigen::Index>(S));
            for (State x = 0; x < S; ++x) {
                const auto counts = sample_multinomial(rng, pc.n, joint[x]);
                double total = 0.0;
                for (std::size_t cell = 0; cell < counts.size(); ++cell) {
                    if (counts[cell] == 0) {
                        continue;
                    }
                    const Action a = cell / S;
                    const State y = cell % S;
                    double rewards = static_cast<double>(counts[cell]) * mdp.reward(x, a);
                    if (mdp.reward_noise_std() > 0.0) {
                        rewards = 0.0;
                        for (std::size_t i = 0; i < counts[cell]; ++i) {
                            const double r = mdp.reward(x, a) * (1.0 + mdp.reward_noise_std() * standard_normal(rng));
                            rewards += std::clamp(r, 0.0, mdp.r_max());
                        }
                    }
                    total += rewards + static_cast<double>(counts[cell]) * gamma * v_hat(static_cast<Eigen::Index>(y));
                }
                next(static_cast<Eigen::Index>(x)) = total / dn;
            }
            if (t + 1 < phases) {
                prev_error = max_abs(v_gamma - next);
            }
            v_hat = std::move(next);
        }

        Vector v_k = v_hat;
        double weight = 1.0;
        for (std::size_t k = 1; k <= pc.cfg.order; ++k) {
            weight *= c;
            for (State x = 0; x < S; ++x) {
                for (State y = 0; y < S; ++y) {
                    row[y] = laws[k - 1](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
                }
                const auto counts = sample_multinomial(rng, pc.n, row);
                double mean = 0.0;
                for (State y = 0; y < S; ++y) {
                    mean += static_cast<double>(counts[y]) * v_hat(static_cast<Eigen::Index>(y));
                }
                v_k(static_cast<Eigen::Index>(x)) += weight * mean / dn;
            }
        }
        const double err = max_abs(v_target - v_k);
        const double bound = eps * (pc.a_gamma_delta + u) + gap + eps * pc.b_gamma * prev_error;
        rep.empirical_errors.push_back(err);
        rep.bounds.push_back(bound);
        covered += err <= bound ? 1 : 0;
    }
    rep.coverage_fraction = static_cast<double>(covered) / static_cast<double>(trials);
    rep.pass = rep.coverage_fraction >= rep.threshold;
    return rep;
}

}  // namespace dtx
