#pragma once

// Desk-scale experiment drivers behind the CLI: the order/error trade-off sweep,
// the optimal order under noisy bases, the gradient decomposition demo, bound
// coverage and tabular training. Each config round-trips through JSON; unknown
// keys are rejected so typos do not silently fall back to defaults.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "dtx/bounds.hpp"
#include "dtx/errors.hpp"
#include "dtx/exact.hpp"
#include "dtx/gradients.hpp"
#include "dtx/io.hpp"
#include "dtx/mdp.hpp"
#include "dtx/random.hpp"
#include "dtx/sampling.hpp"

namespace dtx {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json &j, const nlohmann::json &defaults, const std::string &what) {
    require<parameter_error>(j.is_object(), what + " config must be a JSON object");
    for (const auto &item : j.items()) {
        if (!defaults.contains(item.key())) {
            throw parameter_error("unknown " + what + " config key '" + item.key() + "'");
        }
    }
}

template <typename T>
void read_key(const nlohmann::json &j, const char *key, T &out) {
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw parameter_error(std::string("config key '") + key + "': " + e.what());
    }
}

/// Sample mean and (n-1) standard deviation.
inline std::pair<double, double> mean_std(const std::vector<double> &xs) {
    if (xs.empty()) {
        return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    double m = 0.0;
    for (double x : xs) {
        m += x;
    }
    m /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) {
        ss += (x - m) * (x - m);
    }
    const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return {m, sd};
}

/// Upper one-sided (1 - alpha) Student-t quantile with n - 1 degrees of freedom.
inline double t_quantile(double level, std::size_t n) {
    require<parameter_error>(n >= 2, "t quantile needs at least two observations");
    boost::math::students_t dist(static_cast<double>(n - 1));
    return boost::math::quantile(dist, level);
}

}  // namespace detail

/// One-sided paired test summary for differences d_i.
struct PairedComparison {
    std::size_t n = 0;
    double mean_difference = 0.0;
    double std_error = 0.0;
    double lower_bound = 0.0;  ///< one-sided lower confidence bound on the mean difference
    double upper_bound = 0.0;  ///< one-sided upper confidence bound on the mean difference
    double effect_size = 0.0;  ///< mean / sd of the differences (Cohen's d_z)
};

inline PairedComparison paired_comparison(const std::vector<double> &differences, double level = 0.95) {
    PairedComparison c;
    c.n = differences.size();
    const auto [m, sd] = detail::mean_std(differences);
    c.mean_difference = m;
    c.std_error = sd / std::sqrt(static_cast<double>(c.n));
    const double q = detail::t_quantile(level, c.n);
    c.lower_bound = m - q * c.std_error;
    c.upper_bound = m + q * c.std_error;
    c.effect_size = sd > 0.0 ? m / sd : (m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m));
    return c;
}

// -- MDP generation -----------------------------------------------------------------

struct MdpSpec {
    std::size_t num_states = 10;
    std::size_t num_actions = 2;
    double alpha = 0.01;
    double noise = 0.2;

    TabularMdp make(std::uint64_t seed) const { return random_mdp(num_states, num_actions, alpha, seed, noise); }
};

inline void mdp_spec_to_json(nlohmann::json &j, const MdpSpec &m) {
    j["num_states"] = m.num_states;
    j["num_actions"] = m.num_actions;
    j["alpha"] = m.alpha;
    j["noise"] = m.noise;
}

inline void mdp_spec_from_json(const nlohmann::json &j, MdpSpec &m) {
    detail::read_key(j, "num_states", m.num_states);
    detail::read_key(j, "num_actions", m.num_actions);
    detail::read_key(j, "alpha", m.alpha);
    detail::read_key(j, "noise", m.noise);
}

struct GenMdpConfig {
    MdpSpec mdp;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        mdp_spec_to_json(j, mdp);
        j["seed"] = seed;
        return j;
    }
    static GenMdpConfig from_json(const nlohmann::json &j) {
        GenMdpConfig c;
        detail::reject_unknown_keys(j, c.to_json(), "gen-mdp");
        mdp_spec_from_json(j, c.mdp);
        detail::read_key(j, "seed", c.seed);
        return c;
    }
};

/// Rollout dump: t, state, action, reward.
inline CsvTable trajectory_table(const Trajectory &traj) {
    CsvTable t({"t", "state", "action", "reward"});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        t.add_row({static_cast<long long>(i), static_cast<long long>(traj.states[i]),
                   static_cast<long long>(traj.actions[i]), traj.rewards[i]});
    }
    return t;
}

// -- order / error trade-off ------------------------------------------------------------

struct TradeoffConfig {
    MdpSpec mdp;
    double gamma = 0.2;
    double gamma_prime = 0.8;
    std::size_t k_max = 20;
    std::size_t trajectories = 10;   ///< N trajectories per estimate
    std::size_t repetitions = 50;
    std::size_t horizon = 0;         ///< 0: default_horizon(gamma')
    State start = 0;
    std::uint64_t seed = 0;

    std::size_t resolved_horizon() const { return horizon ? horizon : default_horizon(gamma_prime); }

    void validate() const {
        ExpansionConfig{gamma, gamma_prime, k_max}.validate();
        detail::require_discount(gamma_prime);
        detail::require<parameter_error>(trajectories >= 1 && repetitions >= 1, "need trajectories and repetitions");
        detail::require<parameter_error>(start < mdp.num_states, "start state out of range");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        mdp_spec_to_json(j, mdp);
        j.update({{"gamma", gamma},
                  {"gamma_prime", gamma_prime},
                  {"k_max", k_max},
                  {"trajectories", trajectories},
                  {"repetitions", repetitions},
                  {"horizon", resolved_horizon()},
                  {"start", start},
                  {"seed", seed}});
        return j;
    }
    static TradeoffConfig from_json(const nlohmann::json &j) {
        TradeoffConfig c;
        detail::reject_unknown_keys(j, c.to_json(), "fig-tradeoff");
        mdp_spec_from_json(j, c.mdp);
        detail::read_key(j, "gamma", c.gamma);
        detail::read_key(j, "gamma_prime", c.gamma_prime);
        detail::read_key(j, "k_max", c.k_max);
        detail::read_key(j, "trajectories", c.trajectories);
        detail::read_key(j, "repetitions", c.repetitions);
        detail::read_key(j, "horizon", c.horizon);
        detail::read_key(j, "start", c.start);
        detail::read_key(j, "seed", c.seed);
        c.validate();
        return c;
    }
};

struct TradeoffResult {
    double target = 0.0;                           ///< V_{gamma'}(x0)
    std::vector<double> exact_abs_error;           ///< |V_{gamma'}(x0) - V_K(x0)| per K
    std::vector<std::vector<double>> sampled_abs;  ///< [repetition][K] |V_{gamma'}(x0) - V-hat_K(x0)|
    std::size_t excluded = 0;                      ///< truncated random-time samples, all repetitions
};

/// V-hat_K(x0) for K = 0..K_max from N trajectories, one random-time tuple each,
/// averaged over the trajectories; every order shares the same times.
inline std::vector<double> sampled_expansion_curve(const TabularMdp &mdp, const PolicyTable &policy,
                                                   const ExpansionConfig &cfg, State start, std::size_t trajectories,
                                                   std::size_t horizon, std::uint64_t seed,
                                                   const std::function<BaseEstimate(const Trajectory &, std::size_t)> &make_base,
                                                   std::size_t *excluded = nullptr) {
    std::vector<double> sum(cfg.order + 1, 0.0);
    std::vector<std::size_t> count(cfg.order + 1, 0);
    for (std::size_t i = 0; i < trajectories; ++i) {
        const Trajectory traj = simulate(mdp, policy, start, horizon, child_seed(seed, 2 * i));
        const BaseEstimate base = make_base(traj, i);
        const auto orders = taylor_value_estimate_orders(traj, cfg, base, child_seed(seed, 2 * i + 1), 1);
        for (std::size_t k = 0; k <= cfg.order; ++k) {
            if (orders[k].num_samples > 0) {
                sum[k] += orders[k].point;
                ++count[k];
            } else if (excluded) {
                ++*excluded;
            }
        }
    }
    for (std::size_t k = 0; k <= cfg.order; ++k) {
        sum[k] = count[k] ? sum[k] / static_cast<double>(count[k]) : std::numeric_limits<double>::quiet_NaN();
    }
    return sum;
}

/// Seeds: the MDP uses child_seed(seed, 0); repetition r uses child_seed(seed, r + 1).
inline TradeoffResult run_tradeoff(const TradeoffConfig &c) {
    c.validate();
    const TabularMdp mdp = c.mdp.make(child_seed(c.seed, 0));
    const PolicyTable policy = PolicyTable::uniform(mdp.num_states(), mdp.num_actions());
    const InducedChain chain = induce(mdp, policy);
    const ExpansionConfig cfg{c.gamma, c.gamma_prime, c.k_max};

    TradeoffResult res;
    res.target = value(chain, c.gamma_prime)(c.start);
    for (const auto &v : taylor_value_sequence(chain, cfg)) {
        res.exact_abs_error.push_back(std::abs(res.target - v(c.start)));
    }
    const auto mc_base = [gamma = c.gamma](const Trajectory &traj, std::size_t) -> BaseEstimate {
        auto returns = std::make_shared<std::vector<double>>(discounted_returns(traj, gamma));
        return [returns](const Trajectory &, std::size_t t) { return (*returns)[t]; };
    };
    for (std::size_t r = 0; r < c.repetitions; ++r) {
        auto curve = sampled_expansion_curve(mdp, policy, cfg, c.start, c.trajectories, c.resolved_horizon(),
                                             child_seed(c.seed, r + 1), mc_base, &res.excluded);
        for (auto &v : curve) {
            v = std::abs(res.target - v);
        }
        res.sampled_abs.push_back(std::move(curve));
    }
    return res;
}

inline std::vector<double> mean_curve(const std::vector<std::vector<double>> &per_rep) {
    std::vector<double> m(per_rep.empty() ? 0 : per_rep.front().size(), 0.0);
    for (const auto &row : per_rep) {
        for (std::size_t k = 0; k < m.size(); ++k) {
            m[k] += row[k];
        }
    }
    for (auto &v : m) {
        v /= static_cast<double>(per_rep.size());
    }
    return m;
}

/// Columns: K, exact abs / relative / log-relative error, then mean and sd across
/// repetitions of the sampled abs, relative and log-relative errors. "Relative" divides
/// by |V_{gamma'}(x0)|; the absolute columns are the raw |difference|.
inline CsvTable tradeoff_table(const TradeoffResult &res) {
    CsvTable t({"K", "exact_abs_error", "exact_rel_error", "exact_log_rel_error", "sampled_abs_error_mean",
                "sampled_abs_error_std", "sampled_rel_error_mean", "sampled_log_rel_error_mean",
                "sampled_log_rel_error_std"});
    const double scale = std::abs(res.target);
    for (std::size_t k = 0; k < res.exact_abs_error.size(); ++k) {
        std::vector<double> abs_k, log_k;
        for (const auto &row : res.sampled_abs) {
            abs_k.push_back(row[k]);
            log_k.push_back(std::log(row[k] / scale));
        }
        const auto [am, as] = detail::mean_std(abs_k);
        const auto [lm, ls] = detail::mean_std(log_k);
        const double e = res.exact_abs_error[k];
        t.add_row({static_cast<long long>(k), e, e / scale, std::log(e / scale), am, as, am / scale, lm, ls});
    }
    return t;
}

struct TrendReport {
    std::size_t k_star = 0;          ///< argmin of the mean sampled error (ties toward smaller K)
    bool decreases_to_minimum = false;
    double tail_slope = 0.0;         ///< mean over repetitions of the OLS slope on K in [K*+2, K_max]
    double tail_slope_se = 0.0;
    bool tail_non_decreasing = true;  ///< slope not significantly negative (one-sided 95%)
    bool exact_strictly_decreasing = false;
};

/// Ordinary least-squares slope of ys[lo..hi] against K.
inline double ols_slope(const std::vector<double> &ys, std::size_t lo, std::size_t hi) {
    const double n = static_cast<double>(hi - lo + 1);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        const double x = static_cast<double>(k);
        sx += x;
        sy += ys[k];
        sxx += x * x;
        sxy += x * ys[k];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline TrendReport tradeoff_trend(const TradeoffResult &res) {
    TrendReport rep;
    const auto m = mean_curve(res.sampled_abs);
    rep.k_star = static_cast<std::size_t>(std::min_element(m.begin(), m.end()) - m.begin());
    rep.decreases_to_minimum = rep.k_star > 0 && m[rep.k_star] < m[0];
    const std::size_t lo = rep.k_star + 2;
    const std::size_t hi = m.size() - 1;
    if (lo + 1 <= hi && res.sampled_abs.size() >= 2) {
        std::vector<double> slopes;
        for (const auto &row : res.sampled_abs) {
            slopes.push_back(ols_slope(row, lo, hi));
        }
        const auto cmp = paired_comparison(slopes);
        rep.tail_slope = cmp.mean_difference;
        rep.tail_slope_se = cmp.std_error;
        rep.tail_non_decreasing = cmp.upper_bound >= 0.0;
    }
    rep.exact_strictly_decreasing = true;
    for (std::size_t k = 1; k < res.exact_abs_error.size(); ++k) {
        rep.exact_strictly_decreasing = rep.exact_strictly_decreasing && res.exact_abs_error[k] < res.exact_abs_error[k - 1];
    }
    return rep;
}

// -- optimal order under noisy bases ----------------------------------------------------

struct OptimalKConfig {
    MdpSpec mdp;
    double gamma = 0.2;
    double gamma_prime = 0.8;
    std::size_t k_max = 20;
    std::size_t trajectories = 10;
    std::size_t repetitions = 100;
    std::size_t horizon = 0;
    std::vector<double> sigmas{0.0, 0.05, 0.1, 0.2, 0.5, 1.0};
    State start = 0;
    std::uint64_t seed = 0;

    std::size_t resolved_horizon() const { return horizon ? horizon : default_horizon(gamma_prime); }

    void validate() const {
        ExpansionConfig{gamma, gamma_prime, k_max}.validate();
        detail::require_discount(gamma_prime);
        detail::require<parameter_error>(trajectories >= 1 && repetitions >= 1, "need trajectories and repetitions");
        detail::require<parameter_error>(!sigmas.empty(), "sigma grid is empty");
        for (double s : sigmas) {
            detail::require<parameter_error>(s >= 0.0, "sigma must be >= 0");
        }
        detail::require<parameter_error>(start < mdp.num_states, "start state out of range");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        mdp_spec_to_json(j, mdp);
        j.update({{"gamma", gamma},
                  {"gamma_prime", gamma_prime},
                  {"k_max", k_max},
                  {"trajectories", trajectories},
                  {"repetitions", repetitions},
                  {"horizon", resolved_horizon()},
                  {"sigmas", sigmas},
                  {"start", start},
                  {"seed", seed}});
        return j;
    }
    static OptimalKConfig from_json(const nlohmann::json &j) {
        OptimalKConfig c;
        detail::reject_unknown_keys(j, c.to_json(), "fig-optimal-k");
        mdp_spec_from_json(j, c.mdp);
        detail::read_key(j, "gamma", c.gamma);
        detail::read_key(j, "gamma_prime", c.gamma_prime);
        detail::read_key(j, "k_max", c.k_max);
        detail::read_key(j, "trajectories", c.trajectories);
        detail::read_key(j, "repetitions", c.repetitions);
        detail::read_key(j, "horizon", c.horizon);
        detail::read_key(j, "sigmas", c.sigmas);
        detail::read_key(j, "start", c.start);
        detail::read_key(j, "seed", c.seed);
        c.validate();
        return c;
    }
};

struct OptimalKResult {
    std::vector<double> sigmas;
    std::vector<std::vector<std::size_t>> k_star;  ///< [sigma][repetition]
};

/// K* = argmin_k |V_{gamma'}(x0) - V-hat_k(x0)| per repetition, ties toward smaller k.
/// Repetition r reuses the same trajectories and random times for every sigma
/// (common random numbers); only the base noise differs.
inline OptimalKResult run_optimal_k(const OptimalKConfig &c) {
    c.validate();
    const TabularMdp mdp = c.mdp.make(child_seed(c.seed, 0));
    const PolicyTable policy = PolicyTable::uniform(mdp.num_states(), mdp.num_actions());
    const InducedChain chain = induce(mdp, policy);
    const ExpansionConfig cfg{c.gamma, c.gamma_prime, c.k_max};
    const ValueVector v_gamma = value(chain, c.gamma);
    const double target = value(chain, c.gamma_prime)(c.start);

    OptimalKResult res;
    res.sigmas = c.sigmas;
    res.k_star.assign(c.sigmas.size(), {});
    for (std::size_t r = 0; r < c.repetitions; ++r) {
        const std::uint64_t rep_seed = child_seed(c.seed, r + 1);
        for (std::size_t s = 0; s < c.sigmas.size(); ++s) {
            const double sigma = c.sigmas[s];
            const auto noisy = [&](const Trajectory &, std::size_t i) {
                return noisy_exact_values(v_gamma, sigma, child_seed(child_seed(rep_seed, 1u << 20), s * c.trajectories + i));
            };
            const auto curve = sampled_expansion_curve(mdp, policy, cfg, c.start, c.trajectories,
                                                       c.resolved_horizon(), rep_seed, noisy);
            std::size_t best = 0;
            double best_err = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < curve.size(); ++k) {
                const double e = std::abs(target - curve[k]);
                if (e < best_err) {
                    best_err = e;
                    best = k;
                }
            }
            res.k_star[s].push_back(best);
        }
    }
    return res;
}

inline CsvTable optimal_k_table(const OptimalKResult &res) {
    CsvTable t({"sigma", "mean_k_star", "std_k_star", "repetitions"});
    for (std::size_t s = 0; s < res.sigmas.size(); ++s) {
        std::vector<double> ks(res.k_star[s].begin(), res.k_star[s].end());
        const auto [m, sd] = detail::mean_std(ks);
        t.add_row({res.sigmas[s], m, sd, static_cast<long long>(ks.size())});
    }
    return t;
}

// -- gradient decomposition demo ----------------------------------------------------------

struct GradDemoConfig {
    MdpSpec mdp;
    double gamma = 0.2;
    double gamma_prime = 0.8;
    State start = 0;
    double logit_scale = 1.0;  ///< theta ~ N(0, scale^2)
    double fd_step = 1e-5;
    std::uint64_t seed = 0;

    void validate() const {
        ExpansionConfig{gamma, gamma_prime, 0}.validate();
        detail::require_discount(gamma_prime);
        detail::require<parameter_error>(fd_step > 0.0 && logit_scale >= 0.0, "fd_step > 0 and logit_scale >= 0");
        detail::require<parameter_error>(start < mdp.num_states, "start state out of range");
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        mdp_spec_to_json(j, mdp);
        j.update({{"gamma", gamma},
                  {"gamma_prime", gamma_prime},
                  {"start", start},
                  {"logit_scale", logit_scale},
                  {"fd_step", fd_step},
                  {"seed", seed}});
        return j;
    }
    static GradDemoConfig from_json(const nlohmann::json &j) {
        GradDemoConfig c;
        detail::reject_unknown_keys(j, c.to_json(), "grad-demo");
        mdp_spec_from_json(j, c.mdp);
        detail::read_key(j, "gamma", c.gamma);
        detail::read_key(j, "gamma_prime", c.gamma_prime);
        detail::read_key(j, "start", c.start);
        detail::read_key(j, "logit_scale", c.logit_scale);
        detail::read_key(j, "fd_step", c.fd_step);
        detail::read_key(j, "seed", c.seed);
        c.validate();
        return c;
    }
};

inline SoftmaxPolicyParams random_logits(std::size_t S, std::size_t A, double scale, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::vector<double> logits(S * A);
    for (auto &l : logits) {
        l = scale * standard_normal(rng);
    }
    return {S, A, std::move(logits)};
}

/// Objectives whose derivatives are the two partial gradients: rho^T V_gamma with one
/// argument frozen at `anchor`.
struct PartialObjectives {
    std::function<double(const SoftmaxPolicyParams &)> full;    ///< V_{gamma'}(start)
    std::function<double(const SoftmaxPolicyParams &)> first;   ///< rho(anchor)^T V_gamma(theta)
    std::function<double(const SoftmaxPolicyParams &)> second;  ///< rho(theta)^T V_gamma(anchor)
};

inline PartialObjectives partial_objectives(const TabularMdp &mdp, const SoftmaxPolicyParams &anchor, double gamma,
                                            double gamma_prime, State start) {
    const InducedChain base = induce(mdp, anchor.policy());
    const Vector rho0 = rho_weight(base, start, gamma, gamma_prime).weights;
    const Vector v0 = value(base, gamma).values;
    PartialObjectives o;
    o.full = [&mdp, gamma_prime, start](const SoftmaxPolicyParams &p) {
        return value(induce(mdp, p.policy()), gamma_prime)(start);
    };
    o.first = [&mdp, rho0, gamma](const SoftmaxPolicyParams &p) {
        return rho0.dot(value(induce(mdp, p.policy()), gamma).values);
    };
    o.second = [&mdp, v0, gamma, gamma_prime, start](const SoftmaxPolicyParams &p) {
        return rho_weight(induce(mdp, p.policy()), start, gamma, gamma_prime).weights.dot(v0);
    };
    return o;
}

inline nlohmann::json gradient_to_json(const GradientTable &g) {
    nlohmann::json rows = nlohmann::json::array();
    for (State x = 0; x < g.num_states; ++x) {
        nlohmann::json row = nlohmann::json::array();
        for (Action a = 0; a < g.num_actions; ++a) {
            row.push_back(g(x, a));
        }
        rows.push_back(row);
    }
    return rows;
}

inline nlohmann::json run_grad_demo(const GradDemoConfig &c) {
    c.validate();
    const TabularMdp mdp = c.mdp.make(child_seed(c.seed, 0));
    const SoftmaxPolicyParams params =
        random_logits(mdp.num_states(), mdp.num_actions(), c.logit_scale, child_seed(c.seed, 1));
    const auto dec = exact_gradient_decomposition(mdp, params, c.gamma, c.gamma_prime, c.start);
    const auto obj = partial_objectives(mdp, params, c.gamma, c.gamma_prime, c.start);
    const auto fd_full = finite_difference_gradient(obj.full, params, c.fd_step);
    const auto fd_first = finite_difference_gradient(obj.first, params, c.fd_step);
    const auto fd_second = finite_difference_gradient(obj.second, params, c.fd_step);

    double decomposition = 0.0;
    for (std::size_t i = 0; i < dec.full.partials.size(); ++i) {
        decomposition = std::max(decomposition,
                                 std::abs(dec.full.partials[i] - dec.first.partials[i] - dec.second.partials[i]));
    }
    return {{"full", gradient_to_json(dec.full)},
            {"first", gradient_to_json(dec.first)},
            {"second", gradient_to_json(dec.second)},
            {"norms", {{"full", dec.full.norm()}, {"first", dec.first.norm()}, {"second", dec.second.norm()}}},
            {"residuals",
             {{"decomposition_max_abs", decomposition},
              {"fd_full_max_abs", max_abs_difference(dec.full, fd_full)},
              {"fd_first_max_abs", max_abs_difference(dec.first, fd_first)},
              {"fd_second_max_abs", max_abs_difference(dec.second, fd_second)}}},
            {"logits", params.logits()}};
}

// -- bound coverage ------------------------------------------------------------------------

struct BoundsConfig {
    MdpSpec mdp;
    double gamma = 0.2;
    double gamma_prime = 0.8;
    std::size_t order = 1;
    std::size_t n = 10000;
    double delta = 0.1;
    std::size_t trials = 200;
    std::size_t phases = 3;
    double lambda = 0.0;       ///< B = td_lambda_contraction(gamma, lambda)
    double a_constant = -1.0;  ///< < 0: Hoeffding default
    std::string gap_denominator = "gamma_prime";
    std::uint64_t seed = 0;

    PhasedTdConfig phased(const TabularMdp &m) const {
        PhasedTdConfig pc;
        pc.n = n;
        pc.delta = delta;
        pc.cfg = {gamma, gamma_prime, order};
        pc.r_max = m.r_max();
        pc.b_gamma = td_lambda_contraction(gamma, lambda);
        pc.a_gamma_delta = a_constant >= 0.0 ? a_constant
                                             : hoeffding_subroutine_error(m.r_max(), gamma, m.num_states(), delta, n);
        if (gap_denominator == "gamma") {
            pc.gap = GapDenominator::gamma;
        } else if (gap_denominator == "gamma_prime") {
            pc.gap = GapDenominator::gamma_prime;
        } else {
            throw parameter_error("gap_denominator must be 'gamma' or 'gamma_prime'");
        }
        return pc;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        mdp_spec_to_json(j, mdp);
        j.update({{"gamma", gamma},
                  {"gamma_prime", gamma_prime},
                  {"K", order},
                  {"n", n},
                  {"delta", delta},
                  {"trials", trials},
                  {"phases", phases},
                  {"lambda", lambda},
                  {"a_constant", a_constant},
                  {"gap_denominator", gap_denominator},
                  {"seed", seed}});
        return j;
    }
    static BoundsConfig from_json(const nlohmann::json &j) {
        BoundsConfig c;
        detail::reject_unknown_keys(j, c.to_json(), "bounds");
        mdp_spec_from_json(j, c.mdp);
        detail::read_key(j, "gamma", c.gamma);
        detail::read_key(j, "gamma_prime", c.gamma_prime);
        detail::read_key(j, "K", c.order);
        detail::read_key(j, "n", c.n);
        detail::read_key(j, "delta", c.delta);
        detail::read_key(j, "trials", c.trials);
        detail::read_key(j, "phases", c.phases);
        detail::read_key(j, "lambda", c.lambda);
        detail::read_key(j, "a_constant", c.a_constant);
        detail::read_key(j, "gap_denominator", c.gap_denominator);
        detail::read_key(j, "seed", c.seed);
        return c;
    }
};

inline nlohmann::json to_json(const CoverageReport &r) {
    return {{"bound", r.bounds},
            {"empirical_errors", r.empirical_errors},
            {"coverage_fraction", r.coverage_fraction},
            {"threshold", r.threshold},
            {"nominal", r.nominal},
            {"pass", r.pass}};
}

inline CoverageReport run_bounds(const BoundsConfig &c) {
    const TabularMdp mdp = c.mdp.make(child_seed(c.seed, 0));
    const PolicyTable policy = PolicyTable::uniform(mdp.num_states(), mdp.num_actions());
    return empirical_coverage(mdp, policy, c.phased(mdp), c.trials, child_seed(c.seed, 1), c.phases);
}

// -- training ---------------------------------------------------------------------------------

struct TrainExperimentConfig {
    MdpSpec mdp;
    std::vector<std::string> variants{"vanilla", "update-weighting"};
    std::vector<std::size_t> orders{5, 10};  ///< K values for update-weighting / q-expansion
    double gamma = 0.9;
    double gamma_prime = -1.0;               ///< < 0: 1 - 1/horizon
    std::size_t horizon = 1000;
    std::size_t iterations = 100;
    std::size_t batch = 5;
    double learning_rate = 0.005;
    double eta = 0.01;
    std::size_t q_window = 10;
    bool self_normalize = false;
    bool baseline = false;
    std::size_t seeds = 20;
    State start = 0;
    std::uint64_t seed = 0;

    double resolved_gamma_prime() const {
        return gamma_prime >= 0.0 ? gamma_prime : 1.0 - 1.0 / static_cast<double>(horizon);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        mdp_spec_to_json(j, mdp);
        j.update({{"variants", variants},
                  {"orders", orders},
                  {"gamma", gamma},
                  {"gamma_prime", resolved_gamma_prime()},
                  {"horizon", horizon},
                  {"iterations", iterations},
                  {"batch", batch},
                  {"learning_rate", learning_rate},
                  {"eta", eta},
                  {"q_window", q_window},
                  {"self_normalize", self_normalize},
                  {"baseline", baseline},
                  {"seeds", seeds},
                  {"start", start},
                  {"seed", seed}});
        return j;
    }
    static TrainExperimentConfig from_json(const nlohmann::json &j) {
        TrainExperimentConfig c;
        detail::reject_unknown_keys(j, c.to_json(), "train");
        mdp_spec_from_json(j, c.mdp);
        detail::read_key(j, "variants", c.variants);
        detail::read_key(j, "orders", c.orders);
        detail::read_key(j, "gamma", c.gamma);
        detail::read_key(j, "gamma_prime", c.gamma_prime);
        detail::read_key(j, "horizon", c.horizon);
        detail::read_key(j, "iterations", c.iterations);
        detail::read_key(j, "batch", c.batch);
        detail::read_key(j, "learning_rate", c.learning_rate);
        detail::read_key(j, "eta", c.eta);
        detail::read_key(j, "q_window", c.q_window);
        detail::read_key(j, "self_normalize", c.self_normalize);
        detail::read_key(j, "baseline", c.baseline);
        detail::read_key(j, "seeds", c.seeds);
        detail::read_key(j, "start", c.start);
        detail::read_key(j, "seed", c.seed);
        for (const auto &v : c.variants) {
            train_variant_from_string(v);
        }
        return c;
    }

    /// One training run per (variant, K); vanilla and heuristic ignore K and run once with K = 0.
    std::vector<TrainConfig> runs(std::size_t seed_index) const {
        std::vector<TrainConfig> out;
        for (const auto &name : variants) {
            const TrainVariant v = train_variant_from_string(name);
            const bool uses_order = v == TrainVariant::update_weighting || v == TrainVariant::q_expansion;
            const std::vector<std::size_t> ks = uses_order ? orders : std::vector<std::size_t>{0};
            for (std::size_t k : ks) {
                TrainConfig tc;
                tc.variant = v;
                tc.cfg = {gamma, resolved_gamma_prime(), k};
                tc.learning_rate = learning_rate;
                tc.iterations = iterations;
                tc.batch = batch;
                tc.seed = child_seed(seed, 2 * seed_index + 1);
                tc.eta = eta;
                tc.horizon = horizon;
                tc.start = start;
                tc.q_window = q_window;
                tc.self_normalize = self_normalize;
                tc.baseline = baseline;
                out.push_back(tc);
            }
        }
        return out;
    }
};

struct TrainRun {
    std::string variant;
    std::size_t order = 0;
    std::size_t seed_index = 0;
    LearningCurve curve;
};

/// Seed s draws its MDP from child_seed(seed, 2s) and its rollouts from
/// child_seed(seed, 2s + 1); every variant of seed s sees the same MDP and the same
/// rollout seeds, i.e. a matched interaction budget.
inline std::vector<TrainRun> run_train(const TrainExperimentConfig &c) {
    std::vector<TrainRun> out;
    for (std::size_t s = 0; s < c.seeds; ++s) {
        const TabularMdp mdp = c.mdp.make(child_seed(c.seed, 2 * s));
        const SoftmaxPolicyParams init(mdp.num_states(), mdp.num_actions());
        for (const auto &tc : c.runs(s)) {
            out.push_back({to_string(tc.variant), tc.cfg.order, s, train_tabular(mdp, init, tc)});
        }
    }
    return out;
}

inline CsvTable train_table(const TrainExperimentConfig &c, const std::vector<TrainRun> &runs) {
    CsvTable t({"iteration", "undiscounted_return", "variant", "K", "gamma", "gamma_prime", "eta", "seed",
                "diverged"});
    for (const auto &r : runs) {
        for (std::size_t i = 0; i < r.curve.returns.size(); ++i) {
            t.add_row({static_cast<long long>(i), r.curve.returns[i], r.variant, static_cast<long long>(r.order),
                       c.gamma, c.resolved_gamma_prime(), c.eta, static_cast<long long>(r.seed_index),
                       static_cast<long long>(r.curve.diverged ? 1 : 0)});
        }
    }
    return t;
}

}  // namespace dtx
