#pragma once

// Seeded rollouts and the Monte-Carlo estimators built on them.
//
// Estimators take a trajectory, an unbiased base estimate evaluated at time
// indices of that trajectory, and an explicit seed for their random times.
// Replicate r of an estimator always draws from child_seed(seed, r).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtx/errors.hpp"
#include "dtx/exact.hpp"
#include "dtx/mdp.hpp"
#include "dtx/random.hpp"

namespace dtx {

/// Rollout (x_t, a_t, r_t) for t = 0 .. horizon-1.
struct Trajectory {
    std::vector<State> states;
    std::vector<Action> actions;
    std::vector<double> rewards;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    std::size_t clamp_count = 0;  ///< rewards clamped into [0, r_max]

    std::size_t size() const noexcept { return states.size(); }
};

/// Horizon used when an estimator needs "infinite" trajectories: max(1000, 20/(1-gamma')).
inline std::size_t default_horizon(double gamma_prime) {
    detail::require_discount(gamma_prime);
    return std::max<std::size_t>(1000, static_cast<std::size_t>(std::ceil(20.0 / (1.0 - gamma_prime))));
}

/// Runs `policy` from `start` for exactly `horizon` steps.
///
/// Per step the stream yields: the action (unless `first_action` forces a_0),
/// the next state, then the reward noise draw when reward_noise_std > 0.
inline Trajectory simulate(const TabularMdp &mdp, const PolicyTable &policy, State start, std::size_t horizon,
                           std::uint64_t seed, std::optional<Action> first_action = std::nullopt) {
    detail::require<parameter_error>(start < mdp.num_states(), "start state out of range");
    detail::require<parameter_error>(horizon >= 1, "horizon must be >= 1");
    detail::require<parameter_error>(mdp.num_states() == policy.num_states() &&
                                         mdp.num_actions() == policy.num_actions(),
                                     "policy dimensions do not match the MDP");
    if (first_action) {
        detail::require<parameter_error>(*first_action < mdp.num_actions(), "first action out of range");
    }

    Trajectory traj;
    traj.horizon = horizon;
    traj.seed = seed;
    traj.states.reserve(horizon);
    traj.actions.reserve(horizon);
    traj.rewards.reserve(horizon);

    Rng rng = make_rng(seed);
    const double noise = mdp.reward_noise_std();
    State x = start;
    for (std::size_t t = 0; t < horizon; ++t) {
        const Action a = (t == 0 && first_action) ? *first_action : sample_categorical(rng, policy.row(x));
        const State next = sample_categorical(rng, mdp.transition_row(x, a));
        double r = mdp.reward(x, a);
        if (noise > 0.0) {
            r *= 1.0 + noise * standard_normal(rng);
            if (r < 0.0 || r > mdp.r_max()) {
                r = std::clamp(r, 0.0, mdp.r_max());
                ++traj.clamp_count;
            }
        }
        traj.states.push_back(x);
        traj.actions.push_back(a);
        traj.rewards.push_back(r);
        x = next;
    }
    return traj;
}

/// Discounted tail sum sum_{t' >= t} gamma^{t'-t} r_{t'}, truncated at the trajectory end
/// (bias at most gamma^{L-t} R_max / (1-gamma)).
inline double mc_return(const Trajectory &traj, std::size_t t, double gamma) {
    if (t >= traj.size()) {
        throw index_error("mc_return time index beyond trajectory");
    }
    double acc = 0.0;
    for (std::size_t s = traj.size(); s-- > t;) {
        acc = traj.rewards[s] + gamma * acc;
    }
    return acc;
}

/// mc_return for every t at once.
inline std::vector<double> discounted_returns(const Trajectory &traj, double gamma) {
    std::vector<double> out(traj.size());
    double acc = 0.0;
    for (std::size_t s = traj.size(); s-- > 0;) {
        acc = traj.rewards[s] + gamma * acc;
        out[s] = acc;
    }
    return out;
}

inline std::size_t sample_geometric_time(const GeometricTimeSampler &sampler, Rng &rng) { return sampler(rng); }

// -- base estimates --------------------------------------------------------------

/// Base estimate evaluated at time index t of a trajectory: V-hat(x_t) or Q-hat(x_t, a_t).
using BaseEstimate = std::function<double(const Trajectory &, std::size_t)>;

inline BaseEstimate mc_return_base(double gamma) {
    return [gamma](const Trajectory &traj, std::size_t t) { return mc_return(traj, t, gamma); };
}

inline BaseEstimate exact_value_base(ValueVector v) {
    return [v = std::move(v)](const Trajectory &traj, std::size_t t) { return v(traj.states.at(t)); };
}

inline BaseEstimate exact_q_base(QVector q) {
    return [q = std::move(q)](const Trajectory &traj, std::size_t t) {
        return q(traj.states.at(t), traj.actions.at(t));
    };
}

/// V(x_t) + N(0, sigma^2) with fresh noise on every call; call i draws from child_seed(seed, i).
inline BaseEstimate noisy_exact_values(ValueVector v, double sigma, std::uint64_t seed) {
    detail::require<parameter_error>(sigma >= 0.0, "noise sigma must be >= 0");
    auto calls = std::make_shared<std::uint64_t>(0);
    return [v = std::move(v), sigma, seed, calls](const Trajectory &traj, std::size_t t) {
        const double exact = v(traj.states.at(t));
        const std::uint64_t i = (*calls)++;
        if (sigma == 0.0) {
            return exact;
        }
        Rng rng = make_rng(child_seed(seed, i));
        return exact + sigma * standard_normal(rng);
    };
}

// -- estimator outputs -------------------------------------------------------------

struct EstimatorOutput {
    double point = 0.0;
    double std_error = 0.0;        ///< sample standard deviation / sqrt(num_samples)
    std::size_t num_samples = 0;   ///< replicates that stayed inside the trajectory
    std::size_t excluded = 0;      ///< replicates dropped because a random time ran past the end
    std::string estimator_id;
    std::size_t order = 0;
    double gamma = 0.0;
    double gamma_prime = 0.0;
};

inline nlohmann::json to_json(const EstimatorOutput &e) {
    return {{"estimator_id", e.estimator_id}, {"K", e.order},          {"gamma", e.gamma},
            {"gamma_prime", e.gamma_prime},   {"point", e.point},      {"std_error", e.std_error},
            {"n", e.num_samples},             {"excluded", e.excluded}};
}

namespace detail {

struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
};

inline SampleStats mean_and_se(const std::vector<double> &xs) {
    SampleStats s;
    if (xs.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
    }
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - s.mean) * (x - s.mean);
        }
        const double var = ss / static_cast<double>(xs.size() - 1);
        s.std_error = std::sqrt(var / static_cast<double>(xs.size()));
    }
    return s;
}

inline EstimatorOutput summarize(const std::vector<double> &samples, std::size_t excluded, std::string id,
                                 const ExpansionConfig &cfg, std::size_t order) {
    if (samples.empty()) {
        throw truncation_error(id + ": every replicate ran past the end of the trajectory");
    }
    auto st = mean_and_se(samples);
    return {st.mean, st.std_error, samples.size(), excluded, std::move(id), order, cfg.gamma, cfg.gamma_prime};
}

/// Nested random-time sums sum_{k<=K} c^k base(t_k), t_k = t_0 + tau_1 + ... + tau_k,
/// for every order 0..K at once. Order k of replicate r is excluded when t_k
/// runs past the trajectory; lower orders of that replicate are kept.
inline std::vector<EstimatorOutput> random_time_sums(const Trajectory &traj, std::size_t t0,
                                                     const ExpansionConfig &cfg, const BaseEstimate &base,
                                                     std::uint64_t seed, std::size_t replicates,
                                                     const std::string &id, bool last_term_only) {
    cfg.validate();
    require<parameter_error>(replicates >= 1, "replicates must be >= 1");
    if (t0 >= traj.size()) {
        throw index_error(id + ": start index beyond trajectory");
    }
    const std::size_t K = cfg.order;
    const double c = cfg.ratio();
    GeometricTimeSampler sampler(cfg.gamma);

    std::vector<std::vector<double>> samples(K + 1);
    std::vector<std::size_t> excluded(K + 1, 0);
    for (std::size_t r = 0; r < replicates; ++r) {
        Rng rng = make_rng(child_seed(seed, r));
        std::size_t t = t0;
        double coeff = 1.0;
        double partial = base(traj, t);
        samples[0].push_back(partial);
        std::size_t k = 1;
        for (; k <= K; ++k) {
            t += sample_geometric_time(sampler, rng);
            if (t >= traj.size()) {
                break;
            }
            coeff *= c;
            const double term = coeff * base(traj, t);
            partial = last_term_only ? term : partial + term;
            samples[k].push_back(partial);
        }
        for (; k <= K; ++k) {
            ++excluded[k];
        }
    }

    std::vector<EstimatorOutput> out;
    out.reserve(K + 1);
    for (std::size_t k = 0; k <= K; ++k) {
        if (samples[k].empty()) {
            // Higher orders are all truncated too; report what is available.
            EstimatorOutput flagged;
            flagged.estimator_id = id;
            flagged.order = k;
            flagged.gamma = cfg.gamma;
            flagged.gamma_prime = cfg.gamma_prime;
            flagged.excluded = excluded[k];
            flagged.point = std::numeric_limits<double>::quiet_NaN();
            out.push_back(flagged);
            continue;
        }
        out.push_back(summarize(samples[k], excluded[k], id, cfg, k));
    }
    return out;
}

}  // namespace detail

inline constexpr std::size_t kDefaultReplicates = 8;

/// Random-time estimate of V_{K,gamma,gamma'}(x_{t0}) for every order 0..cfg.order,
/// all orders sharing the same random times.
inline std::vector<EstimatorOutput> taylor_value_estimate_orders(const Trajectory &traj, const ExpansionConfig &cfg,
                                                                 const BaseEstimate &base, std::uint64_t seed,
                                                                 std::size_t replicates = kDefaultReplicates,
                                                                 std::size_t t0 = 0) {
    return detail::random_time_sums(traj, t0, cfg, base, seed, replicates, "taylor_value", false);
}

/// Estimate of V_{K,gamma,gamma'}(x_{t0}):
///   sum_{k=0}^{K} ((gamma'-gamma)/(1-gamma))^k V-hat(x_{t_k}),  t_k = t0 + tau_1 + ... + tau_k,
/// tau_i i.i.d. Geometric on {1,2,...} with P(tau=t) = (1-gamma) gamma^{t-1}.
/// Unbiased whenever the base is. Averages `replicates` independent time tuples.
inline EstimatorOutput taylor_value_estimate(const Trajectory &traj, const ExpansionConfig &cfg,
                                             const BaseEstimate &base, std::uint64_t seed,
                                             std::size_t replicates = kDefaultReplicates, std::size_t t0 = 0) {
    auto all = taylor_value_estimate_orders(traj, cfg, base, seed, replicates, t0);
    if (all.back().num_samples == 0) {
        throw truncation_error("taylor_value: every replicate ran past the end of the trajectory");
    }
    return all.back();
}

/// K-th term of the Q expansion at (x_t, a_t): ((gamma'-gamma)/(1-gamma))^K Q-hat(x_{t+tau}, a_{t+tau}),
/// tau = tau_1 + ... + tau_K.
inline EstimatorOutput taylor_q_term_estimate(const Trajectory &traj, std::size_t t, const ExpansionConfig &cfg,
                                              const BaseEstimate &base, std::uint64_t seed,
                                              std::size_t replicates = kDefaultReplicates) {
    auto all = detail::random_time_sums(traj, t, cfg, base, seed, replicates, "taylor_q_term", true);
    if (all.back().num_samples == 0) {
        throw truncation_error("taylor_q_term: every replicate ran past the end of the trajectory");
    }
    return all.back();
}

/// Sum of the Q-expansion terms 0..K with shared random times: estimates Q_{K,gamma,gamma'}(x_t, a_t).
inline EstimatorOutput taylor_q_estimate(const Trajectory &traj, std::size_t t, const ExpansionConfig &cfg,
                                         const BaseEstimate &base, std::uint64_t seed,
                                         std::size_t replicates = kDefaultReplicates) {
    auto all = detail::random_time_sums(traj, t, cfg, base, seed, replicates, "taylor_q", false);
    if (all.back().num_samples == 0) {
        throw truncation_error("taylor_q: every replicate ran past the end of the trajectory");
    }
    return all.back();
}

/// First-order Q estimate with the random time marginalized over a window of h steps:
///   Q-hat(x_t,a_t) + (gamma'-gamma)/(1-gamma) sum_{s=1}^{h} (gamma^s / sum_{s'} gamma^{s'}) Q-hat(x_{t+s},a_{t+s}).
inline double truncated_q_estimate(const Trajectory &traj, std::size_t t, const ExpansionConfig &cfg,
                                   std::size_t h, const BaseEstimate &base) {
    cfg.validate();
    detail::require<parameter_error>(cfg.order == 1, "truncated_q_estimate is defined for K = 1 only");
    detail::require<parameter_error>(h >= 1, "window h must be >= 1");
    if (t + h >= traj.size()) {
        throw truncation_error("truncated_q_estimate: window runs past the end of the trajectory");
    }
    // gamma^s / sum gamma^{s'} == gamma^{s-1} / sum gamma^{s'-1}; the latter is defined at gamma = 0.
    double norm = 0.0;
    double g = 1.0;
    for (std::size_t s = 1; s <= h; ++s) {
        norm += g;
        g *= cfg.gamma;
    }
    double tail = 0.0;
    g = 1.0;
    for (std::size_t s = 1; s <= h; ++s) {
        tail += (g / norm) * base(traj, t + s);
        g *= cfg.gamma;
    }
    return base(traj, t) + cfg.ratio() * tail;
}

}  // namespace dtx
