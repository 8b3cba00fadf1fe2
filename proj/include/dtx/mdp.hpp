#pragma once

// Tabular MDPs, policies and the Markov chains they induce.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtx/errors.hpp"
#include "dtx/linalg.hpp"
#include "dtx/random.hpp"

namespace dtx {

using State = std::size_t;
using Action = std::size_t;

inline constexpr double kStochasticTolerance = 1e-12;

/// Finite MDP with known transition kernel p(y | x, a) and mean rewards.
///
/// Rewards observed during simulation are reward_mean * (1 + eps) with
/// eps ~ N(0, reward_noise_std^2), clamped to [0, r_max]. Every exact
/// computation uses reward_mean only.
class TabularMdp {
  public:
    TabularMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
               std::vector<double> reward_mean, double r_max, double reward_noise_std = 0.0)
        : num_states_(num_states),
          num_actions_(num_actions),
          transition_(std::move(transition)),
          reward_mean_(std::move(reward_mean)),
          r_max_(r_max),
          reward_noise_std_(reward_noise_std) {
        validate();
    }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double r_max() const noexcept { return r_max_; }
    double reward_noise_std() const noexcept { return reward_noise_std_; }

    double p(State x, Action a, State y) const {
        return transition_[(x * num_actions_ + a) * num_states_ + y];
    }

    /// Next-state distribution p(. | x, a).
    std::span<const double> transition_row(State x, Action a) const {
        return {transition_.data() + (x * num_actions_ + a) * num_states_, num_states_};
    }

    double reward(State x, Action a) const { return reward_mean_[x * num_actions_ + a]; }

    /// Flat [x][a][y] storage.
    const std::vector<double> &transition() const noexcept { return transition_; }
    /// Flat [x][a] storage.
    const std::vector<double> &reward_mean() const noexcept { return reward_mean_; }

    friend bool operator==(const TabularMdp &, const TabularMdp &) = default;

  private:
    void validate() const {
        detail::require<parameter_error>(num_states_ >= 1, "MDP needs at least one state");
        detail::require<parameter_error>(num_actions_ >= 1, "MDP needs at least one action");
        detail::require<parameter_error>(
            transition_.size() == num_states_ * num_actions_ * num_states_,
            "transition tensor has wrong size");
        detail::require<parameter_error>(reward_mean_.size() == num_states_ * num_actions_,
                                         "reward table has wrong size");
        detail::require<parameter_error>(r_max_ > 0.0 && std::isfinite(r_max_),
                                         "r_max must be positive and finite");
        detail::require<parameter_error>(reward_noise_std_ >= 0.0,
                                         "reward noise std must be non-negative");
        for (State x = 0; x < num_states_; ++x) {
            for (Action a = 0; a < num_actions_; ++a) {
                double sum = 0.0;
                for (double q : transition_row(x, a)) {
                    detail::require<parameter_error>(q >= 0.0 && std::isfinite(q),
                                                     "transition probabilities must be >= 0");
                    sum += q;
                }
                detail::require<parameter_error>(std::abs(sum - 1.0) <= kStochasticTolerance,
                                                 "transition rows must sum to 1");
                const double r = reward(x, a);
                detail::require<parameter_error>(r >= 0.0 && r <= r_max_,
                                                 "reward means must lie in [0, r_max]");
            }
        }
    }

    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> transition_;
    std::vector<double> reward_mean_;
    double r_max_;
    double reward_noise_std_;
};

/// Stochastic policy pi(a | x), one probability simplex per state.
class PolicyTable {
  public:
    PolicyTable(std::size_t num_states, std::size_t num_actions, std::vector<double> probs)
        : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
        detail::require<parameter_error>(num_states_ >= 1 && num_actions_ >= 1,
                                         "policy needs positive dimensions");
        detail::require<parameter_error>(probs_.size() == num_states_ * num_actions_,
                                         "policy table has wrong size");
        for (State x = 0; x < num_states_; ++x) {
            double sum = 0.0;
            for (double q : row(x)) {
                detail::require<parameter_error>(q >= 0.0 && std::isfinite(q),
                                                 "policy probabilities must be >= 0");
                sum += q;
            }
            detail::require<parameter_error>(std::abs(sum - 1.0) <= kStochasticTolerance,
                                             "policy rows must sum to 1");
        }
    }

    static PolicyTable uniform(std::size_t num_states, std::size_t num_actions) {
        return {num_states, num_actions,
                std::vector<double>(num_states * num_actions, 1.0 / static_cast<double>(num_actions))};
    }

    static PolicyTable deterministic(std::size_t num_actions, const std::vector<Action> &choice) {
        std::vector<double> probs(choice.size() * num_actions, 0.0);
        for (std::size_t x = 0; x < choice.size(); ++x) {
            detail::require<parameter_error>(choice[x] < num_actions, "action out of range");
            probs[x * num_actions + choice[x]] = 1.0;
        }
        return {choice.size(), num_actions, std::move(probs)};
    }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double operator()(State x, Action a) const { return probs_[x * num_actions_ + a]; }
    std::span<const double> row(State x) const {
        return {probs_.data() + x * num_actions_, num_actions_};
    }
    const std::vector<double> &probs() const noexcept { return probs_; }

    friend bool operator==(const PolicyTable &, const PolicyTable &) = default;

  private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> probs_;
};

/// Index of the pair (x, a) in state-action vectors.
inline std::size_t sa_index(State x, Action a, std::size_t num_actions) {
    return x * num_actions + a;
}

/// Markov chain induced by running a fixed policy in an MDP.
struct InducedChain {
    Matrix p_pi;        ///< P^pi[x][y] = sum_a pi(a|x) p(y|x,a)
    Vector r_pi;        ///< r^pi[x] = sum_a pi(a|x) rbar(x,a)
    Matrix p_bar;       ///< P-bar[(x,a),(y,b)] = p(y|x,a) pi(b|y)
    Vector r_sa;        ///< rbar(x,a) flattened with sa_index
    PolicyTable policy;

    std::size_t num_states() const { return static_cast<std::size_t>(p_pi.rows()); }
    std::size_t num_actions() const { return policy.num_actions(); }
};

inline InducedChain induce(const TabularMdp &mdp, const PolicyTable &policy) {
    detail::require<parameter_error>(mdp.num_states() == policy.num_states() &&
                                         mdp.num_actions() == policy.num_actions(),
                                     "policy dimensions do not match the MDP");
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();
    const auto n = static_cast<Eigen::Index>(S);
    const auto na = static_cast<Eigen::Index>(S * A);

    Matrix p_pi = Matrix::Zero(n, n);
    Vector r_pi = Vector::Zero(n);
    Matrix p_bar = Matrix::Zero(na, na);
    Vector r_sa(na);
    for (State x = 0; x < S; ++x) {
        for (Action a = 0; a < A; ++a) {
            const double pa = policy(x, a);
            const auto i = static_cast<Eigen::Index>(sa_index(x, a, A));
            r_sa(i) = mdp.reward(x, a);
            r_pi(x) += pa * mdp.reward(x, a);
            for (State y = 0; y < S; ++y) {
                const double q = mdp.p(x, a, y);
                p_pi(x, y) += pa * q;
                for (Action b = 0; b < A; ++b) {
                    p_bar(i, static_cast<Eigen::Index>(sa_index(y, b, A))) = q * policy(y, b);
                }
            }
        }
    }
    return {std::move(p_pi), std::move(r_pi), std::move(p_bar), std::move(r_sa), policy};
}

/// Split of an absorbing chain into transient and absorbing parts.
struct AbsorbingDecomposition {
    std::size_t num_states = 0;
    std::vector<State> absorbing_states;  ///< sorted
    std::vector<State> transient_states;  ///< sorted, complement of absorbing_states
    Matrix transient_block;               ///< P-tilde restricted to transient states
    Vector transient_rewards;             ///< r-tilde
    Matrix fundamental_matrix;            ///< N = (I - P-tilde)^{-1}

    /// Scatter a transient-indexed vector into a full state vector (zeros elsewhere).
    Vector embed(const Vector &transient) const {
        Vector full = Vector::Zero(static_cast<Eigen::Index>(num_states));
        for (std::size_t i = 0; i < transient_states.size(); ++i) {
            full(static_cast<Eigen::Index>(transient_states[i])) = transient(static_cast<Eigen::Index>(i));
        }
        return full;
    }

    /// Gather the transient entries of a full state vector.
    Vector restrict(const Vector &full) const {
        Vector t(static_cast<Eigen::Index>(transient_states.size()));
        for (std::size_t i = 0; i < transient_states.size(); ++i) {
            t(static_cast<Eigen::Index>(i)) = full(static_cast<Eigen::Index>(transient_states[i]));
        }
        return t;
    }

    bool is_absorbing(State x) const {
        return std::binary_search(absorbing_states.begin(), absorbing_states.end(), x);
    }
};

/// Validates the declared absorbing states and builds N = (I - P-tilde)^{-1}.
///
/// Absorbing states are declared, never inferred: each must self-loop with
/// probability one under every action and carry zero reward under the policy.
inline AbsorbingDecomposition absorbing_decompose(const InducedChain &chain,
                                                  std::vector<State> absorbing) {
    const auto S = chain.num_states();
    const auto A = chain.num_actions();
    std::sort(absorbing.begin(), absorbing.end());
    absorbing.erase(std::unique(absorbing.begin(), absorbing.end()), absorbing.end());

    AbsorbingDecomposition dec;
    dec.num_states = S;
    for (State x : absorbing) {
        detail::require<parameter_error>(x < S, "absorbing state out of range");
        const auto xi = static_cast<Eigen::Index>(x);
        for (Action a = 0; a < A; ++a) {
            // sum_b P-bar[(x,a),(x,b)] = p(x | x, a)
            double self = 0.0;
            for (Action b = 0; b < A; ++b) {
                self += chain.p_bar(static_cast<Eigen::Index>(sa_index(x, a, A)),
                                    static_cast<Eigen::Index>(sa_index(x, b, A)));
            }
            detail::require<assumption_error>(std::abs(self - 1.0) <= kStochasticTolerance,
                                              "declared absorbing state " + std::to_string(x) +
                                                  " does not self-loop under every action");
        }
        detail::require<assumption_error>(std::abs(chain.r_pi(xi)) <= kStochasticTolerance,
                                          "declared absorbing state " + std::to_string(x) +
                                              " has non-zero reward");
    }
    dec.absorbing_states = std::move(absorbing);
    for (State x = 0; x < S; ++x) {
        if (!dec.is_absorbing(x)) {
            dec.transient_states.push_back(x);
        }
    }

    const auto nt = static_cast<Eigen::Index>(dec.transient_states.size());
    dec.transient_block.resize(nt, nt);
    dec.transient_rewards.resize(nt);
    for (Eigen::Index i = 0; i < nt; ++i) {
        const auto xi = static_cast<Eigen::Index>(dec.transient_states[static_cast<std::size_t>(i)]);
        dec.transient_rewards(i) = chain.r_pi(xi);
        for (Eigen::Index j = 0; j < nt; ++j) {
            dec.transient_block(i, j) =
                chain.p_pi(xi, static_cast<Eigen::Index>(dec.transient_states[static_cast<std::size_t>(j)]));
        }
    }

    try {
        ResolventSolver solver(dec.transient_block, 1.0);
        dec.fundamental_matrix = solver.solve_columns(Matrix::Identity(nt, nt));
    } catch (const numeric_error &e) {
        throw non_absorbing_error(std::string("transient block is singular: ") + e.what());
    }
    if (!dec.fundamental_matrix.allFinite()) {
        throw non_absorbing_error("fundamental matrix is not finite");
    }
    return dec;
}

/// Random MDP with Dirichlet(alpha) transition rows and Uniform(0,1) mean rewards.
///
/// Draw order: every transition row p(.|x,a) in (x, a) lexicographic order,
/// then every mean reward in the same order, all from one mt19937_64 stream.
/// r_max is set to 1 + 6 * reward_noise_std, the clamp used during simulation.
inline TabularMdp random_mdp(std::size_t num_states, std::size_t num_actions,
                             double dirichlet_alpha, std::uint64_t seed,
                             double reward_noise_std = 0.2) {
    detail::require<parameter_error>(num_states >= 2, "random_mdp needs at least two states");
    detail::require<parameter_error>(num_actions >= 1, "random_mdp needs at least one action");
    detail::require<parameter_error>(dirichlet_alpha > 0.0 && std::isfinite(dirichlet_alpha),
                                     "dirichlet alpha must be positive");
    detail::require<parameter_error>(reward_noise_std >= 0.0, "reward noise must be >= 0");

    Rng rng = make_rng(seed);
    std::vector<double> transition;
    transition.reserve(num_states * num_actions * num_states);
    for (std::size_t i = 0; i < num_states * num_actions; ++i) {
        auto row = sample_dirichlet(rng, num_states, dirichlet_alpha);
        transition.insert(transition.end(), row.begin(), row.end());
    }
    std::vector<double> rewards(num_states * num_actions);
    for (auto &r : rewards) {
        r = uniform01(rng);
    }
    return {num_states, num_actions, std::move(transition), std::move(rewards),
            1.0 + 6.0 * reward_noise_std, reward_noise_std};
}

// -- JSON ---------------------------------------------------------------------

inline nlohmann::json to_json(const TabularMdp &mdp) {
    const auto S = mdp.num_states();
    const auto A = mdp.num_actions();
    nlohmann::json transition = nlohmann::json::array();
    nlohmann::json rewards = nlohmann::json::array();
    for (State x = 0; x < S; ++x) {
        nlohmann::json per_action = nlohmann::json::array();
        nlohmann::json r_row = nlohmann::json::array();
        for (Action a = 0; a < A; ++a) {
            auto row = mdp.transition_row(x, a);
            per_action.push_back(std::vector<double>(row.begin(), row.end()));
            r_row.push_back(mdp.reward(x, a));
        }
        transition.push_back(std::move(per_action));
        rewards.push_back(std::move(r_row));
    }
    return {{"num_states", S},
            {"num_actions", A},
            {"transition", std::move(transition)},
            {"reward_mean", std::move(rewards)},
            {"r_max", mdp.r_max()},
            {"reward_noise_std", mdp.reward_noise_std()}};
}

inline TabularMdp mdp_from_json(const nlohmann::json &j) {
    try {
        const auto S = j.at("num_states").get<std::size_t>();
        const auto A = j.at("num_actions").get<std::size_t>();
        const auto &t = j.at("transition");
        const auto &r = j.at("reward_mean");
        detail::require<parameter_error>(t.is_array() && t.size() == S, "transition has wrong shape");
        detail::require<parameter_error>(r.is_array() && r.size() == S, "reward_mean has wrong shape");
        std::vector<double> transition;
        std::vector<double> rewards;
        for (std::size_t x = 0; x < S; ++x) {
            detail::require<parameter_error>(t[x].size() == A && r[x].size() == A,
                                             "per-state arrays have wrong shape");
            for (std::size_t a = 0; a < A; ++a) {
                auto row = t[x][a].get<std::vector<double>>();
                detail::require<parameter_error>(row.size() == S, "transition row has wrong length");
                transition.insert(transition.end(), row.begin(), row.end());
                rewards.push_back(r[x][a].get<double>());
            }
        }
        return {S, A, std::move(transition), std::move(rewards), j.at("r_max").get<double>(),
                j.value("reward_noise_std", 0.0)};
    } catch (const nlohmann::json::exception &e) {
        throw parameter_error(std::string("malformed MDP document: ") + e.what());
    }
}

inline nlohmann::json to_json(const PolicyTable &policy) {
    nlohmann::json rows = nlohmann::json::array();
    for (State x = 0; x < policy.num_states(); ++x) {
        auto row = policy.row(x);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return rows;
}

}  // namespace dtx
