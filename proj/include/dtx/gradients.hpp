#pragma once

// Tabular softmax policy gradients: exact matrix forms, the split of the
// full gradient into its value and weighting parts, sampled updates with
// expansion weights w_K(t), and a small policy-optimization loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtx/errors.hpp"
#include "dtx/exact.hpp"
#include "dtx/linalg.hpp"
#include "dtx/mdp.hpp"
#include "dtx/sampling.hpp"

namespace dtx {

/// Logits theta[x][a] of a tabular softmax policy.
class SoftmaxPolicyParams {
  public:
    SoftmaxPolicyParams(std::size_t num_states, std::size_t num_actions)
        : SoftmaxPolicyParams(num_states, num_actions, std::vector<double>(num_states * num_actions, 0.0)) {}

    SoftmaxPolicyParams(std::size_t num_states, std::size_t num_actions, std::vector<double> logits)
        : num_states_(num_states), num_actions_(num_actions), logits_(std::move(logits)) {
        detail::require<parameter_error>(num_states_ >= 1 && num_actions_ >= 1, "softmax needs positive dimensions");
        detail::require<parameter_error>(logits_.size() == num_states_ * num_actions_, "logit table has wrong size");
    }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::size_t size() const noexcept { return logits_.size(); }

    double &operator()(State x, Action a) { return logits_[x * num_actions_ + a]; }
    double operator()(State x, Action a) const { return logits_[x * num_actions_ + a]; }
    double &operator[](std::size_t i) { return logits_[i]; }
    double operator[](std::size_t i) const { return logits_[i]; }
    const std::vector<double> &logits() const noexcept { return logits_; }

    PolicyTable policy() const {
        std::vector<double> probs(logits_.size());
        for (State x = 0; x < num_states_; ++x) {
            const double *row = logits_.data() + x * num_actions_;
            const double m = *std::max_element(row, row + num_actions_);
            double z = 0.0;
            for (Action a = 0; a < num_actions_; ++a) {
                probs[x * num_actions_ + a] = std::exp(row[a] - m);
                z += probs[x * num_actions_ + a];
            }
            for (Action a = 0; a < num_actions_; ++a) {
                probs[x * num_actions_ + a] /= z;
            }
        }
        return {num_states_, num_actions_, std::move(probs)};
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : logits_) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }

  private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> logits_;
};

enum class GradientObjective { full, first_partial, second_partial, vanilla, weighted, finite_difference };

inline std::string to_string(GradientObjective o) {
    switch (o) {
        case GradientObjective::full: return "full";
        case GradientObjective::first_partial: return "first_partial";
        case GradientObjective::second_partial: return "second_partial";
        case GradientObjective::vanilla: return "vanilla";
        case GradientObjective::weighted: return "weighted";
        case GradientObjective::finite_difference: return "finite_difference";
    }
    return "unknown";
}

/// g[x][a] = d objective / d theta[x][a]. Sampled tables also carry per-entry standard errors.
struct GradientTable {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<double> partials;
    std::vector<double> std_error;  ///< empty for exact gradients
    GradientObjective objective = GradientObjective::full;

    GradientTable() = default;
    GradientTable(std::size_t s, std::size_t a, GradientObjective o)
        : num_states(s), num_actions(a), partials(s * a, 0.0), objective(o) {}

    double &operator()(State x, Action a) { return partials[x * num_actions + a]; }
    double operator()(State x, Action a) const { return partials[x * num_actions + a]; }

    double row_sum(State x) const {
        double s = 0.0;
        for (Action a = 0; a < num_actions; ++a) {
            s += (*this)(x, a);
        }
        return s;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : partials) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }

    double norm() const {
        double s = 0.0;
        for (double v : partials) {
            s += v * v;
        }
        return std::sqrt(s);
    }
};

inline double max_abs_difference(const GradientTable &a, const GradientTable &b) {
    detail::require<parameter_error>(a.partials.size() == b.partials.size(), "gradient tables differ in size");
    double m = 0.0;
    for (std::size_t i = 0; i < a.partials.size(); ++i) {
        m = std::max(m, std::abs(a.partials[i] - b.partials[i]));
    }
    return m;
}

namespace detail {

/// g[y][b] = weight(y) pi(b|y) adv(y,b)
inline GradientTable weighted_advantage_table(const Vector &state_weight, const PolicyTable &policy,
                                              const Vector &adv, GradientObjective o) {
    GradientTable g(policy.num_states(), policy.num_actions(), o);
    for (State y = 0; y < policy.num_states(); ++y) {
        for (Action b = 0; b < policy.num_actions(); ++b) {
            g(y, b) = state_weight(static_cast<Eigen::Index>(y)) * policy(y, b) *
                      adv(static_cast<Eigen::Index>(sa_index(y, b, policy.num_actions())));
        }
    }
    return g;
}

inline void check_params(const TabularMdp &mdp, const SoftmaxPolicyParams &params, State start) {
    require<parameter_error>(mdp.num_states() == params.num_states() && mdp.num_actions() == params.num_actions(),
                             "policy parameters do not match the MDP");
    require_state(start, mdp.num_states());
}

/// Row `start` of (I - scale P)^{-1}, via one transposed solve.
inline Vector resolvent_row(const Matrix &p, double scale, State start) {
    ResolventSolver solver(p, scale);
    return solver.solve_transposed(dirac(start, static_cast<std::size_t>(p.rows())));
}

/// Row `start` of N = (I - P-tilde)^{-1}, embedded in full state space (zero on absorbing states).
inline Vector fundamental_row(const AbsorbingDecomposition &dec, State start) {
    if (dec.is_absorbing(start)) {
        return Vector::Zero(static_cast<Eigen::Index>(dec.num_states));
    }
    const auto it = std::lower_bound(dec.transient_states.begin(), dec.transient_states.end(), start);
    const auto idx = static_cast<Eigen::Index>(it - dec.transient_states.begin());
    return dec.embed(dec.fundamental_matrix.row(idx).transpose());
}

}  // namespace detail

/// Exact grad_theta V_gamma(start) = row_start[(I - gamma P)^{-1}] G_gamma,
/// with local gradients G_gamma(y)[theta_{y,b}] = pi(b|y) A_gamma(y,b).
inline GradientTable exact_policy_gradient(const TabularMdp &mdp, const SoftmaxPolicyParams &params, double gamma,
                                           State start) {
    detail::check_params(mdp, params, start);
    detail::require_discount(gamma);
    const PolicyTable policy = params.policy();
    const InducedChain chain = induce(mdp, policy);
    const QVector q = q_value(chain, gamma);
    return detail::weighted_advantage_table(detail::resolvent_row(chain.p_pi, gamma, start), policy,
                                            q.advantage(policy), GradientObjective::full);
}

/// First partial gradient (I - gamma' P)^{-1} G_gamma at `start`: the derivative of
/// rho^T V_gamma through V_gamma only. For gamma' = 1 the absorbing states must be
/// declared; the resolvent is then the fundamental matrix of the transient block.
inline GradientTable exact_first_partial(const TabularMdp &mdp, const SoftmaxPolicyParams &params, double gamma,
                                         double gamma_prime, State start, std::span<const State> absorbing = {}) {
    detail::check_params(mdp, params, start);
    ExpansionConfig{gamma, gamma_prime, 0}.validate();
    const PolicyTable policy = params.policy();
    const InducedChain chain = induce(mdp, policy);
    const QVector q = q_value(chain, gamma);
    Vector weight;
    if (gamma_prime < 1.0) {
        weight = detail::resolvent_row(chain.p_pi, gamma_prime, start);
    } else {
        if (absorbing.empty()) {
            throw assumption_error("first partial gradient at gamma' = 1 needs declared absorbing states");
        }
        const auto dec = absorbing_decompose(chain, std::vector<State>(absorbing.begin(), absorbing.end()));
        weight = detail::fundamental_row(dec, start);
    }
    return detail::weighted_advantage_table(weight, policy, q.advantage(policy), GradientObjective::first_partial);
}

struct GradientDecomposition {
    GradientTable full;
    GradientTable first;
    GradientTable second;
};

/// grad V_{gamma'}(start) = first partial + second partial; second = full - first.
inline GradientDecomposition exact_gradient_decomposition(const TabularMdp &mdp, const SoftmaxPolicyParams &params,
                                                          double gamma, double gamma_prime, State start) {
    ExpansionConfig{gamma, gamma_prime, 0}.validate();
    detail::require_discount(gamma_prime);
    GradientDecomposition out{exact_policy_gradient(mdp, params, gamma_prime, start),
                              exact_first_partial(mdp, params, gamma, gamma_prime, start), {}};
    out.second = out.full;
    out.second.objective = GradientObjective::second_partial;
    for (std::size_t i = 0; i < out.second.partials.size(); ++i) {
        out.second.partials[i] -= out.first.partials[i];
    }
    return out;
}

/// Second partial gradient in REINFORCE form:
///   (gamma'-gamma) E[ sum_t gamma'^t grad log pi(a_t|x_t) W(x_{t+1}) ],  W = (I - gamma' P)^{-1} V_gamma,
/// i.e. the gradient of V_gamma(x) + (gamma'-gamma) E[sum_{t>=1} gamma'^{t-1} V_gamma(x_t)]
/// through the trajectory distribution with V_gamma held fixed.
inline GradientTable second_partial_w_form(const TabularMdp &mdp, const SoftmaxPolicyParams &params, double gamma,
                                           double gamma_prime, State start) {
    detail::check_params(mdp, params, start);
    ExpansionConfig{gamma, gamma_prime, 0}.validate();
    detail::require_discount(gamma_prime);
    const PolicyTable policy = params.policy();
    const InducedChain chain = induce(mdp, policy);
    const ValueVector v = value(chain, gamma);
    ResolventSolver outer(chain.p_pi, gamma_prime);
    const Vector w = outer.solve(v.values);
    const Vector occupancy = outer.solve_transposed(detail::dirac(start, chain.num_states()));

    // Expected next-state W per (y, b), centred by its policy average: a pseudo-advantage.
    const auto S = policy.num_states();
    const auto A = policy.num_actions();
    Vector next_w(static_cast<Eigen::Index>(S * A));
    for (State y = 0; y < S; ++y) {
        double mean = 0.0;
        for (Action b = 0; b < A; ++b) {
            double acc = 0.0;
            for (State z = 0; z < S; ++z) {
                acc += mdp.p(y, b, z) * w(static_cast<Eigen::Index>(z));
            }
            next_w(static_cast<Eigen::Index>(sa_index(y, b, A))) = acc;
            mean += policy(y, b) * acc;
        }
        for (Action b = 0; b < A; ++b) {
            next_w(static_cast<Eigen::Index>(sa_index(y, b, A))) -= mean;
        }
    }
    GradientTable g = detail::weighted_advantage_table(occupancy, policy, next_w, GradientObjective::second_partial);
    for (auto &p : g.partials) {
        p *= gamma_prime - gamma;
    }
    return g;
}

// -- sampled updates ---------------------------------------------------------------

struct WeightedPgOptions {
    bool self_normalize = false;  ///< divide w(t) by sum_t w(t) within each trajectory
    /// Per-step baselines b_t (any function of x_t), subtracted from Q-hat_t.
    std::optional<std::vector<std::vector<double>>> baselines;
};

/// w_K(t) for t = 0 .. length-1.
inline std::vector<double> update_weight_schedule(const ExpansionConfig &cfg, std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t t = 0; t < length; ++t) {
        w[t] = update_weight(cfg.order, t, cfg.gamma, cfg.gamma_prime);
    }
    return w;
}

/// Batch average of sum_t weights[t] (Q-hat_t - b_t) grad log pi(a_t|x_t). Standard errors are
/// taken across trajectories.
inline GradientTable weighted_pg_estimate_with(const PolicyTable &policy, std::span<const Trajectory> trajectories,
                                               const std::vector<std::vector<double>> &q_estimates,
                                               std::span<const double> weights, const WeightedPgOptions &opts = {}) {
    detail::require<parameter_error>(!trajectories.empty(), "empty trajectory batch");
    detail::require<parameter_error>(q_estimates.size() == trajectories.size(), "one Q-estimate row per trajectory");
    if (opts.baselines) {
        detail::require<parameter_error>(opts.baselines->size() == trajectories.size(),
                                         "one baseline row per trajectory");
    }
    const auto S = policy.num_states();
    const auto A = policy.num_actions();
    const std::size_t n = trajectories.size();
    std::vector<double> sum(S * A, 0.0);
    std::vector<double> sum_sq(S * A, 0.0);
    std::vector<double> g(S * A);
    for (std::size_t i = 0; i < n; ++i) {
        const auto &traj = trajectories[i];
        const auto &q = q_estimates[i];
        detail::require<parameter_error>(q.size() == traj.size(), "Q estimates must align with trajectory steps");
        detail::require<parameter_error>(weights.size() >= traj.size(), "weight schedule shorter than trajectory");
        double norm = 1.0;
        if (opts.self_normalize) {
            norm = 0.0;
            for (std::size_t t = 0; t < traj.size(); ++t) {
                norm += weights[t];
            }
            detail::require<numeric_error>(norm > 0.0, "self-normalization with zero total weight");
        }
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t t = 0; t < traj.size(); ++t) {
            double coeff = q[t];
            if (opts.baselines) {
                detail::require<parameter_error>((*opts.baselines)[i].size() == traj.size(),
                                                 "baselines must align with trajectory steps");
                coeff -= (*opts.baselines)[i][t];
            }
            coeff *= weights[t] / norm;
            if (coeff == 0.0) {
                continue;
            }
            const State x = traj.states[t];
            const Action a = traj.actions[t];
            // d log pi(a|x) / d theta[x][b] = [a == b] - pi(b|x)
            for (Action b = 0; b < A; ++b) {
                g[x * A + b] += coeff * ((a == b ? 1.0 : 0.0) - policy(x, b));
            }
        }
        for (std::size_t j = 0; j < g.size(); ++j) {
            sum[j] += g[j];
            sum_sq[j] += g[j] * g[j];
        }
    }
    GradientTable out(S, A, GradientObjective::weighted);
    out.std_error.assign(S * A, 0.0);
    const double dn = static_cast<double>(n);
    for (std::size_t j = 0; j < sum.size(); ++j) {
        out.partials[j] = sum[j] / dn;
        if (n > 1) {
            const double var = std::max(0.0, (sum_sq[j] - dn * out.partials[j] * out.partials[j]) / (dn - 1.0));
            out.std_error[j] = std::sqrt(var / dn);
        }
    }
    return out;
}

/// Expansion-weighted policy-gradient estimate with w_K(t) from the config.
/// K = 0 gives the vanilla discounted estimator; K >= trajectory length gives weights gamma'^t.
inline GradientTable weighted_pg_estimate(const PolicyTable &policy, std::span<const Trajectory> trajectories,
                                          const std::vector<std::vector<double>> &q_estimates,
                                          const ExpansionConfig &cfg, const WeightedPgOptions &opts = {}) {
    cfg.validate();
    std::size_t longest = 0;
    for (const auto &t : trajectories) {
        longest = std::max(longest, t.size());
    }
    const auto w = update_weight_schedule(cfg, longest);
    return weighted_pg_estimate_with(policy, trajectories, q_estimates, w, opts);
}

/// Central differences (f(theta + h e_i) - f(theta - h e_i)) / 2h for every logit.
inline GradientTable finite_difference_gradient(const std::function<double(const SoftmaxPolicyParams &)> &objective,
                                                const SoftmaxPolicyParams &params, double step) {
    detail::require<parameter_error>(step > 0.0, "finite-difference step must be positive");
    GradientTable g(params.num_states(), params.num_actions(), GradientObjective::finite_difference);
    SoftmaxPolicyParams probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        probe[i] = params[i] + step;
        const double fwd = objective(probe);
        probe[i] = params[i] - step;
        const double bwd = objective(probe);
        probe[i] = params[i];
        g.partials[i] = (fwd - bwd) / (2.0 * step);
    }
    return g;
}

// -- training ------------------------------------------------------------------------

enum class TrainVariant { q_expansion, update_weighting, vanilla, heuristic };

inline std::string to_string(TrainVariant v) {
    switch (v) {
        case TrainVariant::q_expansion: return "q-expansion";
        case TrainVariant::update_weighting: return "update-weighting";
        case TrainVariant::vanilla: return "vanilla";
        case TrainVariant::heuristic: return "heuristic";
    }
    return "unknown";
}

inline TrainVariant train_variant_from_string(const std::string &s) {
    if (s == "q-expansion") return TrainVariant::q_expansion;
    if (s == "update-weighting") return TrainVariant::update_weighting;
    if (s == "vanilla") return TrainVariant::vanilla;
    if (s == "heuristic") return TrainVariant::heuristic;
    throw parameter_error("unknown training variant '" + s + "'");
}

struct TrainConfig {
    TrainVariant variant = TrainVariant::update_weighting;
    ExpansionConfig cfg{0.9, 0.999, 10};
    double learning_rate = 0.1;
    std::size_t iterations = 100;
    std::size_t batch = 10;          ///< trajectories per update
    std::uint64_t seed = 0;
    double eta = 0.01;               ///< Q-hat = (1-eta) Q-hat_gamma + eta Q-hat_K (q-expansion)
    std::size_t horizon = 1000;      ///< rollout length and evaluation horizon T
    State start = 0;
    std::size_t q_window = 10;       ///< H of the marginalized first-order Q estimate
    bool self_normalize = false;
    bool baseline = false;           ///< subtract the Monte-Carlo state-value estimate
    std::vector<State> absorbing;    ///< declared absorbing states; evaluation is then exact and unbounded

    void validate() const {
        cfg.validate();
        detail::require<parameter_error>(learning_rate >= 0.0, "learning rate must be >= 0");
        detail::require<parameter_error>(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
        detail::require<parameter_error>(batch >= 1 && horizon >= 1, "batch and horizon must be >= 1");
    }
};

struct LearningCurve {
    std::vector<double> returns;  ///< undiscounted return from start before each update, plus the final policy
    bool diverged = false;        ///< stopped early because |theta|_inf exceeded the guard
};

inline constexpr double kDivergenceGuard = 1e4;

/// Expected undiscounted return over `horizon` steps from `start`, by propagating
/// the state distribution (no sampling).
inline double finite_horizon_return(const InducedChain &chain, State start, std::size_t horizon) {
    detail::require_state(start, chain.num_states());
    Eigen::RowVectorXd dist = detail::dirac(start, chain.num_states()).transpose();
    double total = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        total += dist.dot(chain.r_pi);
        dist = dist * chain.p_pi;
    }
    return total;
}

/// Undiscounted evaluation metric of a policy: exact absorbing-chain value when
/// absorbing states are declared, otherwise the finite-horizon expected return.
inline double evaluate_undiscounted(const TabularMdp &mdp, const PolicyTable &policy, State start,
                                    std::size_t horizon, const std::vector<State> &absorbing) {
    const InducedChain chain = induce(mdp, policy);
    if (!absorbing.empty()) {
        return value_undiscounted(absorbing_decompose(chain, absorbing))(start);
    }
    return finite_horizon_return(chain, start, horizon);
}

namespace detail {

/// Per-step Q plug-ins for one trajectory under the chosen variant.
inline std::vector<double> train_q_estimates(const Trajectory &traj, const TrainConfig &tc, std::uint64_t seed) {
    std::vector<double> q = discounted_returns(traj, tc.cfg.gamma);
    if (tc.variant != TrainVariant::q_expansion || tc.eta == 0.0 || tc.cfg.order == 0) {
        return q;
    }
    std::vector<double> mixed(q.size());
    const BaseEstimate base = [&q](const Trajectory &, std::size_t t) { return q[t]; };
    for (std::size_t t = 0; t < traj.size(); ++t) {
        double expanded = q[t];
        if (tc.cfg.order == 1) {
            const std::size_t h = std::min(tc.q_window, traj.size() - 1 - t);
            if (h >= 1) {
                expanded = truncated_q_estimate(traj, t, tc.cfg, h, base);
            }
        } else {
            // Orders whose random times leave the trajectory fall back to the highest complete order.
            auto orders = random_time_sums(traj, t, tc.cfg, base, child_seed(seed, t), 1, "taylor_q", false);
            for (auto it = orders.rbegin(); it != orders.rend(); ++it) {
                if (it->num_samples > 0) {
                    expanded = it->point;
                    break;
                }
            }
        }
        mixed[t] = (1.0 - tc.eta) * q[t] + tc.eta * expanded;
    }
    return mixed;
}

/// Per-step baseline: mean discounted return observed from the same state in the *other*
/// trajectories of the batch (leave-one-out, so the baseline is independent of the
/// trajectory it is applied to and the update stays unbiased). Zero if unseen elsewhere.
inline std::vector<std::vector<double>> batch_state_baselines(std::span<const Trajectory> batch,
                                                              const std::vector<std::vector<double>> &returns,
                                                              std::size_t num_states) {
    const std::size_t n = batch.size();
    std::vector<double> sum(num_states, 0.0), count(num_states, 0.0);
    std::vector<std::vector<double>> own_sum(n, std::vector<double>(num_states, 0.0));
    std::vector<std::vector<double>> own_count(n, std::vector<double>(num_states, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < batch[i].size(); ++t) {
            const State x = batch[i].states[t];
            own_sum[i][x] += returns[i][t];
            own_count[i][x] += 1.0;
        }
        for (State x = 0; x < num_states; ++x) {
            sum[x] += own_sum[i][x];
            count[x] += own_count[i][x];
        }
    }
    std::vector<std::vector<double>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].resize(batch[i].size());
        for (std::size_t t = 0; t < batch[i].size(); ++t) {
            const State x = batch[i].states[t];
            const double c = count[x] - own_count[i][x];
            out[i][t] = c > 0.0 ? (sum[x] - own_sum[i][x]) / c : 0.0;
        }
    }
    return out;
}

}  // namespace detail

/// Stochastic gradient ascent on a tabular softmax policy.
///
/// Each iteration rolls out `batch` trajectories of length `horizon` from `start`,
/// forms Monte-Carlo Q_gamma estimates and ascends along
///   vanilla:          w(t) = gamma^t
///   heuristic:        w(t) = 1
///   update-weighting: w(t) = w_K(t)
///   q-expansion:      w(t) = 1 with Q-hat = (1-eta) Q-hat_gamma + eta Q-hat_{K,gamma,gamma'}.
/// Trajectory b of iteration i is simulated with child_seed(seed, i * batch + b).
inline LearningCurve train_tabular(const TabularMdp &mdp, const SoftmaxPolicyParams &init, const TrainConfig &tc) {
    tc.validate();
    detail::check_params(mdp, init, tc.start);

    std::vector<double> weights;
    switch (tc.variant) {
        case TrainVariant::vanilla:
            weights = update_weight_schedule({tc.cfg.gamma, tc.cfg.gamma, 0}, tc.horizon);
            break;
        case TrainVariant::update_weighting:
            weights = update_weight_schedule(tc.cfg, tc.horizon);
            break;
        case TrainVariant::heuristic:
        case TrainVariant::q_expansion:
            weights.assign(tc.horizon, 1.0);
            break;
    }

    SoftmaxPolicyParams params = init;
    LearningCurve curve;
    curve.returns.reserve(tc.iterations + 1);
    std::vector<Trajectory> batch(tc.batch);
    std::vector<std::vector<double>> q(tc.batch);
    for (std::size_t it = 0; it < tc.iterations; ++it) {
        const PolicyTable policy = params.policy();
        curve.returns.push_back(evaluate_undiscounted(mdp, policy, tc.start, tc.horizon, tc.absorbing));
        for (std::size_t b = 0; b < tc.batch; ++b) {
            const std::uint64_t s = child_seed(tc.seed, it * tc.batch + b);
            batch[b] = simulate(mdp, policy, tc.start, tc.horizon, s);
            q[b] = detail::train_q_estimates(batch[b], tc, s);
        }
        WeightedPgOptions opts;
        opts.self_normalize = tc.self_normalize;
        if (tc.baseline) {
            std::vector<std::vector<double>> returns(tc.batch);
            for (std::size_t b = 0; b < tc.batch; ++b) {
                returns[b] = discounted_returns(batch[b], tc.cfg.gamma);
            }
            opts.baselines = detail::batch_state_baselines(batch, returns, mdp.num_states());
        }
        const GradientTable g = weighted_pg_estimate_with(policy, batch, q, weights, opts);
        for (std::size_t j = 0; j < params.size(); ++j) {
            params[j] += tc.learning_rate * g.partials[j];
        }
        if (!(params.max_abs() <= kDivergenceGuard)) {
            curve.diverged = true;
            return curve;
        }
    }
    curve.returns.push_back(evaluate_undiscounted(mdp, params.policy(), tc.start, tc.horizon, tc.absorbing));
    return curve;
}

}  // namespace dtx
