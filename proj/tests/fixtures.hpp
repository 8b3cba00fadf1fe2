#pragma once

#include <vector>

#include "dtx/mdp.hpp"

namespace fixtures {

using dtx::Action;
using dtx::State;
using dtx::TabularMdp;

/// Two states, one action, deterministic swap; reward 1 in state 0.
inline TabularMdp swap_chain() { return {2, 1, {0.0, 1.0, 1.0, 0.0}, {1.0, 0.0}, 1.0}; }

/// Default toy: 10 states, 2 actions, Dirichlet(0.01), noise 0.2.
inline TabularMdp toy(std::uint64_t seed) { return dtx::random_mdp(10, 2, 0.01, seed); }

/// Small, well-mixed random MDP (used where the toy's near-deterministic rows make
/// Monte-Carlo checks needlessly slow to converge).
inline TabularMdp mixed(std::uint64_t seed, std::size_t S = 4, std::size_t A = 2) {
    return dtx::random_mdp(S, A, 1.0, seed, 0.0);
}

/// 3 states, state 2 absorbing (zero reward, self-loop under both actions).
/// Action 0 moves 0 -> {1, 2} and 1 -> 2; action 1 stays-or-advances.
inline TabularMdp absorbing3() {
    // p[x][a][y]
    std::vector<double> p = {
        0.0, 0.5, 0.5,  0.3, 0.3, 0.4,  // x = 0
        0.0, 0.0, 1.0,  0.2, 0.2, 0.6,  // x = 1
        0.0, 0.0, 1.0,  0.0, 0.0, 1.0,  // x = 2 (absorbing)
    };
    std::vector<double> r = {1.0, 0.5, 2.0, 0.25, 0.0, 0.0};
    return {3, 2, std::move(p), std::move(r), 2.0};
}

/// Chain 0 -> 1 -> 2 -> ... -> n-1 (absorbing), one action; rewards on transient states.
inline TabularMdp path_chain(std::size_t n, std::vector<double> rewards) {
    std::vector<double> p(n * n, 0.0);
    for (std::size_t x = 0; x + 1 < n; ++x) {
        p[x * n + x + 1] = 1.0;
    }
    p[(n - 1) * n + (n - 1)] = 1.0;
    rewards.resize(n, 0.0);
    rewards[n - 1] = 0.0;
    double rmax = 0.0;
    for (double r : rewards) {
        rmax = std::max(rmax, r);
    }
    return {n, 1, std::move(p), std::move(rewards), std::max(rmax, 1.0)};
}

/// Single-state bandit (self-loop) with two actions; action 1 pays more.
inline TabularMdp bandit(double r0 = 0.2, double r1 = 1.0) { return {1, 2, {1.0, 1.0}, {r0, r1}, 1.0}; }

/// Two-state bandit: from either state both actions lead to state 0/1 uniformly; action 1 dominant.
inline TabularMdp two_state_bandit() {
    return {2, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, {0.1, 0.9, 0.2, 0.8}, 1.0};
}

}  // namespace fixtures
