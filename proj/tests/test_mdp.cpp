#include <gtest/gtest.h>

#include <cmath>

#include "dtx/mdp.hpp"
#include "fixtures.hpp"

using namespace dtx;

namespace {

void expect_valid(const TabularMdp &m) {
    for (State x = 0; x < m.num_states(); ++x) {
        for (Action a = 0; a < m.num_actions(); ++a) {
            double s = 0.0;
            for (State y = 0; y < m.num_states(); ++y) {
                EXPECT_GE(m.p(x, a, y), 0.0);
                s += m.p(x, a, y);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
            EXPECT_GE(m.reward(x, a), 0.0);
            EXPECT_LE(m.reward(x, a), m.r_max());
        }
    }
}

}  // namespace

TEST(RandomMdp, ToyShapeIsValid) {
    const auto m = random_mdp(10, 2, 0.01, 7);
    EXPECT_EQ(m.num_states(), 10u);
    EXPECT_EQ(m.num_actions(), 2u);
    EXPECT_DOUBLE_EQ(m.reward_noise_std(), 0.2);
    EXPECT_DOUBLE_EQ(m.r_max(), 1.0 + 6.0 * 0.2);
    expect_valid(m);
}

TEST(RandomMdp, HundredSeedSweep) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        expect_valid(random_mdp(10, 2, 0.01, s));
    }
}

TEST(RandomMdp, LargeAlphaApproachesUniform) {
    const auto m = random_mdp(2, 1, 1e6, 3);
    EXPECT_NEAR(m.p(0, 0, 0), 0.5, 5e-3);
    EXPECT_NEAR(m.p(1, 0, 1), 0.5, 5e-3);
}

TEST(RandomMdp, DeterministicPerSeed) {
    EXPECT_EQ(random_mdp(10, 2, 0.01, 11), random_mdp(10, 2, 0.01, 11));
    EXPECT_NE(random_mdp(10, 2, 0.01, 11), random_mdp(10, 2, 0.01, 12));
}

TEST(RandomMdp, SmallAlphaConcentrates) {
    // alpha = 0.01: most rows put almost all mass on one state (checked over 20 seeds)
    int concentrated = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto m = random_mdp(10, 2, 0.01, s);
        for (State x = 0; x < 10; ++x)
            for (Action a = 0; a < 2; ++a) {
                double mx = 0.0;
                for (State y = 0; y < 10; ++y) mx = std::max(mx, m.p(x, a, y));
                concentrated += mx > 0.9;
            }
    }
    EXPECT_GE(concentrated, 200);  // of 400 rows
}

TEST(RandomMdp, RejectsBadParameters) {
    EXPECT_THROW(random_mdp(1, 2, 0.1, 0), parameter_error);
    EXPECT_THROW(random_mdp(3, 0, 0.1, 0), parameter_error);
    EXPECT_THROW(random_mdp(3, 2, 0.0, 0), parameter_error);
    EXPECT_THROW(random_mdp(3, 2, -1.0, 0), parameter_error);
}

TEST(TabularMdp, ValidatesInvariants) {
    EXPECT_THROW(TabularMdp(2, 1, {0.5, 0.4, 1.0, 0.0}, {0.0, 0.0}, 1.0), parameter_error);
    EXPECT_THROW(TabularMdp(2, 1, {1.0, 0.0, 1.0, 0.0}, {2.0, 0.0}, 1.0), parameter_error);
    EXPECT_THROW(TabularMdp(2, 1, {1.0, 0.0, 1.0}, {0.0, 0.0}, 1.0), parameter_error);
    EXPECT_THROW(TabularMdp(2, 1, {1.0, 0.0, 1.0, 0.0}, {0.0, 0.0}, 1.0, -0.1), parameter_error);
}

TEST(Policy, RowsMustBeSimplices) {
    EXPECT_THROW(PolicyTable(1, 2, {0.5, 0.6}), parameter_error);
    EXPECT_THROW(PolicyTable(1, 2, {1.5, -0.5}), parameter_error);
    const auto u = PolicyTable::uniform(3, 4);
    EXPECT_DOUBLE_EQ(u(2, 3), 0.25);
}

TEST(Induce, RowsAreMixturesOfTransitions) {
    const auto m = fixtures::toy(1);
    const auto pi = PolicyTable(10, 2, [] {
        std::vector<double> p;
        for (int x = 0; x < 10; ++x) {
            p.push_back(0.1 * x);
            p.push_back(1.0 - 0.1 * x);
        }
        return p;
    }());
    const auto c = induce(m, pi);
    for (State x = 0; x < 10; ++x) {
        double rs = 0.0;
        for (State y = 0; y < 10; ++y) {
            const double expect = pi(x, 0) * m.p(x, 0, y) + pi(x, 1) * m.p(x, 1, y);
            EXPECT_NEAR(c.p_pi(x, y), expect, 1e-14);
            rs += c.p_pi(x, y);
        }
        EXPECT_NEAR(rs, 1.0, 1e-12);
        EXPECT_EQ(c.r_pi(x), pi(x, 0) * m.reward(x, 0) + pi(x, 1) * m.reward(x, 1));
    }
}

TEST(Induce, UniformPolicyOnToyIsStochastic) {
    const auto c = induce(fixtures::toy(2), PolicyTable::uniform(10, 2));
    EXPECT_EQ(c.p_pi.rows(), 10);
    EXPECT_NEAR((c.p_pi.rowwise().sum().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
    EXPECT_GE(c.p_pi.minCoeff(), 0.0);
}

TEST(Induce, StateActionChain) {
    const auto m = fixtures::toy(3);
    const auto pi = PolicyTable(10, 2, std::vector<double>(20, 0.5));
    const auto c = induce(m, pi);
    ASSERT_EQ(c.p_bar.rows(), 20);
    EXPECT_NEAR((c.p_bar.rowwise().sum().array() - 1.0).abs().maxCoeff(), 0.0, 1e-12);
    for (State x = 0; x < 10; ++x)
        for (Action a = 0; a < 2; ++a)
            for (State y = 0; y < 10; ++y)
                for (Action b = 0; b < 2; ++b)
                    EXPECT_DOUBLE_EQ(c.p_bar(sa_index(x, a, 2), sa_index(y, b, 2)), m.p(x, a, y) * pi(y, b));
}

TEST(Induce, SingleActionCopiesTransitions) {
    const auto m = random_mdp(5, 1, 0.5, 9);
    const auto c = induce(m, PolicyTable::uniform(5, 1));
    for (State x = 0; x < 5; ++x)
        for (State y = 0; y < 5; ++y) EXPECT_EQ(c.p_pi(x, y), m.p(x, 0, y));
}

TEST(Induce, SwapChainRewards) {
    const auto c = induce(fixtures::swap_chain(), PolicyTable::uniform(2, 1));
    EXPECT_EQ(c.r_pi(0), 1.0);
    EXPECT_EQ(c.r_pi(1), 0.0);
}

TEST(Induce, DimensionMismatch) {
    EXPECT_THROW(induce(fixtures::toy(1), PolicyTable::uniform(9, 2)), parameter_error);
}

TEST(Absorbing, HandInvertedBlock) {
    // transient block [[0, 0.5], [0, 0]]: N = [[1, 0.5], [0, 1]]
    const TabularMdp m(3, 1, {0.0, 0.5, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0}, {1.0, 2.0, 0.0}, 2.0);
    const auto dec = absorbing_decompose(induce(m, PolicyTable::uniform(3, 1)), {2});
    ASSERT_EQ(dec.fundamental_matrix.rows(), 2);
    EXPECT_NEAR(dec.fundamental_matrix(0, 0), 1.0, 1e-14);
    EXPECT_NEAR(dec.fundamental_matrix(0, 1), 0.5, 1e-14);
    EXPECT_NEAR(dec.fundamental_matrix(1, 0), 0.0, 1e-14);
    EXPECT_NEAR(dec.fundamental_matrix(1, 1), 1.0, 1e-14);
    const Matrix check = dec.fundamental_matrix * (Matrix::Identity(2, 2) - dec.transient_block);
    EXPECT_LT((check - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Absorbing, AllAbsorbing) {
    const TabularMdp m(2, 1, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0}, 1.0);
    const auto dec = absorbing_decompose(induce(m, PolicyTable::uniform(2, 1)), {0, 1});
    EXPECT_EQ(dec.transient_block.rows(), 0);
    EXPECT_EQ(dec.fundamental_matrix.rows(), 0);
    EXPECT_TRUE(dec.transient_states.empty());
}

TEST(Absorbing, RecurrentCycleIsNotAbsorbing) {
    // states 0 <-> 1 cycle forever, state 2 absorbing but unreachable
    const TabularMdp m(3, 1, {0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0}, {1.0, 1.0, 0.0}, 1.0);
    EXPECT_THROW(absorbing_decompose(induce(m, PolicyTable::uniform(3, 1)), {2}), non_absorbing_error);
}

TEST(Absorbing, AssumptionsChecked) {
    const auto m = fixtures::absorbing3();
    const auto c = induce(m, PolicyTable::uniform(3, 2));
    EXPECT_THROW(absorbing_decompose(c, {1}), assumption_error);  // no self-loop
    const TabularMdp rewarded(2, 1, {0.0, 1.0, 0.0, 1.0}, {1.0, 0.5}, 1.0);
    EXPECT_THROW(absorbing_decompose(induce(rewarded, PolicyTable::uniform(2, 1)), {1}), assumption_error);
    EXPECT_THROW(absorbing_decompose(c, {7}), parameter_error);
}

TEST(Absorbing, NeumannSeriesMatchesFundamentalMatrix) {
    const auto m = fixtures::absorbing3();
    const auto dec = absorbing_decompose(induce(m, PolicyTable::uniform(3, 2)), {2});
    const auto n = dec.transient_block.rows();
    Matrix acc = Matrix::Zero(n, n), power = Matrix::Identity(n, n);
    for (int k = 0; k <= 200; ++k) {
        acc += power;
        power = power * dec.transient_block;
    }
    EXPECT_LT((acc - dec.fundamental_matrix).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_TRUE(dec.fundamental_matrix.allFinite());
}

TEST(Absorbing, EmbedRestrictRoundTrip) {
    const auto dec = absorbing_decompose(induce(fixtures::absorbing3(), PolicyTable::uniform(3, 2)), {2});
    Vector t(2);
    t << 3.0, 4.0;
    const Vector full = dec.embed(t);
    EXPECT_EQ(full(2), 0.0);
    EXPECT_EQ(dec.restrict(full), t);
}

TEST(Json, RoundTripIsBitExact) {
    const auto m = fixtures::toy(21);
    const auto j = to_json(m);
    const auto back = mdp_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back, m);
    for (const char *key : {"num_states", "num_actions", "transition", "reward_mean", "r_max", "reward_noise_std"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j["transition"].size(), 10u);
    EXPECT_EQ(j["transition"][0].size(), 2u);
    EXPECT_EQ(j["transition"][0][0].size(), 10u);
}

TEST(Json, MalformedDocument) {
    EXPECT_THROW(mdp_from_json(nlohmann::json{{"num_states", 2}}), parameter_error);
    auto j = to_json(fixtures::swap_chain());
    j["transition"][0][0] = {0.3, 0.3};
    EXPECT_THROW(mdp_from_json(j), parameter_error);
}
