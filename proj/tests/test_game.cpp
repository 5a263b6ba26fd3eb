#include <gtest/gtest.h>

#include <cmath>

#include "bowley/game.hpp"
#include "bowley/oracle.hpp"
#include "test_util.hpp"

using namespace bowley;
using testutil::Rng;

namespace {
GameConfig cvar_game(double alpha, double mu = 0.02) {
    GameConfig g;
    g.farmer = FarmerPreference::cvar(alpha);
    g.cost.mu = mu;
    return g;
}
}  // namespace

TEST(LowerObjective, NoInsuranceIsUninsuredRisk) {
    const OutcomeSample y({10, 4, 1}, {0.2, 0.3, 0.5});
    const OutcomeSample zero({0, 0, 0}, y.probs);
    const auto farmer = FarmerPreference::convex_combo(0.3, 0.8);
    EXPECT_NEAR(lower_objective(farmer, ExpectedPremium{0.4}, y, zero), choquet(farmer.g, y), 1e-15);
}

TEST(LowerObjective, FullIndemnityLeavesPremium) {
    const OutcomeSample y({10, 4, 1}, {0.2, 0.3, 0.5});
    EXPECT_NEAR(lower_objective(FarmerPreference::cvar(0.9), ExpectedPremium{0.25}, y, y), 1.25 * y.mean(), 1e-12);
}

TEST(LowerObjective, StopLossWorkedValue) {
    // Z = Y - I + Pi = [10 - 6 + 3.6, 0 - 0 + 3.6]; CVaR(0.5) picks the top state
    const OutcomeSample y({10, 0}, {0.5, 0.5});
    const OutcomeSample i({6, 0}, {0.5, 0.5});
    EXPECT_NEAR(lower_objective(FarmerPreference::cvar(0.5), ExpectedPremium{0.2}, y, i), 7.6, 1e-12);
    EXPECT_NEAR(upper_objective(CostModel{0.0}, ExpectedPremium{0.2}, i), 0.6, 1e-12);
}

TEST(UpperObjective, ZeroWhenLoadingEqualsCostOrNoCover) {
    const OutcomeSample i({3, 1, 0}, {0.2, 0.3, 0.5});
    EXPECT_NEAR(upper_objective(CostModel{0.07}, ExpectedPremium{0.07}, i), 0.0, 1e-15);
    EXPECT_EQ(upper_objective(CostModel{0.02}, PowerDistortionPremium{1.0, 3.0}, OutcomeSample({0, 0, 0}, i.probs)), 0.0);
}

TEST(CombinedObjective, EqualFollowersGiveNegativeProfit) {
    const auto g = cvar_game(0.8);
    const OutcomeSample y({10, 4, 1}, {0.2, 0.3, 0.5});
    const OutcomeSample i({6, 1, 0}, y.probs);
    const PremiumPrinciple p = ExpectedPremium{0.3};
    EXPECT_EQ(combined_objective(g, p, y, i, i, 10.0), -upper_objective(g.cost, p, i));
}

TEST(CombinedObjective, BetterReferenceGivesPositivePenalty) {
    const auto g = cvar_game(0.5, 0.0);
    const OutcomeSample y({10, 0}, {0.5, 0.5});
    const PremiumPrinciple p = ExpectedPremium{0.2};
    const OutcomeSample none({0, 0}, y.probs);      // LP = 10
    const OutcomeSample cover({6, 0}, y.probs);     // LP = 7.6, profit 0.6
    EXPECT_GT(combined_objective(g, p, y, none, cover, 1.0), -upper_objective(g.cost, p, none));
    // -0 + 2 (10 - 7.6)
    EXPECT_NEAR(combined_objective(g, p, y, none, cover, 2.0), 4.8, 1e-12);
    // -0.6 + 2 (7.6 - 10)
    EXPECT_NEAR(combined_objective(g, p, y, cover, none, 2.0), -0.6 - 4.8, 1e-12);
    EXPECT_THROW(combined_objective(g, p, y, cover, none, 0.0), DomainError);
}

TEST(GameProperties, TranslationIdentity) {
    Rng r(1);
    for (int t = 0; t < 300; ++t) {
        const std::size_t q = r.index(1, 15);
        const auto y = testutil::random_sample(r, q, t % 2 == 0, 0.0, 20.0);
        auto i = y;
        for (auto& v : i.values) v = r.uniform(0.0, 1.0) * v;
        const auto farmer = t % 3 ? FarmerPreference::cvar(r.uniform(0.05, 0.95))
                                  : FarmerPreference::convex_combo(r.uniform(), r.uniform(0.05, 0.95));
        const PremiumPrinciple p = PowerDistortionPremium{r.uniform(0.0, 1.0), r.uniform(1.0, 3.0)};
        auto retained = y;
        for (std::size_t k = 0; k < q; ++k) retained.values[k] -= i.values[k];
        EXPECT_NEAR(lower_objective(farmer, p, y, i), choquet(farmer.g, retained) + premium(p, i), 1e-9);
        // direct evaluation of rho_F(Y - I + Pi)
        auto wealth = retained;
        const double pi = premium(p, i);
        for (auto& v : wealth.values) v += pi;
        EXPECT_NEAR(lower_objective(farmer, p, y, i), choquet(farmer.g, wealth), 1e-9);
    }
}

TEST(GameProperties, ObjectivesScaleWithLosses) {
    Rng r(2);
    for (int t = 0; t < 200; ++t) {
        const std::size_t q = r.index(2, 10);
        const auto y = testutil::random_sample(r, q, false, 0.0, 20.0);
        auto i1 = y, i2 = y;
        for (auto& v : i1.values) v = std::max(v - r.uniform(0.0, 10.0), 0.0);
        for (auto& v : i2.values) v = r.uniform(0.0, 1.0) * v;
        const double c = r.uniform(0.1, 10.0);
        auto scale = [c](OutcomeSample z) {
            for (auto& v : z.values) v *= c;
            return z;
        };
        const auto farmer = FarmerPreference::cvar(0.8);
        const PremiumPrinciple p = ExpectedPremium{0.3};
        const double lp1 = lower_objective(farmer, p, y, i1), lp2 = lower_objective(farmer, p, y, i2);
        const double lp1c = lower_objective(farmer, p, scale(y), scale(i1));
        const double lp2c = lower_objective(farmer, p, scale(y), scale(i2));
        EXPECT_NEAR(lp1c, c * lp1, 1e-9 * c * std::max(1.0, std::abs(lp1)));
        EXPECT_NEAR(upper_objective(CostModel{}, p, scale(i1)), c * upper_objective(CostModel{}, p, i1), 1e-9 * c);
        if (std::abs(lp1 - lp2) > 1e-9) EXPECT_EQ(lp1 < lp2, lp1c < lp2c);
    }
}

TEST(GameProperties, LowerGradientMatchesFiniteDifferences) {
    Rng r(3);
    for (int t = 0; t < 50; ++t) {
        const std::size_t q = r.index(2, 10);
        const auto y = testutil::random_sample(r, q, t % 2 == 0, 0.0, 20.0);
        auto i = y;
        for (auto& v : i.values) v = r.uniform(0.1, 0.9) * v + r.uniform(0.01, 0.1);
        GameConfig g = cvar_game(r.uniform(0.1, 0.9));
        const PremiumPrinciple p = PowerDistortionPremium{r.uniform(0.0, 1.0), r.uniform(1.0, 3.0)};
        const auto eval = lower_with_gradient(g, p, y, i);
        EXPECT_NEAR(eval.value, lower_objective(g.farmer, p, y, i), 1e-12);
        for (std::size_t k = 0; k < q; ++k) {
            const double fd = testutil::central_difference(
                [&](const std::vector<double>& v) { return lower_objective(g.farmer, p, y, OutcomeSample(v, y.probs)); },
                i.values, k, 1e-7);
            EXPECT_LE(std::abs(eval.d_payoff[k] - fd), 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(GameProperties, IndemnityDominatesIndexUnderBasisRisk) {
    Rng r(4);
    const std::vector<std::vector<double>> levels(4, uniform_grid(0.0, 10.0, 11));
    for (int t = 0; t < 20; ++t) {
        // two weather states with two distinct losses each: Y is not a function of X
        std::vector<double> losses(4);
        for (auto& v : losses) v = r.uniform(0.0, 10.0);
        const auto s = ScenarioSet::from_losses(losses);
        const auto farmer = FarmerPreference::cvar(r.uniform(0.3, 0.9));
        const PremiumPrinciple p = ExpectedPremium{r.uniform(0.0, 0.5)};
        const auto index = enumerate_follower(p, farmer, s, levels, {0, 0, 1, 1});
        const auto indemnity = enumerate_follower(p, farmer, s, levels);
        EXPECT_LE(indemnity.lower, index.lower + 1e-12);
        EXPECT_EQ(index.payoffs[0], index.payoffs[1]);
        EXPECT_EQ(index.payoffs[2], index.payoffs[3]);
    }
}

TEST(GameConfig, InitialLeaderAndValidation) {
    GameConfig g;
    g.problem = Problem::P3;
    g.init.theta = 0.1;
    g.init.knots = 100;
    const auto l = g.initial_leader();
    const auto curve = pricing_curve(l.curve);
    EXPECT_NEAR(curve(0.37), 1.1 * 0.37, 1e-12);
    EXPECT_NEAR(curve(1.0), 1.1, 1e-12);

    GameConfig bad;
    bad.farmer.g = DistortionFunction::power(2.0);
    EXPECT_THROW(bad.validate(), DomainError);
    bad = GameConfig{};
    bad.init.rho = 0.5;
    EXPECT_THROW(bad.validate(), DomainError);
    bad = GameConfig{};
    bad.cost.mu = -1;
    EXPECT_THROW(bad.validate(), DomainError);
}

TEST(GameConfig, PrincipleAndLeaderGradientPerProblem) {
    LeaderParams l;
    l.theta = 0.4;
    l.rho = 2.0;
    EXPECT_TRUE(std::holds_alternative<ExpectedPremium>(make_principle(Problem::P1, l)));
    EXPECT_TRUE(std::holds_alternative<PowerDistortionPremium>(make_principle(Problem::P2, l)));
    const OutcomeSample i({2, 1}, {0.5, 0.5});
    const auto g1 = premium_gradients(make_principle(Problem::P1, l), CostModel{}, i);
    EXPECT_EQ(leader_gradient(Problem::P1, l, g1).size(), 1u);
    const auto g2 = premium_gradients(make_principle(Problem::P2, l), CostModel{}, i);
    EXPECT_EQ(leader_gradient(Problem::P2, l, g2), (std::vector<double>{g2.d_theta, g2.d_rho}));
}
