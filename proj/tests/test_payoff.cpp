#include <gtest/gtest.h>

#include <cmath>

#include "bowley/checkpoint.hpp"
#include "bowley/dataio.hpp"
#include "bowley/game.hpp"
#include "bowley/payoff.hpp"
#include "test_util.hpp"

using namespace bowley;
using testutil::Rng;

TEST(Payoff, ZeroFinalLayerGivesZeroPayoff) {
    PayoffModel m(InputMode::IndexGrid, 6, ArchitectureConfig{}, 3);
    auto params = m.network().parameters();
    for (auto* t : {params[params.size() - 2].value, params.back().value}) std::fill(t->data.begin(), t->data.end(), 0.0);
    const auto s = synth_generate(1, 30, 0.3);
    for (double v : payoff_batch(m, s).values) EXPECT_EQ(v, 0.0);
}

TEST(Payoff, IdentityScalarNetReturnsLoss) {
    Network net({1}, {LayerSpec::dense(1, 1), LayerSpec::relu()}, 0);
    auto& d = std::get<DenseLayer>(net.layers()[0]);
    d.weight.data = {1.0};
    d.bias.data = {0.0};
    PayoffModel m(InputMode::ScalarLoss, 0, net);
    const auto s = ScenarioSet::from_losses({0.0, 1.5, 7.25, 3.0});
    EXPECT_EQ(payoff_batch(m, s).values, s.losses);
}

TEST(Payoff, WrappedNetworkMustBeANonnegativeScalar) {
    EXPECT_THROW(PayoffModel(InputMode::ScalarLoss, 0, Network({1}, {LayerSpec::dense(1, 1)}, 0)), ShapeError);
    EXPECT_THROW(PayoffModel(InputMode::ScalarLoss, 0, Network({1}, {LayerSpec::dense(1, 2), LayerSpec::relu()}, 0)),
                 ShapeError);
    EXPECT_THROW(PayoffModel(InputMode::IndexGrid, 6, Network({1}, {LayerSpec::dense(1, 1), LayerSpec::relu()}, 0)),
                 ShapeError);
    EXPECT_THROW(PayoffModel(InputMode::IndexGrid, 0, ArchitectureConfig{}, 0), ShapeError);
}

TEST(Payoff, OutputsAreNonnegative) {
    Rng r(1);
    ArchitectureConfig cnn;
    cnn.kind = Architecture::Cnn;
    cnn.conv = {4, 4};
    cnn.hidden = {8};
    for (int t = 0; t < 6; ++t) {
        const auto arch = t % 2 ? cnn : ArchitectureConfig{};
        PayoffModel m(InputMode::IndexGrid, 6, arch, t);
        // push the net into a regime with negative pre-activations
        auto params = m.network().parameters();
        for (auto& v : params.back().value->data) v = -1.0 + t * 0.3;
        const auto s = synth_generate(10 + t, 1000, 1.0);
        for (double v : payoff_batch(m, s).values) ASSERT_GE(v, 0.0);
    }
    PayoffModel scalar(InputMode::ScalarLoss, 0, ArchitectureConfig{}, 7);
    std::vector<double> losses(1000);
    for (auto& v : losses) v = r.uniform(0.0, 100.0);
    for (double v : payoff_batch(scalar, ScenarioSet::from_losses(losses)).values) ASSERT_GE(v, 0.0);
}

TEST(Payoff, DefaultCnnBuildsForSixAndSevenRows) {
    ArchitectureConfig cnn;
    cnn.kind = Architecture::Cnn;
    for (std::size_t rows : {6u, 7u}) {
        PayoffModel m(InputMode::IndexGrid, rows, cnn, 0);
        const auto s = synth_generate(3, 5, 0.0, rows);
        EXPECT_EQ(payoff_batch(m, s).size(), 5u);
    }
}

TEST(Payoff, NormalisationIsIdempotent) {
    const auto s = synth_generate(4, 50, 0.5);
    PayoffModel m(InputMode::IndexGrid, 6, ArchitectureConfig{}, 0);
    m.fit_normalization(s);
    const auto once = m.batch_input(s);
    // refit on the normalised data: statistics are ~(0, 1)
    auto again = Normalization::fit(once.data, s.size(), 6, kMonths);
    for (std::size_t c = 0; c < 6; ++c) {
        EXPECT_NEAR(again.mean[c], 0.0, 1e-9);
        EXPECT_NEAR(again.stddev[c], 1.0, 1e-9);
    }
    auto twice = once.data;
    again.apply(twice, s.size(), kMonths);
    for (std::size_t i = 0; i < twice.size(); ++i) ASSERT_NEAR(twice[i], once.data[i], 1e-9);
}

TEST(Payoff, ConstantChannelPassesThroughUnscaled) {
    // 4 samples of 2 channels; channel 0 is constant
    const std::vector<double> data{5, 1, 5, 2, 5, 3, 5, 4};
    const auto n = Normalization::fit(data, 4, 2, 1);
    EXPECT_EQ(n.stddev[0], 1.0);
    EXPECT_NEAR(n.mean[0], 5.0, 1e-15);
    EXPECT_TRUE(std::isfinite(n.stddev[1]));
}

TEST(PricingCurve, IdentityPreimage) {
    const std::size_t m = 100;
    MonotonePricingCurve c;
    c.raw_increments.assign(m, MonotonePricingCurve::transform_inverse(1.0 / m, m));
    const auto g = pricing_curve(c);
    for (int i = 0; i <= 1000; ++i) EXPECT_NEAR(g(i / 1000.0), i / 1000.0, 1e-12);
}

TEST(PricingCurve, SingleIncrementGivesKink) {
    const std::size_t m = 100;
    MonotonePricingCurve c;
    c.raw_increments.assign(m, MonotonePricingCurve::transform_inverse(0.0, m));
    c.raw_increments[0] = MonotonePricingCurve::transform_inverse(1.0, m);
    const auto g = pricing_curve(c);
    for (int i = 0; i <= 1000; ++i) {
        const double s = i / 1000.0;
        EXPECT_NEAR(g(s), std::min(double(m) * s, 1.0), 1e-12);
    }
}

TEST(PricingCurve, AnyRawVectorIsFeasible) {
    Rng r(2);
    for (int t = 0; t < 100; ++t) {
        MonotonePricingCurve c;
        c.raw_increments.resize(r.index(1, 120));
        for (auto& v : c.raw_increments) v = 20.0 * r.normal();
        const auto g = pricing_curve(c);
        EXPECT_EQ(g(0.0), 0.0);
        double prev = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double v = g(i / 1000.0);
            ASSERT_GE(v, prev);
            prev = v;
        }
    }
}

TEST(PricingCurve, FromDistortionRoundTrips) {
    const auto c = MonotonePricingCurve::from_distortion(DistortionFunction::power(2.0, 1.2), 50);
    const auto g = pricing_curve(c);
    for (int j = 0; j <= 50; ++j) EXPECT_NEAR(g(j / 50.0), 1.2 * std::sqrt(j / 50.0), 1e-12);
}

TEST(PricingCurve, ObjectiveGradientsMatchFiniteDifferences) {
    Rng r(3);
    const FarmerPreference farmer = FarmerPreference::cvar(0.8);
    const CostModel cost{0.02};
    for (int t = 0; t < 20; ++t) {
        const std::size_t q = r.index(2, 8), m = r.index(3, 40);
        const auto losses = testutil::random_sample(r, q, t % 2 == 0, 0.0, 10.0);
        auto payoff = losses;
        for (auto& v : payoff.values) v = std::max(v - r.uniform(0.0, 5.0), 0.0) + r.uniform(0.0, 0.01);
        LeaderParams leader;
        leader.curve.raw_increments.resize(m);
        for (auto& v : leader.curve.raw_increments) v = r.normal();

        const auto g = premium_gradients(make_principle(Problem::P3, leader), cost, payoff);
        const auto analytic = leader_gradient(Problem::P3, leader, g);
        for (std::size_t j = 0; j < m; ++j) {
            auto up_obj = [&](const std::vector<double>& raw) {
                LeaderParams l;
                l.curve.raw_increments = raw;
                return upper_objective(cost, make_principle(Problem::P3, l), payoff);
            };
            auto lp_obj = [&](const std::vector<double>& raw) {
                LeaderParams l;
                l.curve.raw_increments = raw;
                return lower_objective(farmer, make_principle(Problem::P3, l), losses, payoff);
            };
            const double fd_up = testutil::central_difference(up_obj, leader.curve.raw_increments, j, 1e-5);
            const double fd_lp = testutil::central_difference(lp_obj, leader.curve.raw_increments, j, 1e-5);
            // profit and lower objective differ from the premium by terms free of the curve
            EXPECT_LE(testutil::rel_err(analytic[j], fd_up, 1e-6), 1e-4);
            EXPECT_LE(testutil::rel_err(analytic[j], fd_lp, 1e-6), 1e-4);
        }
    }
}

TEST(PayoffCheckpoint, RoundTripPreservesOutputs) {
    const auto s = synth_generate(5, 20, 0.2);
    ArchitectureConfig cnn;
    cnn.kind = Architecture::Cnn;
    cnn.conv = {3, 2};
    cnn.hidden = {4};
    for (const auto& arch : {ArchitectureConfig{}, cnn}) {
        PayoffModel m(InputMode::IndexGrid, 6, arch, 11);
        m.fit_normalization(s);
        const auto j = payoff_model_to_json(m);
        auto back = payoff_model_from_json(nlohmann::json::parse(j.dump()));
        EXPECT_EQ(payoff_batch(back, s).values, payoff_batch(m, s).values);
        EXPECT_EQ(payoff_model_to_json(back).dump(), j.dump());
    }
}

TEST(PayoffCheckpoint, RejectsWrongFormatAndShapes) {
    PayoffModel m(InputMode::ScalarLoss, 0, ArchitectureConfig{}, 0);
    auto j = payoff_model_to_json(m);
    auto bad = j;
    bad["format"] = "other";
    EXPECT_ANY_THROW(payoff_model_from_json(bad));
    bad = j;
    bad["network"]["params"][0]["data"].erase(0);
    EXPECT_ANY_THROW(payoff_model_from_json(bad));
}

TEST(PayoffCheckpoint, OutputScaleAppliesToBatchesAndRoundTrips) {
    const auto s = ScenarioSet::from_losses({1, 4, 9});
    PayoffModel m(InputMode::ScalarLoss, 0, ArchitectureConfig{}, 2);
    m.fit_normalization(s);
    const auto base = payoff_batch(m, s).values;
    m.set_output_scale(2.5);
    const auto scaled = payoff_batch(m, s).values;
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(scaled[k], 2.5 * base[k]);
    auto back = payoff_model_from_json(payoff_model_to_json(m));
    EXPECT_EQ(back.output_scale(), 2.5);
    EXPECT_EQ(payoff_batch(back, s).values, scaled);
    EXPECT_THROW(m.set_output_scale(0.0), DomainError);
}
