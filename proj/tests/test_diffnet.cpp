#include <gtest/gtest.h>

#include <cmath>

#include "bowley/diffnet.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace bowley;
using testutil::Rng;

namespace {

void set_dense(Network& net, std::size_t layer, std::vector<double> w, std::vector<double> b) {
    auto& d = std::get<DenseLayer>(net.layers()[layer]);
    d.weight.data = std::move(w);
    d.bias.data = std::move(b);
}

}  // namespace

TEST(Diffnet, DenseForwardWorkedValues) {
    Network net({2}, {LayerSpec::dense(2, 1), LayerSpec::relu()}, 0);
    set_dense(net, 0, {1, 1}, {0});
    EXPECT_EQ(net.forward(Tensor({2}, {2, 3})).data, std::vector<double>{5});

    Network clamp({1}, {LayerSpec::dense(1, 1), LayerSpec::relu()}, 0);
    set_dense(clamp, 0, {1}, {-2});
    EXPECT_EQ(clamp.forward(Tensor({1}, {1})).data, std::vector<double>{0});
}

TEST(Diffnet, ConvForwardWorkedValue) {
    Network net({1, 2, 2}, {LayerSpec::conv2d(1, 1, 2, 2)}, 0);
    auto& c = std::get<Conv2dLayer>(net.layers()[0]);
    std::fill(c.weight.data.begin(), c.weight.data.end(), 1.0);
    const auto y = net.forward(Tensor({1, 2, 2}, {1, 1, 1, 1}));
    EXPECT_EQ(y.shape, (Shape{1, 1, 1}));
    EXPECT_EQ(y.data, std::vector<double>{4});
}

TEST(Diffnet, MaxPoolForwardAndBackward) {
    Network net({1, 2, 4}, {LayerSpec::maxpool(2, 2)}, 0);
    const auto y = net.forward(Tensor({1, 2, 4}, {1, 5, 2, 0, 3, 4, 7, 6}));
    EXPECT_EQ(y.data, (std::vector<double>{5, 7}));
    const auto dx = net.backward(Tensor({1, 1, 2}, {1, 2}));
    EXPECT_EQ(dx.data, (std::vector<double>{0, 1, 0, 0, 0, 0, 2, 0}));
}

TEST(Diffnet, DenseBackwardWorkedValues) {
    Network net({1}, {LayerSpec::dense(1, 1)}, 0);
    set_dense(net, 0, {3}, {0});
    net.forward(Tensor({1}, {2}));
    const auto dx = net.backward(Tensor({1}, {1}));
    const auto& d = std::get<DenseLayer>(net.layers()[0]);
    EXPECT_EQ(d.grad_weight.data, std::vector<double>{2});
    EXPECT_EQ(d.grad_bias.data, std::vector<double>{1});
    EXPECT_EQ(dx.data, std::vector<double>{3});
}

TEST(Diffnet, SgdStepWorkedValues) {
    Network net({1}, {LayerSpec::dense(1, 1)}, 0);
    set_dense(net, 0, {1}, {0});
    auto& d = std::get<DenseLayer>(net.layers()[0]);
    d.grad_weight.data = {2};
    net.sgd_step(0.1);
    EXPECT_NEAR(d.weight.data[0], 0.8, 1e-15);

    Network other({3}, {LayerSpec::dense(3, 4), LayerSpec::relu(), LayerSpec::dense(4, 1)}, 5);
    const auto before = other.flat_parameters();
    other.sgd_step(0.5);
    EXPECT_EQ(other.flat_parameters(), before);
    other.forward(Tensor({3}, {1, 2, 3}));
    other.backward(Tensor({1}, {1}));
    other.sgd_step(0.0);
    EXPECT_EQ(other.flat_parameters(), before);
}

TEST(Diffnet, BackwardWithoutForwardIsStateError) {
    Network net({1}, {LayerSpec::dense(1, 1)}, 0);
    EXPECT_THROW(net.backward(Tensor({1}, {1})), StateError);
    net.forward(Tensor({1}, {1}));
    net.backward(Tensor({1}, {1}));
    EXPECT_THROW(net.backward(Tensor({1}, {1})), StateError);
}

TEST(Diffnet, ShapeMismatchNamesLayer) {
    try {
        Network net({4}, {LayerSpec::dense(4, 3), LayerSpec::relu(), LayerSpec::dense(2, 1)}, 0);
        FAIL() << "expected a shape error";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(Network({1, 3, 3}, {LayerSpec::conv2d(1, 2, 4, 4)}, 0), ShapeError);
    EXPECT_THROW(Network({6}, {LayerSpec::maxpool(2, 2)}, 0), ShapeError);
    Network net({3}, {LayerSpec::dense(3, 1)}, 0);
    EXPECT_THROW(net.forward(Tensor({2}, {1, 2})), ShapeError);
    EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
}

TEST(Diffnet, ShapeAlgebraChainsDeclaredLayers) {
    Network net({1, 6, 12},
                {LayerSpec::conv2d(1, 4, 3, 3), LayerSpec::relu(), LayerSpec::maxpool(2, 2), LayerSpec::flatten(),
                 LayerSpec::dense(4 * 2 * 5, 3), LayerSpec::relu(), LayerSpec::dense(3, 1)},
                0);
    EXPECT_EQ(net.output_shape(), Shape{1});
    const auto y = net.forward(Tensor({7, 1, 6, 12}));
    EXPECT_EQ(y.shape, (Shape{7, 1}));
}

TEST(Diffnet, DenseGradientsMatchFiniteDifferences) {
    Rng r(1);
    std::size_t checked = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t in = r.index(1, 6), h1 = r.index(1, 8), h2 = r.index(1, 6), out = r.index(1, 3);
        Network net({in},
                    {LayerSpec::dense(in, h1), LayerSpec::relu(), LayerSpec::dense(h1, h2), LayerSpec::relu(),
                     LayerSpec::dense(h2, out)},
                    1000 + t);
        for (auto& p : net.parameters())
            if (p.name.ends_with(".bias"))
                for (auto& v : p.value->data) v = r.uniform(-0.5, 0.5);
        const Tensor x = testutil::random_tensor(r, {r.index(1, 4), in});
        EXPECT_LE(testutil::gradient_check(net, x, r, &checked), 1e-4) << "case " << t;
    }
    EXPECT_GT(checked, 1000u);
}

TEST(Diffnet, ConvGradientsMatchFiniteDifferences) {
    Rng r(2);
    std::size_t checked = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t rows = r.index(3, 6), c1 = r.index(1, 3), c2 = r.index(1, 3);
        const std::size_t h = rows - 2, w = 12 - 2;
        std::vector<LayerSpec> specs{LayerSpec::conv2d(1, c1, 2, 2), LayerSpec::relu(), LayerSpec::conv2d(c1, c2, 2, 2),
                                     LayerSpec::relu()};
        std::size_t ph = h >= 2 ? 2 : 1;
        specs.push_back(LayerSpec::maxpool(ph, 2));
        specs.push_back(LayerSpec::flatten());
        specs.push_back(LayerSpec::dense(c2 * (h / ph) * (w / 2), 3));
        specs.push_back(LayerSpec::relu());
        specs.push_back(LayerSpec::dense(3, 1));
        Network net({1, rows, 12}, specs, 2000 + t);
        const Tensor x = testutil::random_tensor(r, {r.index(1, 2), 1, rows, 12});
        EXPECT_LE(testutil::gradient_check(net, x, r, &checked), 1e-4) << "case " << t;
    }
    EXPECT_GT(checked, 1000u);
}

TEST(Diffnet, GradientsAccumulateUntilStep) {
    Network net({2}, {LayerSpec::dense(2, 1)}, 3);
    const Tensor x({2}, {0.3, -0.7});
    net.forward(x);
    net.backward(Tensor({1}, {1}));
    const auto once = net.flat_gradients();
    net.forward(x);
    net.backward(Tensor({1}, {1}));
    const auto twice = net.flat_gradients();
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice[i], 2.0 * once[i], 1e-15);
}

TEST(Diffnet, FinalReluOutputsAreNonnegative) {
    Rng r(3);
    for (int t = 0; t < 20; ++t) {
        Network net({5}, {LayerSpec::dense(5, 7), LayerSpec::relu(), LayerSpec::dense(7, 1), LayerSpec::relu()}, t);
        const auto y = net.forward(testutil::random_tensor(r, {1000, 5}));
        for (double v : y.data) ASSERT_GE(v, 0.0);
    }
}

TEST(Diffnet, SeededInitialisationIsDeterministic) {
    auto make = [](std::uint64_t seed) {
        return Network({1, 6, 12}, {LayerSpec::conv2d(1, 3, 3, 3), LayerSpec::relu(), LayerSpec::flatten(),
                                    LayerSpec::dense(3 * 4 * 10, 1)},
                       seed);
    };
    auto a = make(42), b = make(42), c = make(43);
    EXPECT_EQ(a.flat_parameters(), b.flat_parameters());
    EXPECT_NE(a.flat_parameters(), c.flat_parameters());
    Rng r(4);
    const auto x = testutil::random_tensor(r, {3, 1, 6, 12});
    const auto ya = a.forward(x), yb = b.forward(x);
    EXPECT_EQ(ya.data, yb.data);
    EXPECT_EQ(a.backward(ya).data, b.backward(yb).data);
    EXPECT_EQ(a.flat_gradients(), b.flat_gradients());
}

TEST(Diffnet, InitialisationRangeFollowsFanInAndOut) {
    Network net({30}, {LayerSpec::dense(30, 20)}, 9);
    const double a = std::sqrt(6.0 / 50.0);
    const auto& d = std::get<DenseLayer>(net.layers()[0]);
    for (double w : d.weight.data) {
        EXPECT_LE(std::abs(w), a);
    }
    for (double b : d.bias.data) EXPECT_EQ(b, 0.0);
}
