#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vnsemcom/net.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/tensor.hpp"

using namespace vnsemcom;

namespace {

DenseNet identity_net(std::size_t dim) {
    Layer l;
    l.weights = Tensor::zeros({dim, dim});
    for (std::size_t i = 0; i < dim; ++i) l.weights.at(i, i) = 1.0;
    l.bias = Tensor::zeros({dim});
    l.act = Activation::Identity;
    return DenseNet({l});
}

DenseNet random_net(std::span<const std::size_t> dims, std::span<const Activation> acts,
                    RngStream& rng) {
    return DenseNet::init(dims, acts, rng);
}

} // namespace

TEST(Tensor, ShapeDataInvariant) {
    EXPECT_THROW(Tensor::from({2, 3}, {1.0, 2.0}), DimensionError);
    const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(t.cols(), 3u);
    EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
}

TEST(Rng, SameSeedSameStreamIdenticalSequences) {
    RngStream a(42, "dataset");
    RngStream b(42, "dataset");
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
    RngStream c(42, "dataset");
    RngStream d(42, "init");
    bool all_equal = true;
    for (int i = 0; i < 64; ++i) {
        if (c.next_u64() != d.next_u64()) all_equal = false;
    }
    EXPECT_FALSE(all_equal);
}

TEST(Rng, Uniform01MeanNearHalf) {
    RngStream rng(7, "stat");
    const Tensor draws = rng_draw(rng, Dist::Uniform01, 100000);
    const double m = mean(draws.data);
    EXPECT_GT(m, 0.49);
    EXPECT_LT(m, 0.51);
    for (double v : draws.data) {
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
}

TEST(Rng, StandardNormalVarianceNearOne) {
    RngStream rng(7, "stat-normal");
    const Tensor draws = rng_draw(rng, Dist::StandardNormal, 100000);
    const double var = variance(draws.data);
    EXPECT_GT(var, 0.98);
    EXPECT_LT(var, 1.02);
}

TEST(Forward, IdentityLayerPassesInputThrough) {
    const DenseNet net = identity_net(3);
    const Tensor out = forward(net, Tensor{1.0, 2.0, 3.0});
    EXPECT_EQ(out.data, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(Forward, ReluClampsNegativePreactivation) {
    Layer l;
    l.weights = Tensor::from({1, 1}, {2.0});
    l.bias = Tensor::from({1}, {1.0});
    l.act = Activation::Relu;
    const DenseNet net({l});
    const Tensor out = forward(net, Tensor{-3.0}); // 2*(-3)+1 = -5 -> 0
    EXPECT_DOUBLE_EQ(out[0], 0.0);
}

TEST(Forward, MatchesHandUnrolledTwoLayerArithmetic) {
    RngStream rng(3, "unroll");
    const std::size_t dims[] = {3, 4, 2};
    const Activation acts[] = {Activation::Tanh, Activation::Identity};
    const DenseNet net = random_net(dims, acts, rng);
    const Tensor x{0.3, -0.7, 1.1};

    // hand-unrolled: h = tanh(W0 x + b0), y = W1 h + b1
    const Layer& l0 = net.layers()[0];
    const Layer& l1 = net.layers()[1];
    double h[4];
    for (int o = 0; o < 4; ++o) {
        double acc = l0.bias[o];
        for (int i = 0; i < 3; ++i) acc += l0.weights.at(o, i) * x[i];
        h[o] = std::tanh(acc);
    }
    double y[2];
    for (int o = 0; o < 2; ++o) {
        double acc = l1.bias[o];
        for (int i = 0; i < 4; ++i) acc += l1.weights.at(o, i) * h[i];
        y[o] = acc;
    }

    const Tensor out = forward(net, x);
    EXPECT_NEAR(out[0], y[0], 1e-12);
    EXPECT_NEAR(out[1], y[1], 1e-12);
}

TEST(Forward, IsPure) {
    RngStream rng(5, "pure");
    const std::size_t dims[] = {4, 5, 4};
    const Activation acts[] = {Activation::Sigmoid, Activation::Identity};
    const DenseNet net = random_net(dims, acts, rng);
    const Tensor x{0.1, 0.2, 0.3, 0.4};
    EXPECT_EQ(forward(net, x).data, forward(net, x).data);
}

TEST(Forward, ShapeMismatchNamesBothShapes) {
    const DenseNet net = identity_net(3);
    try {
        forward(net, Tensor{1.0, 2.0});
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2]"), std::string::npos);
        EXPECT_NE(msg.find("[3]"), std::string::npos);
    }
}

TEST(Backward, ZeroWeightNetAtOptimumHasZeroLossAndGrads) {
    Layer l;
    l.weights = Tensor::zeros({2, 2});
    l.bias = Tensor::zeros({2});
    l.act = Activation::Identity;
    const DenseNet net({l});
    const BackwardResult r =
        backward(net, Tensor{0.5, -0.5}, LossKind::Mse, Tensor{0.0, 0.0});
    EXPECT_DOUBLE_EQ(r.loss, 0.0);
    for (double g : r.grads.data) EXPECT_DOUBLE_EQ(g, 0.0);
}

TEST(Backward, ScalarNetHandCalculus) {
    // y = w x with w=2, x=1, target 0, mse = (y-t)^2: loss 4, dL/dw = 2 y x = 4
    Layer l;
    l.weights = Tensor::from({1, 1}, {2.0});
    l.bias = Tensor::from({1}, {0.0});
    l.act = Activation::Identity;
    const DenseNet net({l});
    const BackwardResult r = backward(net, Tensor{1.0}, LossKind::Mse, Tensor{0.0});
    EXPECT_DOUBLE_EQ(r.loss, 4.0);
    EXPECT_DOUBLE_EQ(r.grads[0], 4.0); // dL/dw
    EXPECT_DOUBLE_EQ(r.grads[1], 4.0); // dL/db = 2 y
}

TEST(Backward, GradientCheckHundredRandomNets) {
    RngStream rng(2024, "gradcheck");
    const Activation pool[] = {Activation::Identity, Activation::Relu, Activation::Tanh,
                               Activation::Sigmoid};
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t in = 2 + rng.index(3);
        const std::size_t hid = 2 + rng.index(4);
        const std::size_t out = 1 + rng.index(3);
        const std::size_t dims[] = {in, hid, out};
        const Activation acts[] = {pool[rng.index(4)], pool[rng.index(4)]};
        const DenseNet net = DenseNet::init(dims, acts, rng);

        const std::size_t batch = 1 + rng.index(3);
        Tensor x = Tensor::zeros({batch, in});
        Tensor t = Tensor::zeros({batch, out});
        for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
        for (double& v : t.data) v = rng.uniform(0.0, 1.0);

        const BackwardResult analytic = backward(net, x, LossKind::Mse, t);
        const Tensor numeric =
            testutil::finite_difference_grads(net, x, LossKind::Mse, t);
        worst = std::max(worst, testutil::max_relative_error(analytic.grads, numeric));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Backward, GradientCheckCrossEntropySoftmax) {
    RngStream rng(99, "gradcheck-ce");
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t dims[] = {4, 6, 3};
        const Activation acts[] = {Activation::Relu, Activation::Softmax};
        const DenseNet net = DenseNet::init(dims, acts, rng);
        Tensor x = Tensor::zeros({2, 4});
        for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
        Tensor t = Tensor::zeros({2, 3});
        t.at(0, rng.index(3)) = 1.0;
        t.at(1, rng.index(3)) = 1.0;

        const BackwardResult analytic = backward(net, x, LossKind::CrossEntropy, t);
        const Tensor numeric =
            testutil::finite_difference_grads(net, x, LossKind::CrossEntropy, t);
        worst = std::max(worst, testutil::max_relative_error(analytic.grads, numeric));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(SgdStep, ZeroLearningRateLeavesNetUnchanged) {
    RngStream rng(11, "sgd");
    const std::size_t dims[] = {3, 3};
    const Activation acts[] = {Activation::Identity};
    const DenseNet net = DenseNet::init(dims, acts, rng);
    Tensor g = Tensor::zeros({net.param_count()});
    for (double& v : g.data) v = 1.0;
    const DenseNet stepped = sgd_step(net, g, 0.0);
    EXPECT_EQ(stepped.params().data, net.params().data);
}

TEST(SgdStep, SingleParameterArithmetic) {
    Layer l;
    l.weights = Tensor::from({1, 1}, {1.0});
    l.bias = Tensor::from({1}, {0.0});
    l.act = Activation::Identity;
    const DenseNet net({l});
    const DenseNet stepped = sgd_step(net, Tensor{0.5, 0.0}, 0.1);
    EXPECT_DOUBLE_EQ(stepped.params()[0], 0.95);
}

TEST(SgdStep, GradLengthMismatchRejected) {
    const DenseNet net = identity_net(2);
    EXPECT_THROW(sgd_step(net, Tensor{1.0}, 0.1), DimensionError);
}

TEST(Params, FlattenUnflattenRoundTripIsBitExact) {
    RngStream rng(13, "roundtrip");
    const std::size_t dims[] = {5, 7, 3};
    const Activation acts[] = {Activation::Tanh, Activation::Sigmoid};
    const DenseNet net = DenseNet::init(dims, acts, rng);
    DenseNet copy = net;
    copy.set_params(net.params());
    EXPECT_EQ(copy.params().data, net.params().data);
    EXPECT_EQ(net.param_count(), 5u * 7 + 7 + 7 * 3 + 3);
}

TEST(Activations, RangeInvariants) {
    RngStream rng(17, "acts");
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-30.0, 30.0);
        Tensor t{x};
        Tensor relu = t, sig = t, tanh_t = t;
        detail::apply_activation(Activation::Relu, relu);
        detail::apply_activation(Activation::Sigmoid, sig);
        detail::apply_activation(Activation::Tanh, tanh_t);
        ASSERT_GE(relu[0], 0.0);
        ASSERT_GT(sig[0], 0.0);
        ASSERT_LT(sig[0], 1.0);
        ASSERT_GT(tanh_t[0], -1.0);
        ASSERT_LT(tanh_t[0], 1.0);
    }
}

TEST(Determinism, SamePipelineSameSeedBitIdentical) {
    auto build = [] {
        RngStream rng(123, "determinism");
        const std::size_t dims[] = {4, 8, 4};
        const Activation acts[] = {Activation::Tanh, Activation::Sigmoid};
        DenseNet net = DenseNet::init(dims, acts, rng);
        Tensor x = rng_draw(rng, Dist::StandardNormal, 4);
        for (int step = 0; step < 5; ++step) {
            const BackwardResult r = backward(net, x, LossKind::Mse, Tensor{0, 0, 0, 0});
            net = sgd_step(net, r.grads, 0.1);
        }
        return forward(net, x);
    };
    EXPECT_EQ(build().data, build().data);
}
