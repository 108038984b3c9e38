#include "support.hpp"

#include <gtest/gtest.h>

using namespace rdc;
using rdc::test::random_matrix;
using rdc::test::random_network;

namespace {

LayerParams layer(Matrix w, RowVector b, Activation a) { return LayerParams{std::move(w), std::move(b), a}; }

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c = Matrix::Zero(a.rows(), b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

}  // namespace

TEST(Forward, IdentityLayerPassesInputThrough) {
    Network net{layer(Matrix::Identity(2, 2), RowVector::Zero(2), Activation::Identity)};
    Matrix x(1, 2);
    x << 1, 2;
    const auto acts = forward(net, x);
    ASSERT_EQ(acts.size(), 2u);
    EXPECT_EQ(acts[1], x);
}

TEST(Forward, ReluClampsNegative) {
    Matrix w(2, 1);
    w << 1, -1;
    Network net{layer(w, RowVector::Zero(1), Activation::ReLU)};
    Matrix x(1, 2);
    x << 3, 5;
    EXPECT_EQ(predict(net, x)(0, 0), 0.0);
}

TEST(Forward, MatchesNaiveMatmul) {
    Engine rng = stream(1, "test");
    const Network net = random_network({4, 7, 5, 3}, rng);
    const Matrix x = random_matrix(6, 4, rng);
    Matrix h = x;
    for (const auto& l : net) {
        h = naive_matmul(h, l.weights);
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            for (Eigen::Index j = 0; j < h.cols(); ++j) {
                h(i, j) += l.bias[j];
                if (l.activation == Activation::ReLU) h(i, j) = std::max(0.0, h(i, j));
            }
    }
    EXPECT_LT((predict(net, x) - h).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, ShapeErrorNamesLayer) {
    Engine rng = stream(2, "test");
    const Network net = random_network({3, 4, 2}, rng);
    try {
        forward(net, Matrix::Zero(2, 5));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
    }
}

TEST(Network, LastLayerLinearHiddenRelu) {
    Engine rng = stream(3, "test");
    const Network net = make_network({5, 8, 8, 2}, rng);
    EXPECT_EQ(net[0].activation, Activation::ReLU);
    EXPECT_EQ(net[1].activation, Activation::ReLU);
    EXPECT_EQ(net[2].activation, Activation::Identity);
    EXPECT_EQ(widths_of(net), (std::vector<std::size_t>{5, 8, 8, 2}));
    EXPECT_EQ(parameter_count(net), 5u * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2);
    EXPECT_THROW(make_network({3}, rng), ShapeError);
}

TEST(Backward, ZeroOutputGradGivesZeroGradients) {
    Engine rng = stream(4, "test");
    const Network net = random_network({3, 6, 2}, rng);
    const auto acts = forward(net, random_matrix(5, 3, rng));
    const Gradients g = backward(net, acts, Matrix::Zero(5, 2));
    for (const auto& l : g.layers) {
        EXPECT_EQ(l.weights.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
    }
    EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, LinearLayerMseClosedForm) {
    Engine rng = stream(5, "test");
    const Network net = random_network({3, 2}, rng);
    const Matrix x = random_matrix(4, 3, rng);
    const Matrix target = random_matrix(4, 2, rng);
    const auto acts = forward(net, x);
    const Gradients g = backward(net, acts, mse_grad(acts.back(), target));
    const Matrix expected = 2.0 * x.transpose() * (acts.back() - target) / 4.0;
    EXPECT_LT((g.layers[0].weights - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Backward, MatchesFiniteDifferences) {
    for (int inst = 0; inst < 20; ++inst) {
        Engine rng = stream(100 + inst, "test");
        Network net = random_network({4, 6, 5, 3}, rng);
        const Matrix x = random_matrix(5, 4, rng);
        const Matrix target = random_matrix(5, 3, rng);
        const auto acts = forward(net, x);
        const Gradients g = backward(net, acts, mse_grad(acts.back(), target));
        const double err = rdc::test::max_fd_error(net, g, [&] { return mse(predict(net, x), target); });
        EXPECT_LT(err, 1e-4) << "instance " << inst;
    }
}

TEST(Mse, Basics) {
    Engine rng = stream(6, "test");
    const Matrix a = random_matrix(3, 4, rng);
    EXPECT_EQ(mse(a, a), 0.0);
    EXPECT_DOUBLE_EQ(mse(a + Matrix::Ones(3, 4), a), 4.0);
    const Matrix b = random_matrix(3, 4, rng);
    double s = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    EXPECT_NEAR(mse(a, b), s / 3.0, 1e-12);
    EXPECT_THROW(mse(a, Matrix::Zero(2, 4)), ShapeError);
}

TEST(Adam, ZeroGradientFromFreshStateLeavesParams) {
    Engine rng = stream(7, "test");
    Network net = random_network({3, 4}, rng);
    const Network before = net;
    AdamState s = make_adam(net, 1e-3);
    adam_step(net, zero_gradients(net), s);
    EXPECT_EQ(net[0].weights, before[0].weights);
    EXPECT_EQ(net[0].bias, before[0].bias);
    EXPECT_EQ(s.step, 1);
}

TEST(Adam, ZeroGradientDecaysMoments) {
    Engine rng = stream(8, "test");
    Network net = random_network({3, 4}, rng);
    AdamState s = make_adam(net, 1e-3);
    Gradients g = zero_gradients(net);
    g.layers[0].weights.setConstant(0.5);
    adam_step(net, g, s);
    const Matrix m1 = s.moments[0].m_w, v1 = s.moments[0].v_w;
    adam_step(net, zero_gradients(net), s);
    EXPECT_LT((s.moments[0].m_w - 0.9 * m1).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((s.moments[0].v_w - 0.999 * v1).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Adam, ConstantGradientMovesAgainstSign) {
    Engine rng = stream(9, "test");
    Network net = random_network({2, 3}, rng);
    const Network before = net;
    AdamState s = make_adam(net, 1e-2);
    Gradients g = zero_gradients(net);
    g.layers[0].weights << 1, -1, 2, -2, 0.5, -0.5;
    for (int i = 0; i < 50; ++i) adam_step(net, g, s);
    const Matrix moved = net[0].weights - before[0].weights;
    for (Eigen::Index i = 0; i < moved.size(); ++i) {
        const double gi = g.layers[0].weights.data()[i];
        EXPECT_LT(moved.data()[i] * gi, 0.0);
    }
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Engine rng = stream(10, "test");
    Network net = random_network({3, 2}, rng);
    const Network before = net;
    AdamState s = make_adam(net, 0.001);
    Gradients g = zero_gradients(net);
    g.layers[0].weights << 0.3, -2.0, 1e-3, 5.0, -0.7, 1.0;
    adam_step(net, g, s);
    // m_hat = g, v_hat = g^2, so each step is lr * g / (|g| + eps).
    for (Eigen::Index i = 0; i < g.layers[0].weights.size(); ++i) {
        const double gi = g.layers[0].weights.data()[i];
        const double expected = -0.001 * gi / (std::abs(gi) + 1e-8);
        EXPECT_NEAR(net[0].weights.data()[i] - before[0].weights.data()[i], expected, 1e-15);
    }
}

TEST(Rng, NamedStreamsAreIndependentAndReproducible) {
    Engine a = stream(42, "init"), b = stream(42, "init"), c = stream(42, "shuffle");
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    Engine d = engine_from_state(engine_state(a));
    EXPECT_EQ(a(), d());
}

TEST(Parallel, CoversEveryIndexOnce) {
    std::vector<int> hits(5000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}
