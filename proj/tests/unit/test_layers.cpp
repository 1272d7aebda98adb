#include <gtest/gtest.h>

#include <random>

#include "motionloc/layers.hpp"
#include "oracles.hpp"

using namespace motionloc::layers;

namespace {

Tensor<double> random_tensor(int n, int c, int h, int w, std::mt19937_64& rng) {
    Tensor<double> t(n, c, h, w);
    t.data = oracle::random_vector(t.size(), rng);
    return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST(Conv2d, MatchesDirectCorrelation) {
    std::mt19937_64 rng(3);
    for (int k : {1, 3, 5}) {
        const int c = 3, o = 4, h = 7, w = 9;
        auto in = random_tensor(2, c, h, w, rng);
        auto weight = oracle::random_vector(static_cast<std::size_t>(o) * c * k * k, rng);
        auto bias = oracle::random_vector(o, rng);
        Tensor<double> out;
        conv2d_forward(in, ConvWeights<double>{o, c, k, weight, bias}, out);
        for (int i = 0; i < 2; ++i) {
            std::vector<double> frame(in.frame(i), in.frame(i) + c * h * w);
            auto expect = oracle::direct_conv(frame, c, h, w, weight, bias, o, k);
            for (std::size_t q = 0; q < expect.size(); ++q) EXPECT_NEAR(out.frame(i)[q], expect[q], 1e-12);
        }
    }
}

TEST(Conv2d, RejectsChannelMismatch) {
    std::mt19937_64 rng(1);
    auto in = random_tensor(1, 2, 8, 8, rng);
    std::vector<double> weight(3 * 3 * 9, 0.0);
    Tensor<double> out;
    EXPECT_THROW(conv2d_forward(in, ConvWeights<double>{1, 3, 3, weight, {}}, out), std::invalid_argument);
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    const int n = 2, c = 2, o = 3, h = 5, w = 6, k = 3;
    auto in = random_tensor(n, c, h, w, rng);
    auto weight = oracle::random_vector(static_cast<std::size_t>(o) * c * k * k, rng);
    auto bias = oracle::random_vector(o, rng);
    const auto probe = oracle::random_vector(static_cast<std::size_t>(n) * o * h * w, rng);

    auto objective = [&](const Tensor<double>& x, const std::vector<double>& wt, const std::vector<double>& b) {
        Tensor<double> out;
        conv2d_forward(x, ConvWeights<double>{o, c, k, wt, b}, out);
        return dot(out.data, probe);
    };

    Tensor<double> grad_out(n, o, h, w);
    grad_out.data = probe;
    std::vector<double> dw(weight.size(), 0.0), db(bias.size(), 0.0);
    Tensor<double> dx;
    conv2d_backward(in, ConvWeights<double>{o, c, k, weight, bias}, grad_out, ConvGrads<double>{dw, db}, &dx);

    const double step = 1e-5;
    std::vector<double> num_w, num_b, num_x;
    for (std::size_t i = 0; i < weight.size(); ++i)
        num_w.push_back(oracle::central_difference([&](const auto& v) { return objective(in, v, bias); }, weight, i, step));
    for (std::size_t i = 0; i < bias.size(); ++i)
        num_b.push_back(oracle::central_difference([&](const auto& v) { return objective(in, weight, v); }, bias, i, step));
    for (std::size_t i = 0; i < in.data.size(); ++i)
        num_x.push_back(oracle::central_difference(
            [&](const auto& v) {
                Tensor<double> x = in;
                x.data = v;
                return objective(x, weight, bias);
            },
            in.data, i, step));
    EXPECT_LT(oracle::max_relative_error(dw, num_w), 1e-7);
    EXPECT_LT(oracle::max_relative_error(db, num_b), 1e-7);
    EXPECT_LT(oracle::max_relative_error(dx.data, num_x), 1e-7);
}

TEST(Conv2d, BackwardAccumulatesIntoGradients) {
    std::mt19937_64 rng(5);
    auto in = random_tensor(1, 1, 8, 8, rng);
    std::vector<double> weight = oracle::random_vector(9, rng);
    Tensor<double> g(1, 1, 8, 8);
    g.data = oracle::random_vector(g.size(), rng);
    std::vector<double> once(9, 0.0), twice(9, 0.0);
    conv2d_backward(in, ConvWeights<double>{1, 1, 3, weight, {}}, g, ConvGrads<double>{once, {}}, static_cast<Tensor<double>*>(nullptr));
    conv2d_backward(in, ConvWeights<double>{1, 1, 3, weight, {}}, g, ConvGrads<double>{twice, {}}, static_cast<Tensor<double>*>(nullptr));
    conv2d_backward(in, ConvWeights<double>{1, 1, 3, weight, {}}, g, ConvGrads<double>{twice, {}}, static_cast<Tensor<double>*>(nullptr));
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(twice[i], 2.0 * once[i], 1e-12);
}

TEST(BatchNorm, TrainModeNormalizesEachChannel) {
    std::mt19937_64 rng(2);
    auto in = random_tensor(3, 2, 8, 8, rng);
    for (std::size_t i = 0; i < in.data.size(); ++i) in.data[i] = 4.0 * in.data[i] + 7.0;
    const std::vector<double> gamma{1.0, 2.0}, beta{0.0, -1.0};
    Tensor<double> out;
    const auto stats = batchnorm_forward_train<double>(in, gamma, beta, 1e-3, out);
    for (int ch = 0; ch < 2; ++ch) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < 3; ++i)
            for (std::size_t q = 0; q < in.plane(); ++q) {
                const double v = out.channel(i, ch)[q];
                sum += v;
                sq += v * v;
            }
        const double count = 3.0 * in.plane();
        const double mean = sum / count;
        EXPECT_NEAR(mean, beta[ch], 1e-9);
        // Variance shrinks slightly because of epsilon.
        const double expected_var = gamma[ch] * gamma[ch] * stats.variance[ch] / (stats.variance[ch] + 1e-3);
        EXPECT_NEAR(sq / count - mean * mean, expected_var, 1e-9);
    }
}

TEST(BatchNorm, InferUsesRunningStatistics) {
    Tensor<double> in(1, 1, 8, 8);
    for (std::size_t i = 0; i < in.data.size(); ++i) in.data[i] = static_cast<double>(i);
    const std::vector<double> gamma{2.0}, beta{0.5}, mean{3.0}, var{4.0};
    Tensor<double> out;
    batchnorm_forward_infer<double>(in, gamma, beta, mean, var, 0.0, out);
    for (std::size_t i = 0; i < in.data.size(); ++i) EXPECT_NEAR(out.data[i], 2.0 * (i - 3.0) / 2.0 + 0.5, 1e-12);
}

TEST(BatchNorm, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(13);
    const int n = 3, c = 2, h = 4, w = 5;
    auto in = random_tensor(n, c, h, w, rng);
    auto gamma = oracle::random_vector(c, rng);
    auto beta = oracle::random_vector(c, rng);
    const auto probe = oracle::random_vector(in.size(), rng);
    auto objective = [&](const Tensor<double>& x, const std::vector<double>& g, const std::vector<double>& b) {
        Tensor<double> out;
        batchnorm_forward_train<double>(x, g, b, 1e-3, out);
        return dot(out.data, probe);
    };
    Tensor<double> out;
    const auto stats = batchnorm_forward_train<double>(in, gamma, beta, 1e-3, out);
    Tensor<double> grad_out(n, c, h, w);
    grad_out.data = probe;
    std::vector<double> dg(c, 0.0), dbeta(c, 0.0);
    Tensor<double> dx;
    batchnorm_backward<double>(in, stats, gamma, grad_out, dg, dbeta, dx);

    const double step = 1e-5;
    std::vector<double> num_g, num_b, num_x;
    for (int i = 0; i < c; ++i) {
        num_g.push_back(oracle::central_difference([&](const auto& v) { return objective(in, v, beta); }, gamma, i, step));
        num_b.push_back(oracle::central_difference([&](const auto& v) { return objective(in, gamma, v); }, beta, i, step));
    }
    for (std::size_t i = 0; i < in.data.size(); ++i)
        num_x.push_back(oracle::central_difference(
            [&](const auto& v) {
                Tensor<double> x = in;
                x.data = v;
                return objective(x, gamma, beta);
            },
            in.data, i, step));
    EXPECT_LT(oracle::max_relative_error(dg, num_g), 1e-6);
    EXPECT_LT(oracle::max_relative_error(dbeta, num_b), 1e-6);
    EXPECT_LT(oracle::max_relative_error(dx.data, num_x, 1e-4), 1e-5);
}

TEST(Relu, ForwardAndMask) {
    Tensor<float> t(1, 1, 1, 4);
    t.data = {-1.0f, 0.0f, 2.0f, -0.5f};
    relu_inplace(t);
    EXPECT_EQ(t.data, (std::vector<float>{0.0f, 0.0f, 2.0f, 0.0f}));
    Tensor<float> g(1, 1, 1, 4);
    g.data = {1.0f, 1.0f, 1.0f, 1.0f};
    relu_backward_inplace(t, g);
    EXPECT_EQ(g.data, (std::vector<float>{0.0f, 0.0f, 1.0f, 0.0f}));
}
