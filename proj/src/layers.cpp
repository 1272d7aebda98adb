#include "motionloc/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace motionloc::layers {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapArr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstMapArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

// Sum of f(0..n-1) over a fixed number of interleaved lanes. Unlike Eigen's
// reductions the association order does not depend on the buffer alignment,
// so results are reproducible across allocations.
template <typename T, typename F>
double lane_sum(std::size_t n, F f) {
    constexpr std::size_t kLanes = 16;
    T acc[kLanes] = {};
    const std::size_t body = n - n % kLanes;
    for (std::size_t i = 0; i < body; i += kLanes)
        for (std::size_t l = 0; l < kLanes; ++l) acc[l] += f(i + l);
    double total = 0.0;
    for (std::size_t i = body; i < n; ++i) total += f(i);
    for (T a : acc) total += a;
    return total;
}

// Unfolds one CHW frame into a (c*k*k, h*w) patch matrix with zero padding.
template <typename T>
void im2col(const T* frame, int channels, int h, int w, int k, T* col) {
    const int pad = k / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int ci = 0; ci < channels; ++ci) {
        const T* src = frame + ci * plane;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * plane;
                const int dx = kx - pad;
                const int x0 = std::max(0, -dx);
                const int x1 = std::min(w, w - dx);
                for (int y = 0; y < h; ++y) {
                    T* row = dst + static_cast<std::size_t>(y) * w;
                    const int sy = y + ky - pad;
                    if (sy < 0 || sy >= h || x1 <= x0) {
                        std::fill(row, row + w, T(0));
                        continue;
                    }
                    std::fill(row, row + x0, T(0));
                    std::memcpy(row + x0, src + static_cast<std::size_t>(sy) * w + x0 + dx,
                                sizeof(T) * static_cast<std::size_t>(x1 - x0));
                    std::fill(row + x1, row + w, T(0));
                }
            }
        }
    }
}

template <typename T>
std::vector<T>& scratch(std::size_t n) {
    thread_local std::vector<T> buffer;
    if (buffer.size() < n) buffer.resize(n);
    return buffer;
}

template <typename T>
void check_weights(const Tensor<T>& in, const ConvWeights<T>& weights) {
    if (in.c != weights.in_channels) throw std::invalid_argument("conv2d: input channel mismatch");
    if (weights.kernel % 2 != 1) throw std::invalid_argument("conv2d: kernel size must be odd");
    const std::size_t expected =
        static_cast<std::size_t>(weights.out_channels) * weights.in_channels * weights.kernel * weights.kernel;
    if (weights.weight.size() != expected) throw std::invalid_argument("conv2d: weight size mismatch");
    if (!weights.bias.empty() && weights.bias.size() != static_cast<std::size_t>(weights.out_channels))
        throw std::invalid_argument("conv2d: bias size mismatch");
}

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& in, const ConvWeights<T>& weights, Tensor<T>& out) {
    check_weights(in, weights);
    const int k = weights.kernel;
    const int rows = in.c * k * k;
    const auto plane = static_cast<Eigen::Index>(in.plane());
    if (out.n != in.n || out.c != weights.out_channels || out.h != in.h || out.w != in.w)
        out = Tensor<T>(in.n, weights.out_channels, in.h, in.w);

    auto& col = scratch<T>(static_cast<std::size_t>(rows) * plane);
    ConstMapMat<T> wmat(weights.weight.data(), weights.out_channels, rows);
    for (int i = 0; i < in.n; ++i) {
        im2col(in.frame(i), in.c, in.h, in.w, k, col.data());
        ConstMapMat<T> cmat(col.data(), rows, plane);
        MapMat<T> omat(out.frame(i), weights.out_channels, plane);
        omat.noalias() = wmat * cmat;
        if (!weights.bias.empty()) {
            for (int co = 0; co < weights.out_channels; ++co) omat.row(co).array() += weights.bias[co];
        }
    }
}

template <typename T>
void conv2d_backward(const Tensor<T>& in, const ConvWeights<T>& weights, const Tensor<T>& grad_out,
                     ConvGrads<T> grads, Tensor<T>* grad_in) {
    check_weights(in, weights);
    if (grad_out.n != in.n || grad_out.c != weights.out_channels || grad_out.h != in.h || grad_out.w != in.w)
        throw std::invalid_argument("conv2d_backward: gradient shape mismatch");
    const int k = weights.kernel;
    const int rows = in.c * k * k;
    const auto plane = static_cast<Eigen::Index>(in.plane());
    if (grad_in && (grad_in->n != in.n || grad_in->c != in.c || grad_in->h != in.h || grad_in->w != in.w))
        *grad_in = Tensor<T>(in.n, in.c, in.h, in.w);

    auto& col = scratch<T>(static_cast<std::size_t>(std::max(rows, weights.out_channels * k * k)) * plane);
    MapMat<T> dw(grads.weight.data(), weights.out_channels, rows);

    // The input gradient of a zero-padded "same" correlation is the same
    // correlation of grad_out with the kernel flipped and in/out swapped.
    std::vector<T> flipped;
    const int kk = k * k;
    if (grad_in) {
        flipped.resize(weights.weight.size());
        for (int co = 0; co < weights.out_channels; ++co)
            for (int ci = 0; ci < in.c; ++ci)
                for (int t = 0; t < kk; ++t)
                    flipped[(static_cast<std::size_t>(ci) * weights.out_channels + co) * kk + (kk - 1 - t)] =
                        weights.weight[(static_cast<std::size_t>(co) * in.c + ci) * kk + t];
    }
    ConstMapMat<T> fmat(flipped.data(), in.c, weights.out_channels * kk);

    for (int i = 0; i < in.n; ++i) {
        ConstMapMat<T> gmat(grad_out.frame(i), weights.out_channels, plane);
        im2col(in.frame(i), in.c, in.h, in.w, k, col.data());
        ConstMapMat<T> cmat(col.data(), rows, plane);
        dw.noalias() += gmat * cmat.transpose();
        if (!grads.bias.empty()) {
            for (int co = 0; co < weights.out_channels; ++co) {
                const T* g = grad_out.channel(i, co);
                grads.bias[co] += static_cast<T>(lane_sum<T>(plane, [g](std::size_t q) { return g[q]; }));
            }
        }
        if (grad_in) {
            im2col(grad_out.frame(i), weights.out_channels, in.h, in.w, k, col.data());
            ConstMapMat<T> gcol(col.data(), weights.out_channels * kk, plane);
            MapMat<T> dmat(grad_in->frame(i), in.c, plane);
            dmat.noalias() = fmat * gcol;
        }
    }
}

template <typename T>
BatchStats<T> batchnorm_forward_train(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta,
                                      T epsilon, Tensor<T>& out) {
    if (gamma.size() != static_cast<std::size_t>(in.c) || beta.size() != gamma.size())
        throw std::invalid_argument("batchnorm: parameter size mismatch");
    if (out.n != in.n || out.c != in.c || out.h != in.h || out.w != in.w) out = Tensor<T>(in.n, in.c, in.h, in.w);
    BatchStats<T> stats{std::vector<T>(in.c), std::vector<T>(in.c), std::vector<T>(in.c)};
    const auto plane = static_cast<Eigen::Index>(in.plane());
    const double count = static_cast<double>(in.n) * static_cast<double>(plane);
    for (int ch = 0; ch < in.c; ++ch) {
        // Per-plane partial sums, accumulated across frames in double.
        double sum = 0.0;
        for (int i = 0; i < in.n; ++i) {
            const T* x = in.channel(i, ch);
            sum += lane_sum<T>(plane, [x](std::size_t q) { return x[q]; });
        }
        const double mean = sum / count;
        const T m = static_cast<T>(mean);
        double sq = 0.0;
        for (int i = 0; i < in.n; ++i) {
            const T* x = in.channel(i, ch);
            sq += lane_sum<T>(plane, [x, m](std::size_t q) { return (x[q] - m) * (x[q] - m); });
        }
        const double var = sq / count;
        const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(epsilon)));
        stats.mean[ch] = static_cast<T>(mean);
        stats.variance[ch] = static_cast<T>(var);
        stats.inv_std[ch] = inv_std;
        const T scale = gamma[ch] * inv_std;
        const T shift = beta[ch] - static_cast<T>(mean) * scale;
        for (int i = 0; i < in.n; ++i)
            MapArr<T>(out.channel(i, ch), plane) = ConstMapArr<T>(in.channel(i, ch), plane) * scale + shift;
    }
    return stats;
}

template <typename T>
void batchnorm_forward_infer(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta,
                             std::span<const T> running_mean, std::span<const T> running_var, T epsilon,
                             Tensor<T>& out) {
    if (gamma.size() != static_cast<std::size_t>(in.c))
        throw std::invalid_argument("batchnorm: parameter size mismatch");
    if (out.n != in.n || out.c != in.c || out.h != in.h || out.w != in.w) out = Tensor<T>(in.n, in.c, in.h, in.w);
    const std::size_t plane = in.plane();
    for (int ch = 0; ch < in.c; ++ch) {
        const T scale = gamma[ch] / std::sqrt(running_var[ch] + epsilon);
        const T shift = beta[ch] - running_mean[ch] * scale;
        for (int i = 0; i < in.n; ++i) {
            const T* p = in.channel(i, ch);
            T* o = out.channel(i, ch);
            for (std::size_t k = 0; k < plane; ++k) o[k] = p[k] * scale + shift;
        }
    }
}

template <typename T>
void batchnorm_backward(const Tensor<T>& in, const BatchStats<T>& stats, std::span<const T> gamma,
                        const Tensor<T>& grad_out, std::span<T> grad_gamma, std::span<T> grad_beta,
                        Tensor<T>& grad_in) {
    if (grad_in.n != in.n || grad_in.c != in.c || grad_in.h != in.h || grad_in.w != in.w)
        grad_in = Tensor<T>(in.n, in.c, in.h, in.w);
    const auto plane = static_cast<Eigen::Index>(in.plane());
    const double count = static_cast<double>(in.n) * static_cast<double>(plane);
    for (int ch = 0; ch < in.c; ++ch) {
        const T mean = stats.mean[ch];
        const T inv_std = stats.inv_std[ch];
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (int i = 0; i < in.n; ++i) {
            const T* x = in.channel(i, ch);
            const T* dy = grad_out.channel(i, ch);
            sum_dy += lane_sum<T>(plane, [dy](std::size_t q) { return dy[q]; });
            sum_dy_xhat += lane_sum<T>(plane, [x, dy, mean](std::size_t q) { return dy[q] * (x[q] - mean); }) * inv_std;
        }
        grad_gamma[ch] += static_cast<T>(sum_dy_xhat);
        grad_beta[ch] += static_cast<T>(sum_dy);
        const T scale = gamma[ch] * inv_std;
        const T mean_dy = static_cast<T>(sum_dy / count);
        const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
        for (int i = 0; i < in.n; ++i) {
            const ConstMapArr<T> x(in.channel(i, ch), plane);
            const ConstMapArr<T> dy(grad_out.channel(i, ch), plane);
            MapArr<T>(grad_in.channel(i, ch), plane) = scale * (dy - mean_dy - (x - mean) * (inv_std * mean_dy_xhat));
        }
    }
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
    auto a = MapArr<T>(t.data.data(), static_cast<Eigen::Index>(t.data.size()));
    a = a.max(T(0));
}

template <typename T>
void relu_backward_inplace(const Tensor<T>& activated, Tensor<T>& grad) {
    const auto n = static_cast<Eigen::Index>(activated.data.size());
    const ConstMapArr<T> act(activated.data.data(), n);
    MapArr<T> g(grad.data.data(), n);
    g = (act > T(0)).select(g, T(0));
}

#define MOTIONLOC_INSTANTIATE(T)                                                                                \
    template void conv2d_forward<T>(const Tensor<T>&, const ConvWeights<T>&, Tensor<T>&);                     \
    template void conv2d_backward<T>(const Tensor<T>&, const ConvWeights<T>&, const Tensor<T>&, ConvGrads<T>, \
                                     Tensor<T>*);                                                             \
    template BatchStats<T> batchnorm_forward_train<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, \
                                                      T, Tensor<T>&);                                         \
    template void batchnorm_forward_infer<T>(const Tensor<T>&, std::span<const T>, std::span<const T>,        \
                                             std::span<const T>, std::span<const T>, T, Tensor<T>&);          \
    template void batchnorm_backward<T>(const Tensor<T>&, const BatchStats<T>&, std::span<const T>,           \
                                        const Tensor<T>&, std::span<T>, std::span<T>, Tensor<T>&);            \
    template void relu_inplace<T>(Tensor<T>&);                                                                \
    template void relu_backward_inplace<T>(const Tensor<T>&, Tensor<T>&);

MOTIONLOC_INSTANTIATE(float)
MOTIONLOC_INSTANTIATE(double)

#undef MOTIONLOC_INSTANTIATE

}  // namespace motionloc::layers
