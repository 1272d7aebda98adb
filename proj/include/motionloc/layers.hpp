#pragma once

// Dense NCHW kernels used by the spatial encoder. Every kernel is stride 1
// with zero padding so spatial size is preserved. Instantiated for float
// (training/inference) and double (gradient checks).

#include <cstddef>
#include <span>
#include <vector>

namespace motionloc::layers {

template <typename T>
struct Tensor {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_), data(size(), T(0)) {}

    std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    T* frame(int i) { return data.data() + static_cast<std::size_t>(i) * c * plane(); }
    const T* frame(int i) const { return data.data() + static_cast<std::size_t>(i) * c * plane(); }
    T* channel(int i, int ch) { return frame(i) + ch * plane(); }
    const T* channel(int i, int ch) const { return frame(i) + ch * plane(); }
};

/// Convolution weights laid out as (out_channels, in_channels, k, k).
template <typename T>
struct ConvWeights {
    int out_channels = 0;
    int in_channels = 0;
    int kernel = 3;
    std::span<const T> weight;
    std::span<const T> bias;  // empty when the layer has no bias
};

template <typename T>
struct ConvGrads {
    std::span<T> weight;
    std::span<T> bias;  // empty when the layer has no bias
};

/// out = conv(in, weights). `out` is resized.
template <typename T>
void conv2d_forward(const Tensor<T>& in, const ConvWeights<T>& weights, Tensor<T>& out);

/// Accumulates weight/bias gradients into `grads` and writes the input
/// gradient into `grad_in` (resized) unless `grad_in` is null.
template <typename T>
void conv2d_backward(const Tensor<T>& in, const ConvWeights<T>& weights, const Tensor<T>& grad_out,
                     ConvGrads<T> grads, Tensor<T>* grad_in);

/// Per-channel batch statistics produced by a train-mode normalization.
template <typename T>
struct BatchStats {
    std::vector<T> mean;
    std::vector<T> variance;  // biased
    std::vector<T> inv_std;
};

/// Train mode: normalizes `in` with its own per-channel statistics over
/// (n, h, w) and returns them.
template <typename T>
BatchStats<T> batchnorm_forward_train(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta,
                                      T epsilon, Tensor<T>& out);

/// Inference mode: normalizes with fixed statistics.
template <typename T>
void batchnorm_forward_infer(const Tensor<T>& in, std::span<const T> gamma, std::span<const T> beta,
                             std::span<const T> running_mean, std::span<const T> running_var, T epsilon,
                             Tensor<T>& out);

/// Backward of the train-mode normalization. `in` is the pre-normalization
/// input that produced `stats`.
template <typename T>
void batchnorm_backward(const Tensor<T>& in, const BatchStats<T>& stats, std::span<const T> gamma,
                        const Tensor<T>& grad_out, std::span<T> grad_gamma, std::span<T> grad_beta,
                        Tensor<T>& grad_in);

template <typename T>
void relu_inplace(Tensor<T>& t);

/// grad[i] = 0 wherever activated[i] <= 0.
template <typename T>
void relu_backward_inplace(const Tensor<T>& activated, Tensor<T>& grad);

}  // namespace motionloc::layers
