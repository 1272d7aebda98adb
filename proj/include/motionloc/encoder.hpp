#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "motionloc/image.hpp"
#include "motionloc/layers.hpp"

namespace motionloc {

/// Architecture of the spatial encoder. The defaults are the reference
/// network: 8 residual blocks, 32 channels, 3x3 kernels on 120x160 color frames.
struct EncoderConfig {
    int height = 120;
    int width = 160;
    int in_channels = 3;
    int blocks = 8;
    int channels = 32;
    int kernel = 3;
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-3;

    Shape shape() const { return {height, width}; }
    void validate() const;
    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// One named parameter array.
struct ParamArray {
    std::string name;
    std::vector<int> dims;
    std::vector<float> values;
    bool trainable = true;

    friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

/// All encoder parameters plus the architecture that produced them.
///
/// Arrays are kept in a fixed order (stem, blocks, head); the layout is
/// identical for every instance built from the same config, so gradient
/// and optimizer buffers can mirror it index by index.
class EncoderParams {
public:
    EncoderParams() = default;
    explicit EncoderParams(const EncoderConfig& config);

    const EncoderConfig& config() const { return config_; }
    std::vector<ParamArray>& arrays() { return arrays_; }
    const std::vector<ParamArray>& arrays() const { return arrays_; }

    ParamArray& get(std::string_view name);
    const ParamArray& get(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    /// A params object with the same layout and every value set to zero.
    EncoderParams zeros_like() const;

    /// Checks that array names, shapes and statistics are consistent with config().
    void validate() const;

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

private:
    EncoderConfig config_;
    std::vector<ParamArray> arrays_;
};

enum class Mode { train, infer };

/// Pre-softmax single-channel output, same spatial shape as the input image.
struct ActivationMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    ActivationMap() = default;
    ActivationMap(int h, int w, double fill = 0.0) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
    ActivationMap(int h, int w, std::vector<double> v);

    double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
    double max() const;

    friend bool operator==(const ActivationMap&, const ActivationMap&) = default;
};

/// Spatial softmax output; entries are non-negative and sum to one.
struct ProbabilityMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Normalized image coordinate in [-1, 1]^2 (row axis first).
struct Coord {
    double row = 0.0;
    double col = 0.0;

    friend bool operator==(const Coord&, const Coord&) = default;
};

struct Location {
    Coord z;
    double confidence = 0.0;  ///< maximum pre-softmax activation

    friend bool operator==(const Location&, const Location&) = default;
};

/// Normalized coordinate of the center of pixel `index` along an axis of `extent` pixels.
inline double pixel_center(int index, int extent) { return (2.0 * index + 1.0) / extent - 1.0; }

/// Maps a normalized coordinate back to continuous pixel units (pixel i has center i).
inline double to_pixel(double normalized, int extent) { return (normalized + 1.0) * extent / 2.0 - 0.5; }

/// Maps a continuous pixel position to the normalized coordinate.
inline double to_normalized(double pixel, int extent) { return (2.0 * pixel + 1.0) / extent - 1.0; }

/// Deterministic He-normal initialization; normalization layers start as identity
/// (scale 1, shift 0, running mean 0, running variance 1) and all biases at 0.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

/// Activations kept from a train-mode pass for backpropagation.
struct ForwardTrace {
    struct Block {
        layers::Tensor<float> conv1;
        layers::BatchStats<float> stats1;
        layers::Tensor<float> act1;
        layers::Tensor<float> conv2;
        layers::BatchStats<float> stats2;
        layers::Tensor<float> out;
    };
    layers::Tensor<float> input;
    layers::Tensor<float> stem;
    std::vector<Block> blocks;
};

/// Inference-mode forward pass. Read-only over params; safe to call concurrently.
ActivationMap infer(const EncoderParams& params, const ImageTensor& image);

/// Train-mode forward over a batch: normalization uses batch statistics over
/// all frames and the running statistics in `params` are updated. When
/// `trace` is non-null it receives what backward() needs.
std::vector<ActivationMap> forward_train(EncoderParams& params, std::span<const ImageTensor> batch,
                                         ForwardTrace* trace = nullptr);

/// Single-image forward in either mode.
ActivationMap forward(EncoderParams& params, const ImageTensor& image, Mode mode);

/// Gradient of a scalar objective with respect to all trainable arrays,
/// given its gradient with respect to each output map of the traced batch.
/// Non-trainable arrays in the result stay zero.
EncoderParams backward(const EncoderParams& params, const ForwardTrace& trace,
                       std::span<const ActivationMap> grad_maps);

/// Softmax over all pixel positions, computed with max subtraction.
ProbabilityMap spatial_softmax(const ActivationMap& activation);

/// Expected pixel-center coordinate under `prob`.
Coord soft_argmax(const ProbabilityMap& prob);

/// Gradient of a scalar objective with respect to the activation map, given
/// its gradient with respect to z = soft_argmax(spatial_softmax(O)).
ActivationMap soft_argmax_backward(const ProbabilityMap& prob, const Coord& z, const Coord& grad_z);

/// Location (soft-argmax mean and maximum activation) of an activation map.
Location locate(const ActivationMap& activation);

/// Infer-mode detection on a single image.
Location detect(const EncoderParams& params, const ImageTensor& image);

}  // namespace motionloc
