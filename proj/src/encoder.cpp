#include "motionloc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace motionloc {

namespace {

using layers::Tensor;

// Per-block array order inside EncoderParams.
enum BlockSlot : std::size_t {
    kConv1 = 0,
    kGamma1,
    kBeta1,
    kMean1,
    kVar1,
    kConv2,
    kGamma2,
    kBeta2,
    kMean2,
    kVar2,
    kSlotsPerBlock
};

constexpr std::size_t kStemWeight = 0;
constexpr std::size_t kStemBias = 1;
constexpr std::size_t kFirstBlock = 2;

std::size_t block_base(int block) { return kFirstBlock + static_cast<std::size_t>(block) * kSlotsPerBlock; }
std::size_t head_weight(const EncoderConfig& c) { return block_base(c.blocks); }
std::size_t head_bias(const EncoderConfig& c) { return block_base(c.blocks) + 1; }

std::string shape_string(int h, int w, int c) {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

layers::ConvWeights<float> conv_view(const EncoderParams& p, std::size_t weight, std::size_t bias, int out_ch,
                                     int in_ch) {
    const auto& arrays = p.arrays();
    layers::ConvWeights<float> v;
    v.out_channels = out_ch;
    v.in_channels = in_ch;
    v.kernel = p.config().kernel;
    v.weight = arrays[weight].values;
    if (bias != static_cast<std::size_t>(-1)) v.bias = arrays[bias].values;
    return v;
}

layers::ConvGrads<float> grad_view(EncoderParams& g, std::size_t weight, std::size_t bias) {
    auto& arrays = g.arrays();
    layers::ConvGrads<float> v;
    v.weight = arrays[weight].values;
    if (bias != static_cast<std::size_t>(-1)) v.bias = arrays[bias].values;
    return v;
}

constexpr std::size_t kNoBias = static_cast<std::size_t>(-1);

Tensor<float> to_tensor(const EncoderConfig& config, std::span<const ImageTensor> batch) {
    Tensor<float> t(static_cast<int>(batch.size()), config.in_channels, config.height, config.width);
    const std::size_t plane = t.plane();
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const ImageTensor& img = batch[i];
        if (img.height() != config.height || img.width() != config.width || img.channels() != config.in_channels)
            throw std::invalid_argument("encoder expects " +
                                        shape_string(config.height, config.width, config.in_channels) +
                                        " images, got " + shape_string(img.height(), img.width(), img.channels()));
        auto src = img.data();
        const int c = config.in_channels;
        for (int ch = 0; ch < c; ++ch) {
            float* dst = t.channel(static_cast<int>(i), ch);
            for (std::size_t k = 0; k < plane; ++k) dst[k] = src[k * c + ch];
        }
    }
    return t;
}

std::vector<ActivationMap> to_maps(const Tensor<float>& out) {
    std::vector<ActivationMap> maps;
    maps.reserve(out.n);
    const std::size_t plane = out.plane();
    for (int i = 0; i < out.n; ++i) {
        const float* p = out.frame(i);
        maps.emplace_back(out.h, out.w, std::vector<double>(p, p + plane));
    }
    return maps;
}

void update_running(std::vector<float>& running, std::span<const float> batch, double momentum, double correction) {
    for (std::size_t k = 0; k < running.size(); ++k)
        running[k] = static_cast<float>(momentum * running[k] + (1.0 - momentum) * batch[k] * correction);
}

}  // namespace

void EncoderConfig::validate() const {
    if (height < 8 || width < 8) throw std::invalid_argument("encoder input must be at least 8x8");
    if (in_channels < 1) throw std::invalid_argument("encoder needs at least one input channel");
    if (blocks < 0) throw std::invalid_argument("negative residual block count");
    if (channels < 1) throw std::invalid_argument("encoder needs at least one feature channel");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd and positive");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw std::invalid_argument("bn_momentum must be in [0, 1)");
    if (!(bn_epsilon > 0.0)) throw std::invalid_argument("bn_epsilon must be positive");
}

EncoderParams::EncoderParams(const EncoderConfig& config) : config_(config) {
    config.validate();
    const int k = config.kernel;
    const int c = config.channels;
    auto add = [&](std::string name, std::vector<int> dims, float fill, bool trainable) {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        arrays_.push_back({std::move(name), std::move(dims), std::vector<float>(n, fill), trainable});
    };
    add("stem.weight", {c, config.in_channels, k, k}, 0.0f, true);
    add("stem.bias", {c}, 0.0f, true);
    for (int b = 0; b < config.blocks; ++b) {
        const std::string prefix = "block" + std::to_string(b) + ".";
        for (int layer = 1; layer <= 2; ++layer) {
            const std::string conv = prefix + "conv" + std::to_string(layer) + ".weight";
            const std::string bn = prefix + "bn" + std::to_string(layer) + ".";
            add(conv, {c, c, k, k}, 0.0f, true);
            add(bn + "gamma", {c}, 1.0f, true);
            add(bn + "beta", {c}, 0.0f, true);
            add(bn + "running_mean", {c}, 0.0f, false);
            add(bn + "running_var", {c}, 1.0f, false);
        }
    }
    add("head.weight", {1, c, k, k}, 0.0f, true);
    add("head.bias", {1}, 0.0f, true);
}

ParamArray& EncoderParams::get(std::string_view name) { return arrays_[index_of(name)]; }

const ParamArray& EncoderParams::get(std::string_view name) const { return arrays_[index_of(name)]; }

std::size_t EncoderParams::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < arrays_.size(); ++i)
        if (arrays_[i].name == name) return i;
    throw std::out_of_range("no parameter array named '" + std::string(name) + "'");
}

EncoderParams EncoderParams::zeros_like() const {
    EncoderParams z = *this;
    for (auto& a : z.arrays_) std::fill(a.values.begin(), a.values.end(), 0.0f);
    return z;
}

void EncoderParams::validate() const {
    const EncoderParams reference(config_);
    if (arrays_.size() != reference.arrays_.size())
        throw std::invalid_argument("parameter array count does not match the encoder config");
    for (std::size_t i = 0; i < arrays_.size(); ++i) {
        const auto& a = arrays_[i];
        const auto& r = reference.arrays_[i];
        if (a.name != r.name) throw std::invalid_argument("unexpected parameter array '" + a.name + "'");
        if (a.dims != r.dims || a.values.size() != r.values.size())
            throw std::invalid_argument("parameter array '" + a.name + "' has the wrong shape");
        for (float v : a.values)
            if (!std::isfinite(v)) throw std::invalid_argument("parameter array '" + a.name + "' is not finite");
        if (a.name.ends_with("running_var")) {
            for (float v : a.values)
                if (v < 0.0f) throw std::invalid_argument("negative running variance in '" + a.name + "'");
        }
    }
}

ActivationMap::ActivationMap(int h, int w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {
    if (values.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("activation map data size does not match its shape");
}

double ActivationMap::max() const {
    if (values.empty()) throw std::invalid_argument("empty activation map");
    return *std::max_element(values.begin(), values.end());
}

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
    EncoderParams params(config);
    std::mt19937_64 rng(seed);
    for (auto& a : params.arrays()) {
        if (!a.name.ends_with(".weight")) continue;
        const int fan_in = a.dims[1] * a.dims[2] * a.dims[3];
        std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
        for (auto& v : a.values) v = dist(rng);
    }
    return params;
}

namespace {

// Shared forward body. In train mode batch statistics are used and recorded.
Tensor<float> run_forward(const EncoderParams& params, Tensor<float> input, Mode mode, ForwardTrace* trace,
                          std::vector<layers::BatchStats<float>>* stats_out) {
    const EncoderConfig& cfg = params.config();
    const auto& arrays = params.arrays();
    const auto eps = static_cast<float>(cfg.bn_epsilon);
    const int c = cfg.channels;

    Tensor<float> x;
    layers::conv2d_forward(input, conv_view(params, kStemWeight, kStemBias, c, cfg.in_channels), x);
    if (trace) {
        trace->input = std::move(input);
        trace->stem = x;
        trace->blocks.clear();
        trace->blocks.resize(cfg.blocks);
    }

    Tensor<float> u1, a1, u2, s;
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::size_t base = block_base(b);
        auto bn = [&](const Tensor<float>& in, std::size_t slot, Tensor<float>& out) {
            std::span<const float> gamma = arrays[base + slot].values;
            std::span<const float> beta = arrays[base + slot + 1].values;
            if (mode == Mode::train) {
                auto st = layers::batchnorm_forward_train(in, gamma, beta, eps, out);
                stats_out->push_back(st);
                return st;
            }
            layers::batchnorm_forward_infer<float>(in, gamma, beta, arrays[base + slot + 2].values,
                                                   arrays[base + slot + 3].values, eps, out);
            return layers::BatchStats<float>{};
        };

        layers::conv2d_forward(x, conv_view(params, base + kConv1, kNoBias, c, c), u1);
        auto st1 = bn(u1, kGamma1, a1);
        layers::relu_inplace(a1);
        layers::conv2d_forward(a1, conv_view(params, base + kConv2, kNoBias, c, c), u2);
        auto st2 = bn(u2, kGamma2, s);
        for (std::size_t k = 0; k < s.data.size(); ++k) s.data[k] += x.data[k];
        layers::relu_inplace(s);
        if (trace) {
            auto& blk = trace->blocks[b];
            blk.conv1 = u1;
            blk.stats1 = std::move(st1);
            blk.act1 = a1;
            blk.conv2 = u2;
            blk.stats2 = std::move(st2);
            blk.out = s;
        }
        std::swap(x, s);
    }

    Tensor<float> out;
    layers::conv2d_forward(x, conv_view(params, head_weight(cfg), head_bias(cfg), 1, c), out);
    return out;
}

}  // namespace

ActivationMap infer(const EncoderParams& params, const ImageTensor& image) {
    auto out = run_forward(params, to_tensor(params.config(), std::span(&image, 1)), Mode::infer, nullptr, nullptr);
    return std::move(to_maps(out).front());
}

std::vector<ActivationMap> forward_train(EncoderParams& params, std::span<const ImageTensor> batch,
                                         ForwardTrace* trace) {
    if (batch.empty()) throw std::invalid_argument("forward_train: empty batch");
    const EncoderConfig& cfg = params.config();
    std::vector<layers::BatchStats<float>> stats;
    auto out = run_forward(params, to_tensor(cfg, batch), Mode::train, trace, &stats);

    const double count = static_cast<double>(batch.size()) * cfg.height * cfg.width;
    const double correction = count > 1.0 ? count / (count - 1.0) : 1.0;
    auto& arrays = params.arrays();
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::size_t base = block_base(b);
        const auto& st1 = stats[2 * b];
        const auto& st2 = stats[2 * b + 1];
        update_running(arrays[base + kMean1].values, st1.mean, cfg.bn_momentum, 1.0);
        update_running(arrays[base + kVar1].values, st1.variance, cfg.bn_momentum, correction);
        update_running(arrays[base + kMean2].values, st2.mean, cfg.bn_momentum, 1.0);
        update_running(arrays[base + kVar2].values, st2.variance, cfg.bn_momentum, correction);
    }
    return to_maps(out);
}

ActivationMap forward(EncoderParams& params, const ImageTensor& image, Mode mode) {
    if (mode == Mode::infer) return infer(params, image);
    return std::move(forward_train(params, std::span(&image, 1)).front());
}

EncoderParams backward(const EncoderParams& params, const ForwardTrace& trace,
                       std::span<const ActivationMap> grad_maps) {
    const EncoderConfig& cfg = params.config();
    const auto& arrays = params.arrays();
    const int c = cfg.channels;
    if (grad_maps.size() != static_cast<std::size_t>(trace.input.n))
        throw std::invalid_argument("backward: expected one gradient map per traced frame");

    Tensor<float> grad(trace.input.n, 1, cfg.height, cfg.width);
    const std::size_t plane = grad.plane();
    for (std::size_t i = 0; i < grad_maps.size(); ++i) {
        const auto& g = grad_maps[i];
        if (g.height != cfg.height || g.width != cfg.width)
            throw std::invalid_argument("backward: gradient map shape mismatch");
        float* dst = grad.frame(static_cast<int>(i));
        for (std::size_t k = 0; k < plane; ++k) dst[k] = static_cast<float>(g.values[k]);
    }

    EncoderParams grads = params.zeros_like();
    const Tensor<float>& last = cfg.blocks > 0 ? trace.blocks.back().out : trace.stem;
    Tensor<float> dx;
    layers::conv2d_backward(last, conv_view(params, head_weight(cfg), head_bias(cfg), 1, c), grad,
                            grad_view(grads, head_weight(cfg), head_bias(cfg)), &dx);

    Tensor<float> du2, da1, du1, dblock_in;
    for (int b = cfg.blocks - 1; b >= 0; --b) {
        const std::size_t base = block_base(b);
        const auto& blk = trace.blocks[b];
        const Tensor<float>& block_in = b > 0 ? trace.blocks[b - 1].out : trace.stem;
        auto& g = grads.arrays();

        layers::relu_backward_inplace(blk.out, dx);
        layers::batchnorm_backward<float>(blk.conv2, blk.stats2, arrays[base + kGamma2].values, dx,
                                          g[base + kGamma2].values, g[base + kBeta2].values, du2);
        layers::conv2d_backward(blk.act1, conv_view(params, base + kConv2, kNoBias, c, c), du2,
                                grad_view(grads, base + kConv2, kNoBias), &da1);
        layers::relu_backward_inplace(blk.act1, da1);
        layers::batchnorm_backward<float>(blk.conv1, blk.stats1, arrays[base + kGamma1].values, da1,
                                          g[base + kGamma1].values, g[base + kBeta1].values, du1);
        layers::conv2d_backward(block_in, conv_view(params, base + kConv1, kNoBias, c, c), du1,
                                grad_view(grads, base + kConv1, kNoBias), &dblock_in);
        // Skip connection.
        for (std::size_t k = 0; k < dx.data.size(); ++k) dx.data[k] += dblock_in.data[k];
    }

    layers::conv2d_backward<float>(trace.input, conv_view(params, kStemWeight, kStemBias, c, cfg.in_channels), dx,
                                   grad_view(grads, kStemWeight, kStemBias), nullptr);
    return grads;
}

ProbabilityMap spatial_softmax(const ActivationMap& activation) {
    ProbabilityMap p{activation.height, activation.width, std::vector<double>(activation.values.size())};
    const double peak = activation.max();
    double total = 0.0;
    for (std::size_t k = 0; k < p.values.size(); ++k) {
        p.values[k] = std::exp(activation.values[k] - peak);
        total += p.values[k];
    }
    for (auto& v : p.values) v /= total;
    return p;
}

Coord soft_argmax(const ProbabilityMap& prob) {
    Coord z;
    for (int i = 0; i < prob.height; ++i) {
        const double ci = pixel_center(i, prob.height);
        for (int j = 0; j < prob.width; ++j) {
            const double pij = prob.at(i, j);
            z.row += ci * pij;
            z.col += pixel_center(j, prob.width) * pij;
        }
    }
    return z;
}

ActivationMap soft_argmax_backward(const ProbabilityMap& prob, const Coord& z, const Coord& grad_z) {
    // dz/dO_k = P_k * (c_k - z) for each axis.
    ActivationMap g(prob.height, prob.width);
    for (int i = 0; i < prob.height; ++i) {
        const double dr = grad_z.row * (pixel_center(i, prob.height) - z.row);
        for (int j = 0; j < prob.width; ++j) {
            const double dc = grad_z.col * (pixel_center(j, prob.width) - z.col);
            g.at(i, j) = prob.at(i, j) * (dr + dc);
        }
    }
    return g;
}

Location locate(const ActivationMap& activation) {
    return {soft_argmax(spatial_softmax(activation)), activation.max()};
}

Location detect(const EncoderParams& params, const ImageTensor& image) { return locate(infer(params, image)); }

}  // namespace motionloc
