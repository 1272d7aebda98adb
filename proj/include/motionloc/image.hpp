#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace motionloc {

/// Spatial size of a frame in pixels.
struct Shape {
    int height = 120;
    int width = 160;

    friend bool operator==(const Shape&, const Shape&) = default;
    std::size_t area() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
};

/// A single frame stored row-major as (height, width, channels).
///
/// Pixel values follow the encoder input convention: each channel scaled
/// to [0, 1] and shifted by -0.5.
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int height, int width, int channels);
    ImageTensor(int height, int width, int channels, std::vector<float> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    Shape shape() const { return {height_, width_}; }

    float& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
    float at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    bool all_finite() const;

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    std::size_t index(int row, int col, int ch) const {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Maps an 8-bit intensity to the normalized input range.
inline float normalize_intensity(unsigned char v) { return static_cast<float>(v) / 255.0f - 0.5f; }

}  // namespace motionloc
