#include "motionloc/image.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace motionloc {

namespace {

void check_dims(int height, int width, int channels) {
    if (height < 8 || width < 8)
        throw std::invalid_argument("image must be at least 8x8 pixels, got " + std::to_string(height) + "x" +
                                    std::to_string(width));
    if (channels < 1) throw std::invalid_argument("image needs at least one channel");
}

}  // namespace

ImageTensor::ImageTensor(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
    check_dims(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0f);
}

ImageTensor::ImageTensor(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels)
        throw std::invalid_argument("image data size does not match its shape");
}

bool ImageTensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace motionloc
