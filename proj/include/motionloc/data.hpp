#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "motionloc/image.hpp"

namespace motionloc {

enum class VideoLabel { positive, negative, unlabeled };

/// An immutable, indexed sequence of equally shaped frames.
class FrameStore {
public:
    FrameStore(std::vector<ImageTensor> frames, double fps, std::string source, VideoLabel label);

    /// Joins several stores end to end (e.g. a negative video assembled from
    /// the recordings of all other objects). Shapes must agree.
    static FrameStore concatenate(std::span<const FrameStore> parts, VideoLabel label);

    std::size_t size() const { return frames_.size(); }
    const ImageTensor& operator[](std::size_t i) const { return frames_[i]; }
    const ImageTensor& at(std::size_t i) const { return frames_.at(i); }
    const std::vector<ImageTensor>& frames() const { return frames_; }

    Shape shape() const { return frames_.front().shape(); }
    int channels() const { return frames_.front().channels(); }
    double fps() const { return fps_; }
    const std::string& source() const { return source_; }
    VideoLabel label() const { return label_; }

    /// A new store holding the frames at `indices`, in that order.
    FrameStore select(std::span<const std::size_t> indices) const;

private:
    std::vector<ImageTensor> frames_;
    double fps_;
    std::string source_;
    VideoLabel label_;
};

/// Loads a video file or a directory of numerically ordered images, resizing
/// every frame bilinearly to `target` and normalizing it for the encoder.
FrameStore ingest_video(const std::filesystem::path& path, Shape target, VideoLabel label = VideoLabel::unlabeled);

/// Image files of a frame directory in numeric order of their names.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

/// Writes frames as 1-based, zero-padded PNG files (00001.png, ...).
void write_frames(const FrameStore& store, const std::filesystem::path& dir);

/// Converts a normalized frame back to an 8-bit RGB buffer (row-major, 3 bytes per pixel).
std::vector<unsigned char> to_rgb8(const ImageTensor& image);

/// Builds a normalized frame from an 8-bit RGB buffer.
ImageTensor from_rgb8(std::span<const unsigned char> rgb, int height, int width);

}  // namespace motionloc
