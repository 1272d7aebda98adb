#include "motionloc/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace fs = std::filesystem;

namespace motionloc {

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    static const char* const kExtensions[] = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".pgm", ".webp"};
    return std::any_of(std::begin(kExtensions), std::end(kExtensions), [&](const char* e) { return ext == e; });
}

// Value of the last run of digits in a file stem, or -1 when there is none.
long long frame_number(const fs::path& p) {
    const std::string stem = p.stem().string();
    auto end = stem.find_last_of("0123456789");
    if (end == std::string::npos) return -1;
    auto begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    return std::stoll(stem.substr(begin, end - begin + 1));
}

ImageTensor from_bgr_mat(const cv::Mat& bgr, Shape target) {
    cv::Mat resized;
    if (bgr.rows != target.height || bgr.cols != target.width)
        cv::resize(bgr, resized, cv::Size(target.width, target.height), 0, 0, cv::INTER_LINEAR);
    else
        resized = bgr;
    cv::Mat rgb;
    cv::cvtColor(resized, rgb, cv::COLOR_BGR2RGB);
    if (!rgb.isContinuous()) rgb = rgb.clone();
    return from_rgb8(std::span<const unsigned char>(rgb.data, rgb.total() * 3), target.height, target.width);
}

cv::Mat to_bgr_mat(const ImageTensor& image) {
    auto rgb = to_rgb8(image);
    cv::Mat m(image.height(), image.width(), CV_8UC3, rgb.data());
    cv::Mat bgr;
    cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

}  // namespace

FrameStore::FrameStore(std::vector<ImageTensor> frames, double fps, std::string source, VideoLabel label)
    : frames_(std::move(frames)), fps_(fps), source_(std::move(source)), label_(label) {
    if (frames_.empty()) throw std::invalid_argument("frame store '" + source_ + "' has no frames");
    const Shape s = frames_.front().shape();
    const int c = frames_.front().channels();
    for (std::size_t i = 1; i < frames_.size(); ++i) {
        if (frames_[i].shape() != s || frames_[i].channels() != c)
            throw std::invalid_argument("frame " + std::to_string(i) + " of '" + source_ +
                                        "' differs in shape from frame 0");
    }
}

FrameStore FrameStore::concatenate(std::span<const FrameStore> parts, VideoLabel label) {
    if (parts.empty()) throw std::invalid_argument("cannot concatenate zero frame stores");
    std::vector<ImageTensor> frames;
    std::string source;
    for (const auto& p : parts) {
        frames.insert(frames.end(), p.frames().begin(), p.frames().end());
        if (!source.empty()) source += "+";
        source += p.source();
    }
    return FrameStore(std::move(frames), parts.front().fps(), std::move(source), label);
}

FrameStore FrameStore::select(std::span<const std::size_t> indices) const {
    std::vector<ImageTensor> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(frames_.at(i));
    return FrameStore(std::move(out), fps_, source_, label_);
}

std::vector<fs::path> list_frame_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        const auto na = frame_number(a);
        const auto nb = frame_number(b);
        if (na != nb) return na < nb;
        return a.filename() < b.filename();
    });
    return files;
}

FrameStore ingest_video(const fs::path& path, Shape target, VideoLabel label) {
    if (target.height < 8 || target.width < 8) throw std::invalid_argument("target shape must be at least 8x8");
    if (!fs::exists(path)) throw std::runtime_error("video input '" + path.string() + "' does not exist");

    std::vector<ImageTensor> frames;
    double fps = 0.0;
    if (fs::is_directory(path)) {
        const auto files = list_frame_files(path);
        if (files.empty()) throw std::runtime_error("directory '" + path.string() + "' contains no image files");
        frames.reserve(files.size());
        for (const auto& f : files) {
            cv::Mat bgr = cv::imread(f.string(), cv::IMREAD_COLOR);
            if (bgr.empty()) throw std::runtime_error("cannot decode image '" + f.string() + "'");
            frames.push_back(from_bgr_mat(bgr, target));
        }
    } else {
        cv::VideoCapture cap(path.string());
        if (!cap.isOpened()) throw std::runtime_error("cannot decode video file '" + path.string() + "'");
        fps = cap.get(cv::CAP_PROP_FPS);
        cv::Mat bgr;
        while (cap.read(bgr)) {
            if (bgr.empty()) break;
            if (bgr.channels() == 1) cv::cvtColor(bgr, bgr, cv::COLOR_GRAY2BGR);
            frames.push_back(from_bgr_mat(bgr, target));
        }
        if (frames.empty()) throw std::runtime_error("video file '" + path.string() + "' has no decodable frames");
    }
    return FrameStore(std::move(frames), fps, path.string(), label);
}

void write_frames(const FrameStore& store, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < store.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%05zu.png", i + 1);
        const fs::path out = dir / name;
        if (!cv::imwrite(out.string(), to_bgr_mat(store[i])))
            throw std::runtime_error("cannot write frame '" + out.string() + "'");
    }
}

std::vector<unsigned char> to_rgb8(const ImageTensor& image) {
    std::vector<unsigned char> out(static_cast<std::size_t>(image.height()) * image.width() * 3);
    const int c = image.channels();
    for (int r = 0; r < image.height(); ++r) {
        for (int col = 0; col < image.width(); ++col) {
            for (int ch = 0; ch < 3; ++ch) {
                const float v = image.at(r, col, c == 3 ? ch : 0);
                const float scaled = std::round((v + 0.5f) * 255.0f);
                out[(static_cast<std::size_t>(r) * image.width() + col) * 3 + ch] =
                    static_cast<unsigned char>(std::clamp(scaled, 0.0f, 255.0f));
            }
        }
    }
    return out;
}

ImageTensor from_rgb8(std::span<const unsigned char> rgb, int height, int width) {
    if (rgb.size() != static_cast<std::size_t>(height) * width * 3)
        throw std::invalid_argument("RGB buffer size does not match the frame shape");
    std::vector<float> values(rgb.size());
    for (std::size_t k = 0; k < rgb.size(); ++k) values[k] = normalize_intensity(rgb[k]);
    return ImageTensor(height, width, 3, std::move(values));
}

}  // namespace motionloc
