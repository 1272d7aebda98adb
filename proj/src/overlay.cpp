#include <cmath>
#include <cstdio>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "motionloc/evaluation.hpp"

namespace motionloc {

namespace {

const cv::Scalar kDotColor(0, 255, 0);  // BGR
const cv::Scalar kTextColor(255, 255, 255);

cv::Mat to_bgr(const ImageTensor& frame) {
    auto rgb = to_rgb8(frame);
    cv::Mat m(frame.height(), frame.width(), CV_8UC3, rgb.data());
    cv::Mat bgr;
    cv::cvtColor(m, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

}  // namespace

std::vector<std::filesystem::path> render_overlays(const std::vector<DetectionRecord>& records, const FrameStore& video,
                                                   const std::filesystem::path& out_dir, int crop_size) {
    if (crop_size < 0) throw EvaluationError("crop size must be non-negative");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw EvaluationError("cannot create '" + out_dir.string() + "': " + ec.message());

    std::vector<std::filesystem::path> written;
    for (const auto& r : records) {
        if (r.frame >= video.size()) throw EvaluationError("record refers to frame beyond the video");
        cv::Mat img = to_bgr(video[r.frame]);
        const int row = static_cast<int>(std::lround(r.row));
        const int col = static_cast<int>(std::lround(r.col));

        char label[32];
        std::snprintf(label, sizeof(label), "%.2f", r.confidence);
        cv::putText(img, label, {2, img.rows - 3}, cv::FONT_HERSHEY_PLAIN, 0.8, kTextColor, 1, cv::LINE_8);
        const int radius = std::max(1, std::min(img.rows, img.cols) / 40);
        cv::circle(img, {col, row}, radius, kDotColor, cv::FILLED, cv::LINE_8);

        if (crop_size > 0) {
            cv::Mat padded;
            cv::copyMakeBorder(img, padded, crop_size, crop_size, crop_size, crop_size, cv::BORDER_CONSTANT,
                               cv::Scalar::all(0));
            // Clamp so even detections far outside the frame give a valid window.
            const int top = std::clamp(row + crop_size - crop_size / 2, 0, padded.rows - crop_size);
            const int left = std::clamp(col + crop_size - crop_size / 2, 0, padded.cols - crop_size);
            img = padded(cv::Rect(left, top, crop_size, crop_size)).clone();
        }

        char name[32];
        std::snprintf(name, sizeof(name), "%05zu.png", r.frame + 1);
        const auto path = out_dir / name;
        bool ok = false;
        try {
            ok = cv::imwrite(path.string(), img);
        } catch (const cv::Exception&) {
            ok = false;
        }
        if (!ok) throw EvaluationError("cannot write '" + path.string() + "'");
        written.push_back(path);
    }
    return written;
}

}  // namespace motionloc
