#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "motionloc/annotations.hpp"
#include "motionloc/data.hpp"
#include "motionloc/encoder.hpp"
#include "motionloc/training.hpp"

namespace motionloc {

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DetectionRecord {
    std::size_t frame = 0;
    Coord z;            ///< normalized location
    double row = 0.0;   ///< pixel location, pixel i has center i
    double col = 0.0;
    double confidence = 0.0;

    friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

DetectionRecord make_record(std::size_t frame, const Location& loc, Shape shape);

/// Per-frame detection: record i depends only on frame i and the parameters.
/// Frames are split across `threads` workers (0 picks the hardware count).
std::vector<DetectionRecord> run_detection(const EncoderParams& params, const FrameStore& video, unsigned threads = 0);
std::vector<DetectionRecord> run_detection(const Checkpoint& ckpt, const FrameStore& video, unsigned threads = 0);

struct FrameError {
    int frame = 0;
    double pixel_error = 0.0;       ///< Euclidean distance in pixels
    double normalized_error = 0.0;  ///< squared distance over squared diagonal
};

struct MetricsReport {
    double normalized_error = 0.0;  ///< mean of squared pixel error / (h^2 + w^2)
    double pixel_rmse = 0.0;
    std::vector<FrameError> per_frame;
    std::optional<double> presence_accuracy;
    int num_evaluated = 0;
    int height = 0;
    int width = 0;
};

/// Location error of `records` against the visible labels in `truth`
/// (rescaled to `shape`). Invisible labels are excluded from the location
/// metric. When `presence_threshold` is given and labels of both kinds are
/// covered, presence_accuracy classifies each labeled frame by confidence.
MetricsReport normalized_error(const std::vector<DetectionRecord>& records, const AnnotationSet& truth, Shape shape,
                               std::optional<double> presence_threshold = std::nullopt);

/// `key: value` lines followed by a blank line and a `frame,pixel_error,normalized_error` CSV.
void write_metrics(const MetricsReport& report, std::ostream& out);
void write_metrics(const MetricsReport& report, const std::filesystem::path& path);

struct PresenceCalibration {
    double threshold = 0.0;
    double positive_mean = 0.0;
    double positive_std = 0.0;
    double negative_mean = 0.0;
    double negative_std = 0.0;
    bool reliable = false;  ///< false when positive_mean <= negative_mean
};

/// Midpoint between mean positive and mean negative confidence.
PresenceCalibration calibrate_presence_threshold(const std::vector<double>& positive_confidences,
                                                 const std::vector<double>& negative_confidences);
PresenceCalibration calibrate_presence_threshold(const Checkpoint& ckpt, const FrameStore& positive,
                                                 const FrameStore& negative);

struct ObjectSummary {
    double last_row_mean = 0.0;
    double last_col_mean = 0.0;
    double last_row_std = 0.0;
    double last_col_std = 0.0;
    double mean_displacement = 0.0;  ///< first-to-last, pixels
    bool relevant = false;
};

struct DemoSummary {
    std::vector<ObjectSummary> objects;
};

/// Maps an image to a detection; lets summaries run on any detector.
using Detector = std::function<Location(const ImageTensor&)>;

/// Per object: detect in the first and last frame of every demo, flag the
/// object as relevant when the mean displacement is at least
/// `relevance_px`, and report mean and population standard deviation of the
/// last-frame pixel locations.
DemoSummary summarize_demonstrations(const std::vector<Detector>& detectors, const std::vector<FrameStore>& demos,
                                     double relevance_px = 10.0);
DemoSummary summarize_demonstrations(const std::vector<Checkpoint>& checkpoints, const std::vector<FrameStore>& demos,
                                     double relevance_px = 10.0);

/// Same rule applied to already computed first/last detections (pixel units).
ObjectSummary summarize_endpoints(const std::vector<DetectionRecord>& first, const std::vector<DetectionRecord>& last,
                                  double relevance_px = 10.0);

/// Writes one PNG per record with a dot at the detected pixel and the
/// confidence printed. With crop_size > 0 a crop_size x crop_size window
/// centered on the detection is written instead, zero padded at borders.
/// Returns the written paths in record order.
std::vector<std::filesystem::path> render_overlays(const std::vector<DetectionRecord>& records, const FrameStore& video,
                                                   const std::filesystem::path& out_dir, int crop_size = 0);

}  // namespace motionloc
