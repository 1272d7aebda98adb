#include "motionloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <thread>

namespace motionloc {

namespace {

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    for (double x : v) out.std += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(out.std / static_cast<double>(v.size()));
    return out;
}

std::vector<double> confidences(const EncoderParams& params, const FrameStore& video) {
    std::vector<double> out;
    for (const auto& r : run_detection(params, video)) out.push_back(r.confidence);
    return out;
}

}  // namespace

DetectionRecord make_record(std::size_t frame, const Location& loc, Shape shape) {
    return {frame, loc.z, to_pixel(loc.z.row, shape.height), to_pixel(loc.z.col, shape.width), loc.confidence};
}

std::vector<DetectionRecord> run_detection(const EncoderParams& params, const FrameStore& video, unsigned threads) {
    const auto& cfg = params.config();
    if (video.shape() != cfg.shape() || video.channels() != cfg.in_channels)
        throw EvaluationError("video frames are " + std::to_string(video.shape().height) + "x" +
                              std::to_string(video.shape().width) + "x" + std::to_string(video.channels()) +
                              " but the checkpoint expects " + std::to_string(cfg.height) + "x" +
                              std::to_string(cfg.width) + "x" + std::to_string(cfg.in_channels));
    std::vector<DetectionRecord> records(video.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, video.size()));
    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < video.size(); i += step)
            records[i] = make_record(i, detect(params, video[i]), video.shape());
    };
    if (threads <= 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    }
    return records;
}

std::vector<DetectionRecord> run_detection(const Checkpoint& ckpt, const FrameStore& video, unsigned threads) {
    return run_detection(ckpt.params, video, threads);
}

MetricsReport normalized_error(const std::vector<DetectionRecord>& records, const AnnotationSet& labels, Shape shape,
                               std::optional<double> presence_threshold) {
    const AnnotationSet truth = labels.rescaled(shape);
    const double diag2 = static_cast<double>(shape.height) * shape.height + static_cast<double>(shape.width) * shape.width;

    std::map<std::size_t, const DetectionRecord*> by_frame;
    for (const auto& r : records) by_frame[r.frame] = &r;

    MetricsReport report;
    report.height = shape.height;
    report.width = shape.width;
    double sq_sum = 0.0;
    int presence_total = 0;
    int presence_correct = 0;
    bool saw_visible = false;
    bool saw_invisible = false;
    for (const auto& [frame, a] : truth.entries) {
        const auto it = by_frame.find(static_cast<std::size_t>(frame));
        if (it == by_frame.end()) continue;
        const DetectionRecord& r = *it->second;
        if (presence_threshold) {
            ++presence_total;
            presence_correct += (r.confidence > *presence_threshold) == a.visible ? 1 : 0;
            (a.visible ? saw_visible : saw_invisible) = true;
        }
        if (!a.visible) continue;
        const double dr = r.row - a.y;
        const double dc = r.col - a.x;
        const double sq = dr * dr + dc * dc;
        report.per_frame.push_back({frame, std::sqrt(sq), sq / diag2});
        sq_sum += sq;
    }
    if (report.per_frame.empty()) throw EvaluationError("no visible labeled frame is covered by the detections");
    report.num_evaluated = static_cast<int>(report.per_frame.size());
    report.normalized_error = sq_sum / report.num_evaluated / diag2;
    report.pixel_rmse = std::sqrt(sq_sum / report.num_evaluated);
    if (presence_threshold && saw_visible && saw_invisible)
        report.presence_accuracy = static_cast<double>(presence_correct) / presence_total;
    return report;
}

void write_metrics(const MetricsReport& report, std::ostream& out) {
    out << std::setprecision(17);
    out << "normalized_error: " << report.normalized_error << "\n";
    out << "pixel_rmse: " << report.pixel_rmse << "\n";
    out << "num_evaluated: " << report.num_evaluated << "\n";
    out << "image_height: " << report.height << "\n";
    out << "image_width: " << report.width << "\n";
    if (report.presence_accuracy) out << "presence_accuracy: " << *report.presence_accuracy << "\n";
    out << "\nframe,pixel_error,normalized_error\n";
    for (const auto& f : report.per_frame) out << f.frame << "," << f.pixel_error << "," << f.normalized_error << "\n";
}

void write_metrics(const MetricsReport& report, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw EvaluationError("cannot open '" + path.string() + "' for writing");
    write_metrics(report, out);
}

PresenceCalibration calibrate_presence_threshold(const std::vector<double>& positive_confidences,
                                                 const std::vector<double>& negative_confidences) {
    if (positive_confidences.empty() || negative_confidences.empty())
        throw EvaluationError("calibration needs at least one positive and one negative frame");
    const auto pos = mean_std(positive_confidences);
    const auto neg = mean_std(negative_confidences);
    PresenceCalibration out;
    out.positive_mean = pos.mean;
    out.positive_std = pos.std;
    out.negative_mean = neg.mean;
    out.negative_std = neg.std;
    out.threshold = 0.5 * (pos.mean + neg.mean);
    out.reliable = pos.mean > neg.mean;
    return out;
}

PresenceCalibration calibrate_presence_threshold(const Checkpoint& ckpt, const FrameStore& positive,
                                                 const FrameStore& negative) {
    return calibrate_presence_threshold(confidences(ckpt.params, positive), confidences(ckpt.params, negative));
}

ObjectSummary summarize_endpoints(const std::vector<DetectionRecord>& first, const std::vector<DetectionRecord>& last,
                                  double relevance_px) {
    if (first.empty() || first.size() != last.size())
        throw EvaluationError("need one first and one last detection per demonstration");
    ObjectSummary s;
    std::vector<double> rows;
    std::vector<double> cols;
    double displacement = 0.0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        displacement += std::hypot(last[i].row - first[i].row, last[i].col - first[i].col);
        rows.push_back(last[i].row);
        cols.push_back(last[i].col);
    }
    const auto r = mean_std(rows);
    const auto c = mean_std(cols);
    s.last_row_mean = r.mean;
    s.last_row_std = r.std;
    s.last_col_mean = c.mean;
    s.last_col_std = c.std;
    s.mean_displacement = displacement / static_cast<double>(first.size());
    s.relevant = s.mean_displacement >= relevance_px;
    return s;
}

DemoSummary summarize_demonstrations(const std::vector<Detector>& detectors, const std::vector<FrameStore>& demos,
                                     double relevance_px) {
    if (demos.empty()) throw EvaluationError("summarize_demonstrations needs at least one demonstration");
    if (detectors.empty()) throw EvaluationError("summarize_demonstrations needs at least one detector");
    DemoSummary summary;
    for (const auto& detect_fn : detectors) {
        std::vector<DetectionRecord> first;
        std::vector<DetectionRecord> last;
        for (const auto& demo : demos) {
            const Shape shape = demo.shape();
            first.push_back(make_record(0, detect_fn(demo[0]), shape));
            last.push_back(make_record(demo.size() - 1, detect_fn(demo[demo.size() - 1]), shape));
        }
        summary.objects.push_back(summarize_endpoints(first, last, relevance_px));
    }
    return summary;
}

DemoSummary summarize_demonstrations(const std::vector<Checkpoint>& checkpoints, const std::vector<FrameStore>& demos,
                                     double relevance_px) {
    for (const auto& ckpt : checkpoints)
        for (const auto& demo : demos)
            if (demo.shape() != ckpt.params.config().shape())
                throw EvaluationError("demonstration frame shape does not match a checkpoint");
    std::vector<Detector> detectors;
    for (const auto& ckpt : checkpoints)
        detectors.push_back([&params = ckpt.params](const ImageTensor& img) { return detect(params, img); });
    return summarize_demonstrations(detectors, demos, relevance_px);
}

}  // namespace motionloc
