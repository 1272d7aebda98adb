#include "motionloc/synthetic.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace motionloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFps = 30.0;

struct Rgb {
    float r, g, b;
};

constexpr Rgb kDiscColor{0.95f, 0.18f, 0.12f};
constexpr Rgb kDistractorColor{0.12f, 0.30f, 0.95f};

// Independent RNG streams derived from one seed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
    return std::mt19937_64(seq);
}

std::uint64_t effective_motion_seed(const SyntheticSpec& spec) {
    return spec.motion_seed != 0 ? spec.motion_seed : spec.seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
}

int canvas_pad(const SyntheticSpec& spec) { return static_cast<int>(std::ceil(spec.camera_jitter_px)) + 2; }

// Static scene texture, larger than the frame so camera shake never samples outside it.
cv::Mat make_background(const SyntheticSpec& spec) {
    const int pad = canvas_pad(spec);
    const int ch = spec.height + 2 * pad;
    const int cw = spec.width + 2 * pad;
    auto rng = stream(spec.seed, 1);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    cv::Mat canvas(ch, cw, CV_32FC3);

    if (spec.background == Background::checkerboard) {
        const int cell = std::max(4, std::min(spec.height, spec.width) / 8);
        const cv::Vec3f a(0.25f + 0.2f * unit(rng), 0.25f + 0.2f * unit(rng), 0.25f + 0.2f * unit(rng));
        const cv::Vec3f b(0.55f + 0.2f * unit(rng), 0.55f + 0.2f * unit(rng), 0.55f + 0.2f * unit(rng));
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x) canvas.at<cv::Vec3f>(y, x) = ((y / cell + x / cell) % 2 == 0) ? a : b;
        return canvas;
    }

    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) canvas.at<cv::Vec3f>(y, x) = cv::Vec3f(unit(rng), unit(rng), unit(rng));
    const double sigma = std::max(2.0, std::min(spec.height, spec.width) / 10.0);
    cv::GaussianBlur(canvas, canvas, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT);
    std::vector<cv::Mat> planes;
    cv::split(canvas, planes);
    for (auto& p : planes) {
        double lo = 0.0, hi = 0.0;
        cv::minMaxLoc(p, &lo, &hi);
        const double span = std::max(hi - lo, 1e-6);
        p.convertTo(p, CV_32F, 0.8 / span, 0.1 - 0.8 * lo / span);
    }
    cv::merge(planes, canvas);
    return canvas;
}

double path_length(const std::vector<PixelPoint>& path) {
    double len = 0.0;
    for (std::size_t t = 1; t < path.size(); ++t) len += std::hypot(path[t].row - path[t - 1].row, path[t].col - path[t - 1].col);
    return len;
}

struct Bounds {
    double row_lo, row_hi, col_lo, col_hi;
};

Bounds object_bounds(const SyntheticSpec& spec, double half_extent) {
    const double m = half_extent + 1.0 + spec.camera_jitter_px;
    return {m, spec.height - 1 - m, m, spec.width - 1 - m};
}

std::vector<PixelPoint> lissajous(const Bounds& b, int frames, std::mt19937_64& rng, double min_length) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double period_row = 130.0 + 60.0 * unit(rng);
    double period_col = 170.0 + 80.0 * unit(rng);
    const double phase_row = kTwoPi * unit(rng);
    const double phase_col = kTwoPi * unit(rng);
    const double cr = 0.5 * (b.row_lo + b.row_hi), ar = 0.5 * (b.row_hi - b.row_lo);
    const double cc = 0.5 * (b.col_lo + b.col_hi), ac = 0.5 * (b.col_hi - b.col_lo);
    std::vector<PixelPoint> path(frames);
    for (int attempt = 0; attempt < 20; ++attempt) {
        for (int t = 0; t < frames; ++t)
            path[t] = {cr + ar * std::sin(kTwoPi * t / period_row + phase_row),
                       cc + ac * std::sin(kTwoPi * t / period_col + phase_col)};
        const double len = path_length(path);
        if (len >= min_length) break;
        const double speedup = 1.05 * min_length / std::max(len, 1e-9);
        period_row /= speedup;
        period_col /= speedup;
    }
    return path;
}

std::vector<PixelPoint> random_walk(const Bounds& b, int frames, std::mt19937_64& rng, double min_length) {
    const auto state = rng;
    double sigma = 0.35;
    std::vector<PixelPoint> path(frames);
    for (int attempt = 0; attempt < 20; ++attempt) {
        auto r = state;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> noise(0.0, sigma);
        PixelPoint p{b.row_lo + unit(r) * (b.row_hi - b.row_lo), b.col_lo + unit(r) * (b.col_hi - b.col_lo)};
        double vr = 0.0, vc = 0.0;
        const double max_speed = 5.0 * sigma + 1.0;
        for (int t = 0; t < frames; ++t) {
            path[t] = p;
            vr = 0.9 * vr + noise(r);
            vc = 0.9 * vc + noise(r);
            const double speed = std::hypot(vr, vc);
            if (speed > max_speed) {
                vr *= max_speed / speed;
                vc *= max_speed / speed;
            }
            p.row += vr;
            p.col += vc;
            if (p.row < b.row_lo) { p.row = 2 * b.row_lo - p.row; vr = -vr; }
            if (p.row > b.row_hi) { p.row = 2 * b.row_hi - p.row; vr = -vr; }
            if (p.col < b.col_lo) { p.col = 2 * b.col_lo - p.col; vc = -vc; }
            if (p.col > b.col_hi) { p.col = 2 * b.col_hi - p.col; vc = -vc; }
            p.row = std::clamp(p.row, b.row_lo, b.row_hi);
            p.col = std::clamp(p.col, b.col_lo, b.col_hi);
        }
        if (path_length(path) >= min_length) break;
        sigma *= 1.5;
    }
    return path;
}

std::vector<PixelPoint> camera_offsets(const SyntheticSpec& spec, std::mt19937_64& rng) {
    std::vector<PixelPoint> offsets(spec.num_frames);
    if (spec.camera_jitter_px <= 0.0) return offsets;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double pr = 30.0 + 60.0 * unit(rng), pc = 30.0 + 60.0 * unit(rng);
    const double fr = kTwoPi * unit(rng), fc = kTwoPi * unit(rng);
    for (int t = 0; t < spec.num_frames; ++t)
        offsets[t] = {spec.camera_jitter_px * std::sin(kTwoPi * t / pr + fr),
                      spec.camera_jitter_px * std::sin(kTwoPi * t / pc + fc)};
    return offsets;
}

double round_milli(double v) { return std::round(v * 1000.0) / 1000.0; }

// Camera-shifted view of the static canvas.
cv::Mat view(const cv::Mat& canvas, const SyntheticSpec& spec, PixelPoint offset) {
    const int pad = canvas_pad(spec);
    if (offset.row == 0.0 && offset.col == 0.0)
        return canvas(cv::Rect(pad, pad, spec.width, spec.height)).clone();
    // Frame pixel (y, x) shows canvas point (y + pad + offset.row, x + pad + offset.col).
    cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, pad + offset.col, 0, 1, pad + offset.row);
    cv::Mat out;
    cv::warpAffine(canvas, out, m, cv::Size(spec.width, spec.height), cv::INTER_LINEAR | cv::WARP_INVERSE_MAP,
                   cv::BORDER_REFLECT);
    return out;
}

void blend(cv::Mat& frame, int row, int col, float coverage, Rgb color) {
    auto& px = frame.at<cv::Vec3f>(row, col);
    px[0] = (1.0f - coverage) * px[0] + coverage * color.r;
    px[1] = (1.0f - coverage) * px[1] + coverage * color.g;
    px[2] = (1.0f - coverage) * px[2] + coverage * color.b;
}

void draw_disc(cv::Mat& frame, PixelPoint center, double radius, Rgb color) {
    const int r0 = std::max(0, static_cast<int>(std::floor(center.row - radius - 1)));
    const int r1 = std::min(frame.rows - 1, static_cast<int>(std::ceil(center.row + radius + 1)));
    const int c0 = std::max(0, static_cast<int>(std::floor(center.col - radius - 1)));
    const int c1 = std::min(frame.cols - 1, static_cast<int>(std::ceil(center.col + radius + 1)));
    for (int y = r0; y <= r1; ++y)
        for (int x = c0; x <= c1; ++x) {
            const double cov = std::clamp(radius + 0.5 - std::hypot(y - center.row, x - center.col), 0.0, 1.0);
            if (cov > 0.0) blend(frame, y, x, static_cast<float>(cov), color);
        }
}

void draw_square(cv::Mat& frame, PixelPoint center, double half, Rgb color) {
    const int r0 = std::max(0, static_cast<int>(std::floor(center.row - half - 1)));
    const int r1 = std::min(frame.rows - 1, static_cast<int>(std::ceil(center.row + half + 1)));
    const int c0 = std::max(0, static_cast<int>(std::floor(center.col - half - 1)));
    const int c1 = std::min(frame.cols - 1, static_cast<int>(std::ceil(center.col + half + 1)));
    for (int y = r0; y <= r1; ++y)
        for (int x = c0; x <= c1; ++x) {
            const double cy = std::clamp(half + 0.5 - std::abs(y - center.row), 0.0, 1.0);
            const double cx = std::clamp(half + 0.5 - std::abs(x - center.col), 0.0, 1.0);
            if (cy * cx > 0.0) blend(frame, y, x, static_cast<float>(cy * cx), color);
        }
}

// Quantizes to 8 bits so frames survive a PNG round trip unchanged.
ImageTensor to_image(const cv::Mat& frame) {
    ImageTensor img(frame.rows, frame.cols, 3);
    for (int y = 0; y < frame.rows; ++y)
        for (int x = 0; x < frame.cols; ++x) {
            const auto& px = frame.at<cv::Vec3f>(y, x);
            for (int c = 0; c < 3; ++c) {
                const float q = std::clamp(std::round(px[c] * 255.0f), 0.0f, 255.0f);
                img.at(y, x, c) = normalize_intensity(static_cast<unsigned char>(q));
            }
        }
    return img;
}

struct Motion {
    std::vector<PixelPoint> camera;
    std::vector<PixelPoint> distractor;  // world coordinates; empty when disabled
};

Motion make_motion(const SyntheticSpec& spec, std::uint64_t salt) {
    const auto mseed = effective_motion_seed(spec);
    Motion m;
    auto cam_rng = stream(mseed, salt);
    m.camera = camera_offsets(spec, cam_rng);
    if (spec.distractor) {
        auto rng = stream(mseed, salt + 1);
        const double diag = std::hypot(spec.height, spec.width);
        m.distractor = lissajous(object_bounds(spec, spec.object_radius), spec.num_frames, rng, 2.0 * diag);
    }
    return m;
}

std::vector<ImageTensor> render(const SyntheticSpec& spec, const cv::Mat& canvas, const Motion& motion,
                                const std::vector<PixelPoint>* object) {
    std::vector<ImageTensor> frames;
    frames.reserve(spec.num_frames);
    for (int t = 0; t < spec.num_frames; ++t) {
        const PixelPoint cam = motion.camera[t];
        cv::Mat frame = view(canvas, spec, cam);
        if (!motion.distractor.empty()) {
            const PixelPoint d{motion.distractor[t].row - cam.row, motion.distractor[t].col - cam.col};
            draw_square(frame, d, spec.object_radius, kDistractorColor);
        }
        if (object) draw_disc(frame, (*object)[t], spec.object_radius, kDiscColor);
        frames.push_back(to_image(frame));
    }
    return frames;
}

}  // namespace

void SyntheticSpec::validate(int d_max) const {
    if (height < 8 || width < 8) throw std::invalid_argument("synthetic frames must be at least 8x8");
    if (!(object_radius > 0.0) || object_radius >= std::min(height, width) / 4.0)
        throw std::invalid_argument("object_radius must be positive and below min(height, width)/4");
    if (num_frames <= d_max + 1)
        throw std::invalid_argument("num_frames must exceed d_max + 1 = " + std::to_string(d_max + 1));
    if (camera_jitter_px < 0.0) throw std::invalid_argument("camera_jitter_px must be non-negative");
    const double margin = object_radius + 1.0 + camera_jitter_px;
    if (2.0 * margin >= std::min(height, width) - 1)
        throw std::invalid_argument("object and camera jitter leave no room to move");
}

std::vector<PixelPoint> object_path(const SyntheticSpec& spec) {
    spec.validate(0);
    auto rng = stream(effective_motion_seed(spec), 100);
    const Bounds b = object_bounds(spec, spec.object_radius);
    const double diag = std::hypot(spec.height, spec.width);
    std::vector<PixelPoint> world = spec.trajectory == Trajectory::lissajous
                                        ? lissajous(b, spec.num_frames, rng, 2.05 * diag)
                                        : random_walk(b, spec.num_frames, rng, 2.05 * diag);
    const Motion motion = make_motion(spec, 200);
    for (int t = 0; t < spec.num_frames; ++t) {
        world[t].row = round_milli(world[t].row - motion.camera[t].row);
        world[t].col = round_milli(world[t].col - motion.camera[t].col);
    }
    return world;
}

SyntheticPair generate_synthetic_pair(const SyntheticSpec& spec) {
    spec.validate(0);
    const cv::Mat canvas = make_background(spec);
    const auto path = object_path(spec);
    const Motion pos_motion = make_motion(spec, 200);
    const Motion neg_motion = make_motion(spec, 300);

    AnnotationSet truth;
    truth.resolution = {spec.height, spec.width};
    for (int t = 0; t < spec.num_frames; ++t) truth.entries[t] = {path[t].col, path[t].row, true};

    FrameStore positive(render(spec, canvas, pos_motion, &path), kFps, "synthetic:positive", VideoLabel::positive);
    FrameStore negative(render(spec, canvas, neg_motion, nullptr), kFps, "synthetic:negative", VideoLabel::negative);
    return {std::move(positive), std::move(negative), std::move(truth)};
}

FrameStore render_object_path(const SyntheticSpec& spec, const std::vector<PixelPoint>& path) {
    if (path.empty()) throw std::invalid_argument("render_object_path: empty path");
    SyntheticSpec s = spec;
    s.num_frames = static_cast<int>(path.size());
    s.distractor = false;
    s.camera_jitter_px = 0.0;
    const cv::Mat canvas = make_background(spec);
    Motion still;
    still.camera.assign(path.size(), PixelPoint{});
    // Same canvas as the training scene: the jitter pad only changes the crop origin.
    const int pad_diff = canvas_pad(spec) - canvas_pad(s);
    cv::Mat cropped = canvas(cv::Rect(pad_diff, pad_diff, canvas.cols - 2 * pad_diff, canvas.rows - 2 * pad_diff));
    return FrameStore(render(s, cropped, still, &path), kFps, "synthetic:path", VideoLabel::unlabeled);
}

void write_synthetic_pair(const SyntheticPair& pair, const std::filesystem::path& dir) {
    write_frames(pair.positive, dir / "positive");
    write_frames(pair.negative, dir / "negative");
    save_annotations(pair.truth, dir / "truth.csv");
}

}  // namespace motionloc
