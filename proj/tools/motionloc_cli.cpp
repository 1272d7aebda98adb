// motionloc command-line entry point.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "motionloc/annotations.hpp"
#include "motionloc/checkpoint.hpp"
#include "motionloc/config_json.hpp"
#include "motionloc/data.hpp"
#include "motionloc/evaluation.hpp"
#include "motionloc/synthetic.hpp"
#include "motionloc/training.hpp"

#ifndef MOTIONLOC_VERSION
#define MOTIONLOC_VERSION "unknown"
#endif
#ifndef MOTIONLOC_GIT_REV
#define MOTIONLOC_GIT_REV "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace motionloc;

namespace {

// Every option of a subcommand as given (flags, config file or defaults).
json option_values(const CLI::App& app) {
    json out = json::object();
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
        const std::string name = opt->get_lnames().front();
        if (opt->count() > 0) {
            const auto& res = opt->results();
            out[name] = res.size() == 1 ? json(res.front()) : json(res);
        } else if (!opt->get_default_str().empty()) {
            out[name] = opt->get_default_str();
        }
    }
    return out;
}

void write_manifest(const fs::path& dir, const CLI::App& app, json extra) {
    json m = {
        {"command", app.get_name()},
        {"version", MOTIONLOC_VERSION},
        {"git_revision", MOTIONLOC_GIT_REV},
        {"options", option_values(app)},
    };
    if (const CLI::App* root = app.get_parent()) {
        const CLI::Option* cfg = root->get_option_no_throw("--config");
        if (cfg && cfg->count() > 0) m["config_file"] = cfg->results().front();
    }
    for (auto& [k, v] : extra.items()) m[k] = v;
    fs::create_directories(dir);
    std::ofstream out(dir / "manifest.json");
    out << std::setw(2) << m << "\n";
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << std::setw(2) << j << "\n";
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_detections(const std::vector<DetectionRecord>& records, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << std::setprecision(17) << "frame,row,col,z_row,z_col,confidence\n";
    for (const auto& r : records)
        out << r.frame << "," << r.row << "," << r.col << "," << r.z.row << "," << r.z.col << "," << r.confidence << "\n";
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

json calibration_json(const PresenceCalibration& c) {
    return {{"threshold", c.threshold},         {"positive_mean", c.positive_mean},
            {"positive_std", c.positive_std},   {"negative_mean", c.negative_mean},
            {"negative_std", c.negative_std},   {"reliable", c.reliable}};
}

FrameStore load_for(const Checkpoint& ckpt, const fs::path& video, VideoLabel label = VideoLabel::unlabeled) {
    return ingest_video(video, ckpt.params.config().shape(), label);
}

struct SynthOptions {
    fs::path out;
    SyntheticSpec spec;
    std::string trajectory = "lissajous";
    std::string background = "smoothed_noise";
};

struct TrainOptions {
    fs::path positive, negative, out;
    EncoderConfig arch;
    TrainingConfig cfg;
    int log_every = 100;
};

struct DetectOptions {
    fs::path checkpoint, video, out, annotations;
    std::optional<double> threshold;
    int crop_size = 0;
};

struct CalibrateOptions {
    fs::path checkpoint, positive, negative, out;
};

struct DemoOptions {
    std::vector<fs::path> checkpoints, demos;
    fs::path out;
    double relevance_px = 10.0;
};

void run_synth(const SynthOptions& o, const CLI::App& app) {
    SyntheticSpec spec = o.spec;
    spec.trajectory = o.trajectory == "random_walk" ? Trajectory::random_walk : Trajectory::lissajous;
    spec.background = o.background == "checkerboard" ? Background::checkerboard : Background::smoothed_noise;
    const auto pair = generate_synthetic_pair(spec);
    write_synthetic_pair(pair, o.out);
    write_manifest(o.out, app, {{"synthetic", spec}});
    std::cout << "wrote " << pair.positive.size() << " positive and " << pair.negative.size() << " negative frames to "
              << o.out.string() << "\n";
}

void run_train(TrainOptions o, const CLI::App& app) {
    o.cfg.warmup_steps = std::min(o.cfg.warmup_steps, o.cfg.total_steps);
    const Shape shape = o.arch.shape();
    const FrameStore positive = ingest_video(o.positive, shape, VideoLabel::positive);
    const FrameStore negative = ingest_video(o.negative, shape, VideoLabel::negative);
    o.cfg.restart_seeds = o.cfg.resolved_restart_seeds();
    write_manifest(o.out, app, {{"architecture", o.arch}, {"training", o.cfg}, {"positive_frames", positive.size()},
                                {"negative_frames", negative.size()}});

    const auto start = std::chrono::steady_clock::now();
    auto progress = [&](const ProgressEvent& e) {
        if (o.log_every <= 0 || e.step % o.log_every != 0) return;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "[%7.1fs] %s seed=%llu step=%d total=%.5f variation=%.5f slowness=%.6f presence=%.5f\n",
                     secs, e.phase == ProgressEvent::Phase::warmup ? "warmup" : "train",
                     static_cast<unsigned long long>(e.seed), e.step, e.loss.total, e.loss.variation, e.loss.slowness,
                     e.loss.presence);
    };
    const Checkpoint ckpt = train_with_restarts(positive, negative, o.arch, o.cfg, progress);
    save_checkpoint(ckpt, o.out / "checkpoint.mlc");

    std::ofstream loss(o.out / "loss.csv");
    loss << std::setprecision(17) << "step,variation,slowness,presence,total\n";
    for (std::size_t i = 0; i < ckpt.loss_history.size(); ++i) {
        const auto& b = ckpt.loss_history[i];
        loss << i + 1 << "," << b.variation << "," << b.slowness << "," << b.presence << "," << b.total << "\n";
    }
    write_json(o.out / "restarts.json", {{"selected_seed", ckpt.selected_seed}, {"restarts", ckpt.restarts}});
    std::cout << "selected seed " << ckpt.selected_seed << ", final loss "
              << (ckpt.loss_history.empty() ? 0.0 : ckpt.loss_history.back().total) << ", checkpoint "
              << (o.out / "checkpoint.mlc").string() << "\n";
}

void run_detect(const DetectOptions& o, const CLI::App& app) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const FrameStore video = load_for(ckpt, o.video);
    const auto records = run_detection(ckpt, video);
    write_detections(records, o.out / "detections.csv");
    write_manifest(o.out, app, {{"frames", records.size()}, {"selected_seed", ckpt.selected_seed}});
    std::cout << "wrote " << records.size() << " detections to " << (o.out / "detections.csv").string() << "\n";
}

void run_eval(const DetectOptions& o, const CLI::App& app) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const FrameStore video = load_for(ckpt, o.video);
    const AnnotationSet truth = load_annotations(o.annotations, video.shape());
    const auto records = run_detection(ckpt, video);
    const MetricsReport report = normalized_error(records, truth, video.shape(), o.threshold);
    write_metrics(report, o.out / "metrics.txt");
    write_detections(records, o.out / "detections.csv");
    write_manifest(o.out, app, {{"selected_seed", ckpt.selected_seed}});
    write_metrics(MetricsReport{report.normalized_error, report.pixel_rmse, {}, report.presence_accuracy,
                                report.num_evaluated, report.height, report.width},
                  std::cout);
}

void run_calibrate(const CalibrateOptions& o, const CLI::App& app) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const auto cal = calibrate_presence_threshold(ckpt, load_for(ckpt, o.positive, VideoLabel::positive),
                                                  load_for(ckpt, o.negative, VideoLabel::negative));
    write_json(o.out / "calibration.json", calibration_json(cal));
    write_manifest(o.out, app, {{"selected_seed", ckpt.selected_seed}});
    std::cout << std::setw(2) << calibration_json(cal) << "\n";
    if (!cal.reliable) std::cerr << "warning: positive confidences do not exceed negative ones; threshold unreliable\n";
}

void run_summarize(const DemoOptions& o, const CLI::App& app) {
    std::vector<Checkpoint> ckpts;
    for (const auto& p : o.checkpoints) ckpts.push_back(load_checkpoint(p));
    std::vector<FrameStore> demos;
    for (const auto& d : o.demos) demos.push_back(ingest_video(d, ckpts.front().params.config().shape()));
    const DemoSummary summary = summarize_demonstrations(ckpts, demos, o.relevance_px);
    json objects = json::array();
    for (std::size_t i = 0; i < summary.objects.size(); ++i) {
        const auto& s = summary.objects[i];
        objects.push_back({{"checkpoint", o.checkpoints[i].string()},
                           {"last_row_mean", s.last_row_mean},
                           {"last_col_mean", s.last_col_mean},
                           {"last_row_std", s.last_row_std},
                           {"last_col_std", s.last_col_std},
                           {"mean_displacement", s.mean_displacement},
                           {"relevant", s.relevant}});
    }
    const json out = {{"relevance_px", o.relevance_px}, {"demos", o.demos.size()}, {"objects", objects}};
    write_json(o.out / "summary.json", out);
    write_manifest(o.out, app, {});
    std::cout << std::setw(2) << out << "\n";
}

void run_overlay(const DetectOptions& o, const CLI::App& app) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint);
    const FrameStore video = load_for(ckpt, o.video);
    const auto records = run_detection(ckpt, video);
    const auto files = render_overlays(records, video, o.out / "frames", o.crop_size);
    write_manifest(o.out, app, {{"frames", files.size()}});
    std::cout << "wrote " << files.size() << " overlays to " << (o.out / "frames").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised object detection from motion: training, detection and evaluation"};
    app.set_version_flag("--version", std::string(MOTIONLOC_VERSION) + " (" + MOTIONLOC_GIT_REV + ")");
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file; options of a subcommand go under a [subcommand] section");

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic positive/negative video pair");
    s->fallthrough();
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--seed", synth.spec.seed, "Scene seed")->capture_default_str();
    s->add_option("--motion-seed", synth.spec.motion_seed, "Motion seed (0: derived from --seed)")->capture_default_str();
    s->add_option("--width", synth.spec.width, "Frame width")->capture_default_str();
    s->add_option("--height", synth.spec.height, "Frame height")->capture_default_str();
    s->add_option("--frames", synth.spec.num_frames, "Frames per video")->capture_default_str();
    s->add_option("--radius", synth.spec.object_radius, "Disc radius in pixels")->capture_default_str();
    s->add_option("--trajectory", synth.trajectory, "lissajous or random_walk")
        ->check(CLI::IsMember({"lissajous", "random_walk"}))
        ->capture_default_str();
    s->add_option("--background", synth.background, "smoothed_noise or checkerboard")
        ->check(CLI::IsMember({"smoothed_noise", "checkerboard"}))
        ->capture_default_str();
    s->add_flag("--distractor", synth.spec.distractor, "Add a moving distractor to both videos");
    s->add_option("--jitter", synth.spec.camera_jitter_px, "Camera shake amplitude in pixels")->capture_default_str();

    TrainOptions train;
    auto* t = app.add_subcommand("train", "Train a detector from a positive and a negative video");
    t->fallthrough();
    t->add_option("--positive", train.positive, "Positive video (file or frame directory)")->required();
    t->add_option("--negative", train.negative, "Negative video (file or frame directory)")->required();
    t->add_option("--out", train.out, "Output directory")->required();
    t->add_option("--seed", train.cfg.seed, "Seed from which restart seeds are derived")->capture_default_str();
    t->add_option("--steps", train.cfg.total_steps, "Total steps of the selected run")->capture_default_str();
    t->add_option("--restarts", train.cfg.restarts, "Number of random restarts")->capture_default_str();
    t->add_option("--warmup", train.cfg.warmup_steps, "Steps per restart before selection")->capture_default_str();
    t->add_option("--batch-size", train.cfg.batch_size, "Pairs per loss term (b)")->capture_default_str();
    t->add_option("--learning-rate", train.cfg.learning_rate, "Adam learning rate")->capture_default_str();
    t->add_option("--width", train.arch.width, "Frame width")->capture_default_str();
    t->add_option("--height", train.arch.height, "Frame height")->capture_default_str();
    t->add_option("--blocks", train.arch.blocks, "Residual blocks")->capture_default_str();
    t->add_option("--channels", train.arch.channels, "Channels per layer")->capture_default_str();
    t->add_option("--log-every", train.log_every, "Progress line interval in steps (0: silent)")->capture_default_str();

    DetectOptions detect_opts;
    auto* d = app.add_subcommand("detect", "Per-frame detection on a video");
    d->fallthrough();
    d->add_option("--checkpoint", detect_opts.checkpoint, "Checkpoint file")->required();
    d->add_option("--video", detect_opts.video, "Video file or frame directory")->required();
    d->add_option("--out", detect_opts.out, "Output directory")->required();

    DetectOptions eval_opts;
    auto* e = app.add_subcommand("eval", "Localization error against annotations");
    e->fallthrough();
    e->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
    e->add_option("--video", eval_opts.video, "Video file or frame directory")->required();
    e->add_option("--annotations", eval_opts.annotations, "Annotation CSV")->required();
    e->add_option("--out", eval_opts.out, "Output directory")->required();
    e->add_option("--threshold", eval_opts.threshold, "Presence threshold for presence_accuracy");

    CalibrateOptions cal;
    auto* c = app.add_subcommand("calibrate", "Presence threshold from the training videos");
    c->fallthrough();
    c->add_option("--checkpoint", cal.checkpoint, "Checkpoint file")->required();
    c->add_option("--positive", cal.positive, "Positive video")->required();
    c->add_option("--negative", cal.negative, "Negative video")->required();
    c->add_option("--out", cal.out, "Output directory")->required();

    DemoOptions demo;
    auto* m = app.add_subcommand("summarize-demos", "First/last frame statistics over demonstrations");
    m->fallthrough();
    m->add_option("--checkpoint", demo.checkpoints, "Checkpoint per object (repeatable)")->required();
    m->add_option("--demo", demo.demos, "Demonstration video (repeatable)")->required();
    m->add_option("--relevance-px", demo.relevance_px, "Minimum mean displacement for relevance")
        ->capture_default_str();
    m->add_option("--out", demo.out, "Output directory")->required();

    DetectOptions overlay;
    auto* o = app.add_subcommand("overlay", "Draw detections onto frames");
    o->fallthrough();
    o->add_option("--checkpoint", overlay.checkpoint, "Checkpoint file")->required();
    o->add_option("--video", overlay.video, "Video file or frame directory")->required();
    o->add_option("--out", overlay.out, "Output directory")->required();
    o->add_option("--crop-size", overlay.crop_size, "Emit crops of this size centered on detections (0: full frames)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*s) run_synth(synth, *s);
        else if (*t) run_train(train, *t);
        else if (*d) run_detect(detect_opts, *d);
        else if (*e) run_eval(eval_opts, *e);
        else if (*c) run_calibrate(cal, *c);
        else if (*m) run_summarize(demo, *m);
        else if (*o) run_overlay(overlay, *o);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
