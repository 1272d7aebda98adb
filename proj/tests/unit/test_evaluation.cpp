#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "motionloc/evaluation.hpp"

using namespace motionloc;

namespace {

DetectionRecord at_pixel(std::size_t frame, double row, double col, Shape shape, double confidence = 0.0) {
    return make_record(frame, {{to_normalized(row, shape.height), to_normalized(col, shape.width)}, confidence}, shape);
}

FrameStore random_video(std::size_t n, Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    std::vector<ImageTensor> frames;
    for (std::size_t t = 0; t < n; ++t) {
        ImageTensor img(shape.height, shape.width, 3);
        for (auto& v : img.data()) v = u(rng);
        frames.push_back(std::move(img));
    }
    return FrameStore(std::move(frames), 30.0, "random", VideoLabel::unlabeled);
}

EncoderParams small_params(Shape shape) {
    EncoderConfig arch;
    arch.height = shape.height;
    arch.width = shape.width;
    arch.blocks = 1;
    arch.channels = 4;
    return init_params(arch, 8);
}

const Shape kShape{120, 160};  // diagonal 200

}  // namespace

TEST(Detection, OneRecordPerFrameInOrder) {
    const Shape s{20, 24};
    const auto video = random_video(9, s, 1);
    const auto params = small_params(s);
    const auto recs = run_detection(params, video, 3);
    ASSERT_EQ(recs.size(), 9u);
    for (std::size_t t = 0; t < recs.size(); ++t) {
        EXPECT_EQ(recs[t].frame, t);
        EXPECT_EQ(recs[t], make_record(t, detect(params, video[t]), s));
        EXPECT_DOUBLE_EQ(recs[t].row, to_pixel(recs[t].z.row, s.height));
        EXPECT_DOUBLE_EQ(recs[t].col, to_pixel(recs[t].z.col, s.width));
    }
    EXPECT_EQ(run_detection(params, video, 1), recs);
}

TEST(Detection, PermutingFramesPermutesRecords) {
    const Shape s{16, 20};
    const auto video = random_video(12, s, 2);
    const auto params = small_params(s);
    const auto base = run_detection(params, video);
    std::vector<std::size_t> perm(video.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
    const auto shuffled = run_detection(params, video.select(perm));
    for (std::size_t i = 0; i < perm.size(); ++i) {
        EXPECT_EQ(shuffled[i].z, base[perm[i]].z);
        EXPECT_EQ(shuffled[i].confidence, base[perm[i]].confidence);
    }
}

TEST(Detection, ShapeMismatchRejected) {
    const auto params = small_params({16, 20});
    EXPECT_THROW(run_detection(params, random_video(2, {16, 21}, 4)), EvaluationError);
}

TEST(Metrics, ClosedForms) {
    AnnotationSet truth{kShape, {{0, {50.0, 40.0, true}}}};
    auto r = normalized_error({at_pixel(0, 40.0, 50.0, kShape)}, truth, kShape);
    EXPECT_NEAR(r.normalized_error, 0.0, 1e-12);

    r = normalized_error({at_pixel(0, 44.0, 53.0, kShape)}, truth, kShape);
    EXPECT_NEAR(r.normalized_error, 6.25e-4, 1e-12);
    EXPECT_NEAR(r.pixel_rmse, 5.0, 1e-9);

    truth.entries = {{0, {10.0, 10.0, true}}, {1, {10.0, 10.0, true}}, {2, {10.0, 10.0, true}}};
    r = normalized_error({at_pixel(0, 10.0, 10.0, kShape), at_pixel(1, 13.0, 14.0, kShape),
                          at_pixel(2, 16.0, 18.0, kShape)},
                         truth, kShape);
    EXPECT_NEAR(r.normalized_error, 125.0 / 3.0 / 40000.0, 1e-12);
    EXPECT_EQ(r.num_evaluated, 3);
    ASSERT_EQ(r.per_frame.size(), 3u);
    EXPECT_NEAR(r.per_frame[2].pixel_error, 10.0, 1e-9);
}

TEST(Metrics, InvisibleFramesExcludedAndNoOverlapRejected) {
    AnnotationSet truth{kShape, {{0, {10.0, 10.0, true}}, {1, {500.0, -80.0, false}}}};
    const std::vector recs{at_pixel(0, 10.0, 10.0, kShape), at_pixel(1, 60.0, 60.0, kShape)};
    const auto r = normalized_error(recs, truth, kShape);
    EXPECT_EQ(r.num_evaluated, 1);
    EXPECT_NEAR(r.normalized_error, 0.0, 1e-12);
    EXPECT_FALSE(r.presence_accuracy.has_value());

    AnnotationSet elsewhere{kShape, {{7, {10.0, 10.0, true}}}};
    EXPECT_THROW(normalized_error(recs, elsewhere, kShape), EvaluationError);
}

TEST(Metrics, PresenceAccuracyNeedsBothLabels) {
    AnnotationSet truth{kShape, {{0, {10, 10, true}}, {1, {10, 10, true}}, {2, {0, 0, false}}, {3, {0, 0, false}}}};
    const std::vector recs{at_pixel(0, 10, 10, kShape, 3.0), at_pixel(1, 10, 10, kShape, 0.5),
                           at_pixel(2, 0, 0, kShape, 0.2), at_pixel(3, 0, 0, kShape, 0.9)};
    const auto r = normalized_error(recs, truth, kShape, 1.0);
    ASSERT_TRUE(r.presence_accuracy.has_value());
    EXPECT_DOUBLE_EQ(*r.presence_accuracy, 0.75);
}

TEST(Metrics, InvariantUnderUniformRescaling) {
    const Shape small{60, 80}, big{120, 160};
    AnnotationSet truth{small, {{0, {10.0, 20.0, true}}, {1, {30.5, 5.25, true}}}};
    const auto a = normalized_error({at_pixel(0, 23.0, 12.0, small), at_pixel(1, 7.0, 28.0, small)}, truth, small);
    // Pixel p at scale 1 corresponds to 2p + 0.5 at scale 2 (centers at integers).
    AnnotationSet truth2{big, {{0, {20.5, 40.5, true}}, {1, {61.5, 11.0, true}}}};
    const auto b = normalized_error({at_pixel(0, 46.5, 24.5, big), at_pixel(1, 14.5, 56.5, big)}, truth2, big);
    EXPECT_NEAR(a.normalized_error, b.normalized_error, 1e-12);
    const auto c = normalized_error({at_pixel(0, 23.0, 12.0, small), at_pixel(1, 7.0, 28.0, small)}, truth, small);
    EXPECT_EQ(a.normalized_error, c.normalized_error);
}

TEST(Metrics, AnnotationsAtOtherResolutionAreRescaled) {
    AnnotationSet truth{{60, 80}, {{0, {9.5, 19.5, true}}}};
    const auto r = normalized_error({at_pixel(0, 39.5, 19.5, kShape)}, truth, kShape);
    EXPECT_NEAR(r.normalized_error, 0.0, 1e-12);
}

TEST(Metrics, TextFormat) {
    AnnotationSet truth{kShape, {{0, {50.0, 40.0, true}}}};
    const auto r = normalized_error({at_pixel(0, 44.0, 53.0, kShape)}, truth, kShape);
    std::ostringstream out;
    write_metrics(r, out);
    const auto text = out.str();
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    ASSERT_EQ(line.rfind("normalized_error: ", 0), 0u) << text;
    EXPECT_NEAR(std::stod(line.substr(18)), 6.25e-4, 1e-15);
    const auto csv = text.find("\n\nframe,pixel_error,normalized_error\n0,5,");
    EXPECT_NE(csv, std::string::npos) << text;
}

TEST(Calibration, Midpoint) {
    const auto c = calibrate_presence_threshold({2.0, 2.0, 2.0}, {0.0, 0.0});
    EXPECT_DOUBLE_EQ(c.threshold, 1.0);
    EXPECT_TRUE(c.reliable);
    EXPECT_DOUBLE_EQ(c.positive_std, 0.0);
    const auto d = calibrate_presence_threshold({1.0, 3.0}, {0.0});
    EXPECT_DOUBLE_EQ(d.positive_std, 1.0);
    EXPECT_DOUBLE_EQ(d.threshold, 1.0);
}

TEST(Calibration, IdenticalDistributionsUnreliable) {
    const std::vector v{0.3, 0.7, 1.1};
    const auto c = calibrate_presence_threshold(v, v);
    EXPECT_FALSE(c.reliable);
    EXPECT_NEAR(c.threshold, 0.7, 1e-12);
    EXPECT_THROW(calibrate_presence_threshold({}, v), EvaluationError);
}

namespace {

// Detector reading a pixel position painted into channel 0/1 of the frame.
Location painted(const ImageTensor& img) {
    return {{static_cast<double>(img.at(0, 0, 0)), static_cast<double>(img.at(0, 0, 1))}, 1.0};
}

FrameStore demo(std::vector<std::pair<double, double>> z) {
    std::vector<ImageTensor> frames;
    for (auto [r, c] : z) {
        ImageTensor img(40, 40, 3);
        img.at(0, 0, 0) = static_cast<float>(r);
        img.at(0, 0, 1) = static_cast<float>(c);
        frames.push_back(std::move(img));
    }
    return FrameStore(std::move(frames), 30.0, "demo", VideoLabel::unlabeled);
}

}  // namespace

TEST(Demos, StillObjectIsIrrelevant) {
    const auto s = summarize_demonstrations({painted}, {demo({{0.25, -0.25}})});
    ASSERT_EQ(s.objects.size(), 1u);
    EXPECT_DOUBLE_EQ(s.objects[0].mean_displacement, 0.0);
    EXPECT_FALSE(s.objects[0].relevant);
    EXPECT_DOUBLE_EQ(s.objects[0].last_row_std, 0.0);
}

TEST(Demos, TenPixelBoundaryIsInclusive) {
    // 40 px frames: 0.5 in normalized units is 10 px.
    const std::vector demos{demo({{-0.25, 0.0}, {0.0, 0.0}, {0.25, 0.0}}), demo({{0.0, -0.5}, {0.0, 0.0}})};
    const auto s = summarize_demonstrations({painted}, demos);
    EXPECT_DOUBLE_EQ(s.objects[0].mean_displacement, 10.0);
    EXPECT_TRUE(s.objects[0].relevant);
    EXPECT_FALSE(summarize_demonstrations({painted}, demos, 10.5).objects[0].relevant);
}

TEST(Demos, RelevanceInvariantUnderDemoOrder) {
    std::vector<FrameStore> demos{demo({{0.0, 0.0}, {0.3, 0.1}}), demo({{0.1, 0.0}, {0.12, 0.05}}),
                                  demo({{-0.5, 0.2}, {0.0, 0.0}}), demo({{0.4, 0.4}, {0.4, 0.45}})};
    const auto ref = summarize_demonstrations({painted}, demos, 6.0).objects[0];
    std::vector<std::size_t> idx{0, 1, 2, 3};
    while (std::next_permutation(idx.begin(), idx.end())) {
        std::vector<FrameStore> p;
        for (auto i : idx) p.push_back(demos[i]);
        const auto o = summarize_demonstrations({painted}, p, 6.0).objects[0];
        EXPECT_EQ(o.relevant, ref.relevant);
        EXPECT_NEAR(o.mean_displacement, ref.mean_displacement, 1e-12);
        EXPECT_NEAR(o.last_row_std, ref.last_row_std, 1e-12);
    }
}

TEST(Demos, EmptyInputsRejected) {
    EXPECT_THROW(summarize_demonstrations(std::vector<Detector>{painted}, {}), EvaluationError);
    EXPECT_THROW(summarize_demonstrations(std::vector<Detector>{}, {demo({{0, 0}})}), EvaluationError);
}

TEST(Demos, EndpointStatistics) {
    const Shape s{40, 40};
    const std::vector first{at_pixel(0, 0, 0, s), at_pixel(0, 0, 0, s)};
    const std::vector last{at_pixel(1, 12, 16, s), at_pixel(1, 14, 16, s)};
    const auto o = summarize_endpoints(first, last);
    EXPECT_NEAR(o.last_row_mean, 13.0, 1e-12);
    EXPECT_NEAR(o.last_row_std, 1.0, 1e-12);
    EXPECT_NEAR(o.last_col_std, 0.0, 1e-12);
    EXPECT_NEAR(o.mean_displacement, (20.0 + std::hypot(14.0, 16.0)) / 2.0, 1e-12);
    EXPECT_TRUE(o.relevant);
}
