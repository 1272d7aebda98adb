#include <gtest/gtest.h>

#include <cmath>

#include "motionloc/synthetic.hpp"
#include "temp_dir.hpp"

using namespace motionloc;

namespace {

SyntheticSpec small_spec() {
    SyntheticSpec s;
    s.height = 48;
    s.width = 64;
    s.num_frames = 160;
    s.object_radius = 4.0;
    s.seed = 5;
    return s;
}

double fraction_separated(const AnnotationSet& truth, int offset, double min_px) {
    const int n = static_cast<int>(truth.entries.size());
    int ok = 0;
    for (int t = 0; t + offset < n; ++t) {
        const auto& a = truth.entries.at(t);
        const auto& b = truth.entries.at(t + offset);
        ok += std::hypot(a.x - b.x, a.y - b.y) > min_px ? 1 : 0;
    }
    return static_cast<double>(ok) / (n - offset);
}

double path_length(const AnnotationSet& truth) {
    double len = 0.0;
    for (std::size_t t = 1; t < truth.entries.size(); ++t) {
        const auto& a = truth.entries.at(static_cast<int>(t) - 1);
        const auto& b = truth.entries.at(static_cast<int>(t));
        len += std::hypot(a.x - b.x, a.y - b.y);
    }
    return len;
}

}  // namespace

TEST(Synthetic, DeterministicForSameSettings) {
    auto spec = small_spec();
    spec.distractor = true;
    spec.camera_jitter_px = 1.5;
    const auto a = generate_synthetic_pair(spec);
    const auto b = generate_synthetic_pair(spec);
    EXPECT_EQ(a.positive.frames(), b.positive.frames());
    EXPECT_EQ(a.negative.frames(), b.negative.frames());
    EXPECT_EQ(a.truth, b.truth);
}

TEST(Synthetic, NegativeMatchesPositiveAwayFromDisc) {
    const auto spec = small_spec();
    const auto pair = generate_synthetic_pair(spec);
    ASSERT_EQ(pair.positive.size(), pair.negative.size());
    for (std::size_t t = 0; t < pair.positive.size(); t += 7) {
        const auto& c = pair.truth.entries.at(static_cast<int>(t));
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                if (std::hypot(y - c.y, x - c.x) <= spec.object_radius + 2.0) continue;
                for (int ch = 0; ch < 3; ++ch)
                    ASSERT_EQ(pair.positive[t].at(y, x, ch), pair.negative[t].at(y, x, ch)) << t << " " << y << " " << x;
            }
    }
}

TEST(Synthetic, TruthLandsInsideDisc) {
    for (bool jitter : {false, true}) {
        auto spec = small_spec();
        spec.camera_jitter_px = jitter ? 2.0 : 0.0;
        spec.distractor = jitter;
        const auto pair = generate_synthetic_pair(spec);
        for (std::size_t t = 0; t < pair.positive.size(); ++t) {
            const auto& c = pair.truth.entries.at(static_cast<int>(t));
            const int y = static_cast<int>(std::lround(c.y));
            const int x = static_cast<int>(std::lround(c.x));
            // Disc color is (0.95, 0.18, 0.12) before centering.
            EXPECT_NEAR(pair.positive[t].at(y, x, 0) + 0.5f, 0.95f, 0.01f);
            EXPECT_NEAR(pair.positive[t].at(y, x, 2) + 0.5f, 0.12f, 0.01f);
        }
    }
}

TEST(Synthetic, TruthIsRoundedPathAndLabeledEveryFrame) {
    const auto spec = small_spec();
    const auto pair = generate_synthetic_pair(spec);
    const auto path = object_path(spec);
    ASSERT_EQ(pair.truth.entries.size(), static_cast<std::size_t>(spec.num_frames));
    EXPECT_EQ(pair.truth.resolution, (Shape{48, 64}));
    for (int t = 0; t < spec.num_frames; ++t) {
        const auto& a = pair.truth.entries.at(t);
        EXPECT_EQ(a.x, path[t].col);
        EXPECT_EQ(a.y, path[t].row);
        EXPECT_TRUE(a.visible);
        EXPECT_NEAR(a.x * 1000.0, std::round(a.x * 1000.0), 1e-6);
    }
}

TEST(Synthetic, LissajousSeparationAtOffsetFifty) {
    for (auto [h, w] : {std::pair{120, 160}, std::pair{64, 85}}) {
        for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
            SyntheticSpec spec;
            spec.height = h;
            spec.width = w;
            spec.object_radius = h / 20.0;
            spec.seed = seed;
            const auto path = object_path(spec);
            AnnotationSet truth;
            for (int t = 0; t < spec.num_frames; ++t) truth.entries[t] = {path[t].col, path[t].row, true};
            EXPECT_GE(fraction_separated(truth, 50, 10.0), 0.8) << h << "x" << w << " seed " << seed;
        }
    }
}

TEST(Synthetic, PathLengthAtLeastTwoDiagonals) {
    for (auto traj : {Trajectory::lissajous, Trajectory::random_walk}) {
        for (std::uint64_t seed : {1u, 9u}) {
            auto spec = small_spec();
            spec.trajectory = traj;
            spec.seed = seed;
            const auto pair = generate_synthetic_pair(spec);
            EXPECT_GE(path_length(pair.truth), 2.0 * std::hypot(spec.height, spec.width));
        }
    }
}

TEST(Synthetic, MotionSeedKeepsSceneChangesMotion) {
    auto spec = small_spec();
    auto other = spec;
    other.motion_seed = 99;
    const auto a = generate_synthetic_pair(spec);
    const auto b = generate_synthetic_pair(other);
    EXPECT_NE(a.truth, b.truth);
    EXPECT_EQ(a.negative[0], b.negative[0]);
}

TEST(Synthetic, CheckerboardAndSmoothedBackgroundsDiffer) {
    auto spec = small_spec();
    const auto noise = generate_synthetic_pair(spec);
    spec.background = Background::checkerboard;
    const auto board = generate_synthetic_pair(spec);
    EXPECT_NE(noise.negative[0], board.negative[0]);
}

TEST(Synthetic, DistractorMovesInBothVideos) {
    auto spec = small_spec();
    const auto plain = generate_synthetic_pair(spec);
    spec.distractor = true;
    const auto busy = generate_synthetic_pair(spec);
    int changed_pos = 0, changed_neg = 0;
    for (std::size_t t = 0; t < plain.negative.size(); t += 10) {
        changed_pos += plain.positive[t] != busy.positive[t];
        changed_neg += plain.negative[t] != busy.negative[t];
    }
    EXPECT_GT(changed_pos, 0);
    EXPECT_GT(changed_neg, 0);
    EXPECT_NE(busy.negative[0], busy.negative[40]);
}

TEST(Synthetic, InvalidSpecsRejected) {
    auto spec = small_spec();
    spec.object_radius = 12.0;  // min(48, 64) / 4
    EXPECT_THROW(generate_synthetic_pair(spec), std::invalid_argument);
    spec = small_spec();
    spec.num_frames = 101;
    EXPECT_THROW(spec.validate(100), std::invalid_argument);
    EXPECT_NO_THROW(small_spec().validate(100));
    spec = small_spec();
    spec.camera_jitter_px = -1.0;
    EXPECT_THROW(generate_synthetic_pair(spec), std::invalid_argument);
}

TEST(Synthetic, WrittenPairReloads) {
    TempDir dir;
    auto spec = small_spec();
    spec.num_frames = 20;
    const auto pair = generate_synthetic_pair(spec);
    write_synthetic_pair(pair, dir.path());
    const auto pos = ingest_video(dir / "positive", {48, 64});
    ASSERT_EQ(pos.size(), 20u);
    for (std::size_t t = 0; t < pos.size(); ++t) EXPECT_EQ(pos[t], pair.positive[t]);
    EXPECT_EQ(load_annotations(dir / "truth.csv"), pair.truth);
}

TEST(Synthetic, RenderedPathsShareTheTrainingScene) {
    const auto spec = small_spec();
    const auto pair = generate_synthetic_pair(spec);
    const std::vector<PixelPoint> path{{10.0, 12.0}, {30.0, 40.0}};
    const auto demo = render_object_path(spec, path);
    ASSERT_EQ(demo.size(), 2u);
    EXPECT_NEAR(demo[1].at(30, 40, 0) + 0.5f, 0.95f, 0.01f);
    // Far from the disc the demo shows the negative video's background.
    EXPECT_EQ(demo[1].at(5, 60, 1), pair.negative[0].at(5, 60, 1));
}
