#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "motionloc/annotations.hpp"
#include "motionloc/data.hpp"

namespace motionloc {

enum class Trajectory { lissajous, random_walk };
enum class Background { smoothed_noise, checkerboard };

/// Parameters of a generated positive/negative video pair.
///
/// `seed` fixes the scene (background texture and colors); `motion_seed`
/// fixes the object path, distractor path and camera shake. Two specs that
/// differ only in motion_seed show the same scene with different motion,
/// which is how held-out test videos are made.
struct SyntheticSpec {
    int height = 120;
    int width = 160;
    int num_frames = 1200;
    double object_radius = 6.0;
    Trajectory trajectory = Trajectory::lissajous;
    Background background = Background::smoothed_noise;
    bool distractor = false;
    double camera_jitter_px = 0.0;
    std::uint64_t seed = 1;
    std::uint64_t motion_seed = 0;  ///< 0: derived from seed

    void validate(int d_max = 100) const;
};

struct PixelPoint {
    double row = 0.0;
    double col = 0.0;
};

struct SyntheticPair {
    FrameStore positive;
    FrameStore negative;
    AnnotationSet truth;  ///< disc center for every positive frame
};

/// Generates the pair. Deterministic per spec.
SyntheticPair generate_synthetic_pair(const SyntheticSpec& spec);

/// Object path (image coordinates, camera motion included) used for the
/// positive video of `spec`, rounded to 1/1000 px.
std::vector<PixelPoint> object_path(const SyntheticSpec& spec);

/// Renders the scene of `spec` with the disc at each point of `path`
/// (no camera motion, no distractor). Used to stage demonstrations.
FrameStore render_object_path(const SyntheticSpec& spec, const std::vector<PixelPoint>& path);

/// Writes positive/, negative/ PNG directories and truth.csv under `dir`.
void write_synthetic_pair(const SyntheticPair& pair, const std::filesystem::path& dir);

}  // namespace motionloc
