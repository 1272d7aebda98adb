#include "motionloc/config_json.hpp"

#include <limits>
#include <string>

namespace motionloc {

using nlohmann::json;

void to_json(json& j, const EncoderConfig& c) {
    j = json{{"height", c.height},   {"width", c.width},   {"in_channels", c.in_channels},
             {"blocks", c.blocks},   {"channels", c.channels}, {"kernel", c.kernel},
             {"bn_momentum", c.bn_momentum}, {"bn_epsilon", c.bn_epsilon}};
}

void from_json(const json& j, EncoderConfig& c) {
    j.at("height").get_to(c.height);
    j.at("width").get_to(c.width);
    j.at("in_channels").get_to(c.in_channels);
    j.at("blocks").get_to(c.blocks);
    j.at("channels").get_to(c.channels);
    j.at("kernel").get_to(c.kernel);
    j.at("bn_momentum").get_to(c.bn_momentum);
    j.at("bn_epsilon").get_to(c.bn_epsilon);
}

void to_json(json& j, const LossWeights& w) {
    j = json{{"w_variation", w.variation}, {"w_slowness", w.slowness}, {"w_presence", w.presence},
             {"beta", w.beta},             {"d_min", w.d_min},         {"d_max", w.d_max},
             {"noise_sigma", w.noise_sigma}};
}

void from_json(const json& j, LossWeights& w) {
    j.at("w_variation").get_to(w.variation);
    j.at("w_slowness").get_to(w.slowness);
    j.at("w_presence").get_to(w.presence);
    j.at("beta").get_to(w.beta);
    j.at("d_min").get_to(w.d_min);
    j.at("d_max").get_to(w.d_max);
    j.at("noise_sigma").get_to(w.noise_sigma);
}

void to_json(json& j, const TrainingConfig& c) {
    j = json{{"batch_size", c.batch_size},
             {"restarts", c.restarts},
             {"warmup_steps", c.warmup_steps},
             {"total_steps", c.total_steps},
             {"selection_window", c.selection_window},
             {"max_step_retries", c.max_step_retries},
             {"learning_rate", c.learning_rate},
             {"adam_beta1", c.adam_beta1},
             {"adam_beta2", c.adam_beta2},
             {"adam_epsilon", c.adam_epsilon},
             {"seed", c.seed},
             {"restart_seeds", c.restart_seeds},
             {"weights", c.weights}};
}

void from_json(const json& j, TrainingConfig& c) {
    j.at("batch_size").get_to(c.batch_size);
    j.at("restarts").get_to(c.restarts);
    j.at("warmup_steps").get_to(c.warmup_steps);
    j.at("total_steps").get_to(c.total_steps);
    j.at("selection_window").get_to(c.selection_window);
    j.at("max_step_retries").get_to(c.max_step_retries);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("adam_beta1").get_to(c.adam_beta1);
    j.at("adam_beta2").get_to(c.adam_beta2);
    j.at("adam_epsilon").get_to(c.adam_epsilon);
    j.at("seed").get_to(c.seed);
    j.at("restart_seeds").get_to(c.restart_seeds);
    j.at("weights").get_to(c.weights);
}

void to_json(json& j, const LossBreakdown& b) { j = json::array({b.variation, b.slowness, b.presence, b.total}); }

void from_json(const json& j, LossBreakdown& b) {
    if (!j.is_array() || j.size() != 4) throw json::type_error::create(302, "loss entry must have 4 numbers", &j);
    b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(json& j, const RestartRecord& r) {
    j = json{{"seed", r.seed}, {"warmup_loss", r.warmup_loss}, {"diverged", r.diverged}};
}

void from_json(const json& j, RestartRecord& r) {
    j.at("seed").get_to(r.seed);
    j.at("diverged").get_to(r.diverged);
    // Non-finite losses serialize as null.
    r.warmup_loss = j.at("warmup_loss").is_null() ? std::numeric_limits<double>::infinity()
                                                  : j.at("warmup_loss").get<double>();
}

void to_json(json& j, const SyntheticSpec& s) {
    j = json{{"height", s.height},
             {"width", s.width},
             {"num_frames", s.num_frames},
             {"object_radius", s.object_radius},
             {"trajectory", s.trajectory == Trajectory::lissajous ? "lissajous" : "random_walk"},
             {"background", s.background == Background::smoothed_noise ? "smoothed_noise" : "checkerboard"},
             {"distractor", s.distractor},
             {"camera_jitter_px", s.camera_jitter_px},
             {"seed", s.seed},
             {"motion_seed", s.motion_seed}};
}

void from_json(const json& j, SyntheticSpec& s) {
    j.at("height").get_to(s.height);
    j.at("width").get_to(s.width);
    j.at("num_frames").get_to(s.num_frames);
    j.at("object_radius").get_to(s.object_radius);
    s.trajectory = j.at("trajectory").get<std::string>() == "random_walk" ? Trajectory::random_walk
                                                                          : Trajectory::lissajous;
    s.background = j.at("background").get<std::string>() == "checkerboard" ? Background::checkerboard
                                                                           : Background::smoothed_noise;
    j.at("distractor").get_to(s.distractor);
    j.at("camera_jitter_px").get_to(s.camera_jitter_px);
    j.at("seed").get_to(s.seed);
    j.at("motion_seed").get_to(s.motion_seed);
}

}  // namespace motionloc
