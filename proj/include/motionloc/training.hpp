#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "motionloc/data.hpp"
#include "motionloc/encoder.hpp"
#include "motionloc/losses.hpp"

namespace motionloc {

struct TrainingConfig {
    int batch_size = 10;      ///< b
    int restarts = 50;        ///< m
    int warmup_steps = 100;   ///< steps each restart runs before selection
    int total_steps = 10000;  ///< steps of the selected run, warmup included
    int selection_window = 20;
    int max_step_retries = 5;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    /// Explicit restart seeds; when empty they are derived from `seed`.
    std::vector<std::uint64_t> restart_seeds;
    LossWeights weights;

    void validate() const;
    /// The seeds of all restarts, in run order.
    std::vector<std::uint64_t> resolved_restart_seeds() const;

    friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Frame indices of one minibatch. Frames stay in their stores.
struct BatchSample {
    std::vector<std::pair<std::size_t, std::size_t>> consecutive;  ///< (t, t+1), positive video
    std::vector<std::pair<std::size_t, std::size_t>> distant;      ///< (t, t+d), positive video
    std::vector<std::size_t> negatives;                            ///< negative video
    std::uint64_t noise_seed = 0;                                  ///< drives the location noise

    friend bool operator==(const BatchSample&, const BatchSample&) = default;
};

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Draws b consecutive pairs, b pairs d in [d_min, d_max] apart (d uniform,
/// then the start uniform over valid indices) and b distinct negative frames.
BatchSample sample_minibatch(const FrameStore& positive, const FrameStore& negative, const TrainingConfig& config,
                             std::mt19937_64& rng);

/// First and second moment estimates mirroring the parameter layout.
struct AdamState {
    std::vector<std::vector<float>> first;
    std::vector<std::vector<float>> second;
    std::int64_t step = 0;

    static AdamState for_params(const EncoderParams& params);
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct StepResult {
    LossBreakdown loss;             ///< evaluated before the update
    std::size_t presence_pairs = 0; ///< (positive, negative) map pairs averaged by the presence loss
    std::size_t frames = 0;         ///< frames pushed through the encoder
    bool applied = false;           ///< false when the loss or gradient was not finite
};

/// Loss and gradient of one minibatch without touching `params`' trainable
/// arrays. Running statistics of `params` are updated by the train-mode pass.
struct BatchEvaluation {
    StepResult result;
    EncoderParams gradient;
};

BatchEvaluation evaluate_batch(EncoderParams& params, const FrameStore& positive, const FrameStore& negative,
                               const BatchSample& batch, const LossWeights& weights);

/// One Adam update of all trainable parameters from the combined loss.
/// On a non-finite loss or gradient nothing is modified and `applied` is false.
StepResult training_step(EncoderParams& params, AdamState& optimizer, const FrameStore& positive,
                         const FrameStore& negative, const BatchSample& batch, const TrainingConfig& config);

/// Optimizer, sampler and history of one initialization.
class TrainingRun {
public:
    TrainingRun(const EncoderConfig& architecture, const TrainingConfig& config, std::uint64_t seed);

    /// Advances one step, resampling up to max_step_retries times when a
    /// batch produces a non-finite update. Returns false once diverged.
    bool step(const FrameStore& positive, const FrameStore& negative);

    std::uint64_t seed() const { return seed_; }
    bool diverged() const { return diverged_; }
    int steps_done() const { return static_cast<int>(history_.size()); }
    const EncoderParams& params() const { return params_; }
    const AdamState& optimizer() const { return optimizer_; }
    const std::vector<LossBreakdown>& history() const { return history_; }
    const StepResult& last_result() const { return last_; }

    /// Mean total loss over the last `window` recorded steps.
    double recent_loss(int window) const;

private:
    TrainingConfig config_;
    std::uint64_t seed_;
    EncoderParams params_;
    AdamState optimizer_;
    std::mt19937_64 rng_;
    std::vector<LossBreakdown> history_;
    StepResult last_;
    bool diverged_ = false;
};

struct RestartRecord {
    std::uint64_t seed = 0;
    double warmup_loss = 0.0;  ///< mean total loss over the selection window
    bool diverged = false;

    friend bool operator==(const RestartRecord&, const RestartRecord&) = default;
};

struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    EncoderParams params;
    TrainingConfig config;
    int step = 0;
    std::vector<LossBreakdown> loss_history;
    std::uint64_t selected_seed = 0;
    std::vector<RestartRecord> restarts;
    std::uint32_t format_version = kFormatVersion;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct ProgressEvent {
    enum class Phase { warmup, main } phase;
    std::uint64_t seed;
    int step;
    LossBreakdown loss;
};
using ProgressCallback = std::function<void(const ProgressEvent&)>;

/// Runs every restart for warmup_steps, keeps the one with the lowest mean
/// total loss over its final selection_window warmup steps (ties go to the
/// smaller seed) and continues it to total_steps.
Checkpoint train_with_restarts(const FrameStore& positive, const FrameStore& negative,
                               const EncoderConfig& architecture, const TrainingConfig& config,
                               const ProgressCallback& progress = {});

/// Index of the restart the selection rule picks.
std::size_t select_restart(const std::vector<RestartRecord>& records);

}  // namespace motionloc
