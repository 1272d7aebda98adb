#include "motionloc/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <unordered_set>

namespace motionloc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::mt19937_64 sampler_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5A3Du};
    return std::mt19937_64(seq);
}

bool finite(const LossBreakdown& b) {
    return std::isfinite(b.variation) && std::isfinite(b.slowness) && std::isfinite(b.presence) &&
           std::isfinite(b.total);
}

bool finite(const EncoderParams& p) {
    for (const auto& a : p.arrays())
        for (float v : a.values)
            if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

void TrainingConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (restarts < 1) throw std::invalid_argument("restarts must be at least 1");
    if (warmup_steps < 1 || warmup_steps > total_steps)
        throw std::invalid_argument("warmup_steps must be in [1, total_steps]");
    if (selection_window < 1) throw std::invalid_argument("selection_window must be at least 1");
    if (max_step_retries < 0) throw std::invalid_argument("max_step_retries must be non-negative");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!restart_seeds.empty() && restart_seeds.size() != static_cast<std::size_t>(restarts))
        throw std::invalid_argument("restart_seeds must list exactly `restarts` seeds");
    weights.validate();
}

std::vector<std::uint64_t> TrainingConfig::resolved_restart_seeds() const {
    if (!restart_seeds.empty()) return restart_seeds;
    std::vector<std::uint64_t> seeds(restarts);
    for (int k = 0; k < restarts; ++k) seeds[k] = splitmix64(seed * 1000003ULL + static_cast<std::uint64_t>(k));
    return seeds;
}

BatchSample sample_minibatch(const FrameStore& positive, const FrameStore& negative, const TrainingConfig& config,
                             std::mt19937_64& rng) {
    const auto& w = config.weights;
    const std::size_t b = static_cast<std::size_t>(config.batch_size);
    const std::size_t min_positive = static_cast<std::size_t>(w.d_max) + 2;
    if (positive.size() < min_positive)
        throw std::invalid_argument("positive video has " + std::to_string(positive.size()) +
                                    " frames; at least d_max + 2 = " + std::to_string(min_positive) + " are required");
    if (negative.size() < b)
        throw std::invalid_argument("negative video has " + std::to_string(negative.size()) +
                                    " frames; at least b = " + std::to_string(b) + " are required");

    BatchSample s;
    const std::size_t n = positive.size();
    std::uniform_int_distribution<std::size_t> start(0, n - 2);
    for (std::size_t k = 0; k < b; ++k) {
        const std::size_t t = start(rng);
        s.consecutive.emplace_back(t, t + 1);
    }
    std::uniform_int_distribution<int> offset(w.d_min, w.d_max);
    for (std::size_t k = 0; k < b; ++k) {
        const auto d = static_cast<std::size_t>(offset(rng));
        std::uniform_int_distribution<std::size_t> t_dist(0, n - 1 - d);
        const std::size_t t = t_dist(rng);
        s.distant.emplace_back(t, t + d);
    }
    std::uniform_int_distribution<std::size_t> neg(0, negative.size() - 1);
    std::unordered_set<std::size_t> used;
    while (s.negatives.size() < b) {
        const std::size_t t = neg(rng);
        if (used.insert(t).second) s.negatives.push_back(t);
    }
    s.noise_seed = rng();
    return s;
}

AdamState AdamState::for_params(const EncoderParams& params) {
    AdamState s;
    for (const auto& a : params.arrays()) {
        s.first.emplace_back(a.values.size(), 0.0f);
        s.second.emplace_back(a.values.size(), 0.0f);
    }
    return s;
}

BatchEvaluation evaluate_batch(EncoderParams& params, const FrameStore& positive, const FrameStore& negative,
                               const BatchSample& batch, const LossWeights& weights) {
    const std::size_t nc = batch.consecutive.size();
    const std::size_t nd = batch.distant.size();
    const std::size_t nn = batch.negatives.size();
    if (nc == 0 || nd == 0 || nn == 0) throw std::invalid_argument("evaluate_batch: incomplete minibatch");

    // Layout: consecutive pairs, distant pairs, negatives.
    std::vector<ImageTensor> frames;
    frames.reserve(2 * nc + 2 * nd + nn);
    for (auto [a, b] : batch.consecutive) {
        frames.push_back(positive.at(a));
        frames.push_back(positive.at(b));
    }
    for (auto [a, b] : batch.distant) {
        frames.push_back(positive.at(a));
        frames.push_back(positive.at(b));
    }
    for (auto t : batch.negatives) frames.push_back(negative.at(t));

    ForwardTrace trace;
    const std::vector<ActivationMap> maps = forward_train(params, frames, &trace);

    BatchEvaluation eval;
    eval.result.frames = frames.size();
    for (const auto& m : maps) {
        if (std::all_of(m.values.begin(), m.values.end(), [](double v) { return std::isfinite(v); })) continue;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        eval.result.loss = {nan, nan, nan, nan};
        eval.gradient = params.zeros_like();
        return eval;
    }

    const std::size_t located = 2 * nc + 2 * nd;
    std::vector<ProbabilityMap> probs;
    std::vector<Coord> z(located), noisy(located);
    probs.reserve(located);
    std::mt19937_64 noise_rng(batch.noise_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < located; ++i) {
        probs.push_back(spatial_softmax(maps[i]));
        z[i] = soft_argmax(probs[i]);
        noisy[i] = {z[i].row + weights.noise_sigma * noise(noise_rng), z[i].col + weights.noise_sigma * noise(noise_rng)};
    }

    std::vector<CoordPair> slow_pairs(nc), var_pairs(nd);
    for (std::size_t k = 0; k < nc; ++k) slow_pairs[k] = {noisy[2 * k], noisy[2 * k + 1]};
    for (std::size_t k = 0; k < nd; ++k) var_pairs[k] = {noisy[2 * nc + 2 * k], noisy[2 * nc + 2 * k + 1]};
    const PairLossResult slow = slowness_loss(slow_pairs);
    const PairLossResult var = variation_loss(var_pairs, weights.beta);

    const std::span<const ActivationMap> distant_maps(maps.data() + 2 * nc, 2 * nd);
    const std::span<const ActivationMap> negative_maps(maps.data() + located, nn);
    const PresenceLossResult pres = presence_loss(distant_maps, negative_maps);

    eval.result.loss = combined_loss(var.value, slow.value, pres.value, weights);
    eval.result.presence_pairs = pres.num_pairs;

    std::vector<Coord> grad_z(located);
    for (std::size_t k = 0; k < nc; ++k) {
        grad_z[2 * k] = {weights.slowness * slow.grad[k].first.row, weights.slowness * slow.grad[k].first.col};
        grad_z[2 * k + 1] = {weights.slowness * slow.grad[k].second.row, weights.slowness * slow.grad[k].second.col};
    }
    for (std::size_t k = 0; k < nd; ++k) {
        grad_z[2 * nc + 2 * k] = {weights.variation * var.grad[k].first.row, weights.variation * var.grad[k].first.col};
        grad_z[2 * nc + 2 * k + 1] = {weights.variation * var.grad[k].second.row,
                                      weights.variation * var.grad[k].second.col};
    }

    std::vector<ActivationMap> grad_maps;
    grad_maps.reserve(maps.size());
    for (std::size_t i = 0; i < located; ++i) grad_maps.push_back(soft_argmax_backward(probs[i], z[i], grad_z[i]));
    for (std::size_t i = 0; i < nn; ++i) grad_maps.push_back(ActivationMap(maps[i].height, maps[i].width));
    for (std::size_t k = 0; k < 2 * nd; ++k) {
        auto& g = grad_maps[2 * nc + k].values;
        const auto& p = pres.grad_positive[k].values;
        for (std::size_t q = 0; q < g.size(); ++q) g[q] += weights.presence * p[q];
    }
    for (std::size_t k = 0; k < nn; ++k) {
        auto& g = grad_maps[located + k].values;
        const auto& p = pres.grad_negative[k].values;
        for (std::size_t q = 0; q < g.size(); ++q) g[q] = weights.presence * p[q];
    }

    eval.gradient = backward(params, trace, grad_maps);
    eval.result.applied = finite(eval.result.loss) && finite(eval.gradient);
    return eval;
}

StepResult training_step(EncoderParams& params, AdamState& optimizer, const FrameStore& positive,
                         const FrameStore& negative, const BatchSample& batch, const TrainingConfig& config) {
    EncoderParams working = params;
    BatchEvaluation eval = evaluate_batch(working, positive, negative, batch, config.weights);
    if (!eval.result.applied) return eval.result;

    AdamState next = optimizer;
    if (next.first.size() != working.arrays().size()) next = AdamState::for_params(working);
    next.step += 1;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(next.step));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(next.step));
    auto& arrays = working.arrays();
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        if (!arrays[i].trainable) continue;
        auto& values = arrays[i].values;
        const auto& grad = eval.gradient.arrays()[i].values;
        auto& m = next.first[i];
        auto& v = next.second[i];
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double g = grad[k];
            const double mk = b1 * m[k] + (1.0 - b1) * g;
            const double vk = b2 * v[k] + (1.0 - b2) * g * g;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double update = config.learning_rate * (mk / correction1) / (std::sqrt(vk / correction2) + config.adam_epsilon);
            values[k] = static_cast<float>(values[k] - update);
        }
    }
    if (!finite(working)) {
        eval.result.applied = false;
        return eval.result;
    }
    params = std::move(working);
    optimizer = std::move(next);
    return eval.result;
}

TrainingRun::TrainingRun(const EncoderConfig& architecture, const TrainingConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      params_(init_params(architecture, seed)),
      optimizer_(AdamState::for_params(params_)),
      rng_(sampler_rng(seed)) {}

bool TrainingRun::step(const FrameStore& positive, const FrameStore& negative) {
    if (diverged_) return false;
    for (int attempt = 0; attempt <= config_.max_step_retries; ++attempt) {
        const BatchSample batch = sample_minibatch(positive, negative, config_, rng_);
        last_ = training_step(params_, optimizer_, positive, negative, batch, config_);
        if (last_.applied) {
            history_.push_back(last_.loss);
            return true;
        }
    }
    diverged_ = true;
    return false;
}

double TrainingRun::recent_loss(int window) const {
    if (history_.empty()) return std::numeric_limits<double>::infinity();
    const std::size_t n = std::min(history_.size(), static_cast<std::size_t>(std::max(window, 1)));
    double sum = 0.0;
    for (std::size_t k = history_.size() - n; k < history_.size(); ++k) sum += history_[k].total;
    return sum / static_cast<double>(n);
}

std::size_t select_restart(const std::vector<RestartRecord>& records) {
    std::size_t best = records.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.diverged || !std::isfinite(r.warmup_loss)) continue;
        if (best == records.size() || r.warmup_loss < records[best].warmup_loss ||
            (r.warmup_loss == records[best].warmup_loss && r.seed < records[best].seed))
            best = i;
    }
    return best;
}

Checkpoint train_with_restarts(const FrameStore& positive, const FrameStore& negative,
                               const EncoderConfig& architecture, const TrainingConfig& config,
                               const ProgressCallback& progress) {
    config.validate();
    architecture.validate();
    if (positive.shape() != architecture.shape() || negative.shape() != architecture.shape())
        throw std::invalid_argument("video frame shape does not match the encoder input shape");

    const auto seeds = config.resolved_restart_seeds();
    std::vector<RestartRecord> records;
    std::unique_ptr<TrainingRun> best;
    for (auto seed : seeds) {
        auto run = std::make_unique<TrainingRun>(architecture, config, seed);
        for (int s = 0; s < config.warmup_steps && run->step(positive, negative); ++s) {
            if (progress) progress({ProgressEvent::Phase::warmup, seed, run->steps_done(), run->history().back()});
        }
        RestartRecord rec{seed, run->recent_loss(config.selection_window), run->diverged()};
        records.push_back(rec);
        if (select_restart(records) == records.size() - 1) best = std::move(run);
    }
    if (!best) {
        std::string list;
        for (auto s : seeds) list += (list.empty() ? "" : ", ") + std::to_string(s);
        throw TrainingError("all restarts diverged (seeds: " + list + ")");
    }

    while (best->steps_done() < config.total_steps) {
        if (!best->step(positive, negative))
            throw TrainingError("selected restart (seed " + std::to_string(best->seed()) + ") diverged at step " +
                                std::to_string(best->steps_done()));
        if (progress) progress({ProgressEvent::Phase::main, best->seed(), best->steps_done(), best->history().back()});
    }

    Checkpoint ckpt;
    ckpt.params = best->params();
    ckpt.config = config;
    ckpt.step = best->steps_done();
    ckpt.loss_history = best->history();
    ckpt.selected_seed = best->seed();
    ckpt.restarts = std::move(records);
    return ckpt;
}

}  // namespace motionloc
