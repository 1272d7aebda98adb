#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "motionloc/encoder.hpp"

namespace motionloc {

/// Loss weights and shape parameters of the training objective.
struct LossWeights {
    double variation = 2.0;   ///< w_v
    double slowness = 10.0;   ///< w_s
    double presence = 1.0;    ///< w_p
    double beta = 10.0;       ///< distance scale of the variation loss
    int d_min = 50;           ///< smallest frame offset for variation pairs
    int d_max = 100;          ///< largest frame offset for variation pairs
    double noise_sigma = 1e-5;

    void validate() const;
    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
    double variation = 0.0;
    double slowness = 0.0;
    double presence = 0.0;
    double total = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// Two locations compared by a pair loss: (z_t, z_{t+d}).
struct CoordPair {
    Coord first;
    Coord second;
};

/// A loss over coordinate pairs together with its gradient for every pair.
struct PairLossResult {
    double value = 0.0;
    std::vector<CoordPair> grad;
};

/// Mean over pairs of exp(-beta * |z_{t+d} - z_t|). The gradient divides by
/// sqrt(|d|^2 + 1e-12) so it stays finite for coinciding pairs.
PairLossResult variation_loss(std::span<const CoordPair> pairs, double beta);

/// Mean squared distance over consecutive pairs.
PairLossResult slowness_loss(std::span<const CoordPair> pairs);

/// Presence loss with gradients for every input map.
struct PresenceLossResult {
    double value = 0.0;
    std::size_t num_pairs = 0;
    std::vector<ActivationMap> grad_positive;
    std::vector<ActivationMap> grad_negative;
};

/// Mean over the full positive x negative product of -log q, where q is the
/// share of exp-activation mass lying in the positive map when the softmax
/// runs jointly over both maps.
PresenceLossResult presence_loss(std::span<const ActivationMap> positive, std::span<const ActivationMap> negative);

/// Probability that the object is in `positive` rather than `negative`.
double presence_probability(const ActivationMap& positive, const ActivationMap& negative);

/// Weighted sum of the three component losses.
LossBreakdown combined_loss(double variation, double slowness, double presence, const LossWeights& weights);

}  // namespace motionloc
