#include "motionloc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace motionloc {

namespace {

constexpr double kDistanceEpsilon = 1e-12;

void check_pairs(std::span<const CoordPair> pairs, const char* what) {
    if (pairs.empty()) throw std::invalid_argument(std::string(what) + ": no coordinate pairs");
    for (const auto& p : pairs) {
        if (!std::isfinite(p.first.row) || !std::isfinite(p.first.col) || !std::isfinite(p.second.row) ||
            !std::isfinite(p.second.col))
            throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
    }
}

double log_sum_exp(const ActivationMap& m) {
    const double peak = m.max();
    double total = 0.0;
    for (double v : m.values) total += std::exp(v - peak);
    return peak + std::log(total);
}

// -log(sigmoid(x)) without overflow.
double neg_log_sigmoid(double x) { return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

void LossWeights::validate() const {
    if (variation < 0.0 || slowness < 0.0 || presence < 0.0)
        throw std::invalid_argument("loss weights must be non-negative");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    if (d_min < 1 || d_min > d_max) throw std::invalid_argument("frame offsets must satisfy 1 <= d_min <= d_max");
    if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be non-negative");
}

PairLossResult variation_loss(std::span<const CoordPair> pairs, double beta) {
    check_pairs(pairs, "variation_loss");
    PairLossResult r;
    r.grad.resize(pairs.size());
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double dr = pairs[k].second.row - pairs[k].first.row;
        const double dc = pairs[k].second.col - pairs[k].first.col;
        const double sq = dr * dr + dc * dc;
        const double e = std::exp(-beta * std::sqrt(sq));
        r.value += e;
        // Guarded norm in the denominator keeps the gradient finite at zero distance.
        const double s = -beta * e / std::sqrt(sq + kDistanceEpsilon) * inv_n;
        r.grad[k].second = {s * dr, s * dc};
        r.grad[k].first = {-s * dr, -s * dc};
    }
    r.value *= inv_n;
    return r;
}

PairLossResult slowness_loss(std::span<const CoordPair> pairs) {
    check_pairs(pairs, "slowness_loss");
    PairLossResult r;
    r.grad.resize(pairs.size());
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double dr = pairs[k].second.row - pairs[k].first.row;
        const double dc = pairs[k].second.col - pairs[k].first.col;
        r.value += dr * dr + dc * dc;
        r.grad[k].second = {2.0 * dr * inv_n, 2.0 * dc * inv_n};
        r.grad[k].first = {-2.0 * dr * inv_n, -2.0 * dc * inv_n};
    }
    r.value *= inv_n;
    return r;
}

double presence_probability(const ActivationMap& positive, const ActivationMap& negative) {
    if (positive.height != negative.height || positive.width != negative.width)
        throw std::invalid_argument("presence_probability: map shape mismatch");
    return sigmoid(log_sum_exp(positive) - log_sum_exp(negative));
}

PresenceLossResult presence_loss(std::span<const ActivationMap> positive, std::span<const ActivationMap> negative) {
    if (positive.empty() || negative.empty())
        throw std::invalid_argument("presence_loss: both positive and negative maps are required");
    const int h = positive.front().height;
    const int w = positive.front().width;
    auto check = [&](const ActivationMap& m) {
        if (m.height != h || m.width != w || m.values.size() != static_cast<std::size_t>(h) * w)
            throw std::invalid_argument("presence_loss: all maps must share one shape");
        for (double v : m.values)
            if (!std::isfinite(v)) throw std::invalid_argument("presence_loss: non-finite activation");
    };
    for (const auto& m : positive) check(m);
    for (const auto& m : negative) check(m);

    // q(p, n) = S_p / (S_p + S_n) = sigmoid(lse_p - lse_n); the log-sum-exps
    // are max-shifted so the joint softmax never overflows.
    std::vector<double> lse_pos(positive.size()), lse_neg(negative.size());
    for (std::size_t i = 0; i < positive.size(); ++i) lse_pos[i] = log_sum_exp(positive[i]);
    for (std::size_t j = 0; j < negative.size(); ++j) lse_neg[j] = log_sum_exp(negative[j]);

    PresenceLossResult r;
    r.num_pairs = positive.size() * negative.size();
    const double inv_pairs = 1.0 / static_cast<double>(r.num_pairs);
    // d(-log q)/dO_p = P_p (q - 1),  d(-log q)/dO_n = P_n (1 - q).
    std::vector<double> pos_coeff(positive.size(), 0.0), neg_coeff(negative.size(), 0.0);
    for (std::size_t i = 0; i < positive.size(); ++i) {
        for (std::size_t j = 0; j < negative.size(); ++j) {
            const double x = lse_pos[i] - lse_neg[j];
            r.value += neg_log_sigmoid(x);
            const double q = sigmoid(x);
            pos_coeff[i] += (q - 1.0) * inv_pairs;
            neg_coeff[j] += (1.0 - q) * inv_pairs;
        }
    }
    r.value *= inv_pairs;

    auto scaled_softmax = [](const ActivationMap& m, double lse, double coeff) {
        ActivationMap g(m.height, m.width);
        for (std::size_t k = 0; k < m.values.size(); ++k) g.values[k] = coeff * std::exp(m.values[k] - lse);
        return g;
    };
    r.grad_positive.reserve(positive.size());
    r.grad_negative.reserve(negative.size());
    for (std::size_t i = 0; i < positive.size(); ++i)
        r.grad_positive.push_back(scaled_softmax(positive[i], lse_pos[i], pos_coeff[i]));
    for (std::size_t j = 0; j < negative.size(); ++j)
        r.grad_negative.push_back(scaled_softmax(negative[j], lse_neg[j], neg_coeff[j]));
    return r;
}

LossBreakdown combined_loss(double variation, double slowness, double presence, const LossWeights& weights) {
    LossBreakdown b{variation, slowness, presence, 0.0};
    b.total = weights.variation * variation + weights.slowness * slowness + weights.presence * presence;
    return b;
}

}  // namespace motionloc
