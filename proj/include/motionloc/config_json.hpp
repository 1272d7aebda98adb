#pragma once

// JSON mappings for configuration types (checkpoint headers, run manifests).

#include <json.hpp>

#include "motionloc/encoder.hpp"
#include "motionloc/losses.hpp"
#include "motionloc/synthetic.hpp"
#include "motionloc/training.hpp"

namespace motionloc {

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);

void to_json(nlohmann::json& j, const LossBreakdown& b);
void from_json(const nlohmann::json& j, LossBreakdown& b);

void to_json(nlohmann::json& j, const RestartRecord& r);
void from_json(const nlohmann::json& j, RestartRecord& r);

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

}  // namespace motionloc
