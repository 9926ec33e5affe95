#pragma once

#include <json.hpp>

#include "stylediff/encoder.hpp"
#include "stylediff/embedder.hpp"
#include "stylediff/losses.hpp"
#include "stylediff/schedule.hpp"
#include "stylediff/spn.hpp"
#include "stylediff/unet.hpp"

// JSON converters for the model/config structs stored in checkpoint metadata.

namespace stylediff {

void to_json(nlohmann::json& j, const UNetConfig& c);
void from_json(const nlohmann::json& j, UNetConfig& c);

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

void to_json(nlohmann::json& j, const EmbedderConfig& c);
void from_json(const nlohmann::json& j, EmbedderConfig& c);

void to_json(nlohmann::json& j, const SPNConfig& c);
void from_json(const nlohmann::json& j, SPNConfig& c);

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

// Schedule metadata: T plus the exact beta array travels as a tensor; only
// structural fields go through JSON.
nlohmann::json schedule_meta(const NoiseSchedule& s);
NoiseSchedule schedule_from_parts(const nlohmann::json& meta, const Tensor& betas,
                                  const Tensor& sigmas);
Tensor schedule_betas_tensor(const NoiseSchedule& s);
Tensor schedule_sigmas_tensor(const NoiseSchedule& s);

}  // namespace stylediff
