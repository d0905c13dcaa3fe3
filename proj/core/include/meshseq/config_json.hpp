#pragma once

#include <nlohmann/json.hpp>

#include "meshseq/codec.hpp"
#include "meshseq/model.hpp"
#include "meshseq/sampling.hpp"
#include "meshseq/trainer.hpp"

namespace meshseq {

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const CodecOptions& c);
void from_json(const nlohmann::json& j, CodecOptions& c);

// "triangle" | "hybrid" and "xyz" | "zyx".
std::string_view mode_name(GrammarMode mode);
GrammarMode parse_mode(std::string_view name);
std::string_view order_name(ComponentOrder order);
ComponentOrder parse_order(std::string_view name);

// Overwrites only the fields present in a flat JSON object; unknown keys are
// ignored. Used to layer config files under command-line flags.
void apply_flat(const nlohmann::json& j, ModelConfig& c);
void apply_flat(const nlohmann::json& j, TrainConfig& c);

}  // namespace meshseq
