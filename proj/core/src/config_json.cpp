#include "meshseq/config_json.hpp"

#include "meshseq/error.hpp"

namespace meshseq {

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},       {"d_model", c.d_model},
                     {"d_ffn", c.d_ffn},                 {"n_layers", c.n_layers},
                     {"n_heads", c.n_heads},             {"context_length", c.context_length},
                     {"prefix_length", c.prefix_length}, {"n_classes", c.n_classes},
                     {"dropout", c.dropout},             {"init_std", c.init_std},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  apply_flat(j, c);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"peak_lr", c.peak_lr},           {"min_lr", c.min_lr},
                     {"warmup_steps", c.warmup_steps}, {"total_steps", c.total_steps},
                     {"weight_decay", c.weight_decay}, {"clip_norm", c.clip_norm},
                     {"beta1", c.beta1},               {"beta2", c.beta2},
                     {"epsilon", c.epsilon},           {"batch_size", c.batch_size},
                     {"seed", c.seed},                 {"strict_eos", c.strict_eos}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  apply_flat(j, c);
}

void apply_flat(const nlohmann::json& j, ModelConfig& c) {
  maybe(j, "vocab_size", c.vocab_size);
  maybe(j, "d_model", c.d_model);
  maybe(j, "d_ffn", c.d_ffn);
  maybe(j, "n_layers", c.n_layers);
  maybe(j, "n_heads", c.n_heads);
  maybe(j, "context_length", c.context_length);
  maybe(j, "prefix_length", c.prefix_length);
  maybe(j, "n_classes", c.n_classes);
  maybe(j, "dropout", c.dropout);
  maybe(j, "init_std", c.init_std);
  maybe(j, "seed", c.seed);
}

void apply_flat(const nlohmann::json& j, TrainConfig& c) {
  maybe(j, "peak_lr", c.peak_lr);
  maybe(j, "min_lr", c.min_lr);
  maybe(j, "warmup_steps", c.warmup_steps);
  maybe(j, "total_steps", c.total_steps);
  maybe(j, "weight_decay", c.weight_decay);
  maybe(j, "clip_norm", c.clip_norm);
  maybe(j, "beta1", c.beta1);
  maybe(j, "beta2", c.beta2);
  maybe(j, "epsilon", c.epsilon);
  maybe(j, "batch_size", c.batch_size);
  maybe(j, "seed", c.seed);
  maybe(j, "strict_eos", c.strict_eos);
}

std::string_view mode_name(GrammarMode mode) {
  return mode == GrammarMode::kHybrid ? "hybrid" : "triangle";
}

GrammarMode parse_mode(std::string_view name) {
  if (name == "triangle" || name == "tri") return GrammarMode::kTriangle;
  if (name == "hybrid") return GrammarMode::kHybrid;
  throw Error(ErrorCode::kInvalidArgument, "unknown grammar mode '" + std::string(name) + "'");
}

std::string_view order_name(ComponentOrder order) {
  return order == ComponentOrder::kZYX ? "zyx" : "xyz";
}

ComponentOrder parse_order(std::string_view name) {
  if (name == "xyz") return ComponentOrder::kXYZ;
  if (name == "zyx") return ComponentOrder::kZYX;
  throw Error(ErrorCode::kInvalidArgument, "unknown component order '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const CodecOptions& c) {
  j = {{"mode", mode_name(c.mode)}, {"order", order_name(c.order)}, {"max_faces", c.max_faces}};
}

void from_json(const nlohmann::json& j, CodecOptions& c) {
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.order = parse_order(j.at("order").get<std::string>());
  c.max_faces = j.at("max_faces").get<std::size_t>();
}

}  // namespace meshseq
