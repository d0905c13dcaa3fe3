#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "meshseq/checkpoint.hpp"
#include "meshseq/codec.hpp"
#include "meshseq/model.hpp"
#include "meshseq/trainer.hpp"

namespace meshseq::cli {

inline constexpr const char* kRunConfigName = "run_config.json";

struct TokenizeArgs {
  std::string input;
  std::string output;
  std::string decimated;
  int grid = 128;
  std::size_t max_faces = 800;
  int augment = 0;
  std::uint64_t seed = 0;
  double val_fraction = 0.0;
  double decimation_threshold = 0.0;  // 0: use the bounding-box ratio
  std::string mode = "triangle";
  std::string order = "xyz";
  bool no_triangulate = false;
};

struct DetokenizeArgs {
  std::string shard;
  std::size_t index = 0;
  std::string output;
  bool permissive = false;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string preset;
  bool resume = false;
  bool conditional = false;
  ModelConfig model;
  TrainConfig train;
  int log_every = 10;
  int eval_every = 0;
  int checkpoint_every = 100;
  double target_loss = 0.0;  // stop once the full training NLL drops below this
};

struct SamplingArgs {
  std::string ckpt;
  std::string output;
  std::size_t num = 10;
  int top_k = 50;
  double top_p = 0.95;
  std::uint64_t seed = 0;
  std::size_t max_tokens = 0;  // 0: model context
  int class_id = -1;
  bool constrained = false;
};

struct CompleteArgs {
  SamplingArgs sampling;
  std::string input;
  double prefix_ratio = 0.5;
};

struct EvalArgs {
  std::string gen;
  std::string ref;
  std::string output;
  std::string dump_matrix;
  std::size_t points = 2048;
  int jsd_grid = 28;
  std::uint64_t seed = 0;
  bool no_normalize = false;
};

struct PplArgs {
  std::string ckpt;
  std::string data;
  std::string split = "train";
  std::string output;
  bool uniform = false;
};

int cmd_tokenize(const TokenizeArgs& args, const nlohmann::json& run_config);
int cmd_detokenize(const DetokenizeArgs& args);
int cmd_train(const TrainArgs& args, const nlohmann::json& run_config);
int cmd_sample(const SamplingArgs& args, const nlohmann::json& run_config);
int cmd_complete(const CompleteArgs& args, const nlohmann::json& run_config);
int cmd_eval(const EvalArgs& args, const nlohmann::json& run_config);
int cmd_ppl(const PplArgs& args);

// Shared plumbing.
struct LoadedData {
  std::vector<Example> examples;
  Vocabulary vocab;
  CodecOptions codec;
  int n_classes = 0;
  std::size_t max_length = 0;
};

// `path` is a shard file or a directory holding `<split>.mxtk` and, for class
// ids, the manifest written by tokenize.
LoadedData load_examples(const std::filesystem::path& path, const std::string& split);
std::optional<LoadedData> load_examples_if_present(const std::filesystem::path& path, const std::string& split);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_run_config(const std::filesystem::path& dir, const nlohmann::json& config);
std::vector<std::filesystem::path> list_obj_files(const std::filesystem::path& dir);

}  // namespace meshseq::cli
