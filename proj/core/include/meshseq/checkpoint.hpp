#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "meshseq/codec.hpp"
#include "meshseq/model.hpp"
#include "meshseq/trainer.hpp"

namespace meshseq {

// Checkpoint file:
//   bytes 0..3  magic "MSCK"
//   u32         format version (1)
//   u64         header length H
//   H bytes     UTF-8 JSON: {"format_version", "step", "model", "train",
//               "tensors": [{"name", "shape": [rows, cols], "offset"}]}
//   blobs       row-major little-endian float32, at the listed byte offsets
//               relative to the end of the header
// Optimizer moments are stored as tensors named "adam.m.<name>" and
// "adam.v.<name>".
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  std::optional<TrainConfig> train;
  std::int64_t step = 0;
  Parameters<float> params;
  std::optional<Parameters<float>> adam_m;
  std::optional<Parameters<float>> adam_v;
  CodecOptions codec;  // how the training shards were encoded
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

// Validates every tensor shape against the stored model config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace meshseq
