#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshseq/canonical.hpp"
#include "meshseq/codec.hpp"
#include "meshseq/geometry.hpp"
#include "meshseq/rng.hpp"

namespace meshseq {

struct AugmentationParams {
  int quarter_turns = 0;  // rotation about +y by 90 degrees per turn, 0..3
  std::array<double, 3> scales{1.0, 1.0, 1.0};  // each in [0.9, 1.1]

  int degrees() const { return 90 * quarter_turns; }
  bool is_identity() const {
    return quarter_turns == 0 && scales == std::array<double, 3>{1.0, 1.0, 1.0};
  }
};

inline constexpr double kMinAugmentScale = 0.9;
inline constexpr double kMaxAugmentScale = 1.1;

AugmentationParams random_augmentation(RandomStream& rng);

// Per-axis scaling, then a quarter-turn rotation about y:
// 90 degrees maps (x, y, z) to (z, y, -x).
Mesh augment(const Mesh& mesh, const AugmentationParams& params);

inline constexpr std::size_t kDefaultMaxFaces = 800;

// Inclusive: accepts face_count <= max_faces.
bool face_count_gate(const Mesh& mesh, std::size_t max_faces = kDefaultMaxFaces);

struct DecimationVerdict {
  bool accepted = false;
  double distance = 0;   // symmetric Hausdorff in the original's normalized frame
  double threshold = 0;  // absolute threshold applied
};

inline constexpr double kDefaultDecimationRatio = 0.01;  // x bbox diagonal

// Both meshes are mapped with the original's normalization transform and
// sampled with identical streams. When `threshold` is empty it defaults to
// 0.01 x the normalized original's bounding-box diagonal.
DecimationVerdict decimation_gate(const Mesh& original, const Mesh& simplified,
                                  std::optional<double> threshold = std::nullopt,
                                  std::size_t samples = 4096, std::uint64_t seed = 0);

struct PipelineOptions {
  int resolution = 128;
  CodecOptions codec;  // codec.max_faces is the face-count gate
};

// A mesh that went through augment -> normalize -> quantize -> canonicalize.
struct PreparedMesh {
  std::string id;
  std::string source;
  std::size_t raw_faces = 0;
  std::size_t dropped_faces = 0;
  AugmentationParams augmentation;
  std::optional<int> class_id;
  bool validation = false;
  QuantizedMesh qmesh;
};

// Throws on any pipeline error, including a canonical face count above
// options.codec.max_faces.
PreparedMesh prepare_mesh(const Mesh& mesh, const PipelineOptions& options,
                          const AugmentationParams& augmentation = {});

struct ManifestRecord {
  std::string id;
  std::string source;
  std::string status = "accepted";  // accepted | rejected
  std::string reason;
  std::size_t faces = 0;
  std::size_t dropped_faces = 0;
  AugmentationParams augmentation;
  std::string split = "train";
  std::optional<int> class_id;
  std::string class_name;
  std::optional<double> decimation_distance;
  std::string shard;
  std::optional<std::size_t> index;
};

std::string manifest_line(const ManifestRecord& record);
ManifestRecord parse_manifest_line(const std::string& line);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

inline constexpr const char* kTrainShardName = "train.mxtk";
inline constexpr const char* kValShardName = "val.mxtk";
inline constexpr const char* kManifestName = "manifest.jsonl";

// Longest sequence produced by `max_faces` faces.
std::size_t max_sequence_length(const CodecOptions& options);

// Encodes and writes train/val shards into `out_dir` (val only when
// non-empty). Returns manifest rows in input order.
std::vector<ManifestRecord> pack(std::span<const PreparedMesh> meshes, const Vocabulary& vocab,
                                 const CodecOptions& options, const std::filesystem::path& out_dir);

struct TokenizeConfig {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> decimated;  // simplified copies, same relative paths
  PipelineOptions pipeline;
  int augment_copies = 0;
  std::uint64_t seed = 0;
  double val_fraction = 0.0;
  bool triangulate = true;
  std::optional<double> decimation_threshold;
};

struct TokenizeSummary {
  std::size_t files = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<ManifestRecord> manifest;
};

// Directory pipeline: parse -> gate -> (augment x k) -> normalize -> quantize
// -> canonicalize -> encode -> pack. Subdirectories of `input` become classes
// (sorted by name). Per-file failures are recorded as rejected manifest rows.
// Throws Error(kEmptyInput) if nothing was accepted.
TokenizeSummary tokenize_directory(const TokenizeConfig& config);

}  // namespace meshseq
