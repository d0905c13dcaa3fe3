#include "meshseq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "meshseq/error.hpp"
#include "meshseq/metrics.hpp"
#include "meshseq/obj.hpp"
#include "meshseq/shard.hpp"

namespace meshseq {

namespace fs = std::filesystem;

AugmentationParams random_augmentation(RandomStream& rng) {
  AugmentationParams p;
  p.quarter_turns = static_cast<int>(rng.below(4));
  for (auto& s : p.scales) s = kMinAugmentScale + (kMaxAugmentScale - kMinAugmentScale) * rng.uniform();
  return p;
}

Mesh augment(const Mesh& mesh, const AugmentationParams& params) {
  if (params.quarter_turns < 0 || params.quarter_turns > 3) {
    throw Error(ErrorCode::kInvalidArgument, "rotation must be 0, 90, 180 or 270 degrees");
  }
  for (double s : params.scales) {
    if (!(s >= kMinAugmentScale && s <= kMaxAugmentScale)) {
      throw Error(ErrorCode::kInvalidArgument, "augmentation scale outside [0.9, 1.1]");
    }
  }
  Mesh out = mesh;
  for (auto& v : out.vertices) {
    const double x = v[0] * params.scales[0];
    const double y = v[1] * params.scales[1];
    const double z = v[2] * params.scales[2];
    switch (params.quarter_turns) {
      case 0: v = {x, y, z}; break;
      case 1: v = {z, y, -x}; break;
      case 2: v = {-x, y, -z}; break;
      case 3: v = {-z, y, x}; break;
    }
  }
  return out;
}

bool face_count_gate(const Mesh& mesh, std::size_t max_faces) {
  return mesh.face_count() <= max_faces;
}

DecimationVerdict decimation_gate(const Mesh& original, const Mesh& simplified,
                                  std::optional<double> threshold, std::size_t samples,
                                  std::uint64_t seed) {
  const auto normalized = normalize(original);
  validate(simplified);
  const Mesh simplified_n = apply_transform(simplified, normalized.transform);
  DecimationVerdict verdict;
  if (threshold) {
    verdict.threshold = *threshold;
  } else {
    const auto e = bounding_box(normalized.mesh).extent();
    verdict.threshold = kDefaultDecimationRatio * std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
  }
  const auto a = sample_points(normalized.mesh, samples, seed, 0);
  const auto b = sample_points(simplified_n, samples, seed, 0);
  verdict.distance = hausdorff(a, b);
  verdict.accepted = verdict.distance <= verdict.threshold;
  return verdict;
}

PreparedMesh prepare_mesh(const Mesh& mesh, const PipelineOptions& options,
                          const AugmentationParams& augmentation) {
  validate(mesh);
  PreparedMesh out;
  out.id = mesh.source_id;
  out.source = mesh.source_id;
  out.raw_faces = mesh.face_count();
  out.augmentation = augmentation;
  const Mesh augmented = augmentation.is_identity() ? mesh : augment(mesh, augmentation);
  const auto normalized = normalize(augmented);
  const GridSpec grid(options.resolution);
  CanonicalStats stats;
  out.qmesh = canonicalize(quantize(normalized.mesh, grid), &stats);
  out.dropped_faces = stats.dropped();
  if (out.qmesh.faces.size() > options.codec.max_faces) {
    throw Error(ErrorCode::kTooManyFaces,
                std::to_string(out.qmesh.faces.size()) + " faces exceed max_faces " +
                    std::to_string(options.codec.max_faces));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::string manifest_line(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["source"] = r.source;
  j["status"] = r.status;
  if (!r.reason.empty()) j["reason"] = r.reason;
  j["faces"] = r.faces;
  j["dropped_faces"] = r.dropped_faces;
  j["augmentation"] = {{"rotation", r.augmentation.degrees()},
                       {"scales", r.augmentation.scales}};
  j["split"] = r.split;
  if (r.class_id) {
    j["class_id"] = *r.class_id;
    j["class_name"] = r.class_name;
  }
  if (r.decimation_distance) j["decimation_distance"] = *r.decimation_distance;
  if (r.index) {
    j["shard"] = r.shard;
    j["index"] = *r.index;
  } else {
    j["shard"] = nullptr;
    j["index"] = nullptr;
  }
  return j.dump();
}

ManifestRecord parse_manifest_line(const std::string& line) {
  ManifestRecord r;
  try {
    const auto j = nlohmann::json::parse(line);
    r.id = j.at("id").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.reason = j.value("reason", "");
    r.faces = j.at("faces").get<std::size_t>();
    r.dropped_faces = j.at("dropped_faces").get<std::size_t>();
    const auto& aug = j.at("augmentation");
    r.augmentation.quarter_turns = aug.at("rotation").get<int>() / 90;
    r.augmentation.scales = aug.at("scales").get<std::array<double, 3>>();
    r.split = j.at("split").get<std::string>();
    if (j.contains("class_id")) {
      r.class_id = j.at("class_id").get<int>();
      r.class_name = j.value("class_name", "");
    }
    if (j.contains("decimation_distance")) r.decimation_distance = j["decimation_distance"].get<double>();
    if (!j.at("index").is_null()) {
      r.shard = j.at("shard").get<std::string>();
      r.index = j.at("index").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadFormat, std::string("manifest: ") + e.what());
  }
  return r;
}

void write_manifest(const fs::path& path, std::span<const ManifestRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& r : records) out << manifest_line(r) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<ManifestRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(parse_manifest_line(line));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Packing

std::size_t max_sequence_length(const CodecOptions& options) {
  const int arity = options.mode == GrammarMode::kHybrid ? 4 : 3;
  return face_token_count(arity, options.mode) * options.max_faces + 2;
}

std::vector<ManifestRecord> pack(std::span<const PreparedMesh> meshes, const Vocabulary& vocab,
                                 const CodecOptions& options, const fs::path& out_dir) {
  if (meshes.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to pack");
  const auto limit = max_sequence_length(options);
  std::vector<TokenSequence> train, val;
  std::vector<ManifestRecord> records;
  records.reserve(meshes.size());
  for (const auto& m : meshes) {
    if (m.qmesh.grid.resolution != meshes.front().qmesh.grid.resolution) {
      throw Error(ErrorCode::kInvalidArgument, "meshes do not share a grid");
    }
    auto seq = encode(m.qmesh, vocab, options);
    if (seq.tokens.size() > limit) {
      throw Error(ErrorCode::kTooManyFaces, m.id + ": sequence exceeds maximum length");
    }
    ManifestRecord r;
    r.id = m.id;
    r.source = m.source;
    r.faces = m.qmesh.faces.size();
    r.dropped_faces = m.dropped_faces;
    r.augmentation = m.augmentation;
    r.class_id = m.class_id;
    auto& target = m.validation ? val : train;
    r.split = m.validation ? "val" : "train";
    r.shard = m.validation ? kValShardName : kTrainShardName;
    r.index = target.size();
    target.push_back(std::move(seq));
    records.push_back(std::move(r));
  }
  fs::create_directories(out_dir);
  write_shard(out_dir / kTrainShardName, train, vocab, options);
  if (!val.empty()) {
    write_shard(out_dir / kValShardName, val, vocab, options);
  } else {
    fs::remove(out_dir / kValShardName);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Directory pipeline

namespace {

std::uint64_t path_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct InputFile {
  fs::path path;
  std::string relative;
  std::optional<int> class_id;
  std::string class_name;
};

std::vector<InputFile> list_inputs(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIo, "input is not a directory: " + root.string());
  std::vector<InputFile> files;
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  }
  std::sort(classes.begin(), classes.end());
  std::map<std::string, int> class_ids;
  for (std::size_t i = 0; i < classes.size(); ++i) class_ids[classes[i]] = static_cast<int>(i);

  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".obj") continue;
    InputFile f;
    f.path = entry.path();
    const auto rel = fs::relative(entry.path(), root);
    f.relative = rel.generic_string();
    if (std::distance(rel.begin(), rel.end()) > 1) {
      f.class_name = rel.begin()->string();
      f.class_id = class_ids.at(f.class_name);
    }
    files.push_back(std::move(f));
  }
  std::sort(files.begin(), files.end(),
            [](const InputFile& a, const InputFile& b) { return a.relative < b.relative; });
  return files;
}

std::string strip_extension(const std::string& rel) {
  const auto dot = rel.rfind('.');
  return dot == std::string::npos ? rel : rel.substr(0, dot);
}

}  // namespace

TokenizeSummary tokenize_directory(const TokenizeConfig& config) {
  const auto inputs = list_inputs(config.input);
  const Vocabulary vocab(config.pipeline.resolution);
  const ObjOptions obj_options{config.triangulate};
  const auto max_faces = config.pipeline.codec.max_faces;

  TokenizeSummary summary;
  summary.files = inputs.size();

  // Manifest rows in output order; accepted rows are filled in after packing.
  std::vector<ManifestRecord> rows;
  std::vector<std::optional<std::size_t>> packed_slot;
  std::vector<PreparedMesh> accepted;

  for (const auto& input : inputs) {
    const auto base_id = strip_extension(input.relative);
    const auto key = path_hash(input.relative);
    RandomStream split_rng(config.seed, mix_stream(key, 0));
    const bool validation = split_rng.uniform() < config.val_fraction;

    auto reject = [&](const std::string& id, const AugmentationParams& aug, std::size_t faces,
                      const std::string& reason) {
      ManifestRecord r;
      r.id = id;
      r.source = input.relative;
      r.status = "rejected";
      r.reason = reason;
      r.faces = faces;
      r.augmentation = aug;
      r.split = validation ? "val" : "train";
      r.class_id = input.class_id;
      r.class_name = input.class_name;
      rows.push_back(std::move(r));
      packed_slot.push_back(std::nullopt);
    };

    Mesh mesh;
    try {
      mesh = read_obj_file(input.path, obj_options);
    } catch (const Error& e) {
      reject(base_id, {}, 0, std::string(to_string(e.code())) + ": " + e.what());
      continue;
    }
    std::optional<double> decimation_distance;
    if (!face_count_gate(mesh, max_faces)) {
      bool rescued = false;
      const auto raw_faces = mesh.face_count();
      if (config.decimated) {
        const auto alt = *config.decimated / input.relative;
        if (fs::exists(alt)) {
          try {
            Mesh simplified = read_obj_file(alt, obj_options);
            const auto verdict =
                decimation_gate(mesh, simplified, config.decimation_threshold, 4096, config.seed);
            decimation_distance = verdict.distance;
            if (verdict.accepted && face_count_gate(simplified, max_faces)) {
              mesh = std::move(simplified);
              rescued = true;
            } else if (!verdict.accepted) {
              reject(base_id, {}, raw_faces,
                     "decimation rejected: hausdorff " + std::to_string(verdict.distance) +
                         " > " + std::to_string(verdict.threshold));
              continue;
            }
          } catch (const Error& e) {
            reject(base_id, {}, raw_faces, std::string("decimated copy unusable: ") + e.what());
            continue;
          }
        }
      }
      if (!rescued) {
        reject(base_id, {}, raw_faces,
               "too_many_faces: " + std::to_string(raw_faces) + " > " + std::to_string(max_faces));
        continue;
      }
    }
    mesh.source_id = base_id;

    for (int copy = 0; copy <= config.augment_copies; ++copy) {
      AugmentationParams aug;
      if (copy > 0) {
        RandomStream rng(config.seed, mix_stream(key, static_cast<std::uint64_t>(copy)));
        aug = random_augmentation(rng);
      }
      const auto id = copy == 0 ? base_id : base_id + "#aug" + std::to_string(copy);
      try {
        auto prepared = prepare_mesh(mesh, config.pipeline, aug);
        prepared.id = id;
        prepared.source = input.relative;
        prepared.class_id = input.class_id;
        prepared.validation = validation;
        rows.push_back({});
        rows.back().class_name = input.class_name;
        rows.back().decimation_distance = decimation_distance;
        packed_slot.push_back(accepted.size());
        accepted.push_back(std::move(prepared));
      } catch (const Error& e) {
        reject(id, aug, mesh.face_count(), std::string(to_string(e.code())) + ": " + e.what());
      }
    }
  }

  if (accepted.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no mesh accepted from " + config.input.string());
  }
  const auto packed = pack(accepted, vocab, config.pipeline.codec, config.output);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!packed_slot[i]) continue;
    auto record = packed[*packed_slot[i]];
    record.class_name = rows[i].class_name;
    record.decimation_distance = rows[i].decimation_distance;
    rows[i] = std::move(record);
  }
  write_manifest(config.output / kManifestName, rows);
  summary.accepted = accepted.size();
  summary.rejected = rows.size() - accepted.size();
  summary.manifest = std::move(rows);
  return summary;
}

}  // namespace meshseq
