#include <iostream>

#include "commands.hpp"
#include "meshseq/config_json.hpp"
#include "meshseq/dataset.hpp"
#include "meshseq/error.hpp"
#include "meshseq/metrics.hpp"
#include "meshseq/obj.hpp"
#include "meshseq/shard.hpp"

namespace meshseq::cli {

namespace fs = std::filesystem;

int cmd_tokenize(const TokenizeArgs& args, const nlohmann::json& run_config) {
  TokenizeConfig cfg;
  cfg.input = args.input;
  cfg.output = args.output;
  if (!args.decimated.empty()) cfg.decimated = args.decimated;
  cfg.pipeline.resolution = args.grid;
  cfg.pipeline.codec = {parse_mode(args.mode), parse_order(args.order), args.max_faces};
  cfg.augment_copies = args.augment;
  cfg.seed = args.seed;
  cfg.val_fraction = args.val_fraction;
  cfg.triangulate = !args.no_triangulate;
  if (args.decimation_threshold > 0) cfg.decimation_threshold = args.decimation_threshold;
  if (args.augment < 0) throw Error(ErrorCode::kInvalidArgument, "--augment must be >= 0");

  const auto summary = tokenize_directory(cfg);
  for (const auto& r : summary.manifest) {
    if (r.status == "rejected") std::cerr << "rejected " << r.source << ": " << r.reason << "\n";
  }
  write_run_config(cfg.output, run_config);
  nlohmann::json out = {{"files", summary.files}, {"accepted", summary.accepted}, {"rejected", summary.rejected}};
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_detokenize(const DetokenizeArgs& args) {
  const auto shard = Shard::load(args.shard);
  if (args.index >= shard.size()) {
    throw Error(ErrorCode::kOutOfRange, "index " + std::to_string(args.index) + " outside shard of " +
                                            std::to_string(shard.size()) + " sequences");
  }
  const auto tokens = shard.sequence(args.index);
  const auto decoded = decode(tokens, shard.vocabulary(), shard.header().codec_options(), !args.permissive);
  if (decoded.mesh.faces.empty()) throw Error(ErrorCode::kMalformedSequence, "no complete face to write");
  if (!decoded.violation.empty()) std::cerr << "salvaged " << decoded.mesh.faces.size() << " faces: " << decoded.violation << "\n";
  write_obj_file(args.output, dequantize(decoded.mesh));
  return 0;
}

namespace {
struct MeshSet {
  std::vector<Mesh> meshes;
  std::vector<std::string> excluded;
};

MeshSet read_mesh_dir(const fs::path& dir, const std::string& label) {
  MeshSet set;
  for (const auto& path : list_obj_files(dir)) {
    const auto id = label + "/" + fs::relative(path, dir).generic_string();
    try {
      auto m = read_obj_file(path);
      m.source_id = id;
      set.meshes.push_back(std::move(m));
    } catch (const Error& e) {
      set.excluded.push_back(id + ": " + e.what());
    }
  }
  return set;
}
}  // namespace

int cmd_eval(const EvalArgs& args, const nlohmann::json& run_config) {
  const auto gen = read_mesh_dir(args.gen, "gen");
  const auto ref = read_mesh_dir(args.ref, "ref");
  EvalParams params;
  params.points = args.points;
  params.jsd_grid = args.jsd_grid;
  params.seed = args.seed;
  params.normalize = !args.no_normalize;
  auto report = evaluate(gen.meshes, ref.meshes, params);
  report.excluded.insert(report.excluded.begin(), gen.excluded.begin(), gen.excluded.end());
  report.excluded.insert(report.excluded.end(), ref.excluded.begin(), ref.excluded.end());
  const auto json = report.to_json();
  if (args.output.empty()) {
    std::cout << json << "\n";
  } else {
    write_text(args.output, json + "\n");
    const auto dir = fs::path(args.output).parent_path();
    write_run_config(dir.empty() ? fs::path(".") : dir, run_config);
  }
  if (!args.dump_matrix.empty()) dump_distance_matrix(report, args.dump_matrix);
  return 0;
}

}  // namespace meshseq::cli
