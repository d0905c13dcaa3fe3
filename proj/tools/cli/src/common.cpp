#include <algorithm>
#include <fstream>

#include "commands.hpp"
#include "meshseq/dataset.hpp"
#include "meshseq/error.hpp"
#include "meshseq/shard.hpp"

namespace meshseq::cli {

namespace fs = std::filesystem;

std::optional<LoadedData> load_examples_if_present(const fs::path& path, const std::string& split) {
  fs::path shard_path = path;
  fs::path manifest_path;
  if (fs::is_directory(path)) {
    shard_path = path / (split + ".mxtk");
    manifest_path = path / kManifestName;
    if (!fs::exists(shard_path)) return std::nullopt;
  } else if (!fs::exists(path)) {
    throw Error(ErrorCode::kIo, "no such shard or directory: " + path.string());
  }
  const auto shard = Shard::load(shard_path);
  LoadedData data;
  data.vocab = shard.vocabulary();
  data.codec = shard.header().codec_options();

  std::vector<std::optional<int>> classes(shard.size());
  if (!manifest_path.empty() && fs::exists(manifest_path)) {
    const auto name = shard_path.filename().string();
    for (const auto& r : read_manifest(manifest_path)) {
      if (r.status != "accepted" || r.shard != name || !r.index || *r.index >= classes.size()) continue;
      classes[*r.index] = r.class_id;
      if (r.class_id) data.n_classes = std::max(data.n_classes, *r.class_id + 1);
    }
  }
  for (std::size_t i = 0; i < shard.size(); ++i) {
    auto tokens = shard.sequence(i);
    data.max_length = std::max(data.max_length, tokens.size());
    data.examples.push_back({std::move(tokens), classes[i]});
  }
  return data;
}

LoadedData load_examples(const fs::path& path, const std::string& split) {
  auto data = load_examples_if_present(path, split);
  if (!data) throw Error(ErrorCode::kIo, "no " + split + " shard under " + path.string());
  return std::move(*data);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

void write_run_config(const fs::path& dir, const nlohmann::json& config) {
  write_text(dir / kRunConfigName, config.dump(2) + "\n");
}

std::vector<fs::path> list_obj_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace meshseq::cli
