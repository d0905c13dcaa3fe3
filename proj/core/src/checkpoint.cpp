#include "meshseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "meshseq/config_json.hpp"
#include "meshseq/error.hpp"
#include "meshseq/shard.hpp"

namespace meshseq {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'C', 'K'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int width) {
  for (int b = 0; b < width; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(in[at + b]) << (8 * b);
  return v;
}

struct NamedTensor {
  std::string name;
  const Matrix<float>* tensor;
};

void collect(const Parameters<float>& p, const std::string& prefix, std::vector<NamedTensor>& out) {
  p.visit([&](const std::string& name, const Matrix<float>& m, bool) { out.push_back({prefix + name, &m}); });
}

[[noreturn]] void bad(const std::string& why) {
  throw Error(ErrorCode::kBadFormat, "checkpoint: " + why);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::vector<NamedTensor> tensors;
  collect(ck.params, "", tensors);
  if (ck.adam_m && ck.adam_v) {
    collect(*ck.adam_m, "adam.m.", tensors);
    collect(*ck.adam_v, "adam.v.", tensors);
  }
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["step"] = ck.step;
  header["model"] = nlohmann::json(ck.model);
  if (ck.train) header["train"] = nlohmann::json(*ck.train);
  header["codec"] = nlohmann::json(ck.codec);
  header["dtype"] = "float32-le";
  auto& table = header["tensors"];
  table = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    table.push_back({{"name", t.name}, {"shape", {t.tensor->rows(), t.tensor->cols()}}, {"offset", offset}});
    offset += 4 * static_cast<std::uint64_t>(t.tensor->size());
  }
  const auto text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(16 + text.size() + offset);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_le(out, kCheckpointVersion, 4);
  put_le(out, text.size(), 8);
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : tensors) {
    const float* data = t.tensor->data();
    for (Eigen::Index i = 0; i < t.tensor->size(); ++i) put_le(out, std::bit_cast<std::uint32_t>(data[i]), 4);
  }
  // Write-then-rename so an interrupted save never clobbers the last good file.
  auto tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, out);
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) bad("bad magic");
  const auto version = get_le(bytes, 4, 4);
  if (version != kCheckpointVersion) bad("unsupported version " + std::to_string(version));
  const auto header_len = get_le(bytes, 8, 8);
  if (header_len > bytes.size() - 16) bad("truncated header");
  const std::size_t blob_start = 16 + header_len;

  Checkpoint ck;
  nlohmann::json header;
  std::map<std::string, std::tuple<std::int64_t, std::int64_t, std::uint64_t>> table;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + static_cast<std::ptrdiff_t>(blob_start));
    ck.model = header.at("model").get<ModelConfig>();
    if (header.contains("train")) ck.train = header.at("train").get<TrainConfig>();
    if (header.contains("codec")) ck.codec = header.at("codec").get<CodecOptions>();
    ck.step = header.at("step").get<std::int64_t>();
    for (const auto& t : header.at("tensors")) {
      table[t.at("name").get<std::string>()] = {t.at("shape").at(0).get<std::int64_t>(),
                                                t.at("shape").at(1).get<std::int64_t>(),
                                                t.at("offset").get<std::uint64_t>()};
    }
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("header: ") + e.what());
  }
  ck.model.check();

  auto fill = [&](Parameters<float>& p, const std::string& prefix, bool required) {
    p = Parameters<float>::zeros(ck.model);
    bool all_present = true;
    p.visit([&](const std::string& name, Matrix<float>& m, bool) {
      const auto it = table.find(prefix + name);
      if (it == table.end()) {
        all_present = false;
        if (required) bad("missing tensor " + prefix + name);
        return;
      }
      const auto [rows, cols, off] = it->second;
      if (rows != m.rows() || cols != m.cols()) {
        bad("tensor " + prefix + name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
            ", config expects " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
      }
      const auto n = static_cast<std::size_t>(m.size());
      if (off + 4 * n > bytes.size() - blob_start) bad("tensor " + prefix + name + " overruns the file");
      for (std::size_t i = 0; i < n; ++i) {
        m.data()[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, blob_start + off + 4 * i, 4)));
      }
    });
    return all_present;
  };
  fill(ck.params, "", true);
  Parameters<float> m, v;
  if (table.count("adam.m.token_embedding") && fill(m, "adam.m.", true) && fill(v, "adam.v.", true)) {
    ck.adam_m = std::move(m);
    ck.adam_v = std::move(v);
  }
  return ck;
}

}  // namespace meshseq
