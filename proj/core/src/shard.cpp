#include "meshseq/shard.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "meshseq/error.hpp"

namespace meshseq {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int b = 0; b < width; ++b) v |= static_cast<std::uint64_t>(bytes[at + b]) << (8 * b);
  return v;
}

[[noreturn]] void bad(const std::string& why) {
  throw Error(ErrorCode::kBadFormat, "shard: " + why);
}

}  // namespace

std::uint32_t mode_bits(const CodecOptions& options) {
  std::uint32_t bits = 0;
  if (options.mode == GrammarMode::kHybrid) bits |= 1u;
  if (options.order == ComponentOrder::kZYX) bits |= 2u;
  return bits;
}

std::vector<std::uint8_t> serialize_shard(std::span<const TokenSequence> sequences,
                                          const Vocabulary& vocab,
                                          const CodecOptions& options) {
  if (vocab.size() > 0xffff) bad("vocabulary does not fit 16-bit token ids");
  std::vector<std::uint8_t> out;
  std::size_t total = 0;
  for (const auto& s : sequences) total += s.tokens.size();
  out.reserve(kShardHeaderBytes + 8 * sequences.size() + 2 * total);
  out.insert(out.end(), std::begin(kShardMagic), std::end(kShardMagic));
  put_u32(out, kShardVersion);
  put_u32(out, static_cast<std::uint32_t>(vocab.resolution));
  put_u32(out, static_cast<std::uint32_t>(vocab.size()));
  put_u32(out, mode_bits(options));
  put_u64(out, sequences.size());
  std::uint64_t offset = 0;
  for (const auto& s : sequences) {
    put_u64(out, offset);
    offset += s.tokens.size();
  }
  for (const auto& s : sequences) {
    if (s.mode != options.mode) bad("sequence grammar mode differs from shard mode");
    for (Token t : s.tokens) {
      if (t < 0 || t >= vocab.size()) bad("token id out of vocabulary");
      if (t == vocab.pad()) bad("PAD tokens are not stored in shards");
      put_u16(out, static_cast<std::uint16_t>(t));
    }
  }
  return out;
}

void write_shard(const std::filesystem::path& path, std::span<const TokenSequence> sequences,
                 const Vocabulary& vocab, const CodecOptions& options) {
  write_file_bytes(path, serialize_shard(sequences, vocab, options));
}

Shard Shard::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kShardHeaderBytes) bad("truncated header");
  if (std::memcmp(bytes.data(), kShardMagic, 4) != 0) bad("bad magic");
  Shard shard;
  auto& h = shard.header_;
  h.version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  h.resolution = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  h.vocab_size = static_cast<std::uint32_t>(get_le(bytes, 12, 4));
  h.mode_bits = static_cast<std::uint32_t>(get_le(bytes, 16, 4));
  h.count = get_le(bytes, 20, 8);
  if (h.version != kShardVersion) bad("unsupported version " + std::to_string(h.version));
  if (h.resolution < 2 || h.vocab_size != h.resolution + 7) bad("inconsistent N/V");
  if (h.mode_bits > 3) bad("unknown mode bits");
  const std::size_t index_end = kShardHeaderBytes + 8 * h.count;
  if (h.count > bytes.size() / 8 || bytes.size() < index_end) bad("truncated offset index");
  const std::size_t payload_bytes = bytes.size() - index_end;
  if (payload_bytes % 2 != 0) bad("odd payload length");
  const std::size_t n_tokens = payload_bytes / 2;
  shard.offsets_.resize(h.count);
  for (std::size_t i = 0; i < h.count; ++i) {
    shard.offsets_[i] = get_le(bytes, kShardHeaderBytes + 8 * i, 8);
    if (shard.offsets_[i] > n_tokens || (i > 0 && shard.offsets_[i] < shard.offsets_[i - 1])) {
      bad("offset index is not monotone within the payload");
    }
  }
  if (h.count > 0 && shard.offsets_[0] != 0) bad("first offset must be 0");
  shard.payload_.resize(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    shard.payload_[i] = static_cast<std::uint16_t>(get_le(bytes, index_end + 2 * i, 2));
    if (shard.payload_[i] >= h.vocab_size) bad("token id out of vocabulary");
  }
  return shard;
}

Shard Shard::load(const std::filesystem::path& path) { return parse(read_file_bytes(path)); }

std::vector<Token> Shard::sequence(std::size_t index) const {
  if (index >= offsets_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "sequence index " + std::to_string(index) + " out of range (" +
                    std::to_string(offsets_.size()) + " sequences)");
  }
  const auto begin = offsets_[index];
  const auto end = index + 1 < offsets_.size() ? offsets_[index + 1] : payload_.size();
  return {payload_.begin() + static_cast<std::ptrdiff_t>(begin),
          payload_.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace meshseq
