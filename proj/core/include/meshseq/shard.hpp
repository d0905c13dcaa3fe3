#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "meshseq/codec.hpp"

namespace meshseq {

// MXTK token shard, all integers little-endian:
//   bytes  0..3   magic "MXTK"
//   u32           format version (1)
//   u32           grid resolution N
//   u32           vocabulary size V (= N + 7)
//   u32           mode: bit 0 = hybrid grammar, bit 1 = z-y-x emission order
//   u64           sequence count S
//   u64[S]        token offset of each sequence within the payload
//   u16[...]      payload: token ids; sequence i spans offsets[i]..offsets[i+1]
//                 (the last one runs to end of file)
inline constexpr char kShardMagic[4] = {'M', 'X', 'T', 'K'};
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kShardHeaderBytes = 28;

struct ShardHeader {
  std::uint32_t version = kShardVersion;
  std::uint32_t resolution = 128;
  std::uint32_t vocab_size = 135;
  std::uint32_t mode_bits = 0;
  std::uint64_t count = 0;

  GrammarMode grammar() const {
    return (mode_bits & 1u) ? GrammarMode::kHybrid : GrammarMode::kTriangle;
  }
  ComponentOrder order() const {
    return (mode_bits & 2u) ? ComponentOrder::kZYX : ComponentOrder::kXYZ;
  }
  CodecOptions codec_options(std::size_t max_faces = 800) const {
    return {grammar(), order(), max_faces};
  }
};

std::uint32_t mode_bits(const CodecOptions& options);

// Serializes sequences to the byte layout above. PAD must not appear.
std::vector<std::uint8_t> serialize_shard(std::span<const TokenSequence> sequences,
                                          const Vocabulary& vocab,
                                          const CodecOptions& options);

void write_shard(const std::filesystem::path& path, std::span<const TokenSequence> sequences,
                 const Vocabulary& vocab, const CodecOptions& options);

class Shard {
 public:
  static Shard parse(std::span<const std::uint8_t> bytes);
  static Shard load(const std::filesystem::path& path);

  const ShardHeader& header() const { return header_; }
  Vocabulary vocabulary() const { return Vocabulary(static_cast<int>(header_.resolution)); }
  std::size_t size() const { return offsets_.size(); }
  std::vector<Token> sequence(std::size_t index) const;
  std::size_t total_tokens() const { return payload_.size(); }

 private:
  ShardHeader header_;
  std::vector<std::uint64_t> offsets_;
  std::vector<std::uint16_t> payload_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace meshseq
