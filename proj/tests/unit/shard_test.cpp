#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "fixtures.hpp"
#include "meshseq/error.hpp"
#include "meshseq/shard.hpp"

using namespace meshseq;

TEST(Shard, HeaderBytes) {
  const Vocabulary v(128);
  std::vector<TokenSequence> seqs{{{128, 1, 2, 3, 4, 5, 6, 7, 8, 9, 129}, GrammarMode::kTriangle}};
  const auto bytes = serialize_shard(seqs, v, {.order = ComponentOrder::kZYX});
  const std::vector<std::uint8_t> head{'M', 'X', 'T', 'K', 1, 0, 0, 0, 128, 0, 0, 0, 135, 0, 0, 0,
                                       2,   0,   0,   0,   1, 0, 0, 0, 0,   0, 0, 0};
  ASSERT_GE(bytes.size(), head.size());
  EXPECT_TRUE(std::equal(head.begin(), head.end(), bytes.begin()));
  // one u64 start offset per sequence, then the u16 payload
  EXPECT_EQ(bytes.size(), kShardHeaderBytes + 8 + 11 * 2);
  EXPECT_EQ(bytes[kShardHeaderBytes], 0);
  EXPECT_EQ(bytes[kShardHeaderBytes + 8], 128);
  EXPECT_EQ(bytes[kShardHeaderBytes + 10], 1);
  const auto shard = Shard::parse(bytes);
  EXPECT_EQ(shard.header().order(), ComponentOrder::kZYX);
  EXPECT_EQ(shard.sequence(0), seqs[0].tokens);
}

TEST(Shard, RoundTripFile) {
  RandomStream rng(1, 0);
  const Vocabulary v(128);
  std::vector<TokenSequence> seqs;
  for (int i = 0; i < 20; ++i) seqs.push_back(encode(fixture::random_canonical(rng, 1 + rng.below(30)), v));
  const auto path = std::filesystem::temp_directory_path() / "meshseq_shard_test.mxtk";
  write_shard(path, seqs, v, {});
  const auto shard = Shard::load(path);
  ASSERT_EQ(shard.size(), seqs.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    EXPECT_EQ(shard.sequence(i), seqs[i].tokens);
    total += seqs[i].tokens.size();
  }
  EXPECT_EQ(shard.total_tokens(), total);
  EXPECT_THROW(shard.sequence(20), Error);
  std::filesystem::remove(path);
}

TEST(Shard, RejectsPadAndCorruption) {
  const Vocabulary v(128);
  std::vector<TokenSequence> bad{{{128, 130, 129}, GrammarMode::kTriangle}};
  EXPECT_THROW(serialize_shard(bad, v, {}), Error);
  std::vector<TokenSequence> ok{{{128, 1, 2, 3, 4, 5, 6, 7, 8, 9, 129}, GrammarMode::kTriangle}};
  auto bytes = serialize_shard(ok, v, {});
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(Shard::parse(truncated), Error);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(Shard::parse(magic), Error);
}
