#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "meshseq/codec.hpp"
#include "meshseq/model.hpp"
#include "meshseq/rng.hpp"

namespace meshseq {

struct SamplingParams {
  int top_k = 50;
  double top_p = 0.95;
  std::size_t max_tokens = 1024;  // total length cap, BOS and EOS included
  std::uint64_t seed = 0;
  bool constrained = false;
  std::optional<int> class_id;
  GrammarMode mode = GrammarMode::kTriangle;

  // Throws Error(kInvalidArgument) unless k >= 1 and p in (0, 1].
  void check() const;
};

struct Candidate {
  Token id;
  double prob;
};

std::vector<double> softmax(std::span<const float> logits);

// Keeps the k most probable tokens (ties: lower id first), renormalizes, then
// keeps the shortest prefix whose cumulative probability reaches p, and
// renormalizes again. Result is sorted by descending probability.
std::vector<Candidate> top_k_top_p(std::span<const double> probs, int k, double p);

// Inverse-CDF draw over candidates in their given order.
Token draw(std::span<const Candidate> candidates, RandomStream& rng);

struct SampleResult {
  TokenSequence sequence;
  bool terminated = false;  // ended with EOS
  bool truncated = false;   // stopped at max_tokens or the context limit
  std::size_t fallback_steps = 0;  // constrained steps that fell back to the grammar mask
};

// Continues `prompt` (BOS followed by whole faces) until EOS or the length
// cap. Prompt tokens are returned unchanged. Randomness comes from stream
// `sequence_index` of params.seed.
SampleResult complete(const Transformer<float>& model, const Vocabulary& vocab,
                      std::span<const Token> prompt, const SamplingParams& params,
                      std::uint64_t sequence_index = 0);

// Unconditional (or class-conditional) sample: complete() from [BOS].
SampleResult sample(const Transformer<float>& model, const Vocabulary& vocab,
                    const SamplingParams& params, std::uint64_t sequence_index = 0);

// n independent samples, sequence i drawn from stream i.
std::vector<SampleResult> sample_many(const Transformer<float>& model, const Vocabulary& vocab,
                                      const SamplingParams& params, std::size_t n);

}  // namespace meshseq
