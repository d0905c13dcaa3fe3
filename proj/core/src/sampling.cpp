#include "meshseq/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "meshseq/error.hpp"
#include "meshseq/parallel.hpp"

namespace meshseq {

void SamplingParams::check() const {
  if (top_k < 1) throw Error(ErrorCode::kInvalidArgument, "top_k must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "top_p must be in (0, 1]");
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> probs(logits.size());
  double mx = -HUGE_VAL;
  for (float l : logits) mx = std::max(mx, static_cast<double>(l));
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(static_cast<double>(logits[i]) - mx);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
  return probs;
}

std::vector<Candidate> top_k_top_p(std::span<const double> probs, int k, double p) {
  std::vector<Candidate> c;
  c.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) c.push_back({static_cast<Token>(i), probs[i]});
  const auto keep = std::min(static_cast<std::size_t>(std::max(k, 1)), c.size());
  auto by_prob = [](const Candidate& a, const Candidate& b) {
    return a.prob != b.prob ? a.prob > b.prob : a.id < b.id;
  };
  std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(keep), c.end(), by_prob);
  c.resize(keep);

  double mass = 0;
  for (const auto& x : c) mass += x.prob;
  std::size_t n = 0;
  double cumulative = 0;
  while (n < c.size()) {
    cumulative += c[n].prob / mass;
    ++n;
    if (cumulative >= p - 1e-12) break;  // slack absorbs summation rounding
  }
  c.resize(n);
  double kept = 0;
  for (const auto& x : c) kept += x.prob;
  for (auto& x : c) x.prob /= kept;
  return c;
}

Token draw(std::span<const Candidate> candidates, RandomStream& rng) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidate to draw from");
  const double u = rng.uniform();
  double cumulative = 0;
  for (const auto& c : candidates) {
    cumulative += c.prob;
    if (u < cumulative) return c.id;
  }
  return candidates.back().id;
}

SampleResult complete(const Transformer<float>& model, const Vocabulary& vocab,
                      std::span<const Token> prompt, const SamplingParams& params,
                      std::uint64_t sequence_index) {
  params.check();
  if (model.config().vocab_size != vocab.size()) {
    throw Error(ErrorCode::kInvalidArgument, "model vocabulary does not match");
  }
  GrammarState grammar(vocab, params.mode);
  for (Token t : prompt) grammar.advance(t);  // throws on a malformed prompt
  if (prompt.empty() || !grammar.at_boundary()) {
    throw Error(ErrorCode::kMalformedSequence, "prompt must be BOS followed by whole faces");
  }

  IncrementalDecoder decoder(model, params.class_id);
  const auto cap = std::min(params.max_tokens, decoder.capacity());
  if (prompt.size() >= cap) {
    throw Error(ErrorCode::kInvalidArgument, "prompt does not leave room in the context");
  }
  SampleResult result;
  result.sequence.mode = params.mode;
  result.sequence.tokens.assign(prompt.begin(), prompt.end());
  const RowVector<float>* logits = nullptr;
  for (Token t : prompt) logits = &decoder.step(t);

  RandomStream rng(params.seed, sequence_index);
  auto& tokens = result.sequence.tokens;
  while (tokens.size() < cap) {
    const auto probs = softmax(std::span<const float>(logits->data(), static_cast<std::size_t>(logits->size())));
    auto candidates = top_k_top_p(probs, params.top_k, params.top_p);
    if (params.constrained) {
      const auto mask = grammar.mask(cap - tokens.size());
      std::erase_if(candidates, [&](const Candidate& c) { return !mask[static_cast<std::size_t>(c.id)]; });
      if (candidates.empty()) {
        ++result.fallback_steps;
        for (std::size_t i = 0; i < probs.size(); ++i) {
          if (mask[i]) candidates.push_back({static_cast<Token>(i), probs[i]});
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
          return a.prob != b.prob ? a.prob > b.prob : a.id < b.id;
        });
      }
      if (candidates.empty()) break;  // cannot happen with cap >= 11 and >= 1 open slot
      double mass = 0;
      for (const auto& c : candidates) mass += c.prob;
      if (mass > 0) {
        for (auto& c : candidates) c.prob /= mass;
      } else {
        for (auto& c : candidates) c.prob = 1.0 / static_cast<double>(candidates.size());
      }
    }
    const Token next = draw(candidates, rng);
    tokens.push_back(next);
    if (params.constrained) grammar.advance(next);
    if (next == vocab.eos()) {
      result.terminated = true;
      break;
    }
    if (tokens.size() < cap) logits = &decoder.step(next);
  }
  result.truncated = !result.terminated;
  return result;
}

SampleResult sample(const Transformer<float>& model, const Vocabulary& vocab,
                    const SamplingParams& params, std::uint64_t sequence_index) {
  const Token bos[] = {vocab.bos()};
  return complete(model, vocab, bos, params, sequence_index);
}

std::vector<SampleResult> sample_many(const Transformer<float>& model, const Vocabulary& vocab,
                                      const SamplingParams& params, std::size_t n) {
  std::vector<SampleResult> out(n);
  parallel_for(n, [&](std::size_t i) { out[i] = sample(model, vocab, params, i); });
  return out;
}

}  // namespace meshseq
