#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "meshseq/model.hpp"

namespace meshseq {

struct TrainConfig {
  double peak_lr = 1e-4;
  double min_lr = 1e-6;
  int warmup_steps = 0;
  int total_steps = 1000;
  double weight_decay = 0.1;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 8;
  std::uint64_t seed = 0;
  // Require every training sequence to end with EOS.
  bool strict_eos = true;

  // Throws Error(kInvalidArgument) on non-positive rates or clip.
  void check() const;
  bool operator==(const TrainConfig&) const = default;
};

// Linear warmup, then cosine decay from peak_lr to min_lr at total_steps.
double learning_rate(const TrainConfig& config, std::int64_t step);

// Global L2 norm of all gradient tensors (double accumulation).
double gradient_norm(const Parameters<float>& grads);

// Scales gradients by clip / norm when norm > clip. Returns the pre-clip norm.
double clip_gradients(Parameters<float>& grads, double clip);

struct StepResult {
  double loss = 0;  // token-mean NLL of the batch before the update
  double grad_norm = 0;
  double lr = 0;
  std::size_t tokens = 0;
};

// AdamW with decoupled weight decay and global-norm clipping. Owns the
// optimizer moments; mutates the model it was constructed with.
class Trainer {
 public:
  Trainer(Transformer<float>& model, TrainConfig config);

  // One update. Deterministic in (parameters, moments, batch, step, seed).
  // A non-finite loss throws Error(kNonFiniteLoss) and leaves state untouched.
  StepResult step(std::span<const Example> batch);

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t step) { step_ = step; }
  const TrainConfig& config() const { return config_; }
  const Parameters<float>& first_moment() const { return m_; }
  const Parameters<float>& second_moment() const { return v_; }
  Parameters<float>& first_moment() { return m_; }
  Parameters<float>& second_moment() { return v_; }

 private:
  Transformer<float>& model_;
  TrainConfig config_;
  Parameters<float> m_, v_, grads_;
  std::int64_t step_ = 0;
};

// Deterministic epoch-shuffled minibatches over an example set.
class BatchSampler {
 public:
  BatchSampler(std::size_t n_examples, int batch_size, std::uint64_t seed);

  // Indices of the batch used at global step `step`.
  std::vector<std::size_t> batch(std::int64_t step) const;

 private:
  std::vector<std::size_t> epoch_order(std::int64_t epoch) const;

  std::size_t n_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace meshseq
