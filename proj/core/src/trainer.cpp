#include "meshseq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "meshseq/error.hpp"
#include "meshseq/rng.hpp"

namespace meshseq {

void TrainConfig::check() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidArgument, "train config: " + why); };
  if (!(peak_lr > 0) || !(min_lr > 0) || min_lr > peak_lr) fail("need 0 < min_lr <= peak_lr");
  if (!(clip_norm > 0)) fail("clip_norm must be positive");
  if (weight_decay < 0) fail("weight_decay must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) fail("betas must be in [0, 1)");
  if (!(epsilon > 0)) fail("epsilon must be positive");
  if (batch_size <= 0 || total_steps <= 0 || warmup_steps < 0) fail("steps and batch size must be positive");
}

double learning_rate(const TrainConfig& c, std::int64_t step) {
  if (step < c.warmup_steps) {
    return c.peak_lr * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  }
  const double span = std::max<std::int64_t>(1, c.total_steps - c.warmup_steps);
  const double progress = std::clamp(static_cast<double>(step - c.warmup_steps) / span, 0.0, 1.0);
  return c.min_lr + 0.5 * (c.peak_lr - c.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

double gradient_norm(const Parameters<float>& grads) {
  double sq = 0;
  grads.visit([&](const std::string&, const Matrix<float>& g, bool) {
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double v = g.data()[i];
      sq += v * v;
    }
  });
  return std::sqrt(sq);
}

double clip_gradients(Parameters<float>& grads, double clip) {
  const double norm = gradient_norm(grads);
  if (norm > clip) {
    const auto factor = static_cast<float>(clip / norm);
    grads.visit([&](const std::string&, Matrix<float>& g, bool) { g *= factor; });
  }
  return norm;
}

Trainer::Trainer(Transformer<float>& model, TrainConfig config)
    : model_(model), config_(config) {
  config_.check();
  m_ = Parameters<float>::zeros(model.config());
  v_ = Parameters<float>::zeros(model.config());
  grads_ = Parameters<float>::zeros(model.config());
}

StepResult Trainer::step(std::span<const Example> batch) {
  if (batch.empty()) throw Error(ErrorCode::kInvalidArgument, "empty batch");
  const Token eos = model_.config().vocab_size - 6;
  if (config_.strict_eos) {
    for (const auto& ex : batch) {
      if (ex.tokens.empty() || ex.tokens.back() != eos) {
        throw Error(ErrorCode::kMalformedSequence, "training sequence does not end with EOS");
      }
    }
  }
  const DropoutContext dropout{model_.config().dropout, config_.seed,
                               mix_stream(0xD409, static_cast<std::uint64_t>(step_))};
  const auto nll = model_.batch_gradients(batch, grads_, dropout);

  StepResult result;
  result.loss = nll.mean();
  result.tokens = nll.targets;
  if (!std::isfinite(result.loss)) {
    throw Error(ErrorCode::kNonFiniteLoss, "non-finite loss at step " + std::to_string(step_));
  }
  result.grad_norm = clip_gradients(grads_, config_.clip_norm);
  if (!std::isfinite(result.grad_norm)) {
    throw Error(ErrorCode::kNonFiniteLoss, "non-finite gradient at step " + std::to_string(step_));
  }
  result.lr = learning_rate(config_, step_);

  const double t = static_cast<double>(step_ + 1);
  const auto lr = static_cast<float>(result.lr);
  const auto b1 = static_cast<float>(config_.beta1);
  const auto b2 = static_cast<float>(config_.beta2);
  const auto bc1 = static_cast<float>(1.0 - std::pow(config_.beta1, t));
  const auto bc2 = static_cast<float>(1.0 - std::pow(config_.beta2, t));
  const auto eps = static_cast<float>(config_.epsilon);
  const auto decay = static_cast<float>(1.0 - result.lr * config_.weight_decay);

  std::vector<Matrix<float>*> ms, vs, gs;
  m_.visit([&](const std::string&, Matrix<float>& x, bool) { ms.push_back(&x); });
  v_.visit([&](const std::string&, Matrix<float>& x, bool) { vs.push_back(&x); });
  grads_.visit([&](const std::string&, Matrix<float>& x, bool) { gs.push_back(&x); });
  std::size_t i = 0;
  model_.params().visit([&](const std::string&, Matrix<float>& p, bool decays) {
    auto& m = *ms[i];
    auto& v = *vs[i];
    const auto& g = *gs[i];
    ++i;
    if (p.size() == 0) return;
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    if (decays) p *= decay;
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  });
  ++step_;
  return result;
}

BatchSampler::BatchSampler(std::size_t n_examples, int batch_size, std::uint64_t seed)
    : n_(n_examples), batch_size_(static_cast<std::size_t>(batch_size)), seed_(seed) {
  if (n_ == 0) throw Error(ErrorCode::kEmptyInput, "no training examples");
  if (batch_size <= 0) throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  batch_size_ = std::min(batch_size_, n_);
}

std::vector<std::size_t> BatchSampler::epoch_order(std::int64_t epoch) const {
  std::vector<std::size_t> order(n_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RandomStream rng(seed_, mix_stream(0xBA7C, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n_; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::vector<std::size_t> BatchSampler::batch(std::int64_t step) const {
  // Each epoch is a whole number of batches; the tail of a permutation that
  // does not fill a batch is skipped.
  const std::size_t per_epoch = n_ / batch_size_;
  const auto epoch = static_cast<std::int64_t>(static_cast<std::size_t>(step) / per_epoch);
  const auto slot = static_cast<std::size_t>(step) % per_epoch;
  const auto order = epoch_order(epoch);
  return {order.begin() + static_cast<std::ptrdiff_t>(slot * batch_size_),
          order.begin() + static_cast<std::ptrdiff_t>((slot + 1) * batch_size_)};
}

}  // namespace meshseq
