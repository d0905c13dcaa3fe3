#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshseq/codec.hpp"

namespace meshseq {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

struct ModelConfig {
  int vocab_size = 135;
  int d_model = 256;
  int d_ffn = 1024;
  int n_layers = 4;
  int n_heads = 4;
  int context_length = 1024;
  int prefix_length = 32;  // learned conditioning tokens per class
  int n_classes = 0;       // 0 = unconditional
  double dropout = 0.0;
  double init_std = 0.02;
  std::uint64_t seed = 0;

  int head_dim() const { return d_model / n_heads; }
  // Throws Error(kInvalidArgument) on inconsistent shapes.
  void check() const;
  bool operator==(const ModelConfig&) const = default;
};

// All learnable tensors. Vectors (gains, biases) are stored as 1 x n.
template <typename Real>
struct Parameters {
  using Mat = Matrix<Real>;

  // One row per token id. Coordinate rows are shared by the x, y and z
  // slots: the same value always reads the same row.
  Mat token_embedding;     // V x d
  Mat position_embedding;  // context x d
  Mat class_prefix;        // (n_classes * M) x d

  struct Block {
    Mat ln1_gain, ln1_bias;
    Mat qkv_weight, qkv_bias;  // d x 3d
    Mat out_weight, out_bias;  // d x d
    Mat ln2_gain, ln2_bias;
    Mat ffn_in_weight, ffn_in_bias;    // d x f
    Mat ffn_out_weight, ffn_out_bias;  // f x d
  };
  std::vector<Block> blocks;

  Mat final_ln_gain, final_ln_bias;
  Mat head_weight, head_bias;  // d x V

  static Parameters zeros(const ModelConfig& config);
  // Normal(0, init_std) weights, zero biases, unit gains.
  static Parameters initialized(const ModelConfig& config);

  // f(name, tensor, decays) for every tensor in a fixed order. `decays` marks
  // tensors that receive decoupled weight decay (matrices, not gains/biases).
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  template <typename Other>
  Parameters<Other> cast() const;

  void set_zero();
  std::size_t count() const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    f("token_embedding", self.token_embedding, true);
    f("position_embedding", self.position_embedding, true);
    f("class_prefix", self.class_prefix, true);
    for (std::size_t i = 0; i < self.blocks.size(); ++i) {
      auto& b = self.blocks[i];
      const std::string p = "blocks." + std::to_string(i) + ".";
      f(p + "ln1.gain", b.ln1_gain, false);
      f(p + "ln1.bias", b.ln1_bias, false);
      f(p + "attn.qkv.weight", b.qkv_weight, true);
      f(p + "attn.qkv.bias", b.qkv_bias, false);
      f(p + "attn.out.weight", b.out_weight, true);
      f(p + "attn.out.bias", b.out_bias, false);
      f(p + "ln2.gain", b.ln2_gain, false);
      f(p + "ln2.bias", b.ln2_bias, false);
      f(p + "ffn.in.weight", b.ffn_in_weight, true);
      f(p + "ffn.in.bias", b.ffn_in_bias, false);
      f(p + "ffn.out.weight", b.ffn_out_weight, true);
      f(p + "ffn.out.bias", b.ffn_out_bias, false);
    }
    f("final_ln.gain", self.final_ln_gain, false);
    f("final_ln.bias", self.final_ln_bias, false);
    f("head.weight", self.head_weight, true);
    f("head.bias", self.head_bias, false);
  }
};

// One training / evaluation sequence.
struct Example {
  std::vector<Token> tokens;
  std::optional<int> class_id;
};

struct DropoutContext {
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct NllSum {
  double nll = 0;           // summed negative log-likelihood (nats)
  std::size_t targets = 0;  // predicted positions
  double carry = 0;         // Neumaier compensation for nll

  void add(double x) {
    const double t = nll + x;
    carry += std::abs(nll) >= std::abs(x) ? (nll - t) + x : (x - t) + nll;
    nll = t;
  }
  double total() const { return nll + carry; }
  double mean() const { return targets ? total() / static_cast<double>(targets) : 0.0; }
  NllSum& operator+=(const NllSum& o) {
    add(o.nll);
    add(o.carry);
    targets += o.targets;
    return *this;
  }
};

// Decoder-only pre-norm transformer over token sequences. With a class id,
// the class's M prefix rows occupy positions 0..M-1 and the tokens follow.
template <typename Real>
class Transformer {
 public:
  using Mat = Matrix<Real>;

  Transformer(ModelConfig config, Parameters<Real> params);
  explicit Transformer(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const Parameters<Real>& params() const { return params_; }
  Parameters<Real>& params() { return params_; }

  // Logits (tokens x V); row i predicts token i + 1.
  Mat forward(std::span<const Token> tokens, std::optional<int> class_id = std::nullopt) const;

  // Next-token NLL over targets tokens[1..]; PAD targets are skipped.
  NllSum nll(std::span<const Token> tokens, std::optional<int> class_id = std::nullopt) const;

  // Adds scale * d(sum NLL)/d(theta) into `grads` and returns the NLL.
  NllSum accumulate_gradients(std::span<const Token> tokens, std::optional<int> class_id,
                              Parameters<Real>& grads, Real scale,
                              const DropoutContext& dropout = {}) const;

  // Token-mean NLL over a batch and its gradient (zeroes `grads` first).
  NllSum batch_gradients(std::span<const Example> batch, Parameters<Real>& grads,
                         const DropoutContext& dropout = {}) const;

  // Number of prefix positions used for `class_id`.
  int prefix_rows(std::optional<int> class_id) const;

 private:
  struct Cache;
  void check_input(std::span<const Token> tokens, std::optional<int> class_id) const;
  Mat run(std::span<const Token> tokens, std::optional<int> class_id, Cache* cache,
          const DropoutContext* dropout) const;

  ModelConfig config_;
  Parameters<Real> params_;
  Token pad_token_ = -1;
};

// Single-sequence incremental evaluation with a key/value cache; used for
// sampling. Produces the same logits as Transformer::forward up to rounding.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const Transformer<float>& model,
                              std::optional<int> class_id = std::nullopt);

  // Feeds one token and returns logits for the next position.
  const RowVector<float>& step(Token token);
  std::size_t length() const { return length_; }
  std::size_t capacity() const;

 private:
  RowVector<float> advance(const RowVector<float>& input);

  const Transformer<float>& model_;
  std::vector<Matrix<float>> keys_, values_;
  std::size_t length_ = 0;
  int prefix_rows_ = 0;
  RowVector<float> logits_;
};

// Mean NLL and perplexity over a sequence set; token-weighted.
NllSum evaluate_nll(const Transformer<float>& model, std::span<const Example> examples);
double perplexity(const Transformer<float>& model, std::span<const Example> examples);

extern template struct Parameters<float>;
extern template struct Parameters<double>;
extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace meshseq
