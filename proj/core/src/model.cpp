#include "meshseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meshseq/error.hpp"
#include "meshseq/rng.hpp"

namespace meshseq {

void ModelConfig::check() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidArgument, "model config: " + why); };
  if (vocab_size < 8) fail("vocab_size must be >= 8");
  if (d_model <= 0 || d_ffn <= 0 || n_heads <= 0 || n_layers < 0) fail("dimensions must be positive");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (context_length < 2) fail("context_length must be >= 2");
  if (prefix_length < 0 || n_classes < 0) fail("prefix_length and n_classes must be >= 0");
  if (n_classes > 0 && prefix_length >= context_length) fail("prefix does not fit the context");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(init_std > 0.0)) fail("init_std must be positive");
}

// ---------------------------------------------------------------------------
// Parameters

template <typename Real>
Parameters<Real> Parameters<Real>::zeros(const ModelConfig& c) {
  c.check();
  const auto d = c.d_model, f = c.d_ffn, v = c.vocab_size;
  Parameters p;
  p.token_embedding = Mat::Zero(v, d);
  p.position_embedding = Mat::Zero(c.context_length, d);
  p.class_prefix = Mat::Zero(static_cast<Eigen::Index>(c.n_classes) * c.prefix_length, d);
  p.blocks.resize(static_cast<std::size_t>(c.n_layers));
  for (auto& b : p.blocks) {
    b.ln1_gain = Mat::Zero(1, d);
    b.ln1_bias = Mat::Zero(1, d);
    b.qkv_weight = Mat::Zero(d, 3 * d);
    b.qkv_bias = Mat::Zero(1, 3 * d);
    b.out_weight = Mat::Zero(d, d);
    b.out_bias = Mat::Zero(1, d);
    b.ln2_gain = Mat::Zero(1, d);
    b.ln2_bias = Mat::Zero(1, d);
    b.ffn_in_weight = Mat::Zero(d, f);
    b.ffn_in_bias = Mat::Zero(1, f);
    b.ffn_out_weight = Mat::Zero(f, d);
    b.ffn_out_bias = Mat::Zero(1, d);
  }
  p.final_ln_gain = Mat::Zero(1, d);
  p.final_ln_bias = Mat::Zero(1, d);
  p.head_weight = Mat::Zero(d, v);
  p.head_bias = Mat::Zero(1, v);
  return p;
}

template <typename Real>
Parameters<Real> Parameters<Real>::initialized(const ModelConfig& c) {
  auto p = zeros(c);
  std::uint64_t tensor = 0;
  p.visit([&](const std::string& name, Mat& m, bool decays) {
    ++tensor;
    if (name.ends_with(".gain")) {
      m.setOnes();
    } else if (decays) {
      RandomStream rng(c.seed, mix_stream(0x1A17, tensor));
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = static_cast<Real>(c.init_std * rng.normal());
      }
    }
  });
  return p;
}

template <typename Real>
template <typename Other>
Parameters<Other> Parameters<Real>::cast() const {
  Parameters<Other> out;
  out.blocks.resize(blocks.size());
  std::vector<const Mat*> src;
  visit([&](const std::string&, const Mat& m, bool) { src.push_back(&m); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Matrix<Other>& m, bool) { m = src[i++]->template cast<Other>(); });
  return out;
}

template <typename Real>
void Parameters<Real>::set_zero() {
  visit([](const std::string&, Mat& m, bool) { m.setZero(); });
}

template <typename Real>
std::size_t Parameters<Real>::count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Mat& m, bool) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <typename Real>
Matrix<Real> layer_norm(const Matrix<Real>& x, const Matrix<Real>& gain, const Matrix<Real>& bias,
                        Matrix<Real>* xhat_out, std::vector<Real>* rstd_out) {
  const auto rows = x.rows(), d = x.cols();
  Matrix<Real> xhat(rows, d);
  std::vector<Real> rstd(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Real mean = x.row(i).mean();
    const Real var = (x.row(i).array() - mean).square().mean();
    const Real r = Real(1) / std::sqrt(var + Real(kLayerNormEps));
    rstd[static_cast<std::size_t>(i)] = r;
    xhat.row(i) = (x.row(i).array() - mean) * r;
  }
  Matrix<Real> h = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
  if (xhat_out) *xhat_out = std::move(xhat);
  if (rstd_out) *rstd_out = std::move(rstd);
  return h;
}

template <typename Real>
Matrix<Real> layer_norm_backward(const Matrix<Real>& dh, const Matrix<Real>& xhat,
                                 const std::vector<Real>& rstd, const Matrix<Real>& gain,
                                 Matrix<Real>& dgain, Matrix<Real>& dbias) {
  dgain.row(0) += (dh.array() * xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dh.colwise().sum();
  Matrix<Real> dxhat = dh.array().rowwise() * gain.row(0).array();
  Matrix<Real> dx(dh.rows(), dh.cols());
  for (Eigen::Index i = 0; i < dh.rows(); ++i) {
    const Real m1 = dxhat.row(i).mean();
    const Real m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
    dx.row(i) = rstd[static_cast<std::size_t>(i)] *
                (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
  }
  return dx;
}

template <typename Real>
Real gelu(Real x) {
  const Real u = Real(kGeluC) * (x + Real(kGeluA) * x * x * x);
  return Real(0.5) * x * (Real(1) + std::tanh(u));
}

template <typename Real>
Real gelu_grad(Real x) {
  const Real u = Real(kGeluC) * (x + Real(kGeluA) * x * x * x);
  const Real t = std::tanh(u);
  return Real(0.5) * (Real(1) + t) +
         Real(0.5) * x * (Real(1) - t * t) * Real(kGeluC) * (Real(1) + Real(3 * kGeluA) * x * x);
}

template <typename Real>
Matrix<Real> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, RandomStream& rng) {
  Matrix<Real> mask(rows, cols);
  const Real keep = static_cast<Real>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? Real(0) : keep;
  return mask;
}

}  // namespace

// ---------------------------------------------------------------------------
// Transformer

template <typename Real>
struct Transformer<Real>::Cache {
  struct BlockCache {
    Mat x_in, xhat1, h1, qkv, attn, drop1, x_mid, xhat2, h2, pre, act, drop2;
    std::vector<Real> rstd1, rstd2;
    std::vector<Mat> probs;  // per head, rows x rows
  };
  std::vector<BlockCache> blocks;
  Mat x_final, xhat_f, h_f;
  std::vector<Real> rstd_f;
  int prefix = 0;
};

template <typename Real>
Transformer<Real>::Transformer(ModelConfig config, Parameters<Real> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.check();
  pad_token_ = config_.vocab_size - 5;
  const auto expected = Parameters<Real>::zeros(config_);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  expected.visit([&](const std::string&, const Mat& m, bool) { shapes.emplace_back(m.rows(), m.cols()); });
  std::size_t i = 0;
  if (params_.blocks.size() != expected.blocks.size()) {
    throw Error(ErrorCode::kInvalidArgument, "parameter block count does not match config");
  }
  params_.visit([&](const std::string& name, const Mat& m, bool) {
    if (m.rows() != shapes[i].first || m.cols() != shapes[i].second) {
      throw Error(ErrorCode::kInvalidArgument, "parameter " + name + " has the wrong shape");
    }
    ++i;
  });
}

template <typename Real>
Transformer<Real>::Transformer(const ModelConfig& config)
    : Transformer(config, Parameters<Real>::initialized(config)) {}

template <typename Real>
int Transformer<Real>::prefix_rows(std::optional<int> class_id) const {
  return class_id ? config_.prefix_length : 0;
}

template <typename Real>
void Transformer<Real>::check_input(std::span<const Token> tokens, std::optional<int> class_id) const {
  if (tokens.empty()) throw Error(ErrorCode::kInvalidArgument, "empty token sequence");
  if (class_id) {
    if (config_.n_classes == 0) throw Error(ErrorCode::kInvalidArgument, "model is unconditional");
    if (*class_id < 0 || *class_id >= config_.n_classes) {
      throw Error(ErrorCode::kInvalidArgument, "class id " + std::to_string(*class_id) + " out of range");
    }
  }
  const auto total = tokens.size() + static_cast<std::size_t>(prefix_rows(class_id));
  if (total > static_cast<std::size_t>(config_.context_length)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sequence of " + std::to_string(total) + " positions exceeds context length " +
                    std::to_string(config_.context_length));
  }
  for (Token t : tokens) {
    if (t < 0 || t >= config_.vocab_size) throw Error(ErrorCode::kInvalidArgument, "token id out of vocabulary");
  }
}

template <typename Real>
typename Transformer<Real>::Mat Transformer<Real>::run(std::span<const Token> tokens,
                                                       std::optional<int> class_id, Cache* cache,
                                                       const DropoutContext* dropout) const {
  check_input(tokens, class_id);
  const int m = prefix_rows(class_id);
  const auto n_tok = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index rows = m + n_tok;
  const auto d = config_.d_model;
  const auto hd = config_.head_dim();
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(hd));
  const bool use_dropout = dropout && dropout->rate > 0.0;
  std::optional<RandomStream> drop_rng;
  if (use_dropout) drop_rng.emplace(dropout->seed, dropout->stream);

  Mat x(rows, d);
  if (m > 0) x.topRows(m) = params_.class_prefix.middleRows(static_cast<Eigen::Index>(*class_id) * m, m);
  for (Eigen::Index i = 0; i < n_tok; ++i) x.row(m + i) = params_.token_embedding.row(tokens[static_cast<std::size_t>(i)]);
  x += params_.position_embedding.topRows(rows);

  if (cache) {
    cache->blocks.resize(params_.blocks.size());
    cache->prefix = m;
  }
  for (std::size_t li = 0; li < params_.blocks.size(); ++li) {
    const auto& b = params_.blocks[li];
    typename Cache::BlockCache local;
    auto& c = cache ? cache->blocks[li] : local;
    c.x_in = x;
    c.h1 = layer_norm(x, b.ln1_gain, b.ln1_bias, &c.xhat1, &c.rstd1);
    c.qkv.noalias() = c.h1 * b.qkv_weight;
    c.qkv.rowwise() += b.qkv_bias.row(0);
    c.attn.resize(rows, d);
    c.probs.resize(static_cast<std::size_t>(config_.n_heads));
    for (int h = 0; h < config_.n_heads; ++h) {
      const auto q = c.qkv.middleCols(h * hd, hd);
      const auto k = c.qkv.middleCols(d + h * hd, hd);
      const auto v = c.qkv.middleCols(2 * d + h * hd, hd);
      Mat& p = c.probs[static_cast<std::size_t>(h)];
      p.noalias() = q * k.transpose();
      for (Eigen::Index i = 0; i < rows; ++i) {
        auto row = p.row(i);
        const Real mx = (row.head(i + 1) * scale).maxCoeff();
        Real sum = 0;
        for (Eigen::Index j = 0; j <= i; ++j) {
          const Real e = std::exp(row(j) * scale - mx);
          row(j) = e;
          sum += e;
        }
        row.head(i + 1) /= sum;
        row.tail(rows - i - 1).setZero();
      }
      c.attn.middleCols(h * hd, hd).noalias() = p * v;
    }
    Mat y = c.attn * b.out_weight;
    y.rowwise() += b.out_bias.row(0);
    if (use_dropout) {
      c.drop1 = dropout_mask<Real>(rows, d, dropout->rate, *drop_rng);
      y.array() *= c.drop1.array();
    }
    x += y;
    c.x_mid = x;
    c.h2 = layer_norm(x, b.ln2_gain, b.ln2_bias, &c.xhat2, &c.rstd2);
    c.pre.noalias() = c.h2 * b.ffn_in_weight;
    c.pre.rowwise() += b.ffn_in_bias.row(0);
    c.act = c.pre.unaryExpr([](Real u) { return gelu(u); });
    Mat z = c.act * b.ffn_out_weight;
    z.rowwise() += b.ffn_out_bias.row(0);
    if (use_dropout) {
      c.drop2 = dropout_mask<Real>(rows, d, dropout->rate, *drop_rng);
      z.array() *= c.drop2.array();
    }
    x += z;
  }
  Mat xhat_f;
  std::vector<Real> rstd_f;
  Mat hf = layer_norm(x, params_.final_ln_gain, params_.final_ln_bias, &xhat_f, &rstd_f);
  Mat logits = hf.bottomRows(n_tok) * params_.head_weight;
  logits.rowwise() += params_.head_bias.row(0);
  if (cache) {
    cache->x_final = std::move(x);
    cache->xhat_f = std::move(xhat_f);
    cache->rstd_f = std::move(rstd_f);
    cache->h_f = std::move(hf);
  }
  return logits;
}

template <typename Real>
typename Transformer<Real>::Mat Transformer<Real>::forward(std::span<const Token> tokens,
                                                           std::optional<int> class_id) const {
  return run(tokens, class_id, nullptr, nullptr);
}

namespace {

// log-softmax NLL of `target` for one logits row, in double.
template <typename Row>
double row_nll(const Row& logits, Token target) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j) mx = std::max(mx, static_cast<double>(logits(j)));
  double sum = 0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) sum += std::exp(static_cast<double>(logits(j)) - mx);
  return std::log(sum) + mx - static_cast<double>(logits(target));
}

}  // namespace

template <typename Real>
NllSum Transformer<Real>::nll(std::span<const Token> tokens, std::optional<int> class_id) const {
  const Mat logits = forward(tokens, class_id);
  NllSum out;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    const Token target = tokens[i + 1];
    if (target == pad_token_) continue;
    out.add(row_nll(logits.row(static_cast<Eigen::Index>(i)), target));
    ++out.targets;
  }
  return out;
}

template <typename Real>
NllSum Transformer<Real>::accumulate_gradients(std::span<const Token> tokens,
                                               std::optional<int> class_id,
                                               Parameters<Real>& grads, Real scale,
                                               const DropoutContext& dropout) const {
  Cache cache;
  const Mat logits = run(tokens, class_id, &cache, &dropout);
  const int m = cache.prefix;
  const auto n_tok = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index rows = m + n_tok;
  const auto d = config_.d_model;
  const auto hd = config_.head_dim();
  const Real att_scale = Real(1) / std::sqrt(static_cast<Real>(hd));
  const bool use_dropout = dropout.rate > 0.0;

  // Softmax cross-entropy: d logits = scale * (softmax - onehot).
  NllSum out;
  Mat dlogits = Mat::Zero(n_tok, config_.vocab_size);
  for (Eigen::Index i = 0; i + 1 < n_tok; ++i) {
    const Token target = tokens[static_cast<std::size_t>(i + 1)];
    if (target == pad_token_) continue;
    const auto row = logits.row(i);
    out.add(row_nll(row, target));
    ++out.targets;
    const Real mx = row.maxCoeff();
    auto drow = dlogits.row(i);
    drow = (row.array() - mx).exp().matrix();
    drow /= drow.sum();
    drow(target) -= Real(1);
    drow *= scale;
  }

  grads.head_weight.noalias() += cache.h_f.bottomRows(n_tok).transpose() * dlogits;
  grads.head_bias.row(0) += dlogits.colwise().sum();
  Mat dhf = Mat::Zero(rows, d);
  dhf.bottomRows(n_tok).noalias() = dlogits * params_.head_weight.transpose();
  Mat dx = layer_norm_backward(dhf, cache.xhat_f, cache.rstd_f, params_.final_ln_gain,
                               grads.final_ln_gain, grads.final_ln_bias);

  for (std::size_t li = params_.blocks.size(); li-- > 0;) {
    const auto& b = params_.blocks[li];
    auto& g = grads.blocks[li];
    auto& c = cache.blocks[li];

    // Feed-forward branch.
    Mat dz = dx;
    if (use_dropout) dz.array() *= c.drop2.array();
    g.ffn_out_weight.noalias() += c.act.transpose() * dz;
    g.ffn_out_bias.row(0) += dz.colwise().sum();
    Mat dact = dz * b.ffn_out_weight.transpose();
    Mat dpre = dact.array() * c.pre.unaryExpr([](Real u) { return gelu_grad(u); }).array();
    g.ffn_in_weight.noalias() += c.h2.transpose() * dpre;
    g.ffn_in_bias.row(0) += dpre.colwise().sum();
    Mat dh2 = dpre * b.ffn_in_weight.transpose();
    dx += layer_norm_backward(dh2, c.xhat2, c.rstd2, b.ln2_gain, g.ln2_gain, g.ln2_bias);

    // Attention branch.
    Mat dy = dx;
    if (use_dropout) dy.array() *= c.drop1.array();
    g.out_weight.noalias() += c.attn.transpose() * dy;
    g.out_bias.row(0) += dy.colwise().sum();
    Mat dattn = dy * b.out_weight.transpose();
    Mat dqkv(rows, 3 * d);
    for (int h = 0; h < config_.n_heads; ++h) {
      const auto q = c.qkv.middleCols(h * hd, hd);
      const auto k = c.qkv.middleCols(d + h * hd, hd);
      const auto v = c.qkv.middleCols(2 * d + h * hd, hd);
      const Mat& p = c.probs[static_cast<std::size_t>(h)];
      const auto dout = dattn.middleCols(h * hd, hd);
      dqkv.middleCols(2 * d + h * hd, hd).noalias() = p.transpose() * dout;
      Mat dp = dout * v.transpose();
      // Softmax backward; masked entries have p == 0 and stay 0.
      Mat ds = p.array() * (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
      ds *= att_scale;
      dqkv.middleCols(h * hd, hd).noalias() = ds * k;
      dqkv.middleCols(d + h * hd, hd).noalias() = ds.transpose() * q;
    }
    g.qkv_weight.noalias() += c.h1.transpose() * dqkv;
    g.qkv_bias.row(0) += dqkv.colwise().sum();
    Mat dh1 = dqkv * b.qkv_weight.transpose();
    dx += layer_norm_backward(dh1, c.xhat1, c.rstd1, b.ln1_gain, g.ln1_gain, g.ln1_bias);
  }

  grads.position_embedding.topRows(rows) += dx;
  if (m > 0) grads.class_prefix.middleRows(static_cast<Eigen::Index>(*class_id) * m, m) += dx.topRows(m);
  for (Eigen::Index i = 0; i < n_tok; ++i) {
    grads.token_embedding.row(tokens[static_cast<std::size_t>(i)]) += dx.row(m + i);
  }
  return out;
}

template <typename Real>
NllSum Transformer<Real>::batch_gradients(std::span<const Example> batch, Parameters<Real>& grads,
                                          const DropoutContext& dropout) const {
  grads.set_zero();
  std::size_t targets = 0;
  for (const auto& ex : batch) {
    for (std::size_t i = 1; i < ex.tokens.size(); ++i) targets += ex.tokens[i] != pad_token_;
  }
  if (targets == 0) throw Error(ErrorCode::kInvalidArgument, "batch has no prediction targets");
  const Real scale = Real(1) / static_cast<Real>(targets);
  NllSum total;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    DropoutContext ctx = dropout;
    ctx.stream = mix_stream(dropout.stream, s);
    total += accumulate_gradients(batch[s].tokens, batch[s].class_id, grads, scale, ctx);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Incremental decoding

IncrementalDecoder::IncrementalDecoder(const Transformer<float>& model, std::optional<int> class_id)
    : model_(model) {
  const auto& cfg = model.config();
  if (class_id && (cfg.n_classes == 0 || *class_id < 0 || *class_id >= cfg.n_classes)) {
    throw Error(ErrorCode::kInvalidArgument, "class id out of range");
  }
  keys_.assign(model.params().blocks.size(), Matrix<float>(cfg.context_length, cfg.d_model));
  values_ = keys_;
  prefix_rows_ = model.prefix_rows(class_id);
  const auto& p = model.params();
  for (int i = 0; i < prefix_rows_; ++i) {
    RowVector<float> x = p.class_prefix.row(static_cast<Eigen::Index>(*class_id) * prefix_rows_ + i);
    advance(x);
  }
}

std::size_t IncrementalDecoder::capacity() const {
  return static_cast<std::size_t>(model_.config().context_length - prefix_rows_);
}

const RowVector<float>& IncrementalDecoder::step(Token token) {
  const auto& cfg = model_.config();
  if (token < 0 || token >= cfg.vocab_size) throw Error(ErrorCode::kInvalidArgument, "token id out of vocabulary");
  if (length_ >= static_cast<std::size_t>(cfg.context_length)) {
    throw Error(ErrorCode::kInvalidArgument, "context length exhausted");
  }
  RowVector<float> x = model_.params().token_embedding.row(token);
  logits_ = advance(x);
  return logits_;
}

RowVector<float> IncrementalDecoder::advance(const RowVector<float>& input) {
  const auto& cfg = model_.config();
  const auto& p = model_.params();
  const auto t = static_cast<Eigen::Index>(length_);
  const auto d = cfg.d_model;
  const auto hd = cfg.head_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  Matrix<float> x = input + p.position_embedding.row(t);

  for (std::size_t li = 0; li < p.blocks.size(); ++li) {
    const auto& b = p.blocks[li];
    Matrix<float> h = layer_norm<float>(x, b.ln1_gain, b.ln1_bias, nullptr, nullptr);
    Matrix<float> qkv = h * b.qkv_weight + b.qkv_bias;
    keys_[li].row(t) = qkv.middleCols(d, d);
    values_[li].row(t) = qkv.middleCols(2 * d, d);
    Matrix<float> attn(1, d);
    for (int hh = 0; hh < cfg.n_heads; ++hh) {
      const auto q = qkv.middleCols(hh * hd, hd);
      const auto k = keys_[li].block(0, hh * hd, t + 1, hd);
      const auto v = values_[li].block(0, hh * hd, t + 1, hd);
      RowVector<float> s = (q * k.transpose()) * scale;
      s.array() = (s.array() - s.maxCoeff()).exp();
      s /= s.sum();
      attn.middleCols(hh * hd, hd).noalias() = s * v;
    }
    x += attn * b.out_weight + b.out_bias;
    Matrix<float> h2 = layer_norm<float>(x, b.ln2_gain, b.ln2_bias, nullptr, nullptr);
    Matrix<float> pre = h2 * b.ffn_in_weight + b.ffn_in_bias;
    pre = pre.unaryExpr([](float u) { return gelu(u); });
    x += pre * b.ffn_out_weight + b.ffn_out_bias;
  }
  ++length_;
  Matrix<float> hf = layer_norm<float>(x, p.final_ln_gain, p.final_ln_bias, nullptr, nullptr);
  return hf * p.head_weight + p.head_bias;
}

// ---------------------------------------------------------------------------

NllSum evaluate_nll(const Transformer<float>& model, std::span<const Example> examples) {
  NllSum total;
  for (const auto& ex : examples) total += model.nll(ex.tokens, ex.class_id);
  return total;
}

double perplexity(const Transformer<float>& model, std::span<const Example> examples) {
  if (examples.empty()) throw Error(ErrorCode::kEmptyInput, "perplexity of an empty set");
  const auto total = evaluate_nll(model, examples);
  if (total.targets == 0) throw Error(ErrorCode::kEmptyInput, "no prediction targets");
  return std::exp(total.mean());
}

template struct Parameters<float>;
template struct Parameters<double>;
template Parameters<double> Parameters<float>::cast<double>() const;
template Parameters<float> Parameters<double>::cast<float>() const;
template class Transformer<float>;
template class Transformer<double>;

}  // namespace meshseq
