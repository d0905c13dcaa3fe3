#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "meshseq/error.hpp"
#include "meshseq/model.hpp"
#include "meshseq/rng.hpp"
#include "gradcheck.hpp"

using namespace meshseq;
using namespace meshseq::fixture;

TEST(Model, ParameterShapes) {
  const auto cfg = micro();
  const auto p = Parameters<float>::initialized(cfg);
  EXPECT_EQ(p.token_embedding.rows(), 16);
  EXPECT_EQ(p.position_embedding.rows(), 32);
  EXPECT_EQ(p.class_prefix.rows(), 4);
  EXPECT_EQ(p.blocks.size(), 2u);
  EXPECT_EQ(p.head_weight.cols(), 16);
  EXPECT_EQ(p.blocks[0].ln1_gain.sum(), 8.0f);
  EXPECT_EQ(p.blocks[0].qkv_bias.cwiseAbs().sum(), 0.0f);
}

TEST(Model, CoordinateTableHasOneRowPerValue) {
  // A single table serves every axis slot: a coordinate value that appears as
  // x in one vertex and y in another accumulates gradient into the same row,
  // and rows of absent tokens receive none.
  const auto cfg = micro(1, 0, 0);
  Transformer<double> model(cfg, Parameters<double>::zeros(cfg));
  randomize(model.params(), 5, 0.3);
  EXPECT_EQ(model.params().token_embedding.rows(), cfg.vocab_size);
  const std::vector<Token> seq{9, 4, 1, 2, 3, 4, 5, 6, 7, 8, 10};
  auto grads = Parameters<double>::zeros(cfg);
  const std::vector<Example> batch{{seq, std::nullopt}};
  model.batch_gradients(batch, grads);
  for (Token t = 0; t < cfg.vocab_size; ++t) {
    // The final EOS is never an input to a predicted position.
    const bool present = std::find(seq.begin(), seq.end() - 1, t) != seq.end() - 1;
    EXPECT_EQ(grads.token_embedding.row(t).cwiseAbs().sum() > 0, present) << t;
  }
}

TEST(Model, Causality) {
  const auto cfg = micro();
  Transformer<float> model(cfg);
  RandomStream rng(1, 0);
  const auto seq = toy_sequence(rng, 2);
  for (std::optional<int> cls : {std::optional<int>{}, std::optional<int>{1}}) {
    const auto base = model.forward(seq, cls);
    for (std::size_t j = 1; j < seq.size(); ++j) {
      auto changed = seq;
      changed[j] = (changed[j] + 3) % 9;
      const auto out = model.forward(changed, cls);
      for (std::size_t i = 0; i < j; ++i) {
        ASSERT_TRUE((out.row(static_cast<Eigen::Index>(i)).array() == base.row(static_cast<Eigen::Index>(i)).array()).all())
            << "row " << i << " changed when token " << j << " changed";
      }
      EXPECT_FALSE((out.row(static_cast<Eigen::Index>(j)).array() == base.row(static_cast<Eigen::Index>(j)).array()).all());
    }
  }
}

TEST(Model, IdenticalRowsInBatch) {
  const auto cfg = micro();
  Transformer<float> model(cfg);
  RandomStream rng(2, 0);
  const auto seq = toy_sequence(rng, 2);
  EXPECT_TRUE((model.forward(seq).array() == model.forward(seq).array()).all());
  auto g1 = Parameters<float>::zeros(cfg), g2 = Parameters<float>::zeros(cfg);
  const std::vector<Example> one{{seq, std::nullopt}}, two{{seq, std::nullopt}, {seq, std::nullopt}};
  const auto l1 = model.batch_gradients(one, g1);
  const auto l2 = model.batch_gradients(two, g2);
  EXPECT_DOUBLE_EQ(l1.mean(), l2.mean());
}

TEST(Model, ZeroLayerClosedForm) {
  auto cfg = micro(0, 0, 0);
  Transformer<double> model(cfg, Parameters<double>::zeros(cfg));
  randomize(model.params(), 8, 0.5);
  const auto& p = model.params();
  const std::vector<Token> seq{9, 3, 7, 1, 10};
  const auto logits = model.forward(seq);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    // head(LN(embedding + position)) computed element by element.
    std::vector<double> x(8);
    for (int k = 0; k < 8; ++k) x[k] = p.token_embedding(seq[i], k) + p.position_embedding(static_cast<Eigen::Index>(i), k);
    double mean = 0, var = 0;
    for (double v : x) mean += v / 8;
    for (double v : x) var += (v - mean) * (v - mean) / 8;
    for (int k = 0; k < 8; ++k) x[k] = (x[k] - mean) / std::sqrt(var + 1e-5) * p.final_ln_gain(0, k) + p.final_ln_bias(0, k);
    for (int v = 0; v < 16; ++v) {
      double want = p.head_bias(0, v);
      for (int k = 0; k < 8; ++k) want += x[k] * p.head_weight(k, v);
      EXPECT_NEAR(logits(static_cast<Eigen::Index>(i), v), want, 1e-12);
    }
  }
}

TEST(Loss, UniformLogitsGiveLnV) {
  const auto cfg = micro(1, 0, 0);
  Transformer<double> model(cfg, Parameters<double>::zeros(cfg));
  RandomStream rng(3, 0);
  const auto seq = toy_sequence(rng, 2);
  const auto r = model.nll(seq);
  EXPECT_EQ(r.targets, seq.size() - 1);
  EXPECT_NEAR(r.mean(), std::log(16.0), 1e-14);
}

TEST(Loss, ToyLogitsGiveLn2) {
  // Zero-layer model whose head emits [0, 0, ln 2, -inf...] at every position;
  // with V restricted to three reachable classes the target 2 has probability 1/2.
  auto cfg = micro(0, 0, 0);
  cfg.vocab_size = 8;
  Transformer<double> model(cfg, Parameters<double>::zeros(cfg));
  auto& hb = model.params().head_bias;
  hb.setConstant(-1e9);
  hb(0, 0) = 0;
  hb(0, 1) = 0;
  hb(0, 2) = std::log(2.0);
  const std::vector<Token> seq{1, 2, 2};
  const auto r = model.nll(seq);
  EXPECT_EQ(r.targets, 2u);
  EXPECT_NEAR(r.mean(), std::numbers::ln2, 1e-14);
}

TEST(Loss, ConfidentLogitsApproachZero) {
  auto cfg = micro(0, 0, 0);
  Transformer<double> model(cfg, Parameters<double>::zeros(cfg));
  model.params().head_bias(0, 4) = 60;
  EXPECT_LT(model.nll(std::vector<Token>{9, 4, 4, 4}).mean(), 1e-20);
}

TEST(Loss, PadTargetsAreSkipped) {
  const auto cfg = micro(1, 0, 0);
  Transformer<double> model(cfg);
  const std::vector<Token> seq{9, 1, 2, 3, 10, 11, 11};
  EXPECT_EQ(model.nll(seq).targets, 4u);
}

TEST(Loss, EmptyPrefixEqualsUnconditional) {
  auto cfg = micro(2, 2, 0);
  Transformer<double> model(cfg);
  RandomStream rng(4, 0);
  const auto seq = toy_sequence(rng, 2);
  EXPECT_EQ(model.nll(seq, 1).nll, model.nll(seq).nll);
  EXPECT_TRUE((model.forward(seq, 0).array() == model.forward(seq).array()).all());
}

TEST(Loss, InputErrors) {
  const auto cfg = micro();
  Transformer<float> model(cfg);
  std::vector<Token> too_long(31, 1);
  EXPECT_THROW(model.forward(too_long, 0), Error);
  EXPECT_NO_THROW(model.forward(too_long));
  EXPECT_THROW(model.forward(std::vector<Token>{9, 1}, 2), Error);
  EXPECT_THROW(model.forward(std::vector<Token>{9, 16}), Error);
}

TEST(Gradients, FiniteDifferencesAllGroups) {
  const auto cfg = micro();
  RandomStream rng(5, 0);
  auto a = toy_sequence(rng, 1), b = toy_sequence(rng, 2);
  b.push_back(11);
  b.push_back(11);
  const std::vector<Example> batch{{a, 0}, {b, 1}, {toy_sequence(rng, 1), std::nullopt}};
  for (double rate : {0.0, 0.25}) {
    const auto errors = gradient_check(cfg, batch, {rate, 7, 0});
    EXPECT_EQ(errors.size(), 3 + 12 * 2 + 4u);
    for (const auto& e : errors) {
      EXPECT_LT(e.max_rel, 1e-4) << e.name << " dropout " << rate;
      std::printf("%-28s dropout %.2f  max rel %.2e\n", e.name.c_str(), rate, e.max_rel);
    }
  }
}

TEST(Gradients, PrefixReceivesGradient) {
  const auto cfg = micro();
  Transformer<double> model(cfg, Parameters<double>::initialized(cfg));
  RandomStream rng(6, 0);
  const auto seq = toy_sequence(rng, 2);
  auto& prefix = model.params().class_prefix;
  const double h = 1e-5;
  double largest = 0;
  for (Eigen::Index i = 0; i < cfg.prefix_length * cfg.d_model; ++i) {
    const double keep = prefix.data()[i];
    prefix.data()[i] = keep + h;
    const double up = model.nll(seq, 0).mean();
    prefix.data()[i] = keep - h;
    const double down = model.nll(seq, 0).mean();
    prefix.data()[i] = keep;
    largest = std::max(largest, std::abs(up - down) / (2 * h));
  }
  EXPECT_GT(largest, 1e-6);
}

TEST(Incremental, MatchesFullForward) {
  auto cfg = micro();
  Transformer<float> model(cfg, Parameters<float>::zeros(cfg));
  randomize(model.params(), 9, 0.3);
  RandomStream rng(7, 0);
  const auto seq = toy_sequence(rng, 2);
  for (std::optional<int> cls : {std::optional<int>{}, std::optional<int>{1}}) {
    const auto full = model.forward(seq, cls);
    IncrementalDecoder dec(model, cls);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto& row = dec.step(seq[i]);
      for (int v = 0; v < cfg.vocab_size; ++v) EXPECT_NEAR(row(v), full(static_cast<Eigen::Index>(i), v), 1e-5);
    }
    EXPECT_EQ(dec.length(), seq.size() + static_cast<std::size_t>(model.prefix_rows(cls)));
  }
}

TEST(Perplexity, UniformModelGivesV) {
  const auto cfg = micro(1, 0, 0);
  Transformer<float> model(cfg, Parameters<float>::zeros(cfg));
  RandomStream rng(8, 0);
  std::vector<Example> set{{toy_sequence(rng, 1), {}}, {toy_sequence(rng, 3), {}}};
  EXPECT_NEAR(perplexity(model, set), 16.0, 1e-4);
  std::reverse(set.begin(), set.end());
  EXPECT_NEAR(perplexity(model, set), 16.0, 1e-4);
  EXPECT_THROW(perplexity(model, std::span<const Example>{}), Error);
}
