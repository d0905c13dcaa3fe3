#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "meshseq/config_json.hpp"
#include "meshseq/dataset.hpp"
#include "meshseq/error.hpp"
#include "meshseq/obj.hpp"
#include "meshseq/sampling.hpp"

namespace meshseq::cli {

namespace fs = std::filesystem;

namespace {

std::string indexed(const std::string& stem, std::size_t i, const std::string& ext) {
  std::ostringstream s;
  s << stem << "_" << std::setw(3) << std::setfill('0') << i << ext;
  return s.str();
}

Checkpoint save_state(const fs::path& path, const Transformer<float>& model, const Trainer& trainer,
                      const CodecOptions& codec) {
  Checkpoint ck{model.config(), trainer.config(), trainer.step_count(), model.params(),
                trainer.first_moment(), trainer.second_moment(), codec};
  save_checkpoint(path, ck);
  return ck;
}

std::vector<Example> strip_classes(std::vector<Example> examples) {
  for (auto& e : examples) e.class_id.reset();
  return examples;
}

}  // namespace

int cmd_train(const TrainArgs& args, const nlohmann::json& run_config) {
  const fs::path out(args.out);
  auto data = load_examples(args.data, "train");
  auto val = fs::is_directory(args.data) ? load_examples_if_present(args.data, "val") : std::nullopt;
  if (data.examples.empty()) throw Error(ErrorCode::kEmptyInput, "training shard is empty");
  if (!args.conditional) {
    data.examples = strip_classes(std::move(data.examples));
    if (val) val->examples = strip_classes(std::move(val->examples));
  } else if (data.n_classes == 0) {
    throw Error(ErrorCode::kInvalidArgument, "--conditional needs class ids in the manifest");
  }

  ModelConfig mc = args.model;
  mc.vocab_size = data.vocab.size();
  mc.n_classes = args.conditional ? data.n_classes : 0;
  mc.seed = args.train.seed;
  TrainConfig tc = args.train;

  const auto last_path = out / "last.ckpt";
  std::optional<Checkpoint> resumed;
  if (args.resume && fs::exists(last_path)) {
    resumed = load_checkpoint(last_path);
    if (!(resumed->model == mc)) std::cerr << "resume: model shape taken from " << last_path << "\n";
    mc = resumed->model;
  }
  const auto prefix = static_cast<std::size_t>(mc.n_classes > 0 ? mc.prefix_length : 0);
  if (data.max_length + prefix > static_cast<std::size_t>(mc.context_length)) {
    throw Error(ErrorCode::kInvalidArgument, "longest sequence (" + std::to_string(data.max_length) +
                                                 " tokens plus prefix) exceeds context_length " +
                                                 std::to_string(mc.context_length));
  }

  Transformer<float> model = resumed ? Transformer<float>(mc, resumed->params) : Transformer<float>(mc);
  Trainer trainer(model, tc);
  if (resumed) {
    if (resumed->adam_m) trainer.first_moment() = *resumed->adam_m;
    if (resumed->adam_v) trainer.second_moment() = *resumed->adam_v;
    trainer.set_step_count(resumed->step);
  }

  fs::create_directories(out);
  write_run_config(out, run_config);
  std::ofstream log(out / "train_log.jsonl", resumed ? std::ios::app : std::ios::trunc);
  if (!log) throw Error(ErrorCode::kIo, "cannot open training log in " + out.string());

  const BatchSampler sampler(data.examples.size(), tc.batch_size, tc.seed);
  std::optional<double> train_nll;
  bool stopped_early = false;
  auto evaluate_now = [&](std::int64_t step) {
    train_nll = evaluate_nll(model, data.examples).mean();
    nlohmann::json row = {{"step", step}, {"train_nll", *train_nll}};
    if (val && !val->examples.empty()) row["val_nll"] = evaluate_nll(model, val->examples).mean();
    log << row.dump() << "\n" << std::flush;
    return *train_nll;
  };

  auto window_start = std::chrono::steady_clock::now();
  std::size_t window_tokens = 0;
  while (trainer.step_count() < tc.total_steps) {
    const auto step = trainer.step_count();
    std::vector<Example> batch;
    for (auto i : sampler.batch(step)) batch.push_back(data.examples[i]);
    StepResult r;
    try {
      r = trainer.step(batch);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonFiniteLoss) {
        log << nlohmann::json({{"step", step + 1}, {"error", e.what()}}).dump() << "\n";
        throw Error(ErrorCode::kNonFiniteLoss, std::string(e.what()) + "; training aborted");
      }
      throw;
    }
    window_tokens += r.tokens;
    const auto done = trainer.step_count();
    if (args.log_every > 0 && done % args.log_every == 0) {
      const auto now = std::chrono::steady_clock::now();
      const double secs = std::chrono::duration<double>(now - window_start).count();
      log << nlohmann::json({{"step", done}, {"loss", r.loss}, {"lr", r.lr}, {"grad_norm", r.grad_norm},
                             {"tokens_per_s", secs > 0 ? static_cast<double>(window_tokens) / secs : 0.0}})
                 .dump()
          << "\n"
          << std::flush;
      window_start = now;
      window_tokens = 0;
    }
    if (args.eval_every > 0 && done % args.eval_every == 0) {
      if (args.target_loss > 0 && evaluate_now(done) < args.target_loss) {
        stopped_early = true;
        break;
      }
    }
    if (args.checkpoint_every > 0 && done % args.checkpoint_every == 0) {
      save_state(last_path, model, trainer, data.codec);
    }
  }
  if (!train_nll || !stopped_early) evaluate_now(trainer.step_count());
  save_state(last_path, model, trainer, data.codec);
  save_state(out / "final.ckpt", model, trainer, data.codec);
  std::cout << nlohmann::json({{"step", trainer.step_count()}, {"train_nll", *train_nll},
                               {"stopped_early", stopped_early}, {"checkpoint", (out / "final.ckpt").string()}})
                   .dump()
            << "\n";
  return 0;
}

namespace {

SamplingParams sampling_params(const SamplingArgs& a, const Checkpoint& ck) {
  SamplingParams p;
  p.top_k = a.top_k;
  p.top_p = a.top_p;
  p.seed = a.seed;
  p.max_tokens = a.max_tokens ? a.max_tokens : static_cast<std::size_t>(ck.model.context_length);
  p.constrained = a.constrained;
  if (a.class_id >= 0) p.class_id = a.class_id;
  p.mode = ck.codec.mode;
  p.check();
  return p;
}

// Decodes one sampled sequence, writes its OBJ when strict-valid, and returns
// the token-dump record.
nlohmann::json emit(const SampleResult& r, const Vocabulary& vocab, const CodecOptions& codec,
                    const fs::path& dir, const std::string& obj_name, std::size_t index) {
  nlohmann::json rec = {{"index", index},
                        {"tokens", r.sequence.tokens},
                        {"terminated", r.terminated},
                        {"truncated", r.truncated},
                        {"fallback_steps", r.fallback_steps}};
  const auto report = validate(r.sequence.tokens, vocab, codec.mode);
  rec["valid"] = report.valid;
  rec["faces"] = report.n_faces;
  if (!report.valid) {
    rec["obj"] = nullptr;
    rec["error"] = report.message;
    return rec;
  }
  try {
    const auto decoded = decode(r.sequence.tokens, vocab, codec, true);
    write_obj_file(dir / obj_name, dequantize(decoded.mesh));
    rec["obj"] = obj_name;
  } catch (const Error& e) {
    // Valid grammar but unusable geometry, e.g. every face collapsed.
    rec["valid"] = false;
    rec["obj"] = nullptr;
    rec["error"] = e.what();
  }
  return rec;
}

}  // namespace

int cmd_sample(const SamplingArgs& args, const nlohmann::json& run_config) {
  const auto ck = load_checkpoint(args.ckpt);
  const Transformer<float> model(ck.model, ck.params);
  const Vocabulary vocab(ck.model.vocab_size - 7);
  const auto params = sampling_params(args, ck);
  const fs::path dir(args.output);
  fs::create_directories(dir);
  write_run_config(dir, run_config);
  const auto results = sample_many(model, vocab, params, args.num);
  std::string dump;
  std::size_t written = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto rec = emit(results[i], vocab, ck.codec, dir, indexed("sample", i, ".obj"), i);
    written += !rec["obj"].is_null();
    dump += rec.dump() + "\n";
  }
  write_text(dir / "tokens.jsonl", dump);
  std::cout << nlohmann::json({{"samples", results.size()}, {"objs", written}}).dump() << "\n";
  return 0;
}

int cmd_complete(const CompleteArgs& args, const nlohmann::json& run_config) {
  if (!(args.prefix_ratio >= 0.0 && args.prefix_ratio <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "--prefix-ratio must be in [0, 1]");
  }
  const auto& sa = args.sampling;
  const auto ck = load_checkpoint(sa.ckpt);
  const Transformer<float> model(ck.model, ck.params);
  const Vocabulary vocab(ck.model.vocab_size - 7);
  const auto params = sampling_params(sa, ck);

  PipelineOptions pipeline;
  pipeline.resolution = vocab.resolution;
  pipeline.codec = ck.codec;
  pipeline.codec.max_faces = static_cast<std::size_t>(ck.model.context_length);
  const auto prepared = prepare_mesh(read_obj_file(args.input), pipeline);
  const auto full = encode(prepared.qmesh, vocab, pipeline.codec).tokens;

  // Face boundaries of the encoded input, then the prompt cut at floor(ratio * faces).
  std::vector<std::size_t> boundaries;
  GrammarState grammar(vocab, ck.codec.mode);
  for (std::size_t i = 0; i + 1 < full.size(); ++i) {
    grammar.advance(full[i]);
    if (grammar.at_boundary()) boundaries.push_back(i + 1);
  }
  const auto n_faces = boundaries.size() - 1;
  const auto keep = static_cast<std::size_t>(std::floor(args.prefix_ratio * static_cast<double>(n_faces)));
  const std::vector<Token> prompt(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(boundaries[keep]));

  const fs::path dir(sa.output);
  fs::create_directories(dir);
  write_run_config(dir, run_config);
  write_obj_file(dir / "input_canonical.obj", dequantize(prepared.qmesh));

  std::vector<SampleResult> results(sa.num);
  if (keep == n_faces) {
    // The whole mesh is the prompt: the only admissible continuation is EOS.
    for (auto& r : results) {
      r.sequence = {full, ck.codec.mode};
      r.terminated = true;
    }
  } else {
    for (std::size_t i = 0; i < sa.num; ++i) results[i] = complete(model, vocab, prompt, params, i);
  }
  std::string dump;
  std::size_t written = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto rec = emit(results[i], vocab, ck.codec, dir, indexed("complete", i, ".obj"), i);
    const auto& t = results[i].sequence.tokens;
    rec["prompt_tokens"] = prompt.size();
    rec["prompt_faces"] = keep;
    rec["prompt_preserved"] = t.size() >= prompt.size() && std::equal(prompt.begin(), prompt.end(), t.begin());
    written += !rec["obj"].is_null();
    dump += rec.dump() + "\n";
  }
  write_text(dir / "tokens.jsonl", dump);
  std::cout << nlohmann::json({{"completions", results.size()}, {"objs", written}, {"prompt_faces", keep},
                               {"input_faces", n_faces}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_ppl(const PplArgs& args) {
  auto data = load_examples(args.data, args.split);
  if (data.examples.empty()) throw Error(ErrorCode::kEmptyInput, "shard is empty");
  std::optional<Transformer<float>> model;
  if (args.uniform) {
    // Zero-layer model with all-zero weights: every logit is 0.
    ModelConfig mc;
    mc.vocab_size = data.vocab.size();
    mc.d_model = 4;
    mc.d_ffn = 4;
    mc.n_layers = 0;
    mc.n_heads = 1;
    mc.context_length = static_cast<int>(std::max<std::size_t>(2, data.max_length));
    mc.prefix_length = 0;
    model.emplace(mc, Parameters<float>::zeros(mc));
    data.examples = strip_classes(std::move(data.examples));
  } else {
    if (args.ckpt.empty()) throw Error(ErrorCode::kInvalidArgument, "need --ckpt or --uniform");
    const auto ck = load_checkpoint(args.ckpt);
    if (ck.model.vocab_size != data.vocab.size()) {
      throw Error(ErrorCode::kInvalidArgument, "checkpoint vocabulary does not match the shard");
    }
    model.emplace(ck.model, ck.params);
    if (ck.model.n_classes == 0) data.examples = strip_classes(std::move(data.examples));
  }
  const auto total = evaluate_nll(*model, data.examples);
  if (total.targets == 0) throw Error(ErrorCode::kEmptyInput, "no prediction targets");
  const nlohmann::json out = {{"ppl", std::exp(total.mean())},
                              {"nll", total.mean()},
                              {"tokens", total.targets},
                              {"sequences", data.examples.size()},
                              {"split", args.split}};
  std::cout << out.dump() << "\n";
  if (!args.output.empty()) write_text(args.output, out.dump(2) + "\n");
  return 0;
}

}  // namespace meshseq::cli
