#include "meshseq/cli.hpp"

#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "flags.hpp"
#include "meshseq/error.hpp"

namespace meshseq::cli {

namespace {

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<FlagSet> flags;
  std::function<int(const nlohmann::json&)> run;
  std::function<void(FlagSet&)> finalize;  // applies presets to options left unset
};

void add_sampling_flags(FlagSet& f, SamplingArgs& a) {
  f.add("ckpt", a.ckpt, "checkpoint file")->required();
  f.add("output", a.output, "output directory")->required();
  f.add("num", a.num, "number of sequences");
  f.add("top_k", a.top_k, "top-k cutoff");
  f.add("top_p", a.top_p, "nucleus mass");
  f.add("seed", a.seed, "sampling seed");
  f.add("max_tokens", a.max_tokens, "length cap including BOS/EOS (0: model context)");
  f.add("class_id", a.class_id, "class for a conditional model (-1: none)");
  f.flag("constrained", a.constrained, "mask tokens the grammar does not admit");
}

// Values the overfit preset gives to training options that neither the
// config file nor a flag set.
void apply_preset(FlagSet& f, TrainArgs& a) {
  if (a.preset.empty() || a.preset == "desk") return;
  if (a.preset != "overfit") throw Error(ErrorCode::kInvalidArgument, "unknown preset '" + a.preset + "'");
  auto set = [&](const char* key, auto& field, auto value) {
    if (!f.given(key)) field = value;
  };
  set("total_steps", a.train.total_steps, 2000);
  set("batch_size", a.train.batch_size, 4);
  set("peak_lr", a.train.peak_lr, 1e-3);
  set("min_lr", a.train.min_lr, 1e-5);
  set("warmup_steps", a.train.warmup_steps, 50);
  set("eval_every", a.eval_every, 25);
  set("target_loss", a.target_loss, 0.012);
  set("checkpoint_every", a.checkpoint_every, 250);
}

struct Cli {
  CLI::App app{"Mesh token sequence toolkit", "meshseq"};
  std::map<std::string, Command> commands;
  TokenizeArgs tokenize;
  DetokenizeArgs detokenize;
  TrainArgs train;
  SamplingArgs sample;
  CompleteArgs complete;
  EvalArgs eval;
  PplArgs ppl;
  std::string config_path;

  Command& add(const std::string& name, const std::string& help) {
    auto& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.app->add_option("--config", config_path, "flat JSON config; flags override it");
    c.flags = std::make_unique<FlagSet>(c.app);
    return c;
  }

  Cli() {
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    {
      auto& c = add("tokenize", "OBJ directory to token shards and manifest");
      auto& f = *c.flags;
      auto& a = tokenize;
      f.add("input", a.input, "directory of OBJ files")->required();
      f.add("output", a.output, "output directory")->required();
      f.add("grid", a.grid, "quantization levels per axis");
      f.add("max_faces", a.max_faces, "face-count gate (inclusive)");
      f.add("augment", a.augment, "augmented copies per mesh");
      f.add("seed", a.seed, "augmentation and split seed");
      f.add("val_fraction", a.val_fraction, "fraction of source files held out");
      f.add("decimated", a.decimated, "directory of simplified copies for oversized meshes");
      f.add("decimation_threshold", a.decimation_threshold, "Hausdorff limit (0: 1% of the bbox diagonal)");
      f.add("mode", a.mode, "triangle | hybrid");
      f.add("order", a.order, "per-vertex emission order: xyz | zyx");
      f.flag("no_triangulate", a.no_triangulate, "reject polygons instead of fanning them");
      c.run = [this](const nlohmann::json& j) { return cmd_tokenize(tokenize, j); };
    }
    {
      auto& c = add("detokenize", "one shard sequence to OBJ");
      auto& f = *c.flags;
      auto& a = detokenize;
      f.add("shard", a.shard, "shard file")->required();
      f.add("index", a.index, "sequence index");
      f.add("output", a.output, "OBJ path")->required();
      f.flag("permissive", a.permissive, "salvage whole faces from a malformed sequence");
      c.run = [this](const nlohmann::json&) { return cmd_detokenize(detokenize); };
    }
    {
      auto& c = add("train", "train a model on token shards");
      auto& f = *c.flags;
      auto& a = train;
      f.add("data", a.data, "shard file or tokenize output directory")->required();
      f.add("out", a.out, "checkpoint directory")->required();
      f.add("preset", a.preset, "desk | overfit");
      f.flag("resume", a.resume, "continue from <out>/last.ckpt when present");
      f.flag("conditional", a.conditional, "learn a class prefix from manifest class ids");
      f.add("d_model", a.model.d_model, "model width");
      f.add("d_ffn", a.model.d_ffn, "feed-forward width");
      f.add("n_layers", a.model.n_layers, "transformer blocks");
      f.add("n_heads", a.model.n_heads, "attention heads");
      f.add("context_length", a.model.context_length, "maximum positions");
      f.add("prefix_length", a.model.prefix_length, "class prefix tokens");
      f.add("dropout", a.model.dropout, "dropout rate");
      f.add("init_std", a.model.init_std, "initialization std");
      f.add("total_steps", a.train.total_steps, "optimizer steps");
      f.add("batch_size", a.train.batch_size, "sequences per step");
      f.add("peak_lr", a.train.peak_lr, "peak learning rate");
      f.add("min_lr", a.train.min_lr, "final learning rate");
      f.add("warmup_steps", a.train.warmup_steps, "linear warmup steps");
      f.add("weight_decay", a.train.weight_decay, "decoupled weight decay");
      f.add("clip_norm", a.train.clip_norm, "global gradient-norm clip");
      f.add("beta1", a.train.beta1, "first-moment decay");
      f.add("beta2", a.train.beta2, "second-moment decay");
      f.add("epsilon", a.train.epsilon, "optimizer epsilon");
      f.add("seed", a.train.seed, "initialization, batching and dropout seed");
      f.add("log_every", a.log_every, "steps between loss log rows");
      f.add("eval_every", a.eval_every, "steps between full-set evaluations (0: end only)");
      f.add("checkpoint_every", a.checkpoint_every, "steps between checkpoints");
      f.add("target_loss", a.target_loss, "stop once full training NLL is below this (0: off)");
      c.finalize = [this](FlagSet& fs) { apply_preset(fs, train); };
      c.run = [this](const nlohmann::json& j) { return cmd_train(train, j); };
    }
    {
      auto& c = add("sample", "sample meshes from a checkpoint");
      add_sampling_flags(*c.flags, sample);
      c.run = [this](const nlohmann::json& j) { return cmd_sample(sample, j); };
    }
    {
      auto& c = add("complete", "complete a partial mesh");
      add_sampling_flags(*c.flags, complete.sampling);
      c.flags->add("input", complete.input, "OBJ to complete")->required();
      c.flags->add("prefix_ratio", complete.prefix_ratio, "fraction of faces kept as prompt");
      c.run = [this](const nlohmann::json& j) { return cmd_complete(complete, j); };
    }
    {
      auto& c = add("eval", "generation metrics between two OBJ directories");
      auto& f = *c.flags;
      auto& a = eval;
      f.add("gen", a.gen, "generated meshes")->required();
      f.add("ref", a.ref, "reference meshes")->required();
      f.add("output", a.output, "report path (default: stdout)");
      f.add("dump_matrix", a.dump_matrix, "write the float32 distance matrix here");
      f.add("points", a.points, "surface samples per mesh");
      f.add("jsd_grid", a.jsd_grid, "voxels per axis for JSD");
      f.add("seed", a.seed, "sampling seed");
      f.flag("no_normalize", a.no_normalize, "skip per-mesh normalization");
      c.run = [this](const nlohmann::json& j) { return cmd_eval(eval, j); };
    }
    {
      auto& c = add("ppl", "perplexity of a shard");
      auto& f = *c.flags;
      auto& a = ppl;
      f.add("ckpt", a.ckpt, "checkpoint file");
      f.add("data", a.data, "shard file or tokenize output directory")->required();
      f.add("split", a.split, "train | val when --data is a directory");
      f.add("output", a.output, "also write the JSON result here");
      f.flag("uniform", a.uniform, "score with an all-zero-logit model");
      c.run = [this](const nlohmann::json&) { return cmd_ppl(ppl); };
    }
  }
};

std::string find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace

int run(const std::vector<std::string>& input) {
  Cli cli;
  std::vector<std::string> args = input;
  if (args.empty()) args.push_back("meshseq");
  try {
    // Splice config-file entries in ahead of the user's flags.
    const auto config = args.size() > 2 ? find_config(args) : std::string();
    if (!config.empty()) {
      const auto it = cli.commands.find(args[1]);
      if (it == cli.commands.end()) throw CLI::ExtrasError({args[1]});
      std::ifstream in(config);
      if (!in) throw Error(ErrorCode::kIo, "cannot open config " + config);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kBadFormat, "config " + config + ": " + e.what());
      }
      if (!j.is_object()) throw Error(ErrorCode::kBadFormat, "config must be a flat JSON object");
      std::vector<std::string> unknown;
      const auto extra = it->second.flags->config_arguments(j, unknown);
      for (const auto& k : unknown) std::cerr << "config: ignoring key '" << k << "' not used by " << args[1] << "\n";
      args.insert(args.begin() + 2, extra.begin(), extra.end());
    }
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    cli.app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    // --help comes through here with code 0.
    return cli.app.exit(e) == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  for (auto& [name, command] : cli.commands) {
    if (!command.app->parsed()) continue;
    try {
      if (command.finalize) command.finalize(*command.flags);
      auto materialized = command.flags->materialize();
      materialized["command"] = name;
      return command.run(materialized);
    } catch (const Error& e) {
      std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace meshseq::cli
