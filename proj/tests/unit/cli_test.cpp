#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "meshseq/checkpoint.hpp"
#include "meshseq/cli.hpp"
#include "meshseq/dataset.hpp"
#include "meshseq/obj.hpp"
#include "meshseq/shard.hpp"

using namespace meshseq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  }
  return rows;
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("meshseq_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir / "objs");
    write_obj_file(dir / "objs" / "cube.obj", fixture::unit_cube());
    write_obj_file(dir / "objs" / "cone.obj", fixture::cone(6));
    write_obj_file(dir / "objs" / "cylinder.obj", fixture::cylinder(4));
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& rel) const { return (dir / rel).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "meshseq");
    return cli::run(args);
  }

  int tokenize() { return run({"tokenize", "--input", p("objs"), "--output", p("tok")}); }

  std::vector<std::string> tiny_train(const std::string& out) {
    return {"train", "--data", p("tok"), "--out", p(out), "--d-model", "16", "--d-ffn", "32", "--n-layers", "1",
            "--n-heads", "2", "--context-length", "160", "--batch-size", "2", "--total-steps", "3",
            "--checkpoint-every", "1", "--log-every", "1", "--peak-lr", "1e-3"};
  }
};

}  // namespace

TEST_F(Cli, TokenizeCountsAndRejects) {
  ASSERT_EQ(tokenize(), 0);
  EXPECT_EQ(Shard::load(dir / "tok" / "train.mxtk").size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "tok" / "run_config.json"));

  // 16-face cylinder over a 12-face gate.
  ASSERT_EQ(run({"tokenize", "--input", p("objs"), "--output", p("gated"), "--max-faces", "12"}), 0);
  std::size_t rejected = 0;
  for (const auto& row : read_jsonl(dir / "gated" / "manifest.jsonl")) {
    if (row["status"] == "rejected") {
      ++rejected;
      EXPECT_EQ(row["id"], "cylinder");
    }
  }
  EXPECT_EQ(rejected, 1u);
  EXPECT_EQ(Shard::load(dir / "gated" / "train.mxtk").size(), 2u);

  // Nothing accepted is a failure.
  EXPECT_NE(run({"tokenize", "--input", p("objs"), "--output", p("none"), "--max-faces", "2"}), 0);
  EXPECT_NE(run({"tokenize", "--input", p("missing"), "--output", p("none")}), 0);
}

TEST_F(Cli, DetokenizeRoundTripAndErrors) {
  ASSERT_EQ(tokenize(), 0);
  const auto shard = p("tok/train.mxtk");
  std::size_t cube = 0;
  for (const auto& row : read_jsonl(dir / "tok" / "manifest.jsonl")) {
    if (row["id"] == "cube") cube = row["index"];
  }
  ASSERT_EQ(run({"detokenize", "--shard", shard, "--index", std::to_string(cube), "--output", p("cube.obj")}), 0);
  const auto prepared = prepare_mesh(read_obj_file(dir / "objs" / "cube.obj"), {});
  EXPECT_EQ(slurp(dir / "cube.obj"), write_obj(dequantize(prepared.qmesh)));
  EXPECT_NE(run({"detokenize", "--shard", shard, "--index", "3", "--output", p("x.obj")}), 0);

  // A sequence cut inside its second face: strict fails, permissive keeps one face.
  const Vocabulary vocab(128);
  auto tokens = encode(prepared.qmesh, vocab).tokens;
  tokens.resize(1 + 9 + 4);
  write_shard(dir / "bad.mxtk", std::vector<TokenSequence>{{tokens, GrammarMode::kTriangle}}, vocab, {});
  EXPECT_NE(run({"detokenize", "--shard", p("bad.mxtk"), "--index", "0", "--output", p("bad.obj")}), 0);
  EXPECT_FALSE(fs::exists(dir / "bad.obj"));
  ASSERT_EQ(run({"detokenize", "--shard", p("bad.mxtk"), "--index", "0", "--output", p("bad.obj"), "--permissive"}), 0);
  EXPECT_EQ(read_obj_file(dir / "bad.obj").faces.size(), 1u);
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  ASSERT_EQ(tokenize(), 0);
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"total_steps": 2, "d_model": 16, "d_ffn": 32, "n_layers": 1, "n_heads": 2,
               "context_length": 160, "batch_size": 2, "unused_key": 1})";
  }
  ASSERT_EQ(run({"train", "--config", p("cfg.json"), "--data", p("tok"), "--out", p("ck"), "--total-steps", "1"}), 0);
  const auto rc = nlohmann::json::parse(slurp(dir / "ck" / "run_config.json"));
  EXPECT_EQ(rc["total_steps"], 1);
  EXPECT_EQ(rc["d_model"], 16);
  EXPECT_EQ(rc["command"], "train");
  EXPECT_EQ(load_checkpoint(dir / "ck" / "final.ckpt").step, 1);
  EXPECT_NE(run({"train", "--config", p("absent.json"), "--data", p("tok"), "--out", p("ck")}), 0);
}

TEST_F(Cli, TrainResumeContinuesStepCount) {
  ASSERT_EQ(tokenize(), 0);
  ASSERT_EQ(run(tiny_train("ck")), 0);
  EXPECT_EQ(load_checkpoint(dir / "ck" / "last.ckpt").step, 3);
  auto args = tiny_train("ck");
  args.insert(args.end(), {"--resume", "--total-steps", "5"});
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(load_checkpoint(dir / "ck" / "final.ckpt").step, 5);
  std::vector<std::int64_t> steps;
  for (const auto& row : read_jsonl(dir / "ck" / "train_log.jsonl")) {
    if (row.contains("loss")) steps.push_back(row["step"]);
  }
  EXPECT_EQ(steps, (std::vector<std::int64_t>{1, 2, 3, 4, 5}));
}

TEST_F(Cli, NonFiniteLossAborts) {
  ASSERT_EQ(tokenize(), 0);
  auto args = tiny_train("nan");
  args.insert(args.end(), {"--peak-lr", "1e30", "--total-steps", "20", "--clip-norm", "1e30"});
  EXPECT_NE(run(args), 0);
  bool logged = false;
  for (const auto& row : read_jsonl(dir / "nan" / "train_log.jsonl")) logged |= row.contains("error");
  EXPECT_TRUE(logged);
  EXPECT_FALSE(fs::exists(dir / "nan" / "final.ckpt"));
}

TEST_F(Cli, SampleCompletePpl) {
  ASSERT_EQ(tokenize(), 0);
  ASSERT_EQ(run(tiny_train("ck")), 0);
  const auto ck = p("ck/final.ckpt");

  ASSERT_EQ(run({"sample", "--ckpt", ck, "--output", p("s"), "--num", "10", "--seed", "3", "--max-tokens", "40"}), 0);
  const auto rows = read_jsonl(dir / "s" / "tokens.jsonl");
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i]["index"], i);
    if (rows[i]["valid"] == true) {
      EXPECT_TRUE(fs::exists(dir / "s" / rows[i]["obj"].get<std::string>()));
    } else {
      EXPECT_TRUE(rows[i]["obj"].is_null());
    }
  }
  EXPECT_TRUE(fs::exists(dir / "s" / "run_config.json"));

  ASSERT_EQ(run({"sample", "--ckpt", ck, "--output", p("c"), "--num", "5", "--constrained", "--max-tokens", "40"}), 0);
  for (const auto& row : read_jsonl(dir / "c" / "tokens.jsonl")) EXPECT_EQ(row["valid"], true);

  // Ratio 1: the input comes back with EOS. Ratio 0: plain sampling.
  const auto input = p("objs/cube.obj");
  ASSERT_EQ(run({"complete", "--ckpt", ck, "--input", input, "--output", p("full"), "--prefix-ratio", "1", "--num", "2"}), 0);
  const auto full = read_jsonl(dir / "full" / "tokens.jsonl");
  const auto cube = encode(prepare_mesh(read_obj_file(input), {}).qmesh, Vocabulary(128)).tokens;
  ASSERT_EQ(full.size(), 2u);
  for (const auto& row : full) EXPECT_EQ(row["tokens"].get<std::vector<Token>>(), cube);
  ASSERT_EQ(run({"complete", "--ckpt", ck, "--input", input, "--output", p("zero"), "--prefix-ratio", "0", "--num", "2",
                 "--seed", "3", "--max-tokens", "40"}),
            0);
  const auto zero = read_jsonl(dir / "zero" / "tokens.jsonl");
  EXPECT_EQ(zero[0]["tokens"], rows[0]["tokens"]);
  EXPECT_EQ(zero[1]["tokens"], rows[1]["tokens"]);
  ASSERT_EQ(run({"complete", "--ckpt", ck, "--input", input, "--output", p("half"), "--num", "3", "--max-tokens", "80"}), 0);
  for (const auto& row : read_jsonl(dir / "half" / "tokens.jsonl")) {
    EXPECT_EQ(row["prompt_preserved"], true);
    EXPECT_EQ(row["prompt_faces"], 6);
  }

  ASSERT_EQ(run({"ppl", "--ckpt", ck, "--data", p("tok"), "--output", p("ppl.json")}), 0);
  const auto ppl = nlohmann::json::parse(slurp(dir / "ppl.json"));
  EXPECT_GT(ppl["ppl"].get<double>(), 1.0);
  EXPECT_EQ(ppl["sequences"], 3);
  write_shard(dir / "empty.mxtk", std::vector<TokenSequence>{}, Vocabulary(128), {});
  EXPECT_NE(run({"ppl", "--uniform", "--data", p("empty.mxtk")}), 0);
}

TEST_F(Cli, EvalReportAndMissingDir) {
  ASSERT_EQ(run({"eval", "--gen", p("objs"), "--ref", p("objs"), "--points", "256", "--output", p("r/report.json")}), 0);
  const auto report = nlohmann::json::parse(slurp(dir / "r" / "report.json"));
  EXPECT_EQ(report["cov"], 100.0);
  EXPECT_EQ(report["mmd"], 0.0);
  EXPECT_EQ(report["jsd"], 0.0);
  EXPECT_TRUE(fs::exists(dir / "r" / "run_config.json"));
  ASSERT_EQ(run({"eval", "--gen", p("objs"), "--ref", p("objs"), "--points", "256", "--output", p("r/again.json")}), 0);
  EXPECT_EQ(slurp(dir / "r" / "report.json"), slurp(dir / "r" / "again.json"));
  EXPECT_NE(run({"eval", "--gen", p("nowhere"), "--ref", p("objs")}), 0);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"tokenize", "--input", p("objs")}), 2);
  EXPECT_EQ(run({"tokenize", "--help"}), 0);
  EXPECT_NE(run({"train", "--data", p("tok"), "--out", p("x"), "--preset", "huge"}), 0);
  EXPECT_NE(run({"sample", "--ckpt", p("none.ckpt"), "--output", p("s")}), 0);
}
