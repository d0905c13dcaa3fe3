#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "meshseq/api.hpp"
#include "meshseq/cli.hpp"
#include "meshseq/error.hpp"
#include "meshseq/obj.hpp"
#include "meshseq/shard.hpp"

using namespace meshseq;
namespace fs = std::filesystem;

namespace {

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "meshseq");
  return cli::run(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Arrays {
  std::vector<double> vertices;
  std::vector<std::int64_t> faces;
};

Arrays to_arrays(const Mesh& m) {
  Arrays a;
  for (const auto& v : m.vertices) a.vertices.insert(a.vertices.end(), v.begin(), v.end());
  for (const auto& f : m.faces) a.faces.insert(a.faces.end(), f.begin(), f.end());
  return a;
}

class ApiParity : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() / ("meshseq_api_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir / "objs");
  }
  void TearDown() override { fs::remove_all(dir); }

  // Sequences from the CLI shard keyed by manifest id.
  std::map<std::string, std::vector<Token>> cli_tokens() {
    EXPECT_EQ(cli_run({"tokenize", "--input", (dir / "objs").string(), "--output", (dir / "tok").string()}), 0);
    const auto shard = Shard::load(dir / "tok" / "train.mxtk");
    std::map<std::string, std::vector<Token>> out;
    std::ifstream manifest(dir / "tok" / "manifest.jsonl");
    for (std::string line; std::getline(manifest, line);) {
      const auto row = nlohmann::json::parse(line);
      if (row["status"] == "accepted") out[row["id"]] = shard.sequence(row["index"]);
    }
    return out;
  }
};

}  // namespace

TEST_F(ApiParity, SingleTriangleMatchesCli) {
  const Mesh tri{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}, "tri"};
  write_obj_file(dir / "objs" / "tri.obj", tri);
  const auto from_cli = cli_tokens();
  ASSERT_EQ(from_cli.size(), 1u);
  const auto a = to_arrays(read_obj_file(dir / "objs" / "tri.obj"));
  const auto ids = api::tokenize(a.vertices, a.faces);
  EXPECT_EQ(ids.size(), 11u);
  EXPECT_EQ(ids, from_cli.at("tri"));
  EXPECT_EQ(api::tokenize(a.vertices, a.faces), ids);
}

TEST_F(ApiParity, CorpusTokenizeAndDetokenizeMatchCli) {
  RandomStream rng(31, 0);
  for (int i = 0; i < 100; ++i) {
    auto m = fixture::random_mesh(rng, 4 + rng.below(40), 1 + rng.below(60));
    write_obj_file(dir / "objs" / ("m" + std::to_string(i) + ".obj"), m);
  }
  const auto from_cli = cli_tokens();
  ASSERT_GT(from_cli.size(), 90u);
  std::size_t compared = 0;
  for (const auto& [id, want] : from_cli) {
    const auto a = to_arrays(read_obj_file(dir / "objs" / (id + ".obj")));
    ASSERT_EQ(api::tokenize(a.vertices, a.faces), want) << id;

    // Detokenize: the API arrays written as OBJ equal the CLI's file byte for byte.
    const auto back = api::detokenize(want);
    const auto out = dir / (id + "_cli.obj");
    const auto shard_index = [&] {
      std::ifstream manifest(dir / "tok" / "manifest.jsonl");
      for (std::string line; std::getline(manifest, line);) {
        const auto row = nlohmann::json::parse(line);
        if (row["id"] == id) return row["index"].get<std::size_t>();
      }
      return std::size_t{0};
    }();
    ASSERT_EQ(cli_run({"detokenize", "--shard", (dir / "tok" / "train.mxtk").string(), "--index",
                       std::to_string(shard_index), "--output", out.string()}),
              0);
    EXPECT_EQ(write_obj(api::mesh_from_arrays(back.vertices, back.faces)), slurp(out)) << id;
    ++compared;
  }
  EXPECT_EQ(compared, from_cli.size());
}

TEST_F(ApiParity, EvaluateMatchesCliJson) {
  fs::create_directories(dir / "gen");
  fs::create_directories(dir / "ref");
  std::vector<Mesh> gen{fixture::cylinder(6), fixture::cone(9)};
  std::vector<Mesh> ref{fixture::cylinder(7), fixture::unit_cube(), fixture::uv_sphere(5, 6)};
  for (std::size_t i = 0; i < gen.size(); ++i) write_obj_file(dir / "gen" / ("g" + std::to_string(i) + ".obj"), gen[i]);
  for (std::size_t i = 0; i < ref.size(); ++i) write_obj_file(dir / "ref" / ("r" + std::to_string(i) + ".obj"), ref[i]);
  ASSERT_EQ(cli_run({"eval", "--gen", (dir / "gen").string(), "--ref", (dir / "ref").string(), "--points", "512",
                     "--seed", "4", "--output", (dir / "report.json").string()}),
            0);
  const auto from_cli = nlohmann::json::parse(slurp(dir / "report.json"));

  auto load = [&](const char* sub) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir / sub)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Mesh> meshes;
    for (const auto& f : files) meshes.push_back(read_obj_file(f));
    return meshes;
  };
  EvalParams params;
  params.points = 512;
  params.seed = 4;
  const auto report = api::evaluate(load("gen"), load("ref"), params);
  EXPECT_EQ(nlohmann::json::parse(report.to_json()), from_cli);
}

TEST(Api, Errors) {
  std::vector<double> v;
  std::vector<std::int64_t> f;
  for (int i = 0; i < 6; ++i) {
    v.insert(v.end(), {double(i), double(i * i % 5), double(i % 3)});
  }
  for (int i = 0; i < 5; ++i) f.insert(f.end(), {0, i % 5 + 1, (i + 1) % 5 + 1});
  try {
    api::tokenize(v, f, 128, 4);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooManyFaces);
  }
  const std::vector<Token> bad{128, 1, 2, 129};
  try {
    api::detokenize(bad);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedSequence);
  }
  const std::vector<std::int64_t> out_of_range{0, 1, 9};
  EXPECT_THROW(api::tokenize(v, out_of_range), Error);
}
