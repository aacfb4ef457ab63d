#include <doctest.h>

#include <json.hpp>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = safnet::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("safnet_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
  fs::path path;
};

std::string make_features(const TempDir& dir, const std::string& extra_seed = "3") {
  const std::string csv = dir / "features.csv";
  const auto r = run({"synth", "--n", "40", "--pos", "26", "--dim", "6", "--seed", extra_seed, "--out", csv});
  REQUIRE(r.code == 0);
  return csv;
}

}  // namespace

TEST_CASE("synth writes a header plus two rows per patient, reproducibly") {
  TempDir dir;
  const auto a = run({"synth", "--seed", "1", "--out", dir / "a.csv"});
  const auto b = run({"synth", "--seed", "1", "--out", dir / "b.csv"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const std::string text = slurp(dir / "a.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 321);
  CHECK(text == slurp(dir / "b.csv"));
  CHECK(text.rfind("patient_id,label,view,f0000,", 0) == 0);
}

TEST_CASE("synth usage errors exit with code 2") {
  TempDir dir;
  CHECK(run({"synth", "--pos", "0", "--seed", "1", "--out", dir / "x.csv"}).code == 2);
  CHECK(run({"synth", "--out", dir / "x.csv"}).code == 2);
  CHECK(run({"synth", "--seed", "1", "--mode", "cubic", "--out", dir / "x.csv"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
}

TEST_CASE("cv writes byte-identical reports for identical invocations") {
  TempDir dir;
  const std::string csv = make_features(dir);
  const std::vector<std::string> base{"cv", "--features", csv, "--model", "safnet", "--seed", "5", "--folds", "4",
                                      "--epochs", "15", "--d-model", "8", "--d-k", "4"};
  auto first = base;
  first.insert(first.end(), {"--out", dir / "r1"});
  auto second = base;
  second.insert(second.end(), {"--out", dir / "r2", "--jobs", "2"});
  const auto a = run(first);
  const auto b = run(second);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  for (const char* name : {"report.json", "report.txt", "confusion.json"}) {
    CHECK(fs::exists(dir.path / "r1" / name));
  }
  CHECK(slurp(dir / "r1/confusion.json") == slurp(dir / "r2/confusion.json"));
  json ra = json::parse(slurp(dir / "r1/report.json"));
  json rb = json::parse(slurp(dir / "r2/report.json"));
  CHECK(ra == rb);
  CHECK(ra["folds"] == 4);
  CHECK(ra["per_fold"].size() == 4);
  CHECK(ra["config"]["model"] == "safnet");
  CHECK(a.out.find("Sen") != std::string::npos);
}

TEST_CASE("cv report is independent of jobs byte for byte") {
  TempDir dir;
  const std::string csv = make_features(dir);
  for (const char* jobs : {"1", "3"})
    REQUIRE(run({"cv", "--features", csv, "--model", "knn", "--seed", "2", "--jobs", jobs, "--out", dir / jobs}).code ==
            0);
  CHECK(slurp(dir / "1/report.json") == slurp(dir / "3/report.json"));
}

TEST_CASE("cv with a missing feature file exits 2 and names the path") {
  const auto r = run({"cv", "--features", "/no/such/features.csv", "--model", "knn", "--seed", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("/no/such/features.csv") != std::string::npos);
}

TEST_CASE("cv rejects malformed feature files with exit code 2") {
  TempDir dir;
  std::ofstream(dir / "bad.csv") << "patient_id,label,view,f0000\np1,1,A2C,0.5\n";
  const auto r = run({"cv", "--features", dir / "bad.csv", "--model", "knn", "--seed", "1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("p1") != std::string::npos);
}

TEST_CASE("cv requires a seed and a known model") {
  TempDir dir;
  const std::string csv = make_features(dir);
  CHECK(run({"cv", "--features", csv, "--model", "knn"}).code == 2);
  CHECK(run({"cv", "--features", csv, "--model", "svm", "--seed", "1"}).code == 2);
}

TEST_CASE("cv with a knn grid records the chosen k for every fold") {
  TempDir dir;
  const std::string csv = make_features(dir);
  const auto r = run({"cv", "--features", csv, "--model", "knn", "--grid", "--seed", "4", "--folds", "5", "--out",
                      dir / "grid"});
  REQUIRE(r.code == 0);
  const json rep = json::parse(slurp(dir / "grid/report.json"));
  REQUIRE(rep["per_fold"].size() == 5);
  for (const auto& fold : rep["per_fold"]) {
    REQUIRE(fold.contains("details"));
    const double k = fold["details"]["k"].get<double>();
    CHECK((k == 1 || k == 3 || k == 5 || k == 7 || k == 9 || k == 11));
    CHECK(fold["details"].contains("inner_cv_accuracy"));
  }
}

TEST_CASE("gradcheck reports every tensor and honours the tolerance") {
  const auto ok = run({"gradcheck", "--seed", "0"});
  CHECK(ok.code == 0);
  for (const char* name : {"embed_weights", "embed_bias", "wq", "wk", "wv", "head_weights", "head_bias"})
    CHECK(ok.out.find(name) != std::string::npos);
  CHECK(ok.out.find("PASS") != std::string::npos);

  const auto strict = run({"gradcheck", "--seed", "0", "--tolerance", "1e-12"});
  CHECK(strict.code == 1);
  CHECK(strict.out.find("FAIL") != std::string::npos);

  const auto mlp = run({"gradcheck", "--model", "mlp", "--seed", "0"});
  CHECK(mlp.code == 0);
  CHECK(mlp.out.find("hidden_weights") != std::string::npos);
}

TEST_CASE("config file values apply and flags override them") {
  TempDir dir;
  std::ofstream(dir / "cfg.json") << R"({"n": 30, "pos": 10, "dim": 4, "seed": 8})";
  REQUIRE(run({"synth", "--config", dir / "cfg.json", "--out", dir / "a.csv"}).code == 0);
  std::string text = slurp(dir / "a.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 61);
  CHECK(text.find("f0003") != std::string::npos);
  CHECK(text.find("f0004") == std::string::npos);

  REQUIRE(run({"synth", "--config", dir / "cfg.json", "--n", "20", "--out", dir / "b.csv"}).code == 0);
  text = slurp(dir / "b.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 41);

  std::ofstream(dir / "typo.json") << R"({"epochz": 3})";
  CHECK(run({"synth", "--config", dir / "typo.json", "--seed", "1", "--out", dir / "c.csv"}).code == 2);
  CHECK(run({"synth", "--config", dir / "missing.json", "--seed", "1", "--out", dir / "c.csv"}).code == 2);
}

TEST_CASE("train then eval reproduces training-set predictions") {
  TempDir dir;
  const std::string csv = make_features(dir);
  for (const char* model : {"knn", "mlp", "safnet"}) {
    const std::string out = dir / (std::string("m_") + model);
    const auto t = run({"train", "--features", csv, "--model", model, "--seed", "6", "--epochs", "30", "--d-model", "8",
                        "--d-k", "4", "--hidden", "8", "--standardize", "--out", out});
    REQUIRE(t.code == 0);
    CHECK(fs::exists(fs::path(out) / "model.json"));
    const auto e = run({"eval", "--features", csv, "--model-file", out + "/model.json", "--out", out});
    REQUIRE(e.code == 0);
    const json ej = json::parse(slurp(fs::path(out) / "eval.json"));
    CHECK(ej["probabilities"].size() == 40);
    const auto again = run({"eval", "--features", csv, "--model-file", out + "/model.json"});
    CHECK(again.out == e.out);
  }
}

TEST_CASE("eval without a model file is a usage error") {
  TempDir dir;
  const std::string csv = make_features(dir);
  CHECK(run({"eval", "--features", csv}).code == 2);
}

TEST_CASE("gridsearch writes candidate scores") {
  TempDir dir;
  const std::string csv = make_features(dir);
  const auto r = run({"gridsearch", "--features", csv, "--model", "knn", "--seed", "1", "--out", dir / "gs"});
  REQUIRE(r.code == 0);
  const json gs = json::parse(slurp(dir / "gs/gridsearch.json"));
  CHECK(r.out.find("<- best") != std::string::npos);
  CHECK(gs.dump().find("k=11") != std::string::npos);
}
