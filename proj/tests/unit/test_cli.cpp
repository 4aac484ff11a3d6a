#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "counterclr/checkpoint.hpp"
#include "counterclr/cli.hpp"

using namespace counterclr;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("counterclr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::string> kSmallSynth{"synth", "--users", "20", "--items", "25",
                                           "--rank", "3", "--ratio", "0.3", "--seed", "4"};

std::vector<std::string> with(std::vector<std::string> base,
                              std::initializer_list<std::string> more) {
  base.insert(base.end(), more);
  return base;
}

}  // namespace

TEST_CASE("synth reruns are byte-identical") {
  const auto dir = scratch("synth");
  REQUIRE(cli(with(kSmallSynth, {"--out", (dir / "a").string()})).code == 0);
  REQUIRE(cli(with(kSmallSynth, {"--out", (dir / "b").string()})).code == 0);
  for (auto* f : {"ground_truth.txt", "observed.tsv", "test.tsv", "manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with 2") {
  const auto dir = scratch("usage");
  CHECK(cli({"synth", "--ratio", "0", "--out", dir.string()}).code == 2);
  CHECK(cli({"synth", "--ratio", "1.5", "--out", dir.string()}).code == 2);
  CHECK(cli({"synth"}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({}).code == 2);
  REQUIRE(cli(with(kSmallSynth, {"--out", dir.string()})).code == 0);
  const auto r = cli({"train", "--method", "magic", "--data", dir.string(), "--out",
                      (dir / "run").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("naive") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train then eval round trip") {
  const auto dir = scratch("train");
  REQUIRE(cli(with(kSmallSynth, {"--out", dir.string()})).code == 0);
  for (auto* method : {"counterclr", "naive"}) {
    CAPTURE(method);
    const auto run = dir / method;
    const auto t = cli({"train", "--method", method, "--data", dir.string(), "--out",
                        run.string(), "--epochs", "2", "--K", "3"});
    REQUIRE(t.code == 0);
    CHECK(fs::exists(run / "checkpoint.json"));
    CHECK(fs::exists(run / "report.csv"));
    CHECK(fs::exists(run / "config.json"));
    const auto e = cli({"eval", "--checkpoint", (run / "checkpoint.json").string(), "--test",
                        (dir / "test.tsv").string()});
    REQUIRE(e.code == 0);
    CHECK(e.out.rfind("method,dataset,mse,mae,ndcg_at_5", 0) == 0);
    CHECK(e.out.find(std::string("\n") + method + ",") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("eval rejects a checkpoint with another format version") {
  const auto dir = scratch("version");
  REQUIRE(cli(with(kSmallSynth, {"--out", dir.string()})).code == 0);
  const auto run = dir / "run";
  REQUIRE(cli({"train", "--method", "naive", "--data", dir.string(), "--out", run.string(),
               "--epochs", "1"})
              .code == 0);
  auto j = nlohmann::json::parse(slurp(run / "checkpoint.json"));
  j["format_version"] = kCheckpointVersion + 1;
  std::ofstream(run / "old.json") << j.dump();
  const auto e = cli({"eval", "--checkpoint", (run / "old.json").string(), "--test",
                      (dir / "test.tsv").string()});
  CHECK(e.code == 3);
  CHECK(cli({"eval", "--checkpoint", (dir / "missing.json").string(), "--test",
             (dir / "test.tsv").string()})
            .code == 5);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck exit codes") {
  const auto ok = cli({"gradcheck", "--instances", "2"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("gradcheck: PASS") != std::string::npos);
  CHECK(cli({"gradcheck", "--instances", "1", "--rel-tol", "0"}).code == 4);
  const auto fault = cli({"gradcheck", "--instances", "1", "--inject-fault",
                          "exposure_head.weight"});
  CHECK(fault.code == 4);
  CHECK(fault.out.find("exposure_head.weight") != std::string::npos);
}

TEST_CASE("sweep writes one row per cell") {
  const auto dir = scratch("sweep");
  const auto csv = dir / "sweep.csv";
  const auto r = cli({"sweep", "--users", "15", "--items", "20", "--rank", "3", "--ratios",
                      "0.3,1.0", "--methods", "naive", "--seeds", "1,2", "--out",
                      csv.string()});
  if (r.code != 0) MESSAGE(r.err);
  REQUIRE(r.code == 0);
  std::istringstream lines(slurp(csv));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(rows == 1 + 4);
  fs::remove_all(dir);
}
