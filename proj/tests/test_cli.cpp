#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "graphnf/cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "graphnf");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  return graphnf::cli::run(static_cast<int>(args.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("help and usage errors") {
  for (const char* cmd : {"gen-synth", "make-splits", "train-p", "train-u", "finetune", "eval", "ablate",
                          "inspect-bundle"}) {
    CAPTURE(cmd);
    CHECK(run({cmd, "--help"}) == graphnf::cli::kOk);
  }
  CHECK(run({"--help"}) == graphnf::cli::kOk);
  CHECK(run({}) == graphnf::cli::kUsage);
  CHECK(run({"bogus"}) == graphnf::cli::kUsage);
  CHECK(run({"gen-synth"}) == graphnf::cli::kUsage);             // no --out
  CHECK(run({"eval", "--bundle", "x"}) == graphnf::cli::kUsage);  // no --method
  CHECK(run({"eval", "--bundle", "x", "--method", "magic"}) == graphnf::cli::kUsage);
}

TEST_CASE("config problems are usage errors, missing data is a data error") {
  const auto dir = gnf_test::scratch_dir("cli_config");
  std::ofstream(dir / "unknown.json") << R"({"bundel": "x"})";
  std::ofstream(dir / "broken.json") << "{";
  CHECK(run({"eval", "--config", (dir / "unknown.json").string(), "--method", "nn"}) == graphnf::cli::kUsage);
  CHECK(run({"eval", "--config", (dir / "broken.json").string(), "--method", "nn"}) == graphnf::cli::kUsage);
  CHECK(run({"eval", "--bundle", (dir / "x").string(), "--method", "nn", "--set", "zeta=-1"}) ==
        graphnf::cli::kUsage);
  CHECK(run({"eval", "--bundle", (dir / "none").string(), "--method", "nn", "--out", (dir / "o").string()}) ==
        graphnf::cli::kDataError);
  CHECK(run({"inspect-bundle", (dir / "none").string()}) == graphnf::cli::kDataError);
}

TEST_CASE("gen-synth is reproducible and the outputs feed the other commands") {
  const auto dir = gnf_test::scratch_dir("cli_flow");
  const auto a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(run({"gen-synth", "--out", a, "--subjects", "10", "--directions", "120", "--k", "32", "--seed", "4"}) == 0);
  REQUIRE(run({"gen-synth", "--out", b, "--subjects", "10", "--directions", "120", "--k", "32", "--seed", "4"}) == 0);
  for (const char* f : {"manifest.json", "magnitudes.f32", "hrirs.f32"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  CHECK(run({"inspect-bundle", a}) == 0);

  const auto out = (dir / "out").string();
  CHECK(run({"make-splits", "--bundle", a, "--out", out, "--measurements", "3"}) == 0);
  CHECK(fs::exists(dir / "out" / "splits.json"));

  CHECK(run({"eval", "--bundle", a, "--method", "nn", "--out", out}) == 0);
  const auto csv = slurp(dir / "out" / "report_nn.csv");
  CHECK(csv.rfind("subject,az,el,lsd_db,ild_err_db,exceeds_zeta\n", 0) == 0);
  CHECK(fs::exists(dir / "out" / "summary_nn.txt"));

  // every direction measured: nothing left to score
  CHECK(run({"eval", "--bundle", a, "--method", "nn", "--measurements", "120", "--out", out}) == 0);
  CHECK(slurp(dir / "out" / "summary_nn.txt").find("entries: 0") != std::string::npos);

  const std::vector<std::string> tiny{"--set", "model_u.gat1_heads=2", "--set", "model_u.gat1_dim=4",
                                      "--set", "model_u.gat2_dim=8"};
  auto train_u = std::vector<std::string>{"train-u", "--bundle", a, "--out", out, "--epochs-u", "1"};
  train_u.insert(train_u.end(), tiny.begin(), tiny.end());
  CHECK(run(train_u) == 0);
  CHECK(fs::exists(dir / "out" / "model_u.ckpt"));
  const auto log = slurp(dir / "out" / "train_u_log.csv");
  CHECK(log.rfind("epoch,train_lsd_db,validation_lsd_db,learning_rate\n0,", 0) == 0);

  auto eval_u = std::vector<std::string>{"eval", "--bundle", a, "--method", "hrtf-u", "--model-u",
                                         (dir / "out" / "model_u.ckpt").string(), "--out", out};
  eval_u.insert(eval_u.end(), tiny.begin(), tiny.end());
  CHECK(run(eval_u) == 0);
  CHECK(fs::exists(dir / "out" / "report_hrtf-u.csv"));
}

TEST_CASE("the installed binary reports exit codes") {
  const auto dir = gnf_test::scratch_dir("cli_bin");
  const std::string bin = GRAPHNF_BIN;
  CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
  CHECK(WEXITSTATUS(std::system((bin + " bogus > /dev/null 2>&1").c_str())) == graphnf::cli::kUsage);
  CHECK(WEXITSTATUS(std::system((bin + " inspect-bundle " + (dir / "none").string() + " > /dev/null 2>&1").c_str())) ==
        graphnf::cli::kDataError);
}
