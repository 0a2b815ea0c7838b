#include <doctest.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cstrans/cli.hpp"
#include "cstrans/data.hpp"
#include "cstrans/fit.hpp"
#include "cstrans/simulate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("cstrans_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path.string() : (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI in process, capturing both streams.
struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = cstrans::dispatch(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

std::string study_csv(const TempDir& dir, int n, int replicate) {
  cstrans::StudyConfig config;
  config.n = n;
  config.seed = 77;
  const auto data = cstrans::gen_study_data(config, replicate);
  const std::string path = dir.str("sample.csv");
  cstrans::write_csv(data, path);
  return path;
}

}  // namespace

TEST_CASE("fit subcommand: outputs, manifest, and bit-exact replay") {
  const TempDir dir("fit");
  const std::string csv = study_csv(dir, 120, 0);
  const std::vector<std::string> args = {"fit",   "--data", csv,
                                         "--out", dir.str()};
  const auto run = run_cli(args);
  REQUIRE(run.code == 0);
  for (const char* name :
       {"beta.csv", "h_curve.csv", "H_step.csv", "fit.json", "manifest.json"})
    CHECK(fs::exists(dir.path / name));

  const json manifest = json::parse(slurp(dir.str("manifest.json")));
  CHECK(manifest["subcommand"] == "fit");
  CHECK(manifest["version"] == "0.1.0");
  CHECK(manifest["argv"][0] == "cstrans");
  CHECK(manifest["argv"][1] == "fit");
  CHECK(manifest["duration_seconds"].get<double>() >= 0.0);
  bool has_beta = false;
  for (const auto& o : manifest["outputs"])
    if (o.get<std::string>() == "beta.csv") has_beta = true;
  CHECK(has_beta);
  CHECK(manifest["inputs"].size() == 1);

  // Replaying the recorded argv must reproduce every output byte for byte.
  const std::string beta_before = slurp(dir.str("beta.csv"));
  const std::string fit_before = slurp(dir.str("fit.json"));
  const std::string h_before = slurp(dir.str("h_curve.csv"));
  std::vector<std::string> replay;
  for (std::size_t i = 1; i < manifest["argv"].size(); ++i)
    replay.push_back(manifest["argv"][i].get<std::string>());
  const auto again = run_cli(replay);
  REQUIRE(again.code == 0);
  CHECK(slurp(dir.str("beta.csv")) == beta_before);
  CHECK(slurp(dir.str("fit.json")) == fit_before);
  CHECK(slurp(dir.str("h_curve.csv")) == h_before);
}

TEST_CASE("fit.json round trip reproduces the reported objective") {
  const TempDir dir("roundtrip");
  const std::string csv = study_csv(dir, 150, 1);
  REQUIRE(run_cli({"fit", "--data", csv, "--out", dir.str()}).code == 0);

  const json fit = json::parse(slurp(dir.str("fit.json")));
  const auto& smooth = fit["smooth"];
  cstrans::ModelParams params;
  params.beta.resize(fit["beta"].size());
  for (std::size_t r = 0; r < fit["beta"].size(); ++r)
    params.beta[static_cast<int>(r)] = fit["beta"][r].get<double>();
  params.h.basis = cstrans::SplineBasis(
      smooth["a"].get<double>(), smooth["b"].get<double>(),
      smooth["interior"].get<std::vector<double>>());
  params.h.coeffs.resize(smooth["coeffs"].size());
  for (std::size_t j = 0; j < smooth["coeffs"].size(); ++j)
    params.h.coeffs[static_cast<int>(j)] = smooth["coeffs"][j].get<double>();
  params.h.center_offset = smooth["offset"].get<double>();
  params.H = cstrans::StepTransform(
      fit["transform"]["sites"].get<std::vector<double>>(),
      fit["transform"]["values"].get<std::vector<double>>());

  const auto data = cstrans::read_csv(csv);
  const auto family = cstrans::LinkFamily::parse(fit["family"].get<std::string>());
  const double objective = cstrans::penalized_objective(
      data, params, family, fit["lambda"].get<double>(),
      params.h.basis.penalty());
  CHECK(objective ==
        doctest::Approx(fit["objective"].get<double>()).epsilon(1e-10));
}

TEST_CASE("malformed status values name the offending file row") {
  const TempDir dir("badrow");
  const std::string path = dir.str("bad.csv");
  {
    std::ofstream out(path);
    out << "v,delta,z1,w\n";
    // File rows 2..9; the bad status sits on file row 7.
    out << "0.30,1,0.10,2.0\n";
    out << "0.40,0,0.20,3.0\n";
    out << "0.55,1,0.15,4.0\n";
    out << "0.70,0,0.05,5.0\n";
    out << "0.85,1,0.25,6.0\n";
    out << "0.95,2,0.30,7.0\n";
    out << "1.10,0,0.20,8.0\n";
    out << "1.30,1,0.10,9.0\n";
  }
  const auto run = run_cli({"fit", "--data", path, "--out", dir.str()});
  CHECK(run.code == 2);
  CHECK(run.err.find("row 7") != std::string::npos);

  const auto missing =
      run_cli({"fit", "--data", dir.str("absent.csv"), "--out", dir.str()});
  CHECK(missing.code == 2);
}

TEST_CASE("usage and configuration errors exit with code 1") {
  const TempDir dir("usage");
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"fit"}).code == 1);  // --data is required
  const std::string csv = study_csv(dir, 60, 0);
  CHECK(run_cli({"fit", "--data", csv, "--link", "nosuch", "--out", dir.str()})
            .code == 1);
  CHECK(run_cli({"fit", "--data", csv, "--lambda", "-2", "--out", dir.str()})
            .code == 1);
  CHECK(run_cli({"info", "--preset", "other", "--out", dir.str()}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("degenerate censoring patterns exit with code 3") {
  const TempDir dir("degenerate");
  const std::string path = dir.str("sorted.csv");
  {
    std::ofstream out(path);
    out << "v,delta,z1,w\n";
    out << "0.2,0,0.1,2.0\n0.4,0,0.2,3.0\n0.6,1,0.3,4.0\n0.8,1,0.4,5.0\n";
  }
  const auto run = run_cli({"fit", "--data", path, "--out", dir.str()});
  CHECK(run.code == 3);
  CHECK(run.err.find("numerical error") != std::string::npos);
}

TEST_CASE("check-family prints the verdict and always exits zero") {
  const TempDir dir("check");
  const auto bad = run_cli({"check-family", "--link", "cauchy", "--out",
                            dir.str()});
  CHECK(bad.code == 0);
  CHECK(bad.out.find("B5(d): violated") != std::string::npos);
  CHECK(fs::exists(dir.path / "check.json"));

  const auto good = run_cli({"check-family", "--link", "cloglog", "--out",
                             dir.str()});
  CHECK(good.code == 0);
  CHECK(good.out.find("B5(d): satisfied") != std::string::npos);

  const json check = json::parse(slurp(dir.str("check.json")));
  CHECK(check["satisfied"] == true);
}

TEST_CASE("jackknife subcommand writes block estimates and the region") {
  const TempDir dir("jk");
  const std::string csv = study_csv(dir, 100, 2);
  const auto run = run_cli({"jackknife", "--data", csv, "--m", "5", "--seed",
                            "3", "--out", dir.str()});
  REQUIRE(run.code == 0);
  for (const char* name : {"block_betas.csv", "scatter.csv", "jackknife.json",
                           "manifest.json"})
    CHECK(fs::exists(dir.path / name));
  const json jk = json::parse(slurp(dir.str("jackknife.json")));
  CHECK(jk["m"] == 5);
  CHECK(jk["reliable"].is_boolean());
  CHECK(jk["beta_hat"].size() == 2);

  std::ifstream blocks(dir.str("block_betas.csv"));
  int lines = 0;
  std::string line;
  while (std::getline(blocks, line)) ++lines;
  CHECK(lines == 6);  // header + one row per block
}

TEST_CASE("info subcommand writes the information bundle") {
  const TempDir dir("info");
  const auto run = run_cli({"info", "--preset", "sec9", "--grid", "41", "--out",
                            dir.str()});
  REQUIRE(run.code == 0);
  for (const char* name :
       {"h_tilde.csv", "q_tilde.csv", "I0.csv", "I0_inv.csv", "info.json"})
    CHECK(fs::exists(dir.path / name));
  const json info = json::parse(slurp(dir.str("info.json")));
  CHECK(info["grid"] == 41);
  CHECK(info["I0"].size() == 2);
  const double i01 = info["I0"][0][1].get<double>();
  const double i10 = info["I0"][1][0].get<double>();
  CHECK(i01 == i10);
}

TEST_CASE("simulate subcommand: study files and bias mode") {
  const TempDir dir("sim");
  const auto run = run_cli({"simulate", "--n", "100", "--reps", "2", "--m", "5",
                            "--seed", "4", "--out", dir.str()});
  REQUIRE(run.code == 0);
  for (const char* name : {"table1.csv", "replicates.csv", "beta_hist.csv",
                           "beta_scatter.csv", "h_curve.csv", "A_curve.csv",
                           "manifest.json"})
    CHECK(fs::exists(dir.path / name));
  std::ifstream reps(dir.str("replicates.csv"));
  int lines = 0;
  std::string line;
  while (std::getline(reps, line)) ++lines;
  CHECK(lines == 3);

  const TempDir bias_dir("simbias");
  const auto bias = run_cli({"simulate", "--bias", "--n", "400", "--reps", "3",
                             "--seed", "4", "--out", bias_dir.str()});
  REQUIRE(bias.code == 0);
  CHECK(fs::exists(bias_dir.path / "bias_replicates.csv"));
  CHECK(fs::exists(bias_dir.path / "bias_summary.csv"));
  const json manifest = json::parse(slurp(bias_dir.str("manifest.json")));
  CHECK(manifest["config"]["mode"] == "bias");
}

TEST_CASE("output directory resolution prefers the flag over the environment") {
  const TempDir flag_dir("flagdir");
  const TempDir env_dir("envdir");
  const std::string csv = study_csv(flag_dir, 80, 3);

  ::setenv("CSTRANS_OUT_DIR", env_dir.str().c_str(), 1);
  const auto env_run = run_cli({"check-family", "--link", "logit"});
  CHECK(env_run.code == 0);
  CHECK(fs::exists(env_dir.path / "check.json"));

  const auto flag_run = run_cli(
      {"check-family", "--link", "logit", "--out", flag_dir.str()});
  CHECK(flag_run.code == 0);
  CHECK(fs::exists(flag_dir.path / "check.json"));
  ::unsetenv("CSTRANS_OUT_DIR");
}
