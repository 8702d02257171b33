/**
 * @file test_cli.cpp
 * @brief Unit tests for config loading, overrides and schema validation, plus
 *        process-level tests of the pamlab executable (exit codes, dry runs,
 *        reported tables and byte-level determinism of CSV outputs).
 */
#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "pam/cli.hpp"

using namespace pam;
using cli::json;
namespace fs = std::filesystem;

namespace {

struct ProcessResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Scratch directory unique to this test binary.
fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("pamlab_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

ProcessResult run_pamlab(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + PAMLAB_EXE + "\" " + args + " --out \"" + (scratch() / "runs").string() +
                          "\" > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  ProcessResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path run_directory(const ProcessResult& r) {
  const std::string tag = "run directory: ";
  const auto pos = r.out.rfind(tag);
  REQUIRE(pos != std::string::npos);
  const auto end = r.out.find('\n', pos);
  return fs::path(r.out.substr(pos + tag.size(), end - pos - tag.size()));
}

json valid() { return cli::default_config(); }

}  // namespace

TEST_CASE("defaults validate and overrides parse JSON values", "[cli][config]") {
  json cfg = valid();
  REQUIRE_NOTHROW(cli::validate_config(cfg));
  cli::apply_override(cfg, "model.a=0.5");
  cli::apply_override(cfg, "experiment.N_list=[4,8,16,32]");
  cli::apply_override(cfg, "experiment.scheme=physical");
  CHECK(cfg["model"]["a"].get<double>() == 0.5);
  CHECK(cfg["experiment"]["N_list"].size() == 4);
  CHECK(cfg["experiment"]["scheme"].get<std::string>() == "physical");
  CHECK(cli::parse_model(cfg).mass == 0.5);
  CHECK(cli::parse_scheme(cfg) == stats::Scheme::Physical);
  CHECK_THROWS_AS(cli::apply_override(cfg, "novalue"), ConfigError);
  CHECK_THROWS_AS(cli::apply_override(cfg, "model..a=1"), ConfigError);
}

TEST_CASE("config files merge over defaults", "[cli][config]") {
  const fs::path p = scratch() / "cfg.json";
  std::ofstream(p) << R"({"model": {"kind": "riesz", "d": 2, "beta": 0.5}, "grid": {"t_end": 1.0}})";
  const json cfg = cli::load_config(p.string());
  CHECK(cfg["grid"]["M"].get<int>() == 512);
  const auto m = cli::parse_model(cfg);
  CHECK(m.kind == CovarianceKind::RieszKernel);
  CHECK(m.riesz_exponent == 0.5);
  CHECK_THROWS_AS(cli::load_config((scratch() / "missing.json").string()), ConfigError);
  std::ofstream(scratch() / "bad.json") << "{ not json";
  CHECK_THROWS_AS(cli::load_config((scratch() / "bad.json").string()), ConfigError);
}

TEST_CASE("schema violations name the offending key", "[cli][config]") {
  auto fails_at = [](const std::string& override_text, const std::string& key) {
    json cfg = valid();
    cli::apply_override(cfg, override_text);
    try {
      cli::validate_config(cfg);
    } catch (const ConfigError& e) {
      INFO(override_text << " -> " << e.what());
      CHECK(e.path().find(key) != std::string::npos);
      return;
    }
    FAIL("no ConfigError for " << override_text);
  };
  fails_at("model.kind=bogus", "model");
  fails_at("model.a=-1", "model");
  fails_at("model.colour=1", "model");
  fails_at("grid.M=7", "grid.M");
  fails_at("grid.t_end=0", "grid.t_end");
  fails_at("experiment.replicas=0", "experiment.replicas");
  fails_at("experiment.scheme=euler", "experiment.scheme");
  fails_at("experiment.N_list=[8,4]", "experiment.N_list");
  fails_at("experiment.test_functions=[\"identity\",\"clip:2\"]", "test_functions");
  fails_at("experiment.test_functions=[\"clip:-1\",\"clip:2\"]", "test_functions");
  fails_at("experiment.shifts=[[0]]", "experiment.shifts");
  json cfg = valid();
  cli::apply_override(cfg, "grid.auto=false");
  CHECK_THROWS_AS(cli::validate_config(cfg), ConfigError);  // N = 64 exceeds L/8 - sqrt(t) = 1.29.
  cli::apply_override(cfg, "experiment.N_list=[0.25,0.5,0.75,1]");
  CHECK_NOTHROW(cli::validate_config(cfg));
}

TEST_CASE("riesz parameter range and tabulated models", "[cli][config]") {
  json cfg = valid();
  cfg["model"] = {{"kind", "riesz"}, {"d", 1}, {"beta", 1.5}};
  CHECK_THROWS_AS(cli::parse_model(cfg), ConfigError);  // beta must be below d in d = 1.
  cfg["model"]["beta"] = 0.5;
  CHECK_NOTHROW(cli::parse_model(cfg));
  cfg["model"] = {{"kind", "tabulated"},
                  {"d", 1},
                  {"spectral_table", {{0.0, 1.0}, {10.0, 0.0}}},
                  {"total_mass", 1.0},
                  {"rajchman", true}};
  const auto m = cli::parse_model(cfg);
  CHECK(m.kind == CovarianceKind::TabulatedFinite);
  CHECK(m.radial_spectral(5.0) == Catch::Approx(0.5));
  CHECK(m.radial_spectral(20.0) == 0.0);
}

TEST_CASE("window grid follows the default window rule when automatic", "[cli][config]") {
  json cfg = valid();
  const GridSpec g = cli::window_grid(cfg);
  CHECK(g.L == Catch::Approx(8.0 * (64 + std::sqrt(0.5))));
  CHECK(g.dx() <= 1.25 * 0.125);
  CHECK(g.M == 4096);
  CHECK(g.spacing == TimeSpacing::Geometric);
  cli::apply_override(cfg, "grid.auto=false");
  const GridSpec u = cli::window_grid(cfg);
  CHECK(u.L == 16.0);
  CHECK(u.M == 512);
  CHECK(u.spacing == TimeSpacing::Uniform);
}

TEST_CASE("manifest hashing is stable", "[cli][manifest]") {
  CHECK(cli::hex64(cli::fnv1a64("")) == "cbf29ce484222325");
  CHECK(cli::hex64(cli::fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(cli::canonical(valid()) == cli::canonical(cli::default_config()));
}

TEST_CASE("pamlab: exit codes", "[cli][process]") {
  CHECK(run_pamlab("constants compute --set grid.t_end=0").code == cli::kConfigError);
  CHECK(run_pamlab("constants compute --set experiment.unknown=1").code == cli::kConfigError);
  CHECK(run_pamlab("no-such-command").code == cli::kConfigError);
  CHECK(run_pamlab("covariance info").code == cli::kSuccess);
  // Riesz d = 2, beta = 1.5 at t = 2: the chi renewal weight exceeds one.
  const auto r = run_pamlab("chi solve --set 'model={\"kind\":\"riesz\",\"d\":2,\"beta\":1.5}' --set grid.t_end=2");
  CHECK(r.code == cli::kNumericalFailure);
  // A tiny ergodicity run whose decay criterion cannot be met over a two-fold window range.
  const auto e = run_pamlab(
      "ergodicity-test --set grid.auto=false --set experiment.replicas=50 "
      "--set experiment.N_list=[0.5,0.75,1,1.25]");
  CHECK((e.code == cli::kSuccess || e.code == cli::kAcceptanceFailure));
}

TEST_CASE("pamlab: covariance info flags Dalang failure", "[cli][process]") {
  const auto r = run_pamlab("covariance info --set model.d=2");
  CHECK(r.code == cli::kSuccess);
  CHECK(r.out.find("Dalang condition FAILED") != std::string::npos);
  const auto ok = run_pamlab("covariance info");
  CHECK(ok.out.find("Dalang condition FAILED") == std::string::npos);
  const fs::path dir = run_directory(ok);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "covariance_info.csv"));
}

TEST_CASE("pamlab: constants compute reports Upsilon(1) = 1/2 for unit white noise", "[cli][process]") {
  const auto r = run_pamlab("constants compute --set experiment.lambda_list=[1]");
  REQUIRE(r.code == cli::kSuccess);
  const std::string csv = slurp(run_directory(r) / "constants.csv");
  CHECK(csv.find("dalang-functional,upsilon,1,0.5\n") != std::string::npos);
}

TEST_CASE("pamlab: dry run prints the plan and writes nothing", "[cli][process]") {
  auto run_count = [] {
    const fs::path runs = scratch() / "runs";
    return fs::exists(runs) ? std::distance(fs::directory_iterator(runs), fs::directory_iterator{}) : 0;
  };
  const auto before = run_count();
  const auto r = run_pamlab("clt-test --dry-run");
  CHECK(r.code == cli::kSuccess);
  CHECK(r.out.find("dry run") != std::string::npos);
  CHECK(r.out.find("nothing executed") != std::string::npos);
  CHECK(r.out.find("run directory") == std::string::npos);
  CHECK(run_count() == before);
}

TEST_CASE("pamlab: simulate outputs are byte-identical for identical seeds", "[cli][process]") {
  const std::string args =
      "simulate --set grid.auto=false --set experiment.replicas=20 --set experiment.N_list=[0.25,0.5,0.75,1] "
      "--set experiment.dump_fields=2 --threads 1 --seed 7";
  const auto a = run_pamlab(args);
  const auto b = run_pamlab(args);
  REQUIRE(a.code == cli::kSuccess);
  REQUIRE(b.code == cli::kSuccess);
  const fs::path da = run_directory(a), db = run_directory(b);
  CHECK(da != db);
  CHECK(slurp(da / "samples.csv") == slurp(db / "samples.csv"));
  CHECK(slurp(da / "fields.bin") == slurp(db / "fields.bin"));
  CHECK(fs::file_size(da / "fields.bin") == 2 * 512 * sizeof(double));
  const json side = json::parse(slurp(da / "fields.json"));
  CHECK(side["M"].get<int>() == 512);
  const json manifest = json::parse(slurp(da / "manifest.json"));
  CHECK(manifest["checksums"]["samples.csv"].get<std::string>() ==
        cli::hex64(cli::fnv1a64(slurp(da / "samples.csv"))));
  CHECK(manifest["seed_lineage"]["master_seed"].get<int>() == 7);
  // Thread count does not change the bytes.
  const auto c = run_pamlab(
      "simulate --set grid.auto=false --set experiment.replicas=20 --set experiment.N_list=[0.25,0.5,0.75,1] "
      "--set experiment.dump_fields=2 --threads 3 --seed 7");
  CHECK(slurp(run_directory(c) / "samples.csv") == slurp(da / "samples.csv"));
  const auto d = run_pamlab(
      "simulate --set grid.auto=false --set experiment.replicas=20 --set experiment.N_list=[0.25,0.5,0.75,1] "
      "--set experiment.dump_fields=2 --seed 8");
  CHECK(slurp(run_directory(d) / "samples.csv") != slurp(da / "samples.csv"));
}

TEST_CASE("pamlab: report lists earlier runs", "[cli][process]") {
  run_pamlab("covariance info");
  const auto r = run_pamlab("report");
  CHECK(r.code == cli::kSuccess);
  CHECK(r.out.find("covariance info") != std::string::npos);
}
