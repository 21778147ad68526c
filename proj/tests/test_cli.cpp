#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "eoslab/config.hpp"
#include "eoslab/trace_io.hpp"

using namespace eos;
namespace fs = std::filesystem;

namespace {

#ifndef EOSLAB_CLI_PATH
#define EOSLAB_CLI_PATH "eoslab"
#endif

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EOSLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "eoslab_cli_test";
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kToyConfig = R"(
[loss]
kind = toy

[optimizer]
kind = normalized_gd
eta = 0.02
steps = 400
x0 = 1.0, 0.3
noise_enabled = true
seed = 9

[diagnostics]
cadence = 100
top_k = 2

[flow]
kind = log
eta_flow = 1e-3
tau_end = 0.05

[output]
dir = OUTDIR
prefix = trace
)";

std::string toy_config(const fs::path& out_dir) {
  std::string text = kToyConfig;
  const std::string key = "OUTDIR";
  text.replace(text.find(key), key.size(), out_dir.string());
  return text;
}

}  // namespace

TEST_CASE("config parser essentials") {
  const auto cfg = ConfigFile::parse_string(R"(
# comment
[loss]
kind = toy       # trailing comment
values = 1, 0.4

[optimizer]
eta = 0.05
flag = true
)");
  CHECK(cfg.get_string("loss", "kind") == "toy");
  CHECK(cfg.get_double("optimizer", "eta") == 0.05);
  CHECK(cfg.get_bool("optimizer", "flag", false));
  CHECK(cfg.get_doubles("loss", "values").size() == 2);
  CHECK(cfg.get_long("missing", "key", 7) == 7);
}

TEST_CASE("config parser reports the offending line") {
  try {
    ConfigFile::parse_string("[a]\nkey value\n", "cfg");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }

  try {
    const auto cfg = ConfigFile::parse_string("[a]\nx = notanumber\n", "cfg");
    cfg.get_double("a", "x");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg:2") != std::string::npos);
  }

  CHECK_THROWS_AS(ConfigFile::parse_string("[a]\nx = 1\nx = 2\n"),
                  ConfigError);
}

TEST_CASE("experiment config rejects bad values") {
  auto parse = [](const std::string& body) {
    return load_experiment_config(ConfigFile::parse_string(body));
  };
  CHECK_THROWS_AS(parse("[loss]\nkind = nosuch\n"), ConfigError);
  CHECK_THROWS_AS(parse("[optimizer]\nkind = sgd\n"), ConfigError);
  CHECK_THROWS_AS(parse("[optimizer]\neta = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[flow]\nkind = circular\n"), ConfigError);
}

TEST_CASE("shortest round-trip float formatting") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(mant(rng), expo(rng));
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.0) == "0");
}

TEST_CASE("csv table reads back what the writer emits") {
  const fs::path dir = temp_dir();
  const fs::path csv = dir / "io_roundtrip.csv";
  {
    std::ofstream out(csv);
    out << "step,a,b\n0,0.5,\n1,,0.25\n";
  }
  const CsvTable t = read_csv(csv.string());
  REQUIRE(t.header.size() == 3);
  CHECK(t.column("a") == 1);
  CHECK(t.column("nope") == -1);
  CHECK(t.columns[1][0] == 0.5);
  CHECK(std::isnan(t.columns[1][1]));
  CHECK(t.columns[2][1] == 0.25);
}

TEST_CASE("malformed config exits with the config code") {
  const fs::path dir = temp_dir();
  const fs::path bad = dir / "bad.cfg";
  write_file(bad, "[loss\nkind = toy\n");
  CHECK(run_cli("run --config " + bad.string()) == 2);

  const fs::path unknown = dir / "unknown.cfg";
  write_file(unknown, "[loss]\nkind = cubic\n");
  CHECK(run_cli("run --config " + unknown.string()) == 2);

  CHECK(run_cli("run --config " + (dir / "missing.cfg").string()) == 2);
}

TEST_CASE("identical config and seed reproduce byte-identical traces") {
  const fs::path dir = temp_dir();
  const fs::path out_a = dir / "det_a";
  const fs::path out_b = dir / "det_b";
  const fs::path cfg = dir / "det.cfg";

  write_file(cfg, toy_config(out_a));
  REQUIRE(run_cli("run --config " + cfg.string() + " --quiet") == 0);
  write_file(cfg, toy_config(out_b));
  REQUIRE(run_cli("run --config " + cfg.string() + " --quiet") == 0);

  const std::string a = slurp(out_a / "trace.csv");
  const std::string b = slurp(out_b / "trace.csv");
  REQUIRE(!a.empty());
  CHECK(a == b);
}

TEST_CASE("quadratic suite reports its checks and honors --check") {
  const fs::path dir = temp_dir();
  const fs::path out = dir / "quad";
  CHECK(run_cli("quadratic --seeds 10 --out-dir " + out.string() +
                " --check --quiet") == 0);
  const std::string summary = slurp(out / "quadratic_summary.json");
  CHECK(summary.find("\"invariant_sets\": \"pass\"") != std::string::npos);
  CHECK(summary.find("\"limit_cycle\": \"pass\"") != std::string::npos);
}

TEST_CASE("plot consumes traces without touching them") {
  const fs::path dir = temp_dir();
  const fs::path out = dir / "plotrun";
  const fs::path cfg = dir / "plot.cfg";
  write_file(cfg, toy_config(out));
  REQUIRE(run_cli("run --config " + cfg.string() + " --quiet") == 0);

  const fs::path csv = out / "trace.csv";
  const std::string before = slurp(csv);
  const fs::path svg = out / "trace.svg";
  CHECK(run_cli("plot --csv " + csv.string() + " --out " + svg.string() +
                " --quiet") == 0);
  CHECK(fs::exists(svg));
  CHECK(slurp(csv) == before);

  // Requesting a missing column is an error.
  CHECK(run_cli("plot --csv " + csv.string() + " --out " + svg.string() +
                " --columns nosuchcolumn") != 0);
}

TEST_CASE("flow subcommand checks pass on the product loss") {
  const fs::path dir = temp_dir();
  const fs::path out = dir / "flowrun";
  const fs::path cfg = dir / "flow.cfg";
  write_file(cfg, toy_config(out));
  CHECK(run_cli("flow --config " + cfg.string() + " --check --quiet") == 0);
  CHECK(fs::exists(out / "trace_flow.csv"));
}
