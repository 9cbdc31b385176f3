#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "json.hpp"
#include "ssdraid/experiments.hpp"

using namespace ssdraid;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

ScenarioSpec desk_spec(const std::string& name) {
  const auto specs = parse_scenarios(
      "[scenario " + name + "]\n" +
      "array.n = 3\n"
      "array.blocks = 80\n"
      "array.stripes = 10\n"
      "array.erasure_limit = 100\n"
      "array.parity = raid5, diffraid_sigma:1\n"
      "rate.c = 1.25e-4\n"
      "rate.mu = 1\n"
      "run.horizon = 4000\n"
      "run.stride = 400\n",
      "test");
  return specs.at(0);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("ssdraid_test_" + tag)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("run_scenario writes one csv per scheme plus a manifest") {
  TempDir dir("scenario");
  const auto res = run_scenario(desk_spec("desk"), dir.path.string());

  CHECK(res.scenario == "desk");
  CHECK(!res.partial);
  REQUIRE(res.schemes.size() == 2);
  for (const auto& s : res.schemes) {
    CHECK(s.ok);
    CHECK(fs::exists(s.csv_path));
    CHECK(s.final_reliability > 0.5);
    CHECK(s.final_bound > 0);
    CHECK(s.config_digest != 0);
    // 4000 / 400 samples plus the age-0 row
    CHECK(s.records.size() == 11);
    for (std::size_t i = 1; i < s.records.size(); ++i)
      CHECK(s.records[i].system_age > s.records[i - 1].system_age);
  }
  // Evenly placed parity keeps all drives fresh at the start; age striping
  // begins mid-life, so its first lifetime is the weaker one.
  CHECK(res.schemes[0].final_reliability > 0.95);
  CHECK(res.schemes[1].final_reliability <
        res.schemes[0].final_reliability);
  CHECK(fs::exists(dir.path / "desk__raid5.csv"));
  CHECK(fs::exists(dir.path / "desk__diffraid_sigma1.csv"));

  const auto lines = lines_of(slurp((dir.path / "desk__raid5.csv").string()));
  REQUIRE(lines.size() == 12);
  CHECK(lines[0] ==
        "scheme,system_age,reliability,bound,mc_estimate,mc_ci_low,mc_ci_high");
  // Age-0 row: R = 1, zero bound, empty simulator fields.
  CHECK(lines[1] == "raid5,0,1.00000000e+00,0.00000000e+00,,,");
  // Every data row carries scheme, integer age, and two scientific floats.
  const std::regex row(
      R"(raid5,\d+,\d\.\d{8}e[+-]\d{2,3},\d\.\d{8}e[+-]\d{2,3},,,)");
  for (std::size_t i = 1; i < lines.size(); ++i)
    CHECK(std::regex_match(lines[i], row));

  const auto manifest =
      nlohmann::json::parse(slurp((dir.path / "desk__manifest.json").string()));
  CHECK(manifest["tool_version"] == kToolVersion);
  CHECK(manifest["scenario"] == "desk");
  CHECK(manifest["partial"] == false);
  CHECK(manifest["settings"]["array"]["n"] == 3);
  CHECK(manifest["settings"]["solver"]["step_size"] == 400);
  CHECK(manifest["settings"]["run"]["stride"] == 400);
  REQUIRE(manifest["schemes"].size() == 2);
  CHECK(manifest["schemes"][0]["status"] == "ok");
  CHECK(manifest["schemes"][0]["csv"] == "desk__raid5.csv");
  CHECK(manifest["schemes"][0]["rate_means"] == "exact");
  CHECK(manifest["schemes"][0]["error_budget_exceeded"] == false);
  CHECK(manifest.contains("sampling_note"));
  CHECK(manifest.contains("wall_ms"));
}

TEST_CASE("simulator cross-check fills the mc columns") {
  TempDir dir("mc");
  ScenarioSpec spec = desk_spec("deskmc");
  spec.mc_runs = 2000;
  spec.mc_seed = 7;
  const auto res = run_scenario(spec, dir.path.string());
  REQUIRE(!res.partial);
  for (const auto& s : res.schemes) {
    REQUIRE(s.records.size() == 11);
    for (const auto& r : s.records) {
      REQUIRE(r.has_mc);
      CHECK(r.mc_ci_low <= r.mc_estimate);
      CHECK(r.mc_estimate <= r.mc_ci_high);
    }
    CHECK(s.records[0].mc_estimate == 1.0);
  }
  const auto lines =
      lines_of(slurp((dir.path / "deskmc__raid5.csv").string()));
  const std::regex row(
      R"(raid5,\d+,(\d\.\d{8}e[+-]\d{2,3},){3}\d\.\d{8}e[+-]\d{2,3},)"
      R"(\d\.\d{8}e[+-]\d{2,3})");
  CHECK(std::regex_match(lines[2], row));

  const auto manifest = nlohmann::json::parse(
      slurp((dir.path / "deskmc__manifest.json").string()));
  CHECK(manifest["settings"]["mc"]["runs"] == 2000);
  CHECK(manifest["settings"]["mc"]["seed"] == 7);
}

TEST_CASE("fixed seeds reproduce byte-identical csv output") {
  TempDir dir_a("det_a");
  TempDir dir_b("det_b");
  ScenarioSpec spec = desk_spec("det");
  spec.mc_runs = 1000;
  spec.mc_seed = 99;
  run_scenario(spec, dir_a.path.string());
  run_scenario(spec, dir_b.path.string());
  for (const char* name : {"det__raid5.csv", "det__diffraid_sigma1.csv"}) {
    const std::string a = slurp((dir_a.path / name).string());
    const std::string b = slurp((dir_b.path / name).string());
    CHECK(a == b);
    CHECK(!a.empty());
  }
}

TEST_CASE("horizon zero emits a single trivial record per scheme") {
  TempDir dir("idle");
  ScenarioSpec spec = desk_spec("idle");
  spec.horizon = 0;
  spec.stride = -1;
  spec.mc_runs = 500;
  const auto res = run_scenario(spec, dir.path.string());
  CHECK(!res.partial);
  for (const auto& s : res.schemes) {
    REQUIRE(s.records.size() == 1);
    CHECK(s.records[0].system_age == 0);
    CHECK(s.records[0].reliability == 1.0);
    CHECK(s.records[0].bound == 0.0);
    CHECK(!s.records[0].has_mc);
  }
  const auto lines = lines_of(slurp((dir.path / "idle__raid5.csv").string()));
  REQUIRE(lines.size() == 2);
  CHECK(lines[1] == "raid5,0,1.00000000e+00,0.00000000e+00,,,");
}

TEST_CASE("a failing scheme is reported without sinking the scenario") {
  TempDir dir("partial");
  ScenarioSpec spec = desk_spec("partial");
  // Second placement carries parity shares summing to 2: config validation
  // fails for that scheme only.
  spec.placements[1].parity = Eigen::VectorXd::Constant(4, 0.5);
  const auto res = run_scenario(spec, dir.path.string());
  CHECK(res.partial);
  REQUIRE(res.schemes.size() == 2);
  CHECK(res.schemes[0].ok);
  CHECK(!res.schemes[1].ok);
  CHECK(!res.schemes[1].error.empty());
  CHECK(fs::exists(dir.path / "partial__raid5.csv"));
  CHECK(!fs::exists(dir.path / "partial__diffraid_sigma1.csv"));

  const auto manifest = nlohmann::json::parse(
      slurp((dir.path / "partial__manifest.json").string()));
  CHECK(manifest["partial"] == true);
  CHECK(manifest["schemes"][1]["status"] == "failed");
  CHECK(manifest["schemes"][1].contains("error"));
}

TEST_CASE("replacement epochs track scheme and parity") {
  ScenarioSpec spec = desk_spec("epochs");
  // Traditional even parity: every drive sees a quarter of the erasures, so
  // replacements land every M*B*4 periods.
  auto trad = spec.array_config(spec.placements[0]);
  CHECK(replacement_epochs(trad, 70000) ==
        std::vector<std::int64_t>{32000, 64000, 70000});
  CHECK(replacement_epochs(trad, 32000) == std::vector<std::int64_t>{32000});
  // Age-striped scheme: all drives wrap together every M*B periods.
  auto diff = spec.array_config(spec.placements[1]);
  CHECK(replacement_epochs(diff, 20000) ==
        std::vector<std::int64_t>{8000, 16000, 20000});
  CHECK(replacement_epochs(trad, 0).empty());
}

TEST_CASE("apply_axis rebuilds what the value touches") {
  ScenarioSpec spec = desk_spec("axis");

  ScenarioSpec n = apply_axis(spec, "N", 9);
  CHECK(n.data_drives == 9);
  REQUIRE(n.placements.size() == 2);
  CHECK(n.placements[0].parity.size() == 10);
  CHECK(n.placements[1].parity.size() == 10);
  CHECK(n.placements[1].parity.sum() == doctest::Approx(1.0));

  ScenarioSpec c = apply_axis(spec, "ecc_c", 4.4e-11);
  CHECK(c.rate_constant == 4.4e-11);
  CHECK(c.data_drives == 3);

  ScenarioSpec m = apply_axis(spec, "M", 1000);
  CHECK(m.erasure_limit == 1000);
  // Defaulted solve interval tracks the new lifetime: B*M/20.
  CHECK(m.effective_step() == 80 * 1000 / 20);

  CHECK_THROWS_AS(apply_axis(spec, "sigma", 1), ScenarioError);
}

TEST_CASE("run_sweep emits per-value curves and a shared-age table") {
  TempDir dir("sweep");
  const auto specs = parse_scenarios(
      "[scenario widths]\n"
      "array.n = 3\n"
      "array.blocks = 80\n"
      "array.stripes = 10\n"
      "array.erasure_limit = 100\n"
      "rate.c = 1.25e-4\n"
      "rate.mu = 1\n"
      "run.horizon = 4000\n"
      "run.stride = 400\n"
      "sweep.axis = N\n"
      "sweep.values = 3, 5\n"
      "sweep.probe_ages = 2000 4000\n",
      "test");
  const auto res = run_sweep(specs.at(0), dir.path.string());

  CHECK(res.axis == "N");
  CHECK(!res.partial);
  REQUIRE(res.points.size() == 2);
  CHECK(res.points[0].value == 3.0);
  CHECK(res.points[1].value == 5.0);
  CHECK(res.probe_ages == std::vector<std::int64_t>{2000, 4000});
  CHECK(fs::exists(dir.path / "widths__N3__raid5.csv"));
  CHECK(fs::exists(dir.path / "widths__N5__raid5.csv"));

  const auto table = lines_of(slurp(res.table_path));
  REQUIRE(table.size() == 5);
  CHECK(table[0] == "axis,value,scheme,system_age,reliability,bound");
  CHECK(table[1].rfind("N,3,raid5,2000,", 0) == 0);
  CHECK(table[2].rfind("N,3,raid5,4000,", 0) == 0);
  CHECK(table[3].rfind("N,5,raid5,2000,", 0) == 0);
  CHECK(table[4].rfind("N,5,raid5,4000,", 0) == 0);

  // Even parity splits the same total wear over more drives, so before the
  // first replacement the array width cancels out of the aggregate error
  // rate and the curves coincide.
  const auto r_at = [&](const std::string& line) {
    const auto cols = line;
    std::size_t p = 0;
    for (int i = 0; i < 4; ++i) p = cols.find(',', p) + 1;
    return std::stod(cols.substr(p));
  };
  CHECK(r_at(table[2]) == doctest::Approx(r_at(table[4])).epsilon(1e-9));
  CHECK(r_at(table[1]) > r_at(table[2]));  // reliability falls with age

  const auto manifest = nlohmann::json::parse(
      slurp((dir.path / "widths__manifest.json").string()));
  CHECK(manifest["sweep"]["axis"] == "N");
  CHECK(manifest["sweep"]["probe_ages_defaulted"] == false);
  REQUIRE(manifest["points"].size() == 2);
  CHECK(manifest["points"][0]["schemes"][0]["status"] == "ok");
  CHECK(manifest["table"] == "widths__table.csv");
  // Sweep points share one manifest; no per-point manifests.
  CHECK(!fs::exists(dir.path / "widths__N3__manifest.json"));
}

TEST_CASE("default probe ages are the replacement epochs") {
  TempDir dir("probes");
  const auto specs = parse_scenarios(
      "[scenario probes]\n"
      "array.n = 3\n"
      "array.blocks = 80\n"
      "array.stripes = 10\n"
      "array.erasure_limit = 100\n"
      "array.parity = diffraid_sigma:1\n"
      "rate.c = 1.25e-4\n"
      "rate.mu = 1\n"
      "run.horizon = 20000\n"
      "run.stride = 2000\n"
      "sweep.axis = ecc_c\n"
      "sweep.values = 1.25e-4\n",
      "test");
  const auto res = run_sweep(specs.at(0), dir.path.string());
  CHECK(res.probe_ages == std::vector<std::int64_t>{8000, 16000, 20000});
  const auto manifest = nlohmann::json::parse(
      slurp((dir.path / "probes__manifest.json").string()));
  CHECK(manifest["sweep"]["probe_ages_defaulted"] == true);
}

TEST_CASE("run_sweep without an axis is refused") {
  CHECK_THROWS_AS(run_sweep(desk_spec("noaxis"), ""), ScenarioError);
}

}  // TEST_SUITE
