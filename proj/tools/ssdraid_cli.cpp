// Command-line front end: scenario solves, configuration sweeps, simulator
// runs, and solver-vs-simulator validation, driven by a scenario file.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssdraid/experiments.hpp"
#include "ssdraid/solver.hpp"

namespace {

using namespace ssdraid;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitIo = 3;

struct Options {
  std::string config;
  std::string scenario;  // empty: every scenario in the file
  std::string out = "out";
  std::string truncate;  // "", "auto", or a state count
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::int64_t runs = -1;
  std::int64_t stride = -1;
};

void add_common(CLI::App* sub, Options& opt) {
  sub->add_option("--config", opt.config, "scenario file")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--scenario", opt.scenario,
                  "scenario name (default: all in the file)");
  sub->add_option("--out", opt.out, "output directory")
      ->capture_default_str();
  sub->add_option("--seed", opt.seed, "override mc.seed")
      ->each([&opt](const std::string&) { opt.seed_set = true; });
  sub->add_option("--truncate", opt.truncate,
                  "state cap: a degraded-stripe count, or 'auto'");
  sub->add_option("--runs", opt.runs, "override mc.runs");
  sub->add_option("--stride", opt.stride, "override run.stride");
}

// Selected scenarios with CLI overrides folded in.
std::vector<ScenarioSpec> select(const Options& opt) {
  std::vector<ScenarioSpec> specs = load_scenarios(opt.config);
  if (!opt.scenario.empty()) {
    std::vector<ScenarioSpec> picked;
    for (ScenarioSpec& s : specs)
      if (s.name == opt.scenario) picked.push_back(std::move(s));
    if (picked.empty())
      throw ScenarioError(opt.config + ": no scenario named '" +
                          opt.scenario + "'");
    specs = std::move(picked);
  }
  for (ScenarioSpec& s : specs) {
    if (opt.seed_set) s.mc_seed = opt.seed;
    if (opt.runs >= 0) s.mc_runs = opt.runs;
    if (opt.stride >= 1) s.stride = opt.stride;
    if (!opt.truncate.empty()) {
      if (opt.truncate == "auto") {
        s.cap_mode = CapMode::automatic;
      } else if (opt.truncate == "full") {
        s.cap_mode = CapMode::full;
      } else {
        char* end = nullptr;
        const long long cap = std::strtoll(opt.truncate.c_str(), &end, 10);
        if (end == opt.truncate.c_str() || *end != '\0' || cap < 1)
          throw ScenarioError("--truncate: expected a count >= 1, 'auto', or "
                              "'full', got '" + opt.truncate + "'");
        s.cap_mode = CapMode::fixed;
        s.state_cap = cap;
        if (s.state_cap >= s.effective_stripes())
          throw ScenarioError("--truncate: cap must be below the stripe "
                              "count of scenario '" + s.name + "'");
      }
    }
  }
  return specs;
}

void print_schemes(const ScenarioResult& res) {
  for (const SchemeOutcome& s : res.schemes) {
    // keep fp residue around an exact zero from printing as "-0.000000"
    const double shown =
        std::abs(s.final_reliability) < 5e-7 ? 0.0 : s.final_reliability;
    if (!s.ok) {
      std::printf("  %-24s FAILED: %s\n", s.label.c_str(), s.error.c_str());
    } else if (s.mc_only) {
      std::printf("  %-24s R(end) = %.6f   (%.0f ms)\n", s.label.c_str(),
                  shown, s.wall_ms);
    } else {
      std::printf("  %-24s R(end) = %.6f  bound = %.3e   (%.0f ms)\n",
                  s.label.c_str(), shown, s.final_bound, s.wall_ms);
    }
  }
}

int cmd_solve(const Options& opt) {
  bool any_failed = false;
  for (const ScenarioSpec& spec : select(opt)) {
    const ScenarioResult res = run_scenario(spec, opt.out);
    std::printf("scenario %s\n", res.scenario.c_str());
    print_schemes(res);
    if (!res.manifest_path.empty())
      std::printf("  manifest: %s\n", res.manifest_path.c_str());
    any_failed = any_failed || res.partial;
  }
  return any_failed ? kExitSolver : kExitOk;
}

int cmd_sweep(const Options& opt) {
  bool any_failed = false;
  bool ran = false;
  for (const ScenarioSpec& spec : select(opt)) {
    if (spec.sweep_axis.empty()) {
      if (!opt.scenario.empty())
        throw ScenarioError("scenario '" + spec.name + "' has no sweep axis");
      continue;  // unselected non-sweep scenarios are skipped
    }
    ran = true;
    const SweepResult res = run_sweep(spec, opt.out);
    std::printf("sweep %s over %s\n", res.scenario.c_str(), res.axis.c_str());
    for (const SweepPoint& p : res.points) {
      std::printf(" %s = %g\n", res.axis.c_str(), p.value);
      print_schemes(p.result);
    }
    if (!res.table_path.empty())
      std::printf("  table: %s\n", res.table_path.c_str());
    any_failed = any_failed || res.partial;
  }
  if (!ran) throw ScenarioError(opt.config + ": no scenario has a sweep axis");
  return any_failed ? kExitSolver : kExitOk;
}

int cmd_mc(const Options& opt) {
  bool any_failed = false;
  for (ScenarioSpec spec : select(opt)) {
    if (spec.mc_runs < 1) spec.mc_runs = 10000;
    const ScenarioResult res = run_mc_only(spec, opt.out);
    std::printf("mc %s (%lld runs, seed %llu)\n", res.scenario.c_str(),
                static_cast<long long>(spec.mc_runs),
                static_cast<unsigned long long>(spec.mc_seed));
    print_schemes(res);
    any_failed = any_failed || res.partial;
  }
  return any_failed ? kExitSolver : kExitOk;
}

// Solver-vs-simulator agreement: at every sampled age the solved reliability
// should sit inside the simulator's confidence interval widened by the
// solver's own deviation bound. Requires 95% of ages covered per scheme.
int cmd_validate(const Options& opt) {
  bool all_pass = true;
  bool any_failed = false;
  for (ScenarioSpec spec : select(opt)) {
    if (spec.mc_runs < 1) spec.mc_runs = 20000;
    const ScenarioResult res = run_scenario(spec, opt.out);
    std::printf("validate %s (%lld runs, seed %llu)\n", res.scenario.c_str(),
                static_cast<long long>(spec.mc_runs),
                static_cast<unsigned long long>(spec.mc_seed));
    for (const SchemeOutcome& s : res.schemes) {
      if (!s.ok) {
        std::printf("  %-24s FAILED: %s\n", s.label.c_str(), s.error.c_str());
        any_failed = true;
        continue;
      }
      int covered = 0;
      for (const CurveRecord& r : s.records) {
        const double lo = r.mc_ci_low - r.bound - 1e-12;
        const double hi = r.mc_ci_high + r.bound + 1e-12;
        if (r.reliability >= lo && r.reliability <= hi) ++covered;
      }
      const double frac =
          s.records.empty() ? 0.0
                            : double(covered) / double(s.records.size());
      const bool pass = frac >= 0.95;
      all_pass = all_pass && pass;
      std::printf("  %-24s %d/%zu ages inside the 99%% interval  [%s]\n",
                  s.label.c_str(), covered, s.records.size(),
                  pass ? "ok" : "MISMATCH");
    }
    any_failed = any_failed || res.partial;
  }
  if (any_failed || !all_pass) return kExitSolver;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SSD RAID reliability toolkit: transient chain solver and "
               "Monte Carlo simulator over scenario files"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* solve = app.add_subcommand("solve", "solve scenarios to CSV");
  CLI::App* sweep = app.add_subcommand("sweep", "run a configuration sweep");
  CLI::App* validate =
      app.add_subcommand("validate", "cross-check solver against simulator");
  CLI::App* mc = app.add_subcommand("mc", "simulator-only estimates");
  for (CLI::App* sub : {solve, sweep, validate, mc}) add_common(sub, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Flag and usage errors share the config-validation exit code;
    // --help and --version stay successful.
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (solve->parsed()) return cmd_solve(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (validate->parsed()) return cmd_validate(opt);
    if (mc->parsed()) return cmd_mc(opt);
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const ScenarioError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  }
  return kExitOk;
}
