#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssdraid/scenario.hpp"

namespace ssdraid {

inline constexpr const char* kToolVersion = "0.2.0";

// Failure writing outputs; maps to its own CLI exit code.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One emitted row: a scheme's reliability at one sampled age, with its
// deviation bound and the optional simulator cross-check.
struct CurveRecord {
  std::string scheme;
  std::int64_t system_age = 0;
  double reliability = 0;
  double bound = 0;
  bool has_solver = true;  // false: simulator-only row, solver columns empty
  bool has_mc = false;
  double mc_estimate = 0;
  double mc_ci_low = 0;
  double mc_ci_high = 0;
};

// Outcome of one placement within a scenario. A solver failure marks the
// scheme failed and leaves the rest of the scenario running.
struct SchemeOutcome {
  std::string label;
  bool ok = false;
  bool mc_only = false;
  std::string error;
  std::string csv_path;  // empty when failed or output is disabled
  std::vector<CurveRecord> records;
  double final_reliability = 0;
  double final_bound = 0;
  std::int64_t final_cap = -1;
  bool exact_interval_means = true;
  bool budget_warning = false;
  std::uint64_t config_digest = 0;
  double wall_ms = 0;
};

struct ScenarioResult {
  std::string scenario;
  std::vector<SchemeOutcome> schemes;
  bool partial = false;  // at least one scheme failed
  double wall_ms = 0;
  std::string manifest_path;
};

// Runs every placement of the scenario: solve to the horizon, optional
// simulator cross-check at the same ages, one CSV per scheme plus a JSON
// manifest. Empty out_dir skips all file output.
ScenarioResult run_scenario(const ScenarioSpec& spec,
                            const std::string& out_dir);

// Simulator-only variant: no transient solve; curves carry the Monte Carlo
// estimate and interval with the solver columns left empty. mc.runs must be
// set (or overridden) to a positive count.
ScenarioResult run_mc_only(const ScenarioSpec& spec,
                           const std::string& out_dir);

// One sweep point: the axis value and the scenario result computed with it.
struct SweepPoint {
  double value = 0;
  ScenarioResult result;
};

struct SweepResult {
  std::string scenario;
  std::string axis;
  std::vector<SweepPoint> points;
  std::vector<std::int64_t> probe_ages;  // resolved probe grid
  std::string table_path;
  std::string manifest_path;
  bool partial = false;
  double wall_ms = 0;
};

// Sweeps the configured axis (N, ecc_c, or M) over sweep_values: one curve
// set per value plus a comparison table probed at probe_ages (default: the
// base configuration's drive-replacement epochs, plus the horizon).
SweepResult run_sweep(const ScenarioSpec& base, const std::string& out_dir);

// Drive-replacement epochs of this configuration inside (0, horizon],
// horizon included. The natural comparison points between schemes.
std::vector<std::int64_t> replacement_epochs(const ArrayConfigd& cfg,
                                             std::int64_t horizon);

// Copy of the base spec with one axis value applied. Placements are
// re-derived when the axis changes the drive count; the solve interval
// default tracks the erasure limit.
ScenarioSpec apply_axis(const ScenarioSpec& base, const std::string& axis,
                        double value);

}  // namespace ssdraid
