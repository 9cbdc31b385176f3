#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssdraid/array_config.hpp"
#include "ssdraid/solver.hpp"

namespace ssdraid {

// Configuration or validation failure; the message carries the scenario
// name, key, and line number where known.
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One reliability curve to produce: a scheme plus its parity split.
struct Placement {
  std::string label;  // CSV scheme column and output-file suffix
  Scheme scheme = Scheme::traditional;
  Eigen::VectorXd parity;
};

enum class CapMode { full, fixed, automatic };

// A named experiment: array geometry, rate law, solver settings, run window,
// optional Monte Carlo cross-check, optional sweep axis.
struct ScenarioSpec {
  std::string name;

  // array.*
  int data_drives = 9;
  std::int64_t blocks_per_drive = 131072;
  std::int64_t stripes = -1;  // -1: one stripe per block row
  std::int64_t erasure_limit = 10000;
  std::vector<Placement> placements;  // default: raid5 only
  std::vector<std::string> placement_tokens;  // source form, for re-derivation
  Scheme explicit_scheme = Scheme::diffraid;  // scheme for explicit parity

  // rate.*
  double rate_constant = 0;
  double shape = 2;
  double recovery_rate = 1e-3;
  double erase_interval = 1e-2;

  // solver.*
  std::int64_t step_size = -1;  // -1: blocks * erasure_limit / 20
  double epsilon = 1e-3;
  CapMode cap_mode = CapMode::full;
  std::int64_t state_cap = -1;  // used when cap_mode == fixed

  // run.*
  std::int64_t horizon = -1;  // required
  std::int64_t stride = -1;   // -1: horizon / 20

  // mc.*
  std::int64_t mc_runs = 0;  // 0 disables the cross-check
  std::uint64_t mc_seed = 1;

  // sweep.*
  std::string sweep_axis;  // one of "", "N", "ecc_c", "M"
  std::vector<double> sweep_values;
  std::vector<std::int64_t> probe_ages;  // empty: replacement epochs

  std::int64_t effective_stripes() const {
    return stripes >= 0 ? stripes : blocks_per_drive;
  }
  std::int64_t effective_step() const {
    return step_size >= 0
               ? step_size
               : std::max<std::int64_t>(
                     1, blocks_per_drive * erasure_limit / 20);
  }
  std::int64_t effective_stride() const {
    return stride >= 0 ? stride : std::max<std::int64_t>(1, horizon / 20);
  }

  ArrayConfigd array_config(const Placement& placement) const;
  SolverSettingsd solver_settings() const;
};

// Parses the scenario grammar: "[scenario <name>]" headers, "key = value"
// lines, '#' comments. Unknown keys, duplicate keys, and malformed values
// raise ScenarioError with their line number. `origin` names the source in
// messages (usually the path).
std::vector<ScenarioSpec> parse_scenarios(const std::string& text,
                                          const std::string& origin);

// Reads and parses a scenario file; defaults applied, every spec validated.
std::vector<ScenarioSpec> load_scenarios(const std::string& path);

// Resolves one placement token: "raid5", "diffraid_sigma:<w>", or
// "explicit:[p0 p1 ...]" (scheme for explicit from explicit_scheme).
Placement make_placement(const std::string& token, int data_drives,
                         Scheme explicit_scheme);

}  // namespace ssdraid
