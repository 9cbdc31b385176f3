#include "ssdraid/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ssdraid/mc_sim.hpp"
#include "ssdraid/solver.hpp"

namespace ssdraid {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

// Decimal scientific, 9 significant digits: the emitted-float contract.
std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.8e", v);
  return buf;
}

std::string fmt_compact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string digest_hex(std::uint64_t d) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, d);
  return buf;
}

// Full content to a temp file, then rename: concurrent writers never
// interleave inside one output file.
void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() +
                  ": " + ec.message());
}

constexpr const char* kCsvHeader =
    "scheme,system_age,reliability,bound,mc_estimate,mc_ci_low,mc_ci_high\n";

std::string curve_csv(const std::vector<CurveRecord>& records) {
  std::ostringstream os;
  os << kCsvHeader;
  for (const CurveRecord& r : records) {
    os << r.scheme << ',' << r.system_age << ',';
    if (r.has_solver)
      os << fmt_sci(r.reliability) << ',' << fmt_sci(r.bound) << ',';
    else
      os << ",,";
    if (r.has_mc)
      os << fmt_sci(r.mc_estimate) << ',' << fmt_sci(r.mc_ci_low) << ','
         << fmt_sci(r.mc_ci_high);
    else
      os << ",,";
    os << '\n';
  }
  return os.str();
}

// Solves one placement and attaches the optional simulator cross-check.
// No file output here; failures are captured, not thrown.
SchemeOutcome solve_scheme(const ScenarioSpec& spec,
                           const Placement& placement) {
  SchemeOutcome out;
  out.label = placement.label;
  const auto start = Clock::now();
  try {
    const ArrayConfigd cfg = spec.array_config(placement);
    cfg.validate();
    out.config_digest = cfg.digest();

    if (spec.horizon == 0) {
      out.records.push_back({out.label, 0, 1.0, 0.0});
      out.final_reliability = 1.0;
      out.final_bound = 0.0;
      out.ok = true;
      out.wall_ms = ms_since(start);
      return out;
    }

    const SolverSettingsd settings = spec.solver_settings();
    const std::int64_t stride = spec.effective_stride();
    const ReliabilityCurved curve =
        (settings.state_cap >= 0 || settings.adaptive_cap)
            ? truncated_solve(cfg, settings, spec.horizon, stride)
            : solve(cfg, settings, spec.horizon, stride);

    out.records.reserve(curve.samples.size());
    for (const auto& s : curve.samples)
      out.records.push_back(
          {out.label, s.system_age, s.reliability, s.bound});

    if (spec.mc_runs > 0) {
      std::vector<std::int64_t> ages;
      ages.reserve(out.records.size());
      for (const auto& r : out.records) ages.push_back(r.system_age);
      const SimResultd sim = estimate_reliability(
          cfg, spec.horizon, spec.mc_runs, ages, spec.mc_seed);
      for (std::size_t i = 0; i < out.records.size(); ++i) {
        out.records[i].has_mc = true;
        out.records[i].mc_estimate = sim.estimate[i];
        out.records[i].mc_ci_low = sim.ci_low[i];
        out.records[i].mc_ci_high = sim.ci_high[i];
      }
    }

    out.final_reliability = out.records.back().reliability;
    out.final_bound = out.records.back().bound;
    out.final_cap = curve.meta.final_cap;
    out.exact_interval_means = curve.meta.exact_interval_means;
    out.budget_warning = curve.meta.budget_warning;
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.wall_ms = ms_since(start);
  return out;
}

// Simulator-only counterpart of solve_scheme: Monte Carlo estimates on the
// stride grid, solver columns left empty.
SchemeOutcome mc_scheme(const ScenarioSpec& spec, const Placement& placement) {
  SchemeOutcome out;
  out.label = placement.label;
  out.mc_only = true;
  const auto start = Clock::now();
  try {
    const ArrayConfigd cfg = spec.array_config(placement);
    cfg.validate();
    out.config_digest = cfg.digest();

    std::vector<std::int64_t> ages{0};
    const std::int64_t stride = spec.effective_stride();
    for (std::int64_t t = stride; t < spec.horizon; t += stride)
      ages.push_back(t);
    if (spec.horizon > 0) ages.push_back(spec.horizon);

    const SimResultd sim = estimate_reliability(
        cfg, spec.horizon, spec.mc_runs, ages, spec.mc_seed);
    out.records.reserve(ages.size());
    for (std::size_t i = 0; i < ages.size(); ++i) {
      CurveRecord r;
      r.scheme = out.label;
      r.system_age = ages[i];
      r.has_solver = false;
      r.has_mc = true;
      r.mc_estimate = sim.estimate[i];
      r.mc_ci_low = sim.ci_low[i];
      r.mc_ci_high = sim.ci_high[i];
      out.records.push_back(std::move(r));
    }
    out.final_reliability = out.records.back().mc_estimate;
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.wall_ms = ms_since(start);
  return out;
}

json settings_json(const ScenarioSpec& spec) {
  json j;
  j["array"] = {{"n", spec.data_drives},
                {"blocks", spec.blocks_per_drive},
                {"stripes", spec.effective_stripes()},
                {"erasure_limit", spec.erasure_limit},
                {"placements", spec.placement_tokens}};
  j["rate"] = {{"c", spec.rate_constant},
               {"alpha", spec.shape},
               {"mu", spec.recovery_rate},
               {"erase_interval", spec.erase_interval}};
  json cap;
  if (spec.cap_mode == CapMode::full)
    cap = "full";
  else if (spec.cap_mode == CapMode::automatic)
    cap = "auto";
  else
    cap = spec.state_cap;
  j["solver"] = {{"step_size", spec.effective_step()},
                 {"epsilon", spec.epsilon},
                 {"state_cap", cap}};
  j["run"] = {{"horizon", spec.horizon},
              {"stride", spec.effective_stride()}};
  if (spec.mc_runs > 0)
    j["mc"] = {{"runs", spec.mc_runs},
               {"seed", spec.mc_seed},
               {"rng", kRngId}};
  return j;
}

json scheme_json(const SchemeOutcome& s) {
  json j;
  j["label"] = s.label;
  j["status"] = s.ok ? "ok" : "failed";
  if (!s.ok) j["error"] = s.error;
  if (!s.csv_path.empty()) j["csv"] = fs::path(s.csv_path).filename().string();
  j["config_digest"] = digest_hex(s.config_digest);
  if (s.ok) {
    j["final_reliability"] = s.final_reliability;
    if (!s.mc_only) {
      j["final_bound"] = s.final_bound;
      j["state_cap_final"] = s.final_cap;
      // Interval rate means are exact closed forms for the quadratic wear
      // law; other exponents fall back to sampled means.
      j["rate_means"] = s.exact_interval_means ? "exact" : "sampled";
      j["error_budget_exceeded"] = s.budget_warning;
    }
  }
  j["wall_ms"] = s.wall_ms;
  return j;
}

constexpr const char* kSamplingNote =
    "reliability sampled every run.stride periods plus the horizon; sweep "
    "probe ages default to drive-replacement epochs";

template <typename SchemeRunner>
ScenarioResult run_scenario_impl(const ScenarioSpec& spec,
                                 const std::string& out_dir,
                                 bool write_manifest, const char* mode,
                                 SchemeRunner&& runner) {
  const auto start = Clock::now();
  ScenarioResult res;
  res.scenario = spec.name;

  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  }

  for (const Placement& placement : spec.placements) {
    SchemeOutcome out = runner(spec, placement);
    if (out.ok && !out_dir.empty()) {
      const fs::path path =
          fs::path(out_dir) / (spec.name + "__" + out.label + ".csv");
      write_atomic(path, curve_csv(out.records));
      out.csv_path = path.string();
    }
    if (!out.ok) res.partial = true;
    res.schemes.push_back(std::move(out));
  }
  res.wall_ms = ms_since(start);

  if (write_manifest && !out_dir.empty()) {
    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["scenario"] = spec.name;
    manifest["mode"] = mode;
    manifest["settings"] = settings_json(spec);
    manifest["sampling_note"] = kSamplingNote;
    manifest["schemes"] = json::array();
    for (const SchemeOutcome& s : res.schemes)
      manifest["schemes"].push_back(scheme_json(s));
    manifest["partial"] = res.partial;
    manifest["wall_ms"] = res.wall_ms;
    const fs::path path = fs::path(out_dir) / (spec.name + "__manifest.json");
    write_atomic(path, manifest.dump(2) + "\n");
    res.manifest_path = path.string();
  }
  return res;
}

std::string axis_tag(const std::string& axis, double value) {
  if (axis == "N" || axis == "M")
    return axis + std::to_string(static_cast<std::int64_t>(value));
  return "c" + fmt_compact(value);
}

}  // namespace

ScenarioResult run_scenario(const ScenarioSpec& spec,
                            const std::string& out_dir) {
  return run_scenario_impl(spec, out_dir, true, "solve", solve_scheme);
}

ScenarioResult run_mc_only(const ScenarioSpec& spec,
                           const std::string& out_dir) {
  if (spec.mc_runs < 1)
    throw ScenarioError("scenario '" + spec.name +
                        "': mc.runs must be >= 1 for simulator-only runs");
  return run_scenario_impl(spec, out_dir, true, "mc_only", mc_scheme);
}

std::vector<std::int64_t> replacement_epochs(const ArrayConfigd& cfg,
                                             std::int64_t horizon) {
  cfg.validate();
  std::vector<std::int64_t> out;
  if (horizon < 1) return out;
  const auto prof = aging_profile(cfg);
  const auto sched = make_wear_schedule(cfg, prof, horizon);
  for (std::size_t i = 1; i < sched.segments.size(); ++i)
    out.push_back(sched.segments[i].begin);
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

ScenarioSpec apply_axis(const ScenarioSpec& base, const std::string& axis,
                        double value) {
  ScenarioSpec spec = base;
  spec.sweep_axis.clear();
  spec.sweep_values.clear();
  spec.probe_ages.clear();
  if (axis == "N") {
    spec.data_drives = static_cast<int>(value);
    spec.placements.clear();
    for (const std::string& token : spec.placement_tokens)
      spec.placements.push_back(
          make_placement(token, spec.data_drives, spec.explicit_scheme));
  } else if (axis == "ecc_c") {
    spec.rate_constant = value;
  } else if (axis == "M") {
    // The solve-interval default (one twentieth of a lifetime) follows the
    // new limit automatically unless solver.step_size was set explicitly.
    spec.erasure_limit = static_cast<std::int64_t>(value);
  } else {
    throw ScenarioError("unknown sweep axis '" + axis + "'");
  }
  return spec;
}

SweepResult run_sweep(const ScenarioSpec& base, const std::string& out_dir) {
  const auto start = Clock::now();
  if (base.sweep_axis.empty())
    throw ScenarioError("scenario '" + base.name + "' has no sweep axis");
  if (base.placements.empty())
    throw ScenarioError("scenario '" + base.name + "' has no placements");

  SweepResult res;
  res.scenario = base.name;
  res.axis = base.sweep_axis;

  res.probe_ages = base.probe_ages;
  bool default_probes = false;
  if (res.probe_ages.empty()) {
    res.probe_ages =
        replacement_epochs(base.array_config(base.placements[0]), base.horizon);
    default_probes = true;
  }

  for (double value : base.sweep_values) {
    ScenarioSpec spec = apply_axis(base, base.sweep_axis, value);
    spec.name = base.name + "__" + axis_tag(base.sweep_axis, value);
    SweepPoint point;
    point.value = value;
    point.result = run_scenario_impl(spec, out_dir, false, "solve",
                                     solve_scheme);
    if (point.result.partial) res.partial = true;
    res.points.push_back(std::move(point));
  }

  // Comparison table: every curve probed at the shared age grid. Probes snap
  // to the nearest sampled age, identical across points by construction.
  std::ostringstream table;
  table << "axis,value,scheme,system_age,reliability,bound\n";
  for (const SweepPoint& point : res.points) {
    for (const SchemeOutcome& s : point.result.schemes) {
      if (!s.ok) continue;
      for (std::int64_t probe : res.probe_ages) {
        const auto& rec = s.records;
        auto it = std::lower_bound(
            rec.begin(), rec.end(), probe,
            [](const CurveRecord& r, std::int64_t v) {
              return r.system_age < v;
            });
        if (it == rec.end()) {
          --it;
        } else if (it != rec.begin()) {
          auto prev = std::prev(it);
          if (probe - prev->system_age <= it->system_age - probe) it = prev;
        }
        table << res.axis << ',' << fmt_compact(point.value) << ','
              << s.label << ',' << it->system_age << ','
              << fmt_sci(it->reliability) << ',' << fmt_sci(it->bound)
              << '\n';
      }
    }
  }
  res.wall_ms = ms_since(start);

  if (!out_dir.empty()) {
    const fs::path table_path =
        fs::path(out_dir) / (base.name + "__table.csv");
    write_atomic(table_path, table.str());
    res.table_path = table_path.string();

    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["scenario"] = base.name;
    manifest["sweep"] = {{"axis", res.axis},
                         {"values", base.sweep_values},
                         {"probe_ages", res.probe_ages},
                         {"probe_ages_defaulted", default_probes}};
    manifest["settings"] = settings_json(base);
    manifest["sampling_note"] = kSamplingNote;
    manifest["points"] = json::array();
    for (const SweepPoint& point : res.points) {
      json pj;
      pj["value"] = point.value;
      pj["schemes"] = json::array();
      for (const SchemeOutcome& s : point.result.schemes)
        pj["schemes"].push_back(scheme_json(s));
      manifest["points"].push_back(std::move(pj));
    }
    manifest["table"] = table_path.filename().string();
    manifest["partial"] = res.partial;
    manifest["wall_ms"] = res.wall_ms;
    const fs::path mpath =
        fs::path(out_dir) / (base.name + "__manifest.json");
    write_atomic(mpath, manifest.dump(2) + "\n");
    res.manifest_path = mpath.string();
  }
  return res;
}

}  // namespace ssdraid
