#include "ssdraid/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ssdraid {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Parse context for error messages: source name, current line, scenario.
struct Ctx {
  const std::string& origin;
  int line = 0;
  std::string scenario;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << origin << ':' << line << ": ";
    if (!scenario.empty()) os << "scenario '" << scenario << "': ";
    os << what;
    throw ScenarioError(os.str());
  }
};

double parse_double(const std::string& v, const char* key, const Ctx& ctx) {
  const char* s = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(x))
    ctx.fail(std::string(key) + ": expected a number, got '" + v + "'");
  return x;
}

std::int64_t parse_int(const std::string& v, const char* key, const Ctx& ctx) {
  const char* s = v.c_str();
  char* end = nullptr;
  errno = 0;
  const long long n = std::strtoll(s, &end, 10);
  if (end != s && *end == '\0' && errno == 0) return n;
  // Large counts are often written in scientific notation; accept them
  // when the value is exactly integral.
  const double x = parse_double(v, key, ctx);
  if (std::floor(x) != x || std::abs(x) > 9.0e15)
    ctx.fail(std::string(key) + ": expected an integer, got '" + v + "'");
  return static_cast<std::int64_t>(x);
}

std::uint64_t parse_uint(const std::string& v, const char* key,
                         const Ctx& ctx) {
  const char* s = v.c_str();
  char* end = nullptr;
  errno = 0;
  const unsigned long long n = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0' || errno != 0 || (!v.empty() && v[0] == '-'))
    ctx.fail(std::string(key) + ": expected an unsigned integer, got '" + v +
             "'");
  return n;
}

// Splits on commas that sit outside [...] brackets.
std::vector<std::string> split_outside_brackets(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : v) {
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

// Splits a plain list on commas and/or whitespace.
std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : v) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string format_width(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", w);
  return buf;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' &&
        ch != '-' && ch != '.')
      return false;
  }
  return true;
}

Placement placement_from(const std::string& token, int data_drives,
                         Scheme explicit_scheme, const Ctx& ctx) {
  const int drives = data_drives + 1;
  if (token == "raid5") {
    return {"raid5", Scheme::traditional, even_parity<double>(data_drives)};
  }
  const std::string sig = "diffraid_sigma:";
  if (token.rfind(sig, 0) == 0) {
    const std::string rest = trim(token.substr(sig.size()));
    const double w = parse_double(rest, "array.parity", ctx);
    if (!(w > 0)) ctx.fail("array.parity: sigma must be > 0 in '" + token + "'");
    return {"diffraid_sigma" + format_width(w), Scheme::diffraid,
            truncated_normal_parity<double>(data_drives, w)};
  }
  const std::string exp = "explicit:";
  if (token.rfind(exp, 0) == 0) {
    std::string rest = trim(token.substr(exp.size()));
    if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']')
      ctx.fail("array.parity: explicit placement needs [p0 p1 ...], got '" +
               token + "'");
    rest = rest.substr(1, rest.size() - 2);
    const auto items = split_list(rest);
    if (static_cast<int>(items.size()) != drives)
      ctx.fail("array.parity: explicit placement has " +
               std::to_string(items.size()) + " entries, need one per drive (" +
               std::to_string(drives) + ")");
    Eigen::VectorXd p(drives);
    for (std::size_t i = 0; i < items.size(); ++i)
      p[static_cast<Eigen::Index>(i)] =
          parse_double(items[i], "array.parity", ctx);
    return {std::string(scheme_name(explicit_scheme)) + "_explicit",
            explicit_scheme, std::move(p)};
  }
  ctx.fail("array.parity: unknown placement '" + token +
           "' (expected raid5, diffraid_sigma:<w>, or explicit:[...])");
}

// Everything read for one scenario before defaults are resolved.
struct Draft {
  ScenarioSpec spec;
  std::set<std::string> seen;
  std::vector<std::string> parity_tokens;
  int header_line = 0;
};

void apply_key(Draft& d, const std::string& key, const std::string& value,
               const Ctx& ctx) {
  if (!d.seen.insert(key).second)
    ctx.fail("duplicate key '" + key + "'");
  ScenarioSpec& sp = d.spec;

  if (key == "array.n") {
    sp.data_drives = static_cast<int>(parse_int(value, "array.n", ctx));
    if (sp.data_drives < 1) ctx.fail("array.n: must be >= 1");
  } else if (key == "array.blocks") {
    sp.blocks_per_drive = parse_int(value, "array.blocks", ctx);
    if (sp.blocks_per_drive < 1) ctx.fail("array.blocks: must be >= 1");
  } else if (key == "array.stripes") {
    sp.stripes = parse_int(value, "array.stripes", ctx);
    if (sp.stripes < 1) ctx.fail("array.stripes: must be >= 1");
  } else if (key == "array.erasure_limit") {
    sp.erasure_limit = parse_int(value, "array.erasure_limit", ctx);
    if (sp.erasure_limit < 1) ctx.fail("array.erasure_limit: must be >= 1");
  } else if (key == "array.scheme") {
    if (value == "raid5" || value == "traditional")
      sp.explicit_scheme = Scheme::traditional;
    else if (value == "diffraid")
      sp.explicit_scheme = Scheme::diffraid;
    else
      ctx.fail("array.scheme: expected raid5, traditional, or diffraid, got '" +
               value + "'");
  } else if (key == "array.parity") {
    d.parity_tokens = split_outside_brackets(value);
    for (const auto& t : d.parity_tokens)
      if (t.empty()) ctx.fail("array.parity: empty placement entry");
  } else if (key == "rate.c") {
    sp.rate_constant = parse_double(value, "rate.c", ctx);
    if (sp.rate_constant < 0) ctx.fail("rate.c: must be >= 0");
  } else if (key == "rate.alpha") {
    sp.shape = parse_double(value, "rate.alpha", ctx);
    if (!(sp.shape > 0)) ctx.fail("rate.alpha: must be > 0");
  } else if (key == "rate.mu") {
    sp.recovery_rate = parse_double(value, "rate.mu", ctx);
    if (sp.recovery_rate < 0) ctx.fail("rate.mu: must be >= 0");
  } else if (key == "rate.erase_interval") {
    sp.erase_interval = parse_double(value, "rate.erase_interval", ctx);
    if (!(sp.erase_interval > 0)) ctx.fail("rate.erase_interval: must be > 0");
  } else if (key == "solver.step_size") {
    sp.step_size = parse_int(value, "solver.step_size", ctx);
    if (sp.step_size < 1) ctx.fail("solver.step_size: must be >= 1");
  } else if (key == "solver.epsilon") {
    sp.epsilon = parse_double(value, "solver.epsilon", ctx);
    if (!(sp.epsilon > 0 && sp.epsilon < 1))
      ctx.fail("solver.epsilon: must be in (0, 1)");
  } else if (key == "solver.state_cap") {
    if (value == "full") {
      sp.cap_mode = CapMode::full;
    } else if (value == "auto") {
      sp.cap_mode = CapMode::automatic;
    } else {
      sp.cap_mode = CapMode::fixed;
      sp.state_cap = parse_int(value, "solver.state_cap", ctx);
      if (sp.state_cap < 1)
        ctx.fail("solver.state_cap: must be >= 1, auto, or full");
    }
  } else if (key == "run.horizon") {
    sp.horizon = parse_int(value, "run.horizon", ctx);
    if (sp.horizon < 0) ctx.fail("run.horizon: must be >= 0");
  } else if (key == "run.stride") {
    sp.stride = parse_int(value, "run.stride", ctx);
    if (sp.stride < 1) ctx.fail("run.stride: must be >= 1");
  } else if (key == "mc.runs") {
    sp.mc_runs = parse_int(value, "mc.runs", ctx);
    if (sp.mc_runs < 0) ctx.fail("mc.runs: must be >= 0");
  } else if (key == "mc.seed") {
    sp.mc_seed = parse_uint(value, "mc.seed", ctx);
  } else if (key == "sweep.axis") {
    if (value != "N" && value != "ecc_c" && value != "M")
      ctx.fail("sweep.axis: expected N, ecc_c, or M, got '" + value + "'");
    sp.sweep_axis = value;
  } else if (key == "sweep.values") {
    for (const auto& item : split_list(value))
      sp.sweep_values.push_back(parse_double(item, "sweep.values", ctx));
    if (sp.sweep_values.empty()) ctx.fail("sweep.values: empty list");
  } else if (key == "sweep.probe_ages") {
    for (const auto& item : split_list(value)) {
      const std::int64_t age = parse_int(item, "sweep.probe_ages", ctx);
      if (age < 0) ctx.fail("sweep.probe_ages: ages must be >= 0");
      sp.probe_ages.push_back(age);
    }
    if (sp.probe_ages.empty()) ctx.fail("sweep.probe_ages: empty list");
  } else {
    ctx.fail("unknown key '" + key + "'");
  }
}

void finalize(Draft& d, Ctx ctx) {
  ctx.line = d.header_line;
  ctx.scenario = d.spec.name;
  ScenarioSpec& sp = d.spec;

  if (sp.horizon < 0) ctx.fail("run.horizon is required");

  if (d.parity_tokens.empty()) d.parity_tokens = {"raid5"};
  sp.placement_tokens = d.parity_tokens;
  for (const auto& token : d.parity_tokens)
    sp.placements.push_back(
        placement_from(token, sp.data_drives, sp.explicit_scheme, ctx));
  std::set<std::string> labels;
  for (const auto& p : sp.placements)
    if (!labels.insert(p.label).second)
      ctx.fail("array.parity: duplicate placement '" + p.label + "'");

  for (const auto& p : sp.placements) {
    try {
      sp.array_config(p).validate();
    } catch (const std::exception& e) {
      ctx.fail("placement '" + p.label + "': " + e.what());
    }
  }
  try {
    sp.solver_settings().validate();
  } catch (const std::exception& e) {
    ctx.fail(std::string("solver settings: ") + e.what());
  }
  if (sp.cap_mode == CapMode::fixed && sp.state_cap >= sp.effective_stripes())
    ctx.fail("solver.state_cap: must be below the stripe count");

  if (!sp.sweep_axis.empty() && sp.sweep_values.empty())
    ctx.fail("sweep.values is required when sweep.axis is set");
  if (sp.sweep_axis.empty() && !sp.sweep_values.empty())
    ctx.fail("sweep.values given without sweep.axis");
  if (sp.sweep_axis == "N" || sp.sweep_axis == "M") {
    for (double v : sp.sweep_values)
      if (!(v >= 1) || std::floor(v) != v)
        ctx.fail("sweep.values: axis " + sp.sweep_axis +
                 " needs positive integers");
  } else if (sp.sweep_axis == "ecc_c") {
    for (double v : sp.sweep_values)
      if (!(v > 0)) ctx.fail("sweep.values: axis ecc_c needs values > 0");
  }
  for (std::int64_t age : sp.probe_ages)
    if (age > sp.horizon)
      ctx.fail("sweep.probe_ages: age " + std::to_string(age) +
               " is past the horizon");
}

}  // namespace

ArrayConfigd ScenarioSpec::array_config(const Placement& placement) const {
  ArrayConfigd cfg;
  cfg.data_drives = data_drives;
  cfg.blocks_per_drive = blocks_per_drive;
  cfg.stripes = effective_stripes();
  cfg.erasure_limit = erasure_limit;
  cfg.scheme = placement.scheme;
  cfg.parity_fractions = placement.parity;
  cfg.rate_constant = rate_constant;
  cfg.shape = shape;
  cfg.recovery_rate = recovery_rate;
  cfg.erase_interval = erase_interval;
  return cfg;
}

SolverSettingsd ScenarioSpec::solver_settings() const {
  SolverSettingsd s;
  s.step_size = effective_step();
  s.max_error = epsilon;
  if (cap_mode == CapMode::fixed)
    s.state_cap = state_cap;
  else if (cap_mode == CapMode::automatic)
    s.adaptive_cap = true;
  return s;
}

std::vector<ScenarioSpec> parse_scenarios(const std::string& text,
                                          const std::string& origin) {
  std::vector<ScenarioSpec> specs;
  std::set<std::string> names;
  Ctx ctx{origin};
  Draft draft;
  bool open = false;

  auto close = [&] {
    if (!open) return;
    finalize(draft, ctx);
    specs.push_back(std::move(draft.spec));
    draft = Draft{};
    open = false;
  };

  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    ++ctx.line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("unterminated section header");
      const std::string inner = trim(line.substr(1, line.size() - 2));
      const std::string tag = "scenario";
      if (inner.rfind(tag, 0) != 0)
        ctx.fail("expected [scenario <name>], got '" + line + "'");
      const std::string name = trim(inner.substr(tag.size()));
      if (!valid_name(name))
        ctx.fail("scenario name must be non-empty and use only letters, "
                 "digits, '_', '-', '.'");
      close();
      if (!names.insert(name).second)
        ctx.fail("duplicate scenario name '" + name + "'");
      ctx.scenario = name;
      draft.spec.name = name;
      draft.header_line = ctx.line;
      open = true;
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      ctx.fail("expected 'key = value' or a [scenario ...] header");
    if (!open) ctx.fail("key outside any [scenario ...] section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) ctx.fail("empty key");
    if (value.empty()) ctx.fail("key '" + key + "' has an empty value");
    apply_key(draft, key, value, ctx);
  }
  close();
  return specs;
}

std::vector<ScenarioSpec> load_scenarios(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenarios(buf.str(), path);
}

Placement make_placement(const std::string& token, int data_drives,
                         Scheme explicit_scheme) {
  Ctx ctx{token, 0, ""};
  return placement_from(trim(token), data_drives, explicit_scheme, ctx);
}

}  // namespace ssdraid
