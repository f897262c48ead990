#pragma once

// Run configuration: one JSON file per run. Parse errors report line and column,
// semantic errors the dotted field path. Unknown keys are rejected so typos surface.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../errors.hpp"
#include "../expression.hpp"
#include "../kinetics.hpp"
#include "../signals.hpp"
#include "../spectral.hpp"
#include "../stability.hpp"

namespace swtaxis::cli {

using nlohmann::json;

struct Constants {
  double mu = 1.0, mu1 = 1.0, mu2 = 1.0, nu = 1.0, kappa1 = 1.0, kappa2 = 1.0;
  double delta1 = 1e-3, delta2 = 1e-6;  // slow-system diffusions used by the stability module

  // name -> member, in a fixed order for serialization and overrides
  template <class Self, class Fn>
  static void each(Self& c, Fn&& fn) {
    fn("mu", c.mu);
    fn("mu1", c.mu1);
    fn("mu2", c.mu2);
    fn("nu", c.nu);
    fn("kappa1", c.kappa1);
    fn("kappa2", c.kappa2);
    fn("delta1", c.delta1);
    fn("delta2", c.delta2);
  }
};

struct ProfileConfig {
  std::vector<std::array<double, 3>> harmonics;  // (m, cos, sin)
  std::string file;                              // tabulated samples instead
};

struct SignalConfig {
  std::string kind = "none";  // none | stationary | traveling | general
  int n = 1;
  std::vector<double> periods;
  std::vector<ProfileConfig> profiles;
  std::vector<double> amplitudes;
  std::vector<double> speeds;
  std::string field_file;
};

struct KineticsConfig {
  std::string preset = "lotka-volterra";  // lotka-volterra | ratio-dependent | custom
  double beta = 2.0, alpha = 1.0, a = 1.0;
  std::string f, g;
  std::map<std::string, double> constants;
};

// Either an explicit list or {from, to, count[, log]}.
struct Grid {
  std::vector<double> values;
  bool empty() const { return values.empty(); }
};

struct FastConfig {
  int modes = 64, time_modes = 64, profile_modes = 256;
};

struct SolverConfig {
  double tolerance = 1e-10;
  int restart = 60, max_iterations = 3000, dense_limit = 512;
};

struct DomainConfig {
  std::vector<double> length{20 * std::numbers::pi};
  std::vector<int> points{256};
  std::string p = "p_e*(1 + 0.1*cos(x/10))", q = "q_e", s = "s_e + 0.1*sin(x/10)";
};

struct RunConfig {
  std::filesystem::path base_dir = ".";
  SignalConfig signal;
  KineticsConfig kinetics;
  Constants constants;
  FastConfig fast;
  SolverConfig solver;
  std::vector<double> cell_ubar;
  Grid drift_ubar, drift_omega;
  bool drift_numeric = true;
  std::vector<double> tensor_ubar;
  Grid stability_k{log_grid(1e-2, 1e2, 200)};
  int directions = 48;
  Grid neutral_k{log_grid(1e-2, 1e2, 200)};
  std::vector<double> neutral_c{0.0, 0.01, 0.02, 0.05};
  std::string slice = "kappa1";  // kappa1 | a12 | none
  Grid neutral_speeds;
  DomainConfig domain;
  std::string sim_mode = "slow";
  double horizon = 5.0, dt = 0.01, delta = 0.1;
  int points_per_cell = 32, snapshots = 10;
  std::vector<double> deltas{0.1, 0.05, 0.025};
  double dt_full = 2e-3;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;  // environment overrides applied
};

namespace detail {

inline std::string join_path(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

[[noreturn]] inline void field_error(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

// Object reader that remembers consumed keys.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) field_error(path_.empty() ? "<root>" : path_, "expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) field_error(join_path(path_, it.key()), "unknown key");
  }

  bool has(const std::string& k) {
    used_.insert(k);
    return j_.contains(k);
  }
  const json& at(const std::string& k) {
    used_.insert(k);
    return j_.at(k);
  }
  std::string path(const std::string& k) const { return join_path(path_, k); }

  void num(const std::string& k, double& out, bool positive = false, bool nonnegative = false) {
    if (!has(k)) return;
    const json& v = at(k);
    if (!v.is_number()) field_error(path(k), "expected a number");
    out = v.get<double>();
    if (positive && !(out > 0.0)) field_error(path(k), "must be positive");
    if (nonnegative && !(out >= 0.0)) field_error(path(k), "must be nonnegative");
  }
  void integer(const std::string& k, int& out, int min_value) {
    if (!has(k)) return;
    const json& v = at(k);
    if (!v.is_number_integer()) field_error(path(k), "expected an integer");
    out = v.get<int>();
    if (out < min_value) field_error(path(k), "must be at least " + std::to_string(min_value));
  }
  void str(const std::string& k, std::string& out, const std::vector<std::string>& allowed = {}) {
    if (!has(k)) return;
    const json& v = at(k);
    if (!v.is_string()) field_error(path(k), "expected a string");
    out = v.get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), out) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      field_error(path(k), "must be one of " + list);
    }
  }
  void numbers(const std::string& k, std::vector<double>& out) {
    if (!has(k)) return;
    out = number_list(at(k), path(k));
  }
  void grid(const std::string& k, Grid& out) {
    if (!has(k)) return;
    const json& v = at(k);
    if (v.is_array()) {
      out.values = number_list(v, path(k));
      return;
    }
    Reader r(v, path(k));
    double from = 0, to = 0;
    int count = 0;
    bool log = false;
    if (!r.has("from") || !r.has("to") || !r.has("count")) field_error(path(k), "grid needs from, to and count");
    r.num("from", from);
    r.num("to", to);
    r.integer("count", count, 2);
    if (r.has("log")) {
      if (!r.at("log").is_boolean()) field_error(r.path("log"), "expected true or false");
      log = r.at("log").get<bool>();
    }
    if (!(to > from)) field_error(path(k), "needs to > from");
    if (log) {
      if (!(from > 0)) field_error(path(k), "log grid needs from > 0");
      out.values = log_grid(from, to, count);
    } else {
      out.values.clear();
      for (int i = 0; i < count; ++i) out.values.push_back(from + (to - from) * i / (count - 1));
    }
  }

  static std::vector<double> number_list(const json& v, const std::string& path) {
    if (!v.is_array()) field_error(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) field_error(path + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline void line_column(const std::string& text, std::size_t byte, int& line, int& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

inline RunConfig parse_config(const json& root, const std::filesystem::path& base_dir = ".") {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  detail::Reader r(root, "");
  if (r.has("signal")) {
    detail::Reader s(r.at("signal"), "signal");
    auto& sc = cfg.signal;
    s.str("kind", sc.kind, {"none", "stationary", "traveling", "general"});
    s.integer("n", sc.n, 1);
    if (sc.n > 3) detail::field_error("signal.n", "must be 1, 2 or 3");
    s.numbers("periods", sc.periods);
    s.numbers("amplitudes", sc.amplitudes);
    s.numbers("speeds", sc.speeds);
    s.str("field_file", sc.field_file);
    if (s.has("profiles")) {
      const json& ps = s.at("profiles");
      if (!ps.is_array()) detail::field_error("signal.profiles", "expected an array");
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::string path = "signal.profiles[" + std::to_string(i) + "]";
        ProfileConfig pc;
        if (ps[i].is_string() && ps[i].get<std::string>() == "cosine") {
          pc.harmonics = {{1.0, 1.0, 0.0}};
        } else {
          detail::Reader pr(ps[i], path);
          pr.str("file", pc.file);
          if (pr.has("harmonics")) {
            const json& hs = pr.at("harmonics");
            if (!hs.is_array()) detail::field_error(path + ".harmonics", "expected an array of [m, cos, sin]");
            for (std::size_t k = 0; k < hs.size(); ++k) {
              const auto v = detail::Reader::number_list(hs[k], path + ".harmonics[" + std::to_string(k) + "]");
              if (v.size() != 3 || v[0] < 1 || v[0] != std::floor(v[0]))
                detail::field_error(path + ".harmonics[" + std::to_string(k) + "]", "expected [m >= 1, cos, sin]");
              pc.harmonics.push_back({v[0], v[1], v[2]});
            }
          }
          if (pc.file.empty() == pc.harmonics.empty()) detail::field_error(path, "give either harmonics or file");
        }
        sc.profiles.push_back(pc);
      }
    }
    for (double p : sc.periods)
      if (!(p > 0.0)) detail::field_error("signal.periods", "must be positive");
    for (double a : sc.amplitudes)
      if (!(a >= 0.0)) detail::field_error("signal.amplitudes", "must be nonnegative");
  }
  if (r.has("kinetics")) {
    detail::Reader k(r.at("kinetics"), "kinetics");
    auto& kc = cfg.kinetics;
    k.str("preset", kc.preset, {"lotka-volterra", "ratio-dependent", "custom"});
    k.num("beta", kc.beta, true);
    k.num("alpha", kc.alpha, true);
    k.num("a", kc.a, true);
    k.str("f", kc.f);
    k.str("g", kc.g);
    if (k.has("constants")) {
      detail::Reader c(k.at("constants"), "kinetics.constants");
      for (auto it = k.at("constants").begin(); it != k.at("constants").end(); ++it) {
        double v = 0.0;
        c.num(it.key(), v);
        kc.constants[it.key()] = v;
      }
    }
    if (kc.preset == "custom" && (kc.f.empty() || kc.g.empty()))
      detail::field_error("kinetics", "custom kinetics needs f and g expressions");
  }
  if (r.has("constants")) {
    detail::Reader c(r.at("constants"), "constants");
    Constants::each(cfg.constants, [&](const char* name, double& v) {
      const std::string n = name;
      c.num(n, v, n != "delta1" && n != "delta2", true);
    });
  }
  if (r.has("fast")) {
    detail::Reader f(r.at("fast"), "fast");
    f.integer("modes", cfg.fast.modes, 8);
    f.integer("time_modes", cfg.fast.time_modes, 8);
    f.integer("profile_modes", cfg.fast.profile_modes, 8);
  }
  if (r.has("solver")) {
    detail::Reader s(r.at("solver"), "solver");
    s.num("tolerance", cfg.solver.tolerance, true);
    s.integer("restart", cfg.solver.restart, 1);
    s.integer("max_iterations", cfg.solver.max_iterations, 1);
    s.integer("dense_limit", cfg.solver.dense_limit, 0);
  }
  if (r.has("cell")) {
    detail::Reader c(r.at("cell"), "cell");
    c.numbers("ubar", cfg.cell_ubar);
  }
  if (r.has("drift")) {
    detail::Reader d(r.at("drift"), "drift");
    d.grid("ubar", cfg.drift_ubar);
    d.grid("omega", cfg.drift_omega);
    if (d.has("numeric")) {
      if (!d.at("numeric").is_boolean()) detail::field_error("drift.numeric", "expected true or false");
      cfg.drift_numeric = d.at("numeric").get<bool>();
    }
  }
  if (r.has("tensor")) {
    detail::Reader t(r.at("tensor"), "tensor");
    t.numbers("ubar", cfg.tensor_ubar);
  }
  if (r.has("stability")) {
    detail::Reader s(r.at("stability"), "stability");
    s.grid("k", cfg.stability_k);
    s.integer("directions", cfg.directions, 1);
  }
  if (r.has("neutral")) {
    detail::Reader n(r.at("neutral"), "neutral");
    n.grid("k", cfg.neutral_k);
    n.numbers("c", cfg.neutral_c);
    n.str("slice", cfg.slice, {"kappa1", "a12", "none"});
    n.grid("speeds", cfg.neutral_speeds);
    for (double c : cfg.neutral_c)
      if (!(c >= 0.0)) detail::field_error("neutral.c", "must be nonnegative");
  }
  if (r.has("simulate")) {
    detail::Reader s(r.at("simulate"), "simulate");
    s.str("mode", cfg.sim_mode, {"slow", "full"});
    s.num("horizon", cfg.horizon, true);
    s.num("dt", cfg.dt, true);
    s.num("delta", cfg.delta, true);
    s.integer("points_per_cell", cfg.points_per_cell, 8);
    s.integer("snapshots", cfg.snapshots, 1);
    s.numbers("length", cfg.domain.length);
    if (s.has("points")) {
      cfg.domain.points.clear();
      for (double v : detail::Reader::number_list(s.at("points"), "simulate.points")) {
        if (v < 8 || v != std::floor(v)) detail::field_error("simulate.points", "expected integers >= 8");
        cfg.domain.points.push_back(static_cast<int>(v));
      }
    }
    if (s.has("initial")) {
      detail::Reader i(s.at("initial"), "simulate.initial");
      i.str("p", cfg.domain.p);
      i.str("q", cfg.domain.q);
      i.str("s", cfg.domain.s);
    }
    for (double l : cfg.domain.length)
      if (!(l > 0.0)) detail::field_error("simulate.length", "must be positive");
  }
  if (r.has("validate")) {
    detail::Reader v(r.at("validate"), "validate");
    v.numbers("deltas", cfg.deltas);
    v.num("dt_full", cfg.dt_full, true);
    for (double d : cfg.deltas)
      if (!(d > 0.0)) detail::field_error("validate.deltas", "must be positive");
    for (std::size_t i = 1; i < cfg.deltas.size(); ++i)
      if (!(cfg.deltas[i] < cfg.deltas[i - 1])) detail::field_error("validate.deltas", "must be strictly decreasing");
  }
  if (r.has("seed")) {
    const json& sd = r.at("seed");
    if (!sd.is_number_integer() || sd.get<long long>() < 0) detail::field_error("seed", "expected a nonnegative integer");
    cfg.seed = r.at("seed").get<std::uint64_t>();
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0, col = 0;
    detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0, line, col);
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
  }
  return parse_config(root, path.parent_path().empty() ? "." : path.parent_path());
}

// SWTAXIS_<NAME> overrides a physical constant, e.g. SWTAXIS_KAPPA1=2.5.
inline void apply_env_overrides(RunConfig& cfg, const std::function<const char*(const char*)>& getenv_fn = std::getenv) {
  Constants::each(cfg.constants, [&](const char* name, double& v) {
    const std::string var = "SWTAXIS_" + detail::upper(name);
    const char* raw = getenv_fn(var.c_str());
    if (!raw) return;
    char* end = nullptr;
    const double x = std::strtod(raw, &end);
    if (end == raw || *end != '\0' || !std::isfinite(x)) throw ConfigError("environment " + var + ": not a number");
    const std::string n = name;
    if (n != "delta1" && n != "delta2" ? !(x > 0.0) : !(x >= 0.0))
      throw ConfigError("environment " + var + ": out of range");
    v = x;
    cfg.overrides.push_back(var + "=" + raw);
  });
}

inline json to_json(const RunConfig& c) {
  json j;
  json sig;
  sig["kind"] = c.signal.kind;
  sig["n"] = c.signal.n;
  sig["periods"] = c.signal.periods;
  sig["amplitudes"] = c.signal.amplitudes;
  sig["speeds"] = c.signal.speeds;
  if (!c.signal.field_file.empty()) sig["field_file"] = c.signal.field_file;
  sig["profiles"] = json::array();
  for (const auto& p : c.signal.profiles) {
    json pj = json::object();
    if (!p.file.empty()) pj["file"] = p.file;
    else pj["harmonics"] = p.harmonics;
    sig["profiles"].push_back(pj);
  }
  j["signal"] = sig;
  json kin;
  kin["preset"] = c.kinetics.preset;
  kin["beta"] = c.kinetics.beta;
  kin["alpha"] = c.kinetics.alpha;
  kin["a"] = c.kinetics.a;
  if (!c.kinetics.f.empty()) kin["f"] = c.kinetics.f;
  if (!c.kinetics.g.empty()) kin["g"] = c.kinetics.g;
  if (!c.kinetics.constants.empty()) kin["constants"] = c.kinetics.constants;
  j["kinetics"] = kin;
  json cons;
  Constants::each(c.constants, [&](const char* name, const double& v) { cons[name] = v; });
  j["constants"] = cons;
  j["fast"] = {{"modes", c.fast.modes}, {"time_modes", c.fast.time_modes}, {"profile_modes", c.fast.profile_modes}};
  j["solver"] = {{"tolerance", c.solver.tolerance},
                 {"restart", c.solver.restart},
                 {"max_iterations", c.solver.max_iterations},
                 {"dense_limit", c.solver.dense_limit}};
  j["cell"] = {{"ubar", c.cell_ubar}};
  j["drift"] = {{"ubar", c.drift_ubar.values}, {"omega", c.drift_omega.values}, {"numeric", c.drift_numeric}};
  j["tensor"] = {{"ubar", c.tensor_ubar}};
  j["stability"] = {{"k", c.stability_k.values}, {"directions", c.directions}};
  j["neutral"] = {{"k", c.neutral_k.values}, {"c", c.neutral_c}, {"slice", c.slice}, {"speeds", c.neutral_speeds.values}};
  j["simulate"] = {{"mode", c.sim_mode},
                   {"horizon", c.horizon},
                   {"dt", c.dt},
                   {"delta", c.delta},
                   {"points_per_cell", c.points_per_cell},
                   {"snapshots", c.snapshots},
                   {"length", c.domain.length},
                   {"points", c.domain.points},
                   {"initial", {{"p", c.domain.p}, {"q", c.domain.q}, {"s", c.domain.s}}}};
  j["validate"] = {{"deltas", c.deltas}, {"dt_full", c.dt_full}};
  j["seed"] = c.seed;
  return j;
}

// 64-bit FNV-1a of the canonical serialization.
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::filesystem::path resolve(const RunConfig& c, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() ? p : c.base_dir / p;
}

inline SignalSpec build_signal(const RunConfig& c) {
  const SignalConfig& sc = c.signal;
  SignalSpec spec;
  spec.n = sc.n;
  for (int i = 0; i < sc.n && i < static_cast<int>(sc.periods.size()); ++i) spec.periods[i] = sc.periods[i];
  if (sc.kind == "none") {
    spec.kind = SignalKind::separable_stationary;
    spec.profiles.assign(static_cast<std::size_t>(sc.n), Profile::cosine());
    spec.amplitudes.assign(static_cast<std::size_t>(sc.n), 0.0);
    return spec;
  }
  if (sc.kind == "general") {
    if (sc.field_file.empty()) detail::field_error("signal.field_file", "general signal needs a tabulated field file");
    spec.kind = SignalKind::general_tabulated;
    spec.field = read_field_csv(resolve(c, sc.field_file).string());
    spec.validate();
    return spec;
  }
  spec.kind = sc.kind == "stationary" ? SignalKind::separable_stationary : SignalKind::separable_traveling;
  if (static_cast<int>(sc.profiles.size()) != sc.n) detail::field_error("signal.profiles", "need one profile per axis");
  if (static_cast<int>(sc.amplitudes.size()) != sc.n) detail::field_error("signal.amplitudes", "need one amplitude per axis");
  if (sc.kind == "traveling" && static_cast<int>(sc.speeds.size()) != sc.n)
    detail::field_error("signal.speeds", "need one speed per axis");
  for (const auto& pc : sc.profiles) {
    Profile p;
    if (!pc.file.empty()) {
      p = read_profile_csv(resolve(c, pc.file).string());
    } else {
      for (const auto& h : pc.harmonics) p.harmonics.push_back(Harmonic{static_cast<int>(h[0]), h[1], h[2]});
    }
    spec.profiles.push_back(p);
  }
  spec.amplitudes = sc.amplitudes;
  spec.speeds = sc.speeds;
  try {
    spec.validate();
  } catch (const PreconditionError& e) {
    detail::field_error("signal", e.what());
  }
  return spec;
}

inline KineticsModel build_kinetics(const RunConfig& c) {
  const KineticsConfig& k = c.kinetics;
  if (k.preset == "lotka-volterra") return lotka_volterra(k.beta, k.alpha);
  if (k.preset == "ratio-dependent") return ratio_dependent(k.beta, k.alpha, k.a);
  return custom_kinetics(k.f, k.g, k.constants);
}

inline CellSolverOptions solver_options(const RunConfig& c) {
  CellSolverOptions o;
  o.gmres.tolerance = c.solver.tolerance;
  o.gmres.restart = c.solver.restart;
  o.gmres.max_iterations = c.solver.max_iterations;
  o.dense_limit = c.solver.dense_limit;
  return o;
}

inline SlowConstants slow_constants(const RunConfig& c) {
  SlowConstants sc;
  sc.mu = c.constants.mu;
  sc.nu = c.constants.nu;
  sc.kappa1 = c.constants.kappa1;
  sc.delta1 = c.constants.delta1;
  sc.delta2 = c.constants.delta2;
  return sc;
}

}  // namespace swtaxis::cli
