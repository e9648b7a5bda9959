#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fracprodi/error.hpp"

namespace fracprodi {

using json = nlohmann::json;

/// Grid field given by a constant, a CSV table (x[,y],value on the nodes) or a multiple of Phi1.
struct ConstantField {
  double value = 0.0;
  bool operator==(const ConstantField&) const = default;
};
struct TableField {
  std::string path;
  bool operator==(const TableField&) const = default;
};
struct Phi1Field {
  double multiple = 0.0;
  bool operator==(const Phi1Field&) const = default;
};
using FieldSpec = std::variant<ConstantField, TableField, Phi1Field>;

struct DomainSpec {
  std::string kind = "interval";  ///< interval | ball
  std::array<double, 2> bounds{-1.0, 1.0};
  double radius = 1.0;
  std::array<double, 2> center{0.0, 0.0};
  bool operator==(const DomainSpec&) const = default;
};

struct NonlinearitySpec {
  std::string family = "jumping_linear";  ///< jumping_linear | power_ap | tabulated
  double mu_minus = 0.5;
  double mu_plus = 2.5;
  FieldSpec a0 = ConstantField{1.0};
  double p = 2.0;
  double slope_neg = 0.0;
  std::vector<double> q;
  std::vector<double> f;
  bool operator==(const NonlinearitySpec&) const = default;
};

struct McSpec {
  std::string task = "exit_time";  ///< exit_time | eigenvalue | duhamel
  std::uint64_t paths = 10'000;
  double dt = 1e-3;
  double tmax = 10.0;
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::vector<std::array<double, 2>> probes{{0.0, 0.0}};
  double t1 = 0.5;
  double t2 = 2.0;
  std::string sampler = "default";  ///< default | cms | subordination
  bool operator==(const McSpec&) const = default;
};

struct Tolerances {
  double iteration = 1e-10;
  int max_iter = 10'000;
  double newton = 1e-8;
  double eigen = 1e-10;
  bool operator==(const Tolerances&) const = default;
};

struct Config {
  DomainSpec domain;
  double s = 0.5;
  int n = 400;
  FieldSpec potential = ConstantField{0.0};
  FieldSpec source = ConstantField{1.0};
  NonlinearitySpec nonlinearity;
  std::optional<FieldSpec> V1;  ///< default: mu_minus or slope_neg
  std::optional<FieldSpec> V2;  ///< default: mu_plus
  FieldSpec h = ConstantField{0.0};
  double C_ap = 0.0;
  double rho = 0.0;
  std::vector<double> rho_list;
  std::array<double, 2> bracket{-10.0, 10.0};
  double tol_rho = 1e-2;
  double rho_hat = 1.0;
  bool enforce_assumptions = true;
  McSpec mc;
  Tolerances tolerances;
  std::string output = "out";
  std::filesystem::path base_dir;  ///< directory for relative table paths; not serialized
  bool operator==(const Config&) const = default;
};

namespace detail {

inline std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw Error(ErrorCode::schema_error, "'" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw Error(ErrorCode::schema_error, "unknown key '" + join_key(path, key) + "'");
  }
}

inline double number(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw Error(ErrorCode::schema_error, "'" + join_key(path, key) + "' must be a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw Error(ErrorCode::schema_error, "'" + join_key(path, key) + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::string text(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw Error(ErrorCode::schema_error, "'" + join_key(path, key) + "' must be a string");
  return v.get<std::string>();
}

inline bool boolean(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw Error(ErrorCode::schema_error, "'" + join_key(path, key) + "' must be a boolean");
  return v.get<bool>();
}

inline std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  const auto name = join_key(path, key);
  if (!v.is_array()) throw Error(ErrorCode::schema_error, "'" + name + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw Error(ErrorCode::schema_error, "'" + name + "' must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::array<double, 2> pair(const json& obj, const std::string& key, const std::string& path) {
  const auto v = numbers(obj, key, path);
  if (v.size() != 2) throw Error(ErrorCode::schema_error, "'" + join_key(path, key) + "' must have two entries");
  return {v[0], v[1]};
}

inline void require_range(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw Error(ErrorCode::range_error, "'" + key + "' " + what);
}

inline FieldSpec field(const json& obj, const std::string& key, const std::string& path, bool allow_phi1) {
  const auto name = join_key(path, key);
  const auto& v = obj.at(key);
  if (v.is_number()) return ConstantField{v.get<double>()};
  std::set<std::string> allowed{"constant", "table"};
  if (allow_phi1) allowed.insert("phi1_multiple");
  check_keys(v, name, allowed);
  if (v.size() != 1) throw Error(ErrorCode::schema_error, "'" + name + "' needs exactly one of constant, table" +
                                                              std::string(allow_phi1 ? ", phi1_multiple" : ""));
  if (v.contains("constant")) return ConstantField{number(v, "constant", name)};
  if (v.contains("table")) return TableField{text(v, "table", name)};
  return Phi1Field{number(v, "phi1_multiple", name)};
}

inline json field_json(const FieldSpec& f) {
  if (const auto* c = std::get_if<ConstantField>(&f)) return {{"constant", c->value}};
  if (const auto* t = std::get_if<TableField>(&f)) return {{"table", t->path}};
  return {{"phi1_multiple", std::get<Phi1Field>(f).multiple}};
}

inline void check_table_exists(const FieldSpec& f, const std::filesystem::path& base, const std::string& key) {
  if (const auto* t = std::get_if<TableField>(&f)) {
    const std::filesystem::path p = std::filesystem::path(t->path).is_absolute() ? std::filesystem::path(t->path) : base / t->path;
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::io_error, "'" + key + ".table' file not found: " + p.string());
  }
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Strict parse: unknown keys, wrong types and out-of-range values are errors.
inline Config parse_config_string(const std::string& source, const std::filesystem::path& base_dir = {}) {
  using namespace detail;
  json j;
  try {
    j = json::parse(source);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(source, e.byte);
    throw Error(ErrorCode::parse_error, "invalid JSON at line " + std::to_string(line) + ", column " +
                                            std::to_string(col));
  }
  check_keys(j, "", {"domain", "s", "n", "potential", "source", "nonlinearity", "V1", "V2", "h", "C_ap", "rho",
                     "rho_list", "bracket", "tol_rho", "rho_hat", "enforce_assumptions", "mc", "tolerances", "output"});
  for (const char* key : {"domain", "s", "n"}) {
    if (!j.contains(key)) throw Error(ErrorCode::schema_error, std::string("missing required key '") + key + "'");
  }
  Config c;
  c.base_dir = base_dir;

  const auto& d = j.at("domain");
  check_keys(d, "domain", {"kind", "bounds", "radius", "center"});
  if (!d.contains("kind")) throw Error(ErrorCode::schema_error, "missing required key 'domain.kind'");
  c.domain.kind = text(d, "kind", "domain");
  if (c.domain.kind == "interval") {
    if (d.contains("radius") || d.contains("center")) throw Error(ErrorCode::schema_error, "'domain.radius' applies to balls only");
    if (d.contains("bounds")) c.domain.bounds = pair(d, "bounds", "domain");
    require_range(c.domain.bounds[0] < c.domain.bounds[1], "domain.bounds", "must be increasing");
  } else if (c.domain.kind == "ball") {
    if (d.contains("bounds")) throw Error(ErrorCode::schema_error, "'domain.bounds' applies to intervals only");
    if (d.contains("radius")) c.domain.radius = number(d, "radius", "domain");
    if (d.contains("center")) c.domain.center = pair(d, "center", "domain");
    require_range(c.domain.radius > 0.0, "domain.radius", "must be positive");
  } else {
    throw Error(ErrorCode::schema_error, "'domain.kind' must be interval or ball");
  }

  c.s = number(j, "s", "");
  require_range(c.s > 0.0 && c.s < 1.0, "s", "must lie in (0, 1)");
  c.n = static_cast<int>(integer(j, "n", ""));
  require_range(c.n >= 3, "n", "must be at least 3");

  if (j.contains("potential")) c.potential = field(j, "potential", "", false);
  if (j.contains("source")) c.source = field(j, "source", "", false);
  if (j.contains("V1")) c.V1 = field(j, "V1", "", false);
  if (j.contains("V2")) c.V2 = field(j, "V2", "", false);
  if (j.contains("h")) c.h = field(j, "h", "", true);

  if (j.contains("nonlinearity")) {
    const auto& f = j.at("nonlinearity");
    check_keys(f, "nonlinearity", {"family", "mu_minus", "mu_plus", "a0", "p", "slope_neg", "q", "f"});
    if (!f.contains("family")) throw Error(ErrorCode::schema_error, "missing required key 'nonlinearity.family'");
    auto& nl = c.nonlinearity;
    nl.family = text(f, "family", "nonlinearity");
    const auto only = [&](const std::set<std::string>& keys) {
      for (const auto& [key, _] : f.items()) {
        if (key != "family" && !keys.count(key)) {
          throw Error(ErrorCode::schema_error, "'nonlinearity." + key + "' does not apply to " + nl.family);
        }
      }
    };
    if (nl.family == "jumping_linear") {
      only({"mu_minus", "mu_plus"});
      if (f.contains("mu_minus")) nl.mu_minus = number(f, "mu_minus", "nonlinearity");
      if (f.contains("mu_plus")) nl.mu_plus = number(f, "mu_plus", "nonlinearity");
    } else if (nl.family == "power_ap") {
      only({"a0", "p", "slope_neg"});
      if (f.contains("a0")) nl.a0 = field(f, "a0", "nonlinearity", false);
      if (f.contains("p")) nl.p = number(f, "p", "nonlinearity");
      if (f.contains("slope_neg")) nl.slope_neg = number(f, "slope_neg", "nonlinearity");
      require_range(nl.p > 1.0, "nonlinearity.p", "must exceed 1");
    } else if (nl.family == "tabulated") {
      only({"q", "f"});
      if (!f.contains("q") || !f.contains("f")) throw Error(ErrorCode::schema_error, "tabulated needs 'nonlinearity.q' and 'nonlinearity.f'");
      nl.q = numbers(f, "q", "nonlinearity");
      nl.f = numbers(f, "f", "nonlinearity");
      require_range(nl.q.size() >= 2 && nl.q.size() == nl.f.size(), "nonlinearity.q", "needs >= 2 samples matching f");
    } else {
      throw Error(ErrorCode::schema_error, "'nonlinearity.family' must be jumping_linear, power_ap or tabulated");
    }
  }

  if (j.contains("C_ap")) c.C_ap = number(j, "C_ap", "");
  require_range(c.C_ap >= 0.0, "C_ap", "must be non-negative");
  if (j.contains("rho")) c.rho = number(j, "rho", "");
  if (j.contains("rho_list")) c.rho_list = numbers(j, "rho_list", "");
  if (j.contains("bracket")) c.bracket = pair(j, "bracket", "");
  if (j.contains("tol_rho")) c.tol_rho = number(j, "tol_rho", "");
  require_range(c.tol_rho > 0.0, "tol_rho", "must be positive");
  if (j.contains("rho_hat")) c.rho_hat = number(j, "rho_hat", "");
  require_range(c.rho_hat > 0.0, "rho_hat", "must be positive");
  if (j.contains("enforce_assumptions")) c.enforce_assumptions = boolean(j, "enforce_assumptions", "");

  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    check_keys(m, "mc", {"task", "paths", "dt", "tmax", "seed", "workers", "probes", "t1", "t2", "sampler"});
    auto& mc = c.mc;
    if (m.contains("task")) mc.task = text(m, "task", "mc");
    if (mc.task != "exit_time" && mc.task != "eigenvalue" && mc.task != "duhamel") {
      throw Error(ErrorCode::schema_error, "'mc.task' must be exit_time, eigenvalue or duhamel");
    }
    if (m.contains("paths")) {
      const auto paths = integer(m, "paths", "mc");
      require_range(paths >= 1, "mc.paths", "must be positive");
      mc.paths = static_cast<std::uint64_t>(paths);
    }
    if (m.contains("dt")) mc.dt = number(m, "dt", "mc");
    if (m.contains("tmax")) mc.tmax = number(m, "tmax", "mc");
    require_range(mc.dt > 0.0, "mc.dt", "must be positive");
    require_range(mc.tmax >= mc.dt, "mc.tmax", "must be at least dt");
    if (m.contains("seed")) {
      const auto seed = integer(m, "seed", "mc");
      require_range(seed >= 0, "mc.seed", "must be non-negative");
      mc.seed = static_cast<std::uint64_t>(seed);
    }
    if (m.contains("workers")) {
      const auto w = integer(m, "workers", "mc");
      require_range(w >= 1, "mc.workers", "must be positive");
      mc.workers = static_cast<unsigned>(w);
    }
    if (m.contains("probes")) {
      const auto& pr = m.at("probes");
      if (!pr.is_array() || pr.empty()) throw Error(ErrorCode::schema_error, "'mc.probes' must be a non-empty array");
      mc.probes.clear();
      for (const auto& x : pr) {
        if (x.is_number()) {
          mc.probes.push_back({x.get<double>(), 0.0});
        } else if (x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number()) {
          mc.probes.push_back({x[0].get<double>(), x[1].get<double>()});
        } else {
          throw Error(ErrorCode::schema_error, "'mc.probes' entries must be numbers or [x, y] pairs");
        }
      }
    }
    if (m.contains("t1")) mc.t1 = number(m, "t1", "mc");
    if (m.contains("t2")) mc.t2 = number(m, "t2", "mc");
    require_range(mc.t1 > 0.0 && mc.t2 > mc.t1, "mc.t2", "must exceed t1 > 0");
    if (m.contains("sampler")) mc.sampler = text(m, "sampler", "mc");
    if (mc.sampler != "default" && mc.sampler != "cms" && mc.sampler != "subordination") {
      throw Error(ErrorCode::schema_error, "'mc.sampler' must be default, cms or subordination");
    }
  }

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    check_keys(t, "tolerances", {"iteration", "max_iter", "newton", "eigen"});
    auto& tol = c.tolerances;
    if (t.contains("iteration")) tol.iteration = number(t, "iteration", "tolerances");
    if (t.contains("max_iter")) tol.max_iter = static_cast<int>(integer(t, "max_iter", "tolerances"));
    if (t.contains("newton")) tol.newton = number(t, "newton", "tolerances");
    if (t.contains("eigen")) tol.eigen = number(t, "eigen", "tolerances");
    require_range(tol.iteration > 0.0 && tol.newton > 0.0 && tol.eigen > 0.0, "tolerances", "must be positive");
    require_range(tol.max_iter >= 1, "tolerances.max_iter", "must be positive");
  }
  if (j.contains("output")) c.output = text(j, "output", "");

  check_table_exists(c.potential, base_dir, "potential");
  check_table_exists(c.source, base_dir, "source");
  check_table_exists(c.h, base_dir, "h");
  check_table_exists(c.nonlinearity.a0, base_dir, "nonlinearity.a0");
  if (c.V1) check_table_exists(*c.V1, base_dir, "V1");
  if (c.V2) check_table_exists(*c.V2, base_dir, "V2");
  return c;
}

inline Config parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path.parent_path());
}

/// Full explicit form: every field is written, so parsing it back reproduces the config.
inline json to_json(const Config& c) {
  using detail::field_json;
  json j;
  if (c.domain.kind == "interval") {
    j["domain"] = {{"kind", "interval"}, {"bounds", c.domain.bounds}};
  } else {
    j["domain"] = {{"kind", "ball"}, {"radius", c.domain.radius}, {"center", c.domain.center}};
  }
  j["s"] = c.s;
  j["n"] = c.n;
  j["potential"] = field_json(c.potential);
  j["source"] = field_json(c.source);
  const auto& nl = c.nonlinearity;
  if (nl.family == "jumping_linear") {
    j["nonlinearity"] = {{"family", nl.family}, {"mu_minus", nl.mu_minus}, {"mu_plus", nl.mu_plus}};
  } else if (nl.family == "power_ap") {
    j["nonlinearity"] = {{"family", nl.family}, {"a0", field_json(nl.a0)}, {"p", nl.p}, {"slope_neg", nl.slope_neg}};
  } else {
    j["nonlinearity"] = {{"family", nl.family}, {"q", nl.q}, {"f", nl.f}};
  }
  if (c.V1) j["V1"] = field_json(*c.V1);
  if (c.V2) j["V2"] = field_json(*c.V2);
  j["h"] = field_json(c.h);
  j["C_ap"] = c.C_ap;
  j["rho"] = c.rho;
  j["rho_list"] = c.rho_list;
  j["bracket"] = c.bracket;
  j["tol_rho"] = c.tol_rho;
  j["rho_hat"] = c.rho_hat;
  j["enforce_assumptions"] = c.enforce_assumptions;
  json probes = json::array();
  for (const auto& p : c.mc.probes) probes.push_back(p);
  j["mc"] = {{"task", c.mc.task}, {"paths", c.mc.paths},     {"dt", c.mc.dt}, {"tmax", c.mc.tmax},
             {"workers", c.mc.workers}, {"probes", probes}, {"t1", c.mc.t1}, {"t2", c.mc.t2},
             {"sampler", c.mc.sampler}};
  if (c.mc.seed) j["mc"]["seed"] = *c.mc.seed;
  j["tolerances"] = {{"iteration", c.tolerances.iteration},
                     {"max_iter", c.tolerances.max_iter},
                     {"newton", c.tolerances.newton},
                     {"eigen", c.tolerances.eigen}};
  j["output"] = c.output;
  return j;
}

inline std::string serialize(const Config& c) { return to_json(c).dump(2); }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of the canonical serialization (keys sorted, compact); the output directory is left out.
inline std::string config_hash(const Config& c) {
  auto j = to_json(c);
  j.erase("output");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return os.str();
}

}  // namespace fracprodi
