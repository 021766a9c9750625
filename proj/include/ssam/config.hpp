#ifndef SSAM_CONFIG_HPP
#define SSAM_CONFIG_HPP

// RunConfig: the single JSON document that drives every CLI command.
//
// Only "model" is mandatory everywhere; "algorithm" is mandatory for `run`
// and `sweep`. Every other field has the default shown in RunConfig below.
// Parse errors carry the dotted path of the offending field.

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssam/dynamics.hpp"
#include "ssam/errors.hpp"
#include "ssam/landscape.hpp"
#include "ssam/model.hpp"

namespace ssam {

inline constexpr int kSchemaVersion = 1;

enum class Algorithm { flow, gd, ssam, projected_ssam };
enum class InitKind { zero, explicit_weights, uniform_box };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::flow: return "flow";
    case Algorithm::gd: return "gd";
    case Algorithm::ssam: return "ssam";
    case Algorithm::projected_ssam: return "projected-ssam";
  }
  return "unknown";
}

struct InitSpec {
  InitKind kind = InitKind::zero;
  std::vector<std::vector<double>> weights;  ///< L rows of d entries, for explicit
  double a = -1.0;                           ///< uniform box [a, b]
  double b = 1.0;
  bool operator==(const InitSpec&) const = default;
};

struct GridSpec {
  std::array<double, 2> w1_range{-4.0, 4.0};
  std::array<double, 2> w2_range{-4.0, 4.0};
  std::size_t resolution = 201;
  std::vector<double> etas;  ///< one CSV per entry; empty means the model eta
  bool operator==(const GridSpec&) const = default;
};

struct CriticalPointOptions {
  SignPolicy sign_policy = SignPolicy::canonical;
  std::size_t max_points = kMaxEnumeratedPoints;
  bool operator==(const CriticalPointOptions&) const = default;
};

/// Sizes of the `verify` suite.
struct VerifySizes {
  std::size_t random_points = 20;
  std::size_t mc_samples = 200000;
  std::size_t descent_steps = 20000;
  std::size_t ssam_steps = 100000;
  std::size_t competitors = 2000;
  bool operator==(const VerifySizes&) const = default;
};

struct SweepSpec {
  std::size_t threads = 1;
  std::vector<nlohmann::json> variants;  ///< merge patches applied to the base config
  bool operator==(const SweepSpec&) const = default;
};

struct RunConfig {
  // model (required)
  std::vector<double> w_star;
  std::size_t depth = 2;
  double eta = 0.0;

  std::optional<Algorithm> algorithm;
  StepSchedule schedule = StepSchedule::constant(0.01);
  std::size_t steps = 10000;
  double t_end = 10.0;
  double dt = 1e-3;
  double delta = 0.5;
  bool enforce_step_cap = true;
  bool certify_balancing = false;
  std::optional<double> radius;  ///< projected-ssam only; absent means no projection
  InitSpec init;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  RecordPolicy record;
  std::optional<GridSpec> grid;
  CriticalPointOptions critical_points;
  VerifySizes verify;
  SweepSpec sweep;

  ModelSpec model() const {
    return eta == 0.0 ? ModelSpec::unregularized(w_star, depth) : ModelSpec(w_star, depth, eta);
  }

  bool operator==(const RunConfig& o) const {
    return w_star == o.w_star && depth == o.depth && eta == o.eta && algorithm == o.algorithm &&
           schedule == o.schedule && steps == o.steps && t_end == o.t_end && dt == o.dt && delta == o.delta &&
           enforce_step_cap == o.enforce_step_cap && certify_balancing == o.certify_balancing &&
           radius == o.radius && init == o.init && n == o.n && seed == o.seed && output_dir == o.output_dir &&
           record.dense_steps == o.record.dense_steps && record.growth == o.record.growth &&
           record.checkpoint_every == o.record.checkpoint_every && grid == o.grid &&
           critical_points == o.critical_points && verify == o.verify && sweep == o.sweep;
  }
};

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

template <class T>
T read_as(const json& j, const std::string& path);

template <>
inline double read_as<double>(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

template <>
inline bool read_as<bool>(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
  return j.get<bool>();
}

template <>
inline std::size_t read_as<std::size_t>(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::size_t>(j.get<long long>());
  throw ConfigError(path, "expected a non-negative integer");
}

template <>
inline std::string read_as<std::string>(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

template <>
inline std::vector<double> read_as<std::vector<double>>(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_as<double>(j[i], fmt::format("{}[{}]", path, i)));
  return out;
}

/// Assigns obj[key] to `out` if present.
template <class T>
void read_field(const json& obj, const char* key, const std::string& parent, T& out) {
  if (!obj.contains(key)) return;
  out = read_as<T>(obj.at(key), join_path(parent, key));
}

inline const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  return j;
}

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    bool found = false;
    for (const char* k : known) found = found || item.key() == k;
    if (!found) throw ConfigError(join_path(path, item.key()), "unknown field");
  }
}

inline Algorithm parse_algorithm(const std::string& s, const std::string& path) {
  if (s == "flow") return Algorithm::flow;
  if (s == "gd") return Algorithm::gd;
  if (s == "ssam") return Algorithm::ssam;
  if (s == "projected-ssam") return Algorithm::projected_ssam;
  throw ConfigError(path, "expected one of flow, gd, ssam, projected-ssam");
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& root) {
  using detail::join_path;
  using detail::read_field;
  detail::require_object(root, "");
  detail::reject_unknown(root, "", {"schema_version", "model", "algorithm", "schedule", "steps", "flow", "delta",
                                    "enforce_step_cap", "certify_balancing", "radius", "init", "n", "seed",
                                    "output_dir", "record", "grid", "critical_points", "verify", "sweep"});
  RunConfig cfg;
  if (root.contains("schema_version")) {
    const auto v = detail::read_as<std::size_t>(root.at("schema_version"), "schema_version");
    if (v != static_cast<std::size_t>(kSchemaVersion)) {
      throw ConfigError("schema_version", fmt::format("unsupported version {}", v));
    }
  }

  if (!root.contains("model")) throw ConfigError("model", "required field missing");
  {
    const auto& m = detail::require_object(root.at("model"), "model");
    detail::reject_unknown(m, "model", {"w_star", "depth", "eta"});
    if (!m.contains("w_star")) throw ConfigError("model.w_star", "required field missing");
    read_field(m, "w_star", "model", cfg.w_star);
    read_field(m, "depth", "model", cfg.depth);
    read_field(m, "eta", "model", cfg.eta);
    if (cfg.w_star.empty()) throw ConfigError("model.w_star", "must have at least one entry");
    if (cfg.depth < 2) throw ConfigError("model.depth", "must be at least 2");
    if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta)) throw ConfigError("model.eta", "must be finite and >= 0");
  }

  if (root.contains("algorithm")) {
    cfg.algorithm = detail::parse_algorithm(detail::read_as<std::string>(root.at("algorithm"), "algorithm"),
                                            "algorithm");
  }
  if (root.contains("schedule")) {
    const auto& s = detail::require_object(root.at("schedule"), "schedule");
    detail::reject_unknown(s, "schedule", {"kind", "alpha0"});
    std::string kind = "constant";
    read_field(s, "kind", "schedule", kind);
    if (kind == "constant") {
      cfg.schedule.kind = ScheduleKind::constant;
    } else if (kind == "harmonic") {
      cfg.schedule.kind = ScheduleKind::harmonic;
    } else {
      throw ConfigError("schedule.kind", "expected constant or harmonic");
    }
    read_field(s, "alpha0", "schedule", cfg.schedule.alpha0);
    if (!(cfg.schedule.alpha0 > 0.0)) throw ConfigError("schedule.alpha0", "must be positive");
  }
  read_field(root, "steps", "", cfg.steps);
  if (cfg.steps < 1) throw ConfigError("steps", "must be at least 1");
  if (root.contains("flow")) {
    const auto& f = detail::require_object(root.at("flow"), "flow");
    detail::reject_unknown(f, "flow", {"t_end", "dt"});
    read_field(f, "t_end", "flow", cfg.t_end);
    read_field(f, "dt", "flow", cfg.dt);
    if (!(cfg.t_end > 0.0)) throw ConfigError("flow.t_end", "must be positive");
    if (!(cfg.dt > 0.0)) throw ConfigError("flow.dt", "must be positive");
  }
  read_field(root, "delta", "", cfg.delta);
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  read_field(root, "enforce_step_cap", "", cfg.enforce_step_cap);
  read_field(root, "certify_balancing", "", cfg.certify_balancing);
  if (root.contains("radius") && !root.at("radius").is_null()) {
    cfg.radius = detail::read_as<double>(root.at("radius"), "radius");
    if (!(*cfg.radius > 0.0)) throw ConfigError("radius", "must be positive");
  }

  if (root.contains("init")) {
    const auto& in = detail::require_object(root.at("init"), "init");
    detail::reject_unknown(in, "init", {"kind", "weights", "a", "b"});
    std::string kind = "zero";
    read_field(in, "kind", "init", kind);
    if (kind == "zero") {
      cfg.init.kind = InitKind::zero;
    } else if (kind == "explicit") {
      cfg.init.kind = InitKind::explicit_weights;
      if (!in.contains("weights") || !in.at("weights").is_array()) {
        throw ConfigError("init.weights", "explicit init needs an array of layer rows");
      }
      const auto& rows = in.at("weights");
      for (std::size_t l = 0; l < rows.size(); ++l) {
        cfg.init.weights.push_back(
            detail::read_as<std::vector<double>>(rows[l], fmt::format("init.weights[{}]", l)));
      }
      if (cfg.init.weights.size() != cfg.depth) {
        throw ConfigError("init.weights", fmt::format("expected {} layer rows", cfg.depth));
      }
      for (std::size_t l = 0; l < cfg.depth; ++l) {
        if (cfg.init.weights[l].size() != cfg.w_star.size()) {
          throw ConfigError(fmt::format("init.weights[{}]", l), fmt::format("expected {} entries", cfg.w_star.size()));
        }
      }
    } else if (kind == "uniform_box") {
      cfg.init.kind = InitKind::uniform_box;
      read_field(in, "a", "init", cfg.init.a);
      read_field(in, "b", "init", cfg.init.b);
      if (!(cfg.init.a < cfg.init.b)) throw ConfigError("init.b", "uniform box needs a < b");
    } else {
      throw ConfigError("init.kind", "expected zero, explicit or uniform_box");
    }
  }

  read_field(root, "n", "", cfg.n);
  if (cfg.n < 1) throw ConfigError("n", "must be at least 1");
  if (root.contains("seed")) {
    const auto& s = root.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      throw ConfigError("seed", "expected an unsigned 64-bit integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  read_field(root, "output_dir", "", cfg.output_dir);

  if (root.contains("record")) {
    const auto& r = detail::require_object(root.at("record"), "record");
    detail::reject_unknown(r, "record", {"dense_steps", "growth", "checkpoint_every"});
    read_field(r, "dense_steps", "record", cfg.record.dense_steps);
    read_field(r, "growth", "record", cfg.record.growth);
    read_field(r, "checkpoint_every", "record", cfg.record.checkpoint_every);
    if (!(cfg.record.growth > 1.0)) throw ConfigError("record.growth", "must exceed 1");
  }

  if (root.contains("grid") && !root.at("grid").is_null()) {
    const auto& g = detail::require_object(root.at("grid"), "grid");
    detail::reject_unknown(g, "grid", {"w1_range", "w2_range", "resolution", "etas"});
    GridSpec grid;
    for (const char* key : {"w1_range", "w2_range"}) {
      if (!g.contains(key)) continue;
      const auto v = detail::read_as<std::vector<double>>(g.at(key), join_path("grid", key));
      if (v.size() != 2 || !(v[0] < v[1])) throw ConfigError(join_path("grid", key), "expected [lo, hi] with lo < hi");
      auto& range = std::string(key) == "w1_range" ? grid.w1_range : grid.w2_range;
      range = {v[0], v[1]};
    }
    read_field(g, "resolution", "grid", grid.resolution);
    if (grid.resolution < 2) throw ConfigError("grid.resolution", "must be at least 2");
    read_field(g, "etas", "grid", grid.etas);
    for (std::size_t i = 0; i < grid.etas.size(); ++i) {
      if (!(grid.etas[i] >= 0.0)) throw ConfigError(fmt::format("grid.etas[{}]", i), "must be >= 0");
    }
    cfg.grid = grid;
  }

  if (root.contains("critical_points")) {
    const auto& c = detail::require_object(root.at("critical_points"), "critical_points");
    detail::reject_unknown(c, "critical_points", {"sign_policy", "max_points"});
    std::string policy = "canonical";
    read_field(c, "sign_policy", "critical_points", policy);
    if (policy == "canonical") {
      cfg.critical_points.sign_policy = SignPolicy::canonical;
    } else if (policy == "all") {
      cfg.critical_points.sign_policy = SignPolicy::all;
    } else {
      throw ConfigError("critical_points.sign_policy", "expected canonical or all");
    }
    read_field(c, "max_points", "critical_points", cfg.critical_points.max_points);
  }

  if (root.contains("verify")) {
    const auto& v = detail::require_object(root.at("verify"), "verify");
    detail::reject_unknown(v, "verify", {"random_points", "mc_samples", "descent_steps", "ssam_steps", "competitors"});
    read_field(v, "random_points", "verify", cfg.verify.random_points);
    read_field(v, "mc_samples", "verify", cfg.verify.mc_samples);
    read_field(v, "descent_steps", "verify", cfg.verify.descent_steps);
    read_field(v, "ssam_steps", "verify", cfg.verify.ssam_steps);
    read_field(v, "competitors", "verify", cfg.verify.competitors);
    if (cfg.verify.mc_samples < 100) throw ConfigError("verify.mc_samples", "must be at least 100");
    if (cfg.verify.random_points < 1) throw ConfigError("verify.random_points", "must be at least 1");
  }

  if (root.contains("sweep")) {
    const auto& s = detail::require_object(root.at("sweep"), "sweep");
    detail::reject_unknown(s, "sweep", {"threads", "variants"});
    read_field(s, "threads", "sweep", cfg.sweep.threads);
    if (cfg.sweep.threads < 1) throw ConfigError("sweep.threads", "must be at least 1");
    if (s.contains("variants")) {
      const auto& vs = s.at("variants");
      if (!vs.is_array()) throw ConfigError("sweep.variants", "expected an array of objects");
      for (std::size_t i = 0; i < vs.size(); ++i) {
        detail::require_object(vs[i], fmt::format("sweep.variants[{}]", i));
        cfg.sweep.variants.push_back(vs[i]);
      }
    }
  }

  if (cfg.init.kind == InitKind::explicit_weights) {
    for (const auto& row : cfg.init.weights) {
      for (double v : row) {
        if (!std::isfinite(v)) throw ConfigError("init.weights", "entries must be finite");
      }
    }
  }
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

/// Canonical JSON with every field spelled out; parse_config inverts it.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
  using nlohmann::json;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = {{"w_star", cfg.w_star}, {"depth", cfg.depth}, {"eta", cfg.eta}};
  if (cfg.algorithm) j["algorithm"] = to_string(*cfg.algorithm);
  j["schedule"] = {{"kind", cfg.schedule.kind == ScheduleKind::constant ? "constant" : "harmonic"},
                   {"alpha0", cfg.schedule.alpha0}};
  j["steps"] = cfg.steps;
  j["flow"] = {{"t_end", cfg.t_end}, {"dt", cfg.dt}};
  j["delta"] = cfg.delta;
  j["enforce_step_cap"] = cfg.enforce_step_cap;
  j["certify_balancing"] = cfg.certify_balancing;
  j["radius"] = cfg.radius ? json(*cfg.radius) : json(nullptr);
  switch (cfg.init.kind) {
    case InitKind::zero: j["init"] = {{"kind", "zero"}}; break;
    case InitKind::explicit_weights: j["init"] = {{"kind", "explicit"}, {"weights", cfg.init.weights}}; break;
    case InitKind::uniform_box: j["init"] = {{"kind", "uniform_box"}, {"a", cfg.init.a}, {"b", cfg.init.b}}; break;
  }
  j["n"] = cfg.n;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["record"] = {{"dense_steps", cfg.record.dense_steps},
                 {"growth", cfg.record.growth},
                 {"checkpoint_every", cfg.record.checkpoint_every}};
  if (cfg.grid) {
    j["grid"] = {{"w1_range", cfg.grid->w1_range},
                 {"w2_range", cfg.grid->w2_range},
                 {"resolution", cfg.grid->resolution},
                 {"etas", cfg.grid->etas}};
  } else {
    j["grid"] = nullptr;
  }
  j["critical_points"] = {
      {"sign_policy", cfg.critical_points.sign_policy == SignPolicy::canonical ? "canonical" : "all"},
      {"max_points", cfg.critical_points.max_points}};
  j["verify"] = {{"random_points", cfg.verify.random_points},
                 {"mc_samples", cfg.verify.mc_samples},
                 {"descent_steps", cfg.verify.descent_steps},
                 {"ssam_steps", cfg.verify.ssam_steps},
                 {"competitors", cfg.verify.competitors}};
  j["sweep"] = {{"threads", cfg.sweep.threads}, {"variants", cfg.sweep.variants}};
  return j;
}

/// Initial weights described by cfg.init (uniform draws use the "init" stream).
inline NetworkParams initial_params(const RunConfig& cfg) {
  const std::size_t d = cfg.w_star.size();
  switch (cfg.init.kind) {
    case InitKind::zero: return NetworkParams(cfg.depth, d);
    case InitKind::explicit_weights: return NetworkParams::from_rows(cfg.init.weights);
    case InitKind::uniform_box: {
      Rng rng = make_stream(cfg.seed, streams::init);
      std::uniform_real_distribution<double> box(cfg.init.a, cfg.init.b);
      NetworkParams p(cfg.depth, d);
      for (double& v : p.values()) v = box(rng);
      return p;
    }
  }
  throw ConfigError("init.kind", "unhandled init kind");
}

}  // namespace ssam

#endif  // SSAM_CONFIG_HPP
