#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "perflow/certify.hpp"
#include "perflow/equilibria.hpp"
#include "perflow/errors.hpp"
#include "perflow/flows.hpp"
#include "perflow/model.hpp"

namespace perflow {

using Json = nlohmann::ordered_json;

/// Shortest round-trip text for a double, at most 17 significant digits;
/// "inf", "-inf", "nan" for non-finite values.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// JSON value for a double; non-finite values become strings.
inline Json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline Json json_vector(const Vector& x) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(json_number(x[i]));
  return out;
}

inline Json json_signs(const Vector& eigenvalues, double tol) {
  Json out = Json::array();
  for (int s : eigen_signs(eigenvalues, tol)) out.push_back(s);
  return out;
}

/// Comma-separated table with LF line endings.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  }

  void header(const std::vector<std::string>& columns) { row_strings(columns); }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << '\n';
  }

  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << values[i];
    }
    out_ << '\n';
  }

  ~CsvWriter() = default;

  void close() {
    out_.close();
    if (!out_) throw std::ios_base::failure("failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const Json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  out.close();
  if (!out) throw std::ios_base::failure("failed writing " + path.string());
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

inline std::vector<std::string> indexed_columns(const std::string& prefix, int n) {
  std::vector<std::string> cols;
  for (int i = 0; i < n; ++i) cols.push_back(prefix + std::to_string(i));
  return cols;
}

/// Trajectory CSV: columns t,x_0,...,x_{n-1}.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  CsvWriter csv(path);
  auto cols = indexed_columns("x_", static_cast<int>(traj.final_state().size()));
  cols.insert(cols.begin(), "t");
  csv.header(cols);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::vector<double> row{traj.times[i]};
    for (Eigen::Index j = 0; j < traj.states[i].size(); ++j) row.push_back(traj.states[i][j]);
    csv.row(row);
  }
  csv.close();
}

inline Json trajectory_summary(const Trajectory& traj) {
  return Json{{"kind", to_string(traj.kind)},
              {"terminal_status", to_string(traj.status)},
              {"final_time", json_number(traj.final_time())},
              {"final_state", json_vector(traj.final_state())},
              {"initial_state", json_vector(traj.states.front())},
              {"records", traj.size()}};
}

inline Json to_json(const EquilibriumReport& rep) {
  Json labels = Json::array();
  for (auto l : rep.labels) labels.push_back(to_string(l));
  Json out{{"location", json_vector(rep.location)},
           {"field_kind", to_string(rep.field_kind)},
           {"residual", json_number(rep.residual)},
           {"labels", labels}};
  if (rep.pr_hessian_eigenvalues.size()) {
    out["pr_hessian_eigenvalues"] = json_vector(rep.pr_hessian_eigenvalues);
    out["pr_hessian_eigen_signs"] = json_signs(rep.pr_hessian_eigenvalues, rep.tol);
  }
  if (rep.stability_hessian_eigenvalues.size()) {
    out["stability_hessian_eigenvalues"] = json_vector(rep.stability_hessian_eigenvalues);
    out["stability_hessian_eigen_signs"] = json_signs(rep.stability_hessian_eigenvalues, rep.tol);
  }
  if (rep.field_jacobian_eigenvalues.size()) {
    out["field_jacobian_eigenvalues"] = json_vector(rep.field_jacobian_eigenvalues);
    out["field_jacobian_eigen_signs"] = json_signs(rep.field_jacobian_eigenvalues, rep.tol);
  }
  return out;
}

inline Json to_json(const CurvatureCertificate& c) {
  return Json{{"x_star", json_vector(c.x_star)},
              {"r", json_number(c.r)},
              {"c1", json_number(c.c1)},
              {"c2", json_number(c.c2)},
              {"c3", json_number(c.c3)},
              {"c4", json_number(c.c4)},
              {"grid_n", c.grid_n},
              {"spacing", json_number(c.spacing)},
              {"exclusion_radius", json_number(c.exclusion_radius)},
              {"points_used", c.points_used},
              {"gradient_zero_detected", c.gradient_zero_detected},
              {"quadratic_valid", c.quadratic_valid},
              {"gradient_valid", c.gradient_valid},
              {"valid", c.valid}};
}

inline Json to_json(const PerturbationEnvelope& e) {
  return Json{{"epsilon", json_number(e.epsilon)},
              {"delta", json_number(e.delta)},
              {"r", json_number(e.r)},
              {"x_star", json_vector(e.x_star)},
              {"fit_mode", to_string(e.fit_mode)},
              {"grid_n", e.grid_n}};
}

inline Json to_json(const UltimateBoundReport& rep) {
  const auto& a = rep.admissibility;
  return Json{{"theta", rep.theta},
              {"c1", json_number(rep.c1)},
              {"c2", json_number(rep.c2)},
              {"c3", json_number(rep.c3)},
              {"c4", json_number(rep.c4)},
              {"r", json_number(rep.r)},
              {"epsilon", json_number(rep.epsilon)},
              {"delta", json_number(rep.delta)},
              {"x_star", json_vector(rep.x_star)},
              {"initial_distance", json_number(rep.initial_distance)},
              {"alpha", json_number(rep.alpha)},
              {"mu_theta", json_number(rep.mu_theta)},
              {"transient_rate", json_number(rep.transient_rate)},
              {"transient_prefactor", json_number(rep.transient_prefactor)},
              {"ultimate_radius", json_number(rep.ultimate_radius)},
              {"T_bound", json_number(rep.T_bound)},
              {"admissible", rep.admissible()},
              {"admissibility",
               Json{{"certificate_valid", a.certificate_valid},
                    {"epsilon_condition", a.epsilon_condition},
                    {"initial_condition", a.initial_condition},
                    {"theta_condition", a.theta_condition},
                    {"theta_condition_sqrt_c1_over_c2", a.theta_condition_variant},
                    {"reasons", a.reasons}}}};
}

inline Json intervals_json(const std::vector<Interval>& ivs) {
  Json out = Json::array();
  for (const auto& iv : ivs) out.push_back(Json::array({json_number(iv.lo), json_number(iv.hi)}));
  return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration

enum class ValueType { number, integer, string, number_list };

struct ConfigKey {
  std::string_view key;
  std::string_view flag;
  ValueType type;
  std::string_view help;
};

/// Every accepted configuration key; CLI flags are the same keys.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model", "--model", ValueType::string, "bernoulli-phi | bernoulli-squared"},
      {"shift.kind", "--shift-kind", ValueType::string, "bump | logistic | clamped-polynomial | tabulated"},
      {"shift.params", "--shift-params", ValueType::number_list, "shift parameters, comma separated"},
      {"domain", "--domain", ValueType::number_list, "domain interval lo,hi"},
      {"flow", "--flow", ValueType::string, "prm | rgd | discrete-rgd"},
      {"x0", "--x0", ValueType::number, "initial condition"},
      {"t_end", "--t-end", ValueType::number, "integration horizon"},
      {"h", "--h", ValueType::number, "RK4 step"},
      {"eq_tol", "--eq-tol", ValueType::number, "equilibrium tolerance on |field|"},
      {"steps", "--steps", ValueType::integer, "discrete recursion steps"},
      {"schedule", "--schedule", ValueType::string, "constant | inverse"},
      {"alpha_a", "--alpha-a", ValueType::number, "step size a (constant) or numerator (inverse)"},
      {"alpha_b", "--alpha-b", ValueType::number, "inverse schedule offset b >= 1"},
      {"noise", "--noise", ValueType::string, "none | gaussian:SIGMA | bernoulli:N"},
      {"seed", "--seed", ValueType::integer, "random seed"},
      {"grid", "--grid", ValueType::integer, "grid points (per axis)"},
      {"refine_tol", "--refine-tol", ValueType::number, "root refinement tolerance"},
      {"match_radius", "--match-radius", ValueType::number, "basin matching radius"},
      {"x_star", "--x-star", ValueType::number, "reference minimizer"},
      {"r", "--r", ValueType::number, "certificate radius"},
      {"r_step", "--r-step", ValueType::number, "radius sweep step"},
      {"theta", "--theta", ValueType::number, "theta in (0, 1)"},
      {"fit_mode", "--fit-mode", ValueType::string, "delta-zero | epsilon-capped"},
      {"epsilon_cap", "--epsilon-cap", ValueType::number, "epsilon for epsilon-capped fits"},
      {"lo", "--lo", ValueType::number, "region lower end"},
      {"hi", "--hi", ValueType::number, "region upper end"},
      {"target", "--target", ValueType::string, "repro target: fig1 | fig2 | constants"},
      {"out", "--out", ValueType::string, "output directory"},
  };
  return keys;
}

/// Parsed noise option.
inline NoiseSpec parse_noise(const std::string& text, std::uint64_t seed) {
  if (text == "none") return NoiseSpec::none();
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("noise must be none, gaussian:SIGMA or bernoulli:N");
  const std::string mode = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    if (mode == "gaussian") {
      const double sigma = std::stod(arg, &used);
      if (used != arg.size() || !(sigma >= 0.0)) throw ConfigError("bad gaussian sigma");
      return NoiseSpec::gaussian(sigma, seed);
    }
    if (mode == "bernoulli") {
      const long n = std::stol(arg, &used);
      if (used != arg.size() || n < 1) throw ConfigError("bad bernoulli batch size");
      return NoiseSpec::bernoulli_sample(static_cast<std::size_t>(n), seed);
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("noise must be none, gaussian:SIGMA (SIGMA >= 0) or bernoulli:N (N >= 1), got '" + text + "'");
}

/// Flat, validated experiment configuration. Only keys that were set are
/// serialized back, so parse -> serialize reproduces the input document.
struct ExperimentConfig {
  std::optional<std::string> model;
  std::optional<std::string> shift_kind;
  std::optional<std::vector<double>> shift_params;
  std::optional<std::vector<double>> domain;
  std::optional<std::string> flow;
  std::optional<double> x0;
  std::optional<double> t_end;
  std::optional<double> h;
  std::optional<double> eq_tol;
  std::optional<std::int64_t> steps;
  std::optional<std::string> schedule;
  std::optional<double> alpha_a;
  std::optional<double> alpha_b;
  std::optional<std::string> noise;
  std::optional<std::int64_t> seed;
  std::optional<std::int64_t> grid;
  std::optional<double> refine_tol;
  std::optional<double> match_radius;
  std::optional<double> x_star;
  std::optional<double> r;
  std::optional<double> r_step;
  std::optional<double> theta;
  std::optional<std::string> fit_mode;
  std::optional<double> epsilon_cap;
  std::optional<double> lo;
  std::optional<double> hi;
  std::optional<std::string> target;
  std::optional<std::string> out;

  static ExperimentConfig from_json(const Json& doc);
  Json to_json() const;

  DecisionDependentModel build_model() const;
  FieldKind field_kind(FieldKind fallback) const;
  NoiseSpec noise_spec() const { return parse_noise(noise.value_or("none"), static_cast<std::uint64_t>(seed.value_or(0))); }
  StepSchedule step_schedule() const;
};

namespace detail {

template <class Config, class Fn>
void for_each_field(Config& c, Fn&& fn) {
  fn("model", c.model);
  fn("shift.kind", c.shift_kind);
  fn("shift.params", c.shift_params);
  fn("domain", c.domain);
  fn("flow", c.flow);
  fn("x0", c.x0);
  fn("t_end", c.t_end);
  fn("h", c.h);
  fn("eq_tol", c.eq_tol);
  fn("steps", c.steps);
  fn("schedule", c.schedule);
  fn("alpha_a", c.alpha_a);
  fn("alpha_b", c.alpha_b);
  fn("noise", c.noise);
  fn("seed", c.seed);
  fn("grid", c.grid);
  fn("refine_tol", c.refine_tol);
  fn("match_radius", c.match_radius);
  fn("x_star", c.x_star);
  fn("r", c.r);
  fn("r_step", c.r_step);
  fn("theta", c.theta);
  fn("fit_mode", c.fit_mode);
  fn("epsilon_cap", c.epsilon_cap);
  fn("lo", c.lo);
  fn("hi", c.hi);
  fn("target", c.target);
  fn("out", c.out);
}

inline void read_value(const Json& v, std::optional<double>& slot, const std::string& key) {
  if (v.is_array() && v.size() == 1 && v[0].is_number()) {
    slot = v[0].get<double>();
  } else if (v.is_number()) {
    slot = v.get<double>();
  } else {
    throw ConfigError("config key '" + key + "' must be a number");
  }
  if (!std::isfinite(*slot)) throw ConfigError("config key '" + key + "' must be finite");
}

inline void read_value(const Json& v, std::optional<std::int64_t>& slot, const std::string& key) {
  if (v.is_number_integer()) {
    slot = v.get<std::int64_t>();
  } else if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
    slot = static_cast<std::int64_t>(v.get<double>());
  } else {
    throw ConfigError("config key '" + key + "' must be an integer");
  }
}

inline void read_value(const Json& v, std::optional<std::string>& slot, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  slot = v.get<std::string>();
}

inline void read_value(const Json& v, std::optional<std::vector<double>>& slot, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError("config key '" + key + "' must be an array of numbers");
    out.push_back(e.get<double>());
    if (!std::isfinite(out.back())) throw ConfigError("config key '" + key + "' must hold finite numbers");
  }
  slot = std::move(out);
}

inline void require_in(const std::optional<std::string>& v, std::initializer_list<std::string_view> allowed,
                       const char* key) {
  if (!v) return;
  for (auto a : allowed) {
    if (*v == a) return;
  }
  throw ConfigError(std::string("config key '") + key + "' has unsupported value '" + *v + "'");
}

template <class T, class Pred>
void require(const std::optional<T>& v, Pred pred, const char* key, const char* rule) {
  if (v && !pred(*v)) throw ConfigError(std::string("config key '") + key + "' must be " + rule);
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  std::set<std::string> known;
  ExperimentConfig cfg;
  detail::for_each_field(cfg, [&](const char* key, auto& slot) {
    known.insert(key);
    if (auto it = doc.find(key); it != doc.end()) detail::read_value(*it, slot, key);
  });
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) throw ConfigError("unknown config key '" + item.key() + "'");
  }

  using detail::require;
  detail::require_in(cfg.model, {"bernoulli-phi", "bernoulli-squared"}, "model");
  detail::require_in(cfg.shift_kind, {"bump", "logistic", "clamped-polynomial", "tabulated"}, "shift.kind");
  detail::require_in(cfg.flow, {"prm", "rgd", "discrete-rgd"}, "flow");
  detail::require_in(cfg.schedule, {"constant", "inverse"}, "schedule");
  detail::require_in(cfg.fit_mode, {"delta-zero", "epsilon-capped"}, "fit_mode");
  detail::require_in(cfg.target, {"fig1", "fig2", "constants"}, "target");
  require(cfg.domain, [](const auto& d) { return d.size() == 2 && d[0] < d[1]; }, "domain", "[lo, hi] with lo < hi");
  auto positive = [](double v) { return v > 0.0; };
  require(cfg.t_end, positive, "t_end", "positive");
  require(cfg.h, positive, "h", "positive");
  require(cfg.eq_tol, [](double v) { return v >= 0.0; }, "eq_tol", "nonnegative");
  require(cfg.steps, [](std::int64_t v) { return v >= 1; }, "steps", "at least 1");
  require(cfg.alpha_a, positive, "alpha_a", "positive");
  require(cfg.alpha_b, [](double v) { return v >= 1.0; }, "alpha_b", "at least 1");
  require(cfg.seed, [](std::int64_t v) { return v >= 0; }, "seed", "nonnegative");
  require(cfg.grid, [](std::int64_t v) { return v >= 2 && v <= 100000000; }, "grid", "between 2 and 1e8");
  require(cfg.refine_tol, positive, "refine_tol", "positive");
  require(cfg.match_radius, positive, "match_radius", "positive");
  require(cfg.r, positive, "r", "positive");
  require(cfg.r_step, positive, "r_step", "positive");
  require(cfg.theta, [](double v) { return v > 0.0 && v < 1.0; }, "theta", "in (0, 1)");
  require(cfg.epsilon_cap, [](double v) { return v >= 0.0; }, "epsilon_cap", "nonnegative");
  if (cfg.lo && cfg.hi && !(*cfg.lo < *cfg.hi)) throw ConfigError("config keys lo/hi must satisfy lo < hi");
  if (cfg.noise) (void)parse_noise(*cfg.noise, 0);
  if (cfg.model.value_or("bernoulli-phi") == "bernoulli-phi" && cfg.shift_kind && *cfg.shift_kind != "bump")
    throw ConfigError("model bernoulli-phi uses the bump shift; use model bernoulli-squared for other shifts");
  if (cfg.model && *cfg.model == "bernoulli-squared" && !cfg.shift_kind)
    throw ConfigError("model bernoulli-squared needs shift.kind");

  // Model construction errors (bad shift params, domain) are config errors.
  try {
    const auto model = cfg.build_model();
    if (cfg.x0) model.domain().require(scalar_vector(*cfg.x0), "x0");
    if (cfg.x_star) model.domain().require(scalar_vector(*cfg.x_star), "x_star");
  } catch (const RangeError& e) {
    throw ConfigError(e.what());
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline Json ExperimentConfig::to_json() const {
  Json doc = Json::object();
  detail::for_each_field(*this, [&](const char* key, const auto& slot) {
    if (slot) doc[key] = *slot;
  });
  return doc;
}

inline DecisionDependentModel ExperimentConfig::build_model() const {
  const Box box = domain ? Box::interval((*domain)[0], (*domain)[1]) : Box::interval(-0.5, 1.5);
  if (model.value_or("bernoulli-phi") == "bernoulli-phi") return make_bernoulli_phi(box);
  const auto kind = parse_shift_kind(shift_kind.value_or("bump"));
  return make_bernoulli_squared(ShiftFunction::from_params(kind, shift_params.value_or(std::vector<double>{})), box);
}

inline FieldKind ExperimentConfig::field_kind(FieldKind fallback) const {
  if (!flow) return fallback;
  if (*flow == "prm") return FieldKind::prm;
  if (*flow == "rgd") return FieldKind::rgd;
  throw ConfigError("flow '" + *flow + "' is not a continuous vector field (expected prm or rgd)");
}

inline StepSchedule ExperimentConfig::step_schedule() const {
  if (schedule.value_or("constant") == "constant") return StepSchedule::constant(alpha_a.value_or(0.01));
  return StepSchedule::inverse(alpha_a.value_or(0.5), alpha_b.value_or(10.0));
}

}  // namespace perflow
