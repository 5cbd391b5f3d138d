#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "perflow/certify.hpp"
#include "perflow/equilibria.hpp"
#include "perflow/flows.hpp"
#include "perflow/io.hpp"
#include "perflow/model.hpp"
#include "perflow/numerics.hpp"

namespace perflow::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, io_failure = 1, config_error = 2, numeric_error = 3 };

// Output file names, fixed per command.
inline constexpr const char* trajectory_csv = "trajectory.csv";
inline constexpr const char* summary_json = "summary.json";
inline constexpr const char* basins_csv = "basins.csv";
inline constexpr const char* boundaries_csv = "boundaries.csv";
inline constexpr const char* equilibria_json = "equilibria.json";
inline constexpr const char* certificate_json = "certificate.json";
inline constexpr const char* constants_sweep_csv = "constants_sweep.csv";
inline constexpr const char* bounds_json = "bounds.json";
inline constexpr const char* theta_sweep_csv = "theta_sweep.csv";
inline constexpr const char* alignment_csv = "alignment.csv";
inline constexpr const char* alignment_json = "alignment.json";
inline constexpr const char* fig1_csv = "fig1.csv";
inline constexpr const char* fig2_csv = "fig2.csv";
inline constexpr const char* constants_json = "constants.json";

inline fs::path output_dir(const ExperimentConfig& cfg) {
  fs::path dir = cfg.out.value_or("perflow-out");
  fs::create_directories(dir);
  return dir;
}

inline std::size_t grid_or(const ExperimentConfig& cfg, std::size_t fallback) {
  return cfg.grid ? static_cast<std::size_t>(*cfg.grid) : fallback;
}

inline int cmd_simulate(const ExperimentConfig& cfg) {
  const auto model = cfg.build_model();
  const Vector x0 = scalar_vector(cfg.x0.value_or(0.1));
  const std::string flow = cfg.flow.value_or("rgd");
  Trajectory traj;
  if (flow == "discrete-rgd") {
    traj = discrete_rgd(model, x0, static_cast<std::size_t>(cfg.steps.value_or(5000)), cfg.step_schedule(),
                        cfg.noise_spec());
  } else {
    const FlowOptions opts{cfg.t_end.value_or(50.0), cfg.h.value_or(0.01), cfg.eq_tol.value_or(1e-9),
                           IntegrationMethod::rk4};
    traj = integrate_flow(model, cfg.field_kind(FieldKind::rgd), x0, opts);
  }
  const fs::path dir = output_dir(cfg);
  write_trajectory_csv(dir / trajectory_csv, traj);
  Json summary = trajectory_summary(traj);
  summary["model"] = model.name();
  summary["config"] = cfg.to_json();
  write_json(dir / summary_json, summary);
  return ok;
}

inline Json equilibria_document(const std::vector<EquilibriumReport>& reports, FieldKind kind, std::size_t grid_n,
                                double refine_tol) {
  Json list = Json::array();
  for (const auto& r : reports) list.push_back(to_json(r));
  // Roots are only as complete as the scan grid resolves them.
  return Json{{"field_kind", to_string(kind)},
              {"grid_n", grid_n},
              {"refine_tol", refine_tol},
              {"resolution_limited", true},
              {"equilibria", list}};
}

inline int cmd_equilibria(const ExperimentConfig& cfg) {
  const auto model = cfg.build_model();
  const FieldKind kind = cfg.field_kind(FieldKind::rgd);
  const std::size_t grid_n = grid_or(cfg, 2001);
  const double tol = cfg.refine_tol.value_or(1e-10);
  const auto reports = find_equilibria(model, kind, grid_n, tol);
  write_json(output_dir(cfg) / equilibria_json, equilibria_document(reports, kind, grid_n, tol));
  return ok;
}

inline int cmd_basins(const ExperimentConfig& cfg) {
  const auto model = cfg.build_model();
  const FieldKind kind = cfg.field_kind(FieldKind::rgd);
  const std::size_t grid_n = grid_or(cfg, 2001);
  const double tol = cfg.refine_tol.value_or(1e-10);
  const auto reports = find_equilibria(model, kind, std::max<std::size_t>(grid_n, 3), tol);
  std::vector<Vector> roots;
  for (const auto& r : reports) roots.push_back(r.location);
  BasinScanOptions opts;
  opts.t_end = cfg.t_end.value_or(50.0);
  opts.h = cfg.h.value_or(0.01);
  opts.match_radius = cfg.match_radius.value_or(1e-3);
  opts.eq_tol = cfg.eq_tol.value_or(1e-9);
  const BasinMap map = basin_scan(model, kind, roots, grid_n, opts);

  const fs::path dir = output_dir(cfg);
  CsvWriter csv(dir / basins_csv);
  auto cols = indexed_columns("x_", model.dimension());
  cols.push_back("label");
  csv.header(cols);
  for (std::size_t i = 0; i < map.points.size(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < map.points[i].size(); ++j) row.push_back(format_double(map.points[i][j]));
    row.push_back(std::to_string(map.labels[i]));
    csv.row_strings(row);
  }
  csv.close();

  if (model.dimension() == 1) {
    CsvWriter b(dir / boundaries_csv);
    b.header({"left_label", "right_label", "left_x", "right_x", "boundary"});
    for (const auto& bd : basin_boundaries(map)) {
      b.row_strings({std::to_string(bd.left_label), std::to_string(bd.right_label), format_double(bd.left_x),
                     format_double(bd.right_x), format_double(bd.midpoint())});
    }
    b.close();
  }
  Json doc = equilibria_document(reports, kind, grid_n, tol);
  doc["basin_t_end"] = opts.t_end;
  doc["match_radius"] = opts.match_radius;
  doc["divergent_label"] = BasinMap::divergent;
  write_json(dir / equilibria_json, doc);
  return ok;
}

inline std::vector<double> radius_grid(double r_max, double step) {
  std::vector<double> radii;
  const auto count = static_cast<std::size_t>(std::floor(r_max / step + 1e-9));
  for (std::size_t i = 1; i <= count; ++i) radii.push_back(step * static_cast<double>(i));
  return radii;
}

inline void write_sweep_csv(const fs::path& path, const std::vector<CurvatureCertificate>& certs) {
  CsvWriter csv(path);
  csv.header({"r", "c1", "c2", "c3", "c4", "feasible_radius", "valid"});
  for (const auto& c : certs) {
    const double fr = c.quadratic_valid ? feasible_radius(c) : std::nan("");
    csv.row_strings({format_double(c.r), format_double(c.c1), format_double(c.c2), format_double(c.c3),
                     format_double(c.c4), format_double(fr), c.valid ? "1" : "0"});
  }
  csv.close();
}

inline EnvelopeFit fit_mode(const ExperimentConfig& cfg) {
  return cfg.fit_mode.value_or("delta-zero") == "delta-zero" ? EnvelopeFit::delta_zero : EnvelopeFit::epsilon_capped;
}

inline int cmd_certify(const ExperimentConfig& cfg) {
  const auto model = cfg.build_model();
  const Vector x_star = scalar_vector(cfg.x_star.value_or(0.0));
  const double r = cfg.r.value_or(0.4);
  const std::size_t grid_n = grid_or(cfg, 4001);
  const auto cert = estimate_curvature_constants(model, x_star, r, grid_n);
  const auto env = estimate_perturbation_envelope(model, x_star, r, grid_n, fit_mode(cfg), cfg.epsilon_cap.value_or(0.0));
  Json doc{{"certificate", to_json(cert)}, {"envelope", to_json(env)}};
  doc["feasible_radius"] = cert.quadratic_valid ? json_number(feasible_radius(cert)) : Json(nullptr);
  const fs::path dir = output_dir(cfg);
  write_json(dir / certificate_json, doc);
  write_sweep_csv(dir / constants_sweep_csv,
                  sweep_curvature_constants(model, x_star, radius_grid(r, cfg.r_step.value_or(0.01)), grid_n));
  return ok;
}

inline int cmd_bounds(const ExperimentConfig& cfg) {
  const auto model = cfg.build_model();
  const Vector x_star = scalar_vector(cfg.x_star.value_or(0.0));
  const Vector x0 = scalar_vector(cfg.x0.value_or(0.2));
  const double r = cfg.r.value_or(0.4);
  const std::size_t grid_n = grid_or(cfg, 4001);
  const auto cert = estimate_curvature_constants(model, x_star, r, grid_n);
  const auto env = estimate_perturbation_envelope(model, x_star, r, grid_n, fit_mode(cfg), cfg.epsilon_cap.value_or(0.0));
  const auto rep = theorem1_bounds(cert, env, x0, cfg.theta.value_or(0.5));
  const FlowOptions flow{cfg.t_end.value_or(50.0), cfg.h.value_or(0.01), cfg.eq_tol.value_or(1e-9),
                         IntegrationMethod::rk4};
  const auto traj = integrate_flow(model, FieldKind::rgd, x0, flow);
  const double violation = envelope_violation(rep, traj);

  Json doc{{"report", to_json(rep)},
           {"certificate", to_json(cert)},
           {"envelope", to_json(env)},
           {"simulation",
            Json{{"terminal_status", to_string(traj.status)},
                 {"final_state", json_vector(traj.final_state())},
                 {"max_envelope_violation", json_number(violation)},
                 {"contained", violation <= 0.0}}}};
  const fs::path dir = output_dir(cfg);
  write_json(dir / bounds_json, doc);
  CsvWriter csv(dir / theta_sweep_csv);
  csv.header({"theta", "transient_rate", "ultimate_radius", "T_bound", "admissible"});
  for (const auto& t : theta_tradeoff(cert, env, x0)) {
    csv.row_strings({format_double(t.theta), format_double(t.transient_rate), format_double(t.ultimate_radius),
                     format_double(t.T_bound), t.admissible() ? "1" : "0"});
  }
  csv.close();
  return ok;
}

inline int cmd_align(const ExperimentConfig& cfg) {
  const auto model = cfg.build_model();
  const Box region = Box::interval(cfg.lo.value_or(0.0), cfg.hi.value_or(1.0));
  const auto rep = alignment_check(model, region, grid_or(cfg, 10001));
  const fs::path dir = output_dir(cfg);
  CsvWriter csv(dir / alignment_csv);
  auto cols = indexed_columns("x_", model.dimension());
  cols.insert(cols.end(), {"lhs", "rhs", "holds"});
  csv.header(cols);
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < rep.points[i].size(); ++j) row.push_back(format_double(rep.points[i][j]));
    row.push_back(format_double(rep.lhs[i]));
    row.push_back(format_double(rep.rhs[i]));
    row.push_back(rep.holds[i] ? "1" : "0");
    csv.row_strings(row);
  }
  csv.close();
  Json doc{{"points", rep.points.size()},
           {"hold_count", rep.hold_count()},
           {"holding_intervals", intervals_json(rep.holding_intervals)},
           {"failing_intervals", intervals_json(rep.failing_intervals)}};
  if (rep.specialized_discrepancy) doc["specialized_discrepancy"] = json_number(*rep.specialized_discrepancy);
  write_json(dir / alignment_json, doc);
  return ok;
}

/// Headline numbers of the bump example, all recomputed.
inline Json headline_constants(const DecisionDependentModel& model) {
  auto root_near = [&](FieldKind kind, double lo, double hi) {
    for (const auto& r : find_equilibria(model, kind, 2001)) {
      if (r.location[0] > lo && r.location[0] < hi) return r.location[0];
    }
    throw NumericError("expected crossing not found");
  };
  const Vector origin = scalar_vector(0.0);
  const auto cert = estimate_curvature_constants(model, origin, 0.4, 4001);
  const auto sweep = sweep_curvature_constants(model, origin, radius_grid(0.4, 0.01), 4001);
  double best_r = 0.0, best_fr = -1.0;
  for (const auto& c : sweep) {
    if (c.quadratic_valid && feasible_radius(c) > best_fr) {
      best_fr = feasible_radius(c);
      best_r = c.r;
    }
  }
  return Json{{"rgd_crossing", root_near(FieldKind::rgd, 0.05, 0.95)},
              {"prm_crossing", root_near(FieldKind::prm, 0.05, 0.95)},
              {"r", 0.4},
              {"c1", cert.c1},
              {"c2", cert.c2},
              {"feasible_radius", feasible_radius(cert)},
              {"argmax_feasible_radius_r", best_r},
              {"certificate_valid_at_r", cert.valid}};
}

inline int cmd_repro(const ExperimentConfig& cfg) {
  const auto model = cfg.build_model();
  const std::string target = cfg.target.value_or("constants");
  const fs::path dir = output_dir(cfg);
  const ShiftFunction* p = model.bernoulli_shift();
  if (p == nullptr) throw ConfigError("repro needs a Bernoulli model");
  if (target == "fig1") {
    CsvWriter csv(dir / fig1_csv);
    csv.header({"x", "phi", "phi_prime", "pr", "grad_pr", "grad_x1_r"});
    for (double x : linspace(-0.5, 1.5, 2001)) {
      const Vector v = scalar_vector(x);
      csv.row({x, p->value(x), p->derivative(x), performative_risk(model, v), performative_gradient(model, v)[0],
               -rgd_vector_field(model, v)[0]});
    }
    csv.close();
  } else if (target == "fig2") {
    write_sweep_csv(dir / fig2_csv, sweep_curvature_constants(model, scalar_vector(0.0), radius_grid(0.5, 0.01),
                                                             grid_or(cfg, 5001)));
  } else {
    write_json(dir / constants_json, headline_constants(model));
  }
  return ok;
}

/// Reads --key value flags for every config key; returns those given.
struct RawFlags {
  std::map<std::string, std::string> values;
  std::string config_file;
};

inline void add_config_flags(CLI::App& sub, RawFlags& raw) {
  sub.add_option("--config", raw.config_file, "JSON config file; flags override its values");
  for (const auto& k : config_keys()) {
    const std::string key(k.key);
    sub.add_option_function<std::string>(
        std::string(k.flag), [&raw, key](const std::string& v) { raw.values[key] = v; }, std::string(k.help));
  }
}

inline Json flag_value(const ConfigKey& k, const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::logic_error&) {
      throw ConfigError("flag " + std::string(k.flag) + " expects a number, got '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("flag " + std::string(k.flag) + " expects a number, got '" + s + "'");
    return v;
  };
  switch (k.type) {
    case ValueType::number:
      return number(text);
    case ValueType::integer: {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(text, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != text.size() || text.empty())
        throw ConfigError("flag " + std::string(k.flag) + " expects an integer, got '" + text + "'");
      return static_cast<std::int64_t>(v);
    }
    case ValueType::string:
      return text;
    case ValueType::number_list: {
      Json arr = Json::array();
      std::size_t start = 0;
      while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) arr.push_back(number(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      return arr;
    }
  }
  return nullptr;
}

inline ExperimentConfig merge_config(const RawFlags& raw) {
  Json doc = raw.config_file.empty() ? Json::object() : read_json(raw.config_file);
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  for (const auto& k : config_keys()) {
    if (auto it = raw.values.find(std::string(k.key)); it != raw.values.end()) doc[std::string(k.key)] = flag_value(k, it->second);
  }
  return ExperimentConfig::from_json(doc);
}

/// Entry point shared by the perflow binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"perflow: performative prediction dynamics"};
  app.require_subcommand(1);
  // "-h" is left free because the step size flag is "--h".
  app.set_help_flag("--help", "Print help and exit");
  RawFlags raw;
  std::string target;
  using Command = int (*)(const ExperimentConfig&);
  const std::vector<std::pair<std::string, Command>> commands = {
      {"simulate", cmd_simulate}, {"basins", cmd_basins}, {"equilibria", cmd_equilibria},
      {"certify", cmd_certify},   {"bounds", cmd_bounds}, {"align", cmd_align},
      {"repro", cmd_repro}};
  std::map<CLI::App*, Command> dispatch;
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->set_help_flag("--help", "Print help and exit");
    add_config_flags(*sub, raw);
    if (name == "repro") sub->add_option("TARGET", target, "fig1 | fig2 | constants");
    dispatch[sub] = fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "perflow: " << e.what() << '\n';
    return config_error;
  }

  try {
    if (!target.empty()) raw.values["target"] = target;
    const ExperimentConfig cfg = merge_config(raw);
    for (const auto& [sub, fn] : dispatch) {
      if (sub->parsed()) return fn(cfg);
    }
    return config_error;
  } catch (const ConfigError& e) {
    err << "perflow: config error: " << e.what() << '\n';
    return config_error;
  } catch (const RangeError& e) {
    err << "perflow: config error: " << e.what() << '\n';
    return config_error;
  } catch (const Error& e) {
    err << "perflow: numeric error: " << e.what() << '\n';
    return numeric_error;
  } catch (const std::ios_base::failure& e) {
    err << "perflow: I/O error: " << e.what() << '\n';
    return io_failure;
  } catch (const fs::filesystem_error& e) {
    err << "perflow: I/O error: " << e.what() << '\n';
    return io_failure;
  }
}

}  // namespace perflow::cli
