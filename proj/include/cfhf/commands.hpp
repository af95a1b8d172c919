#pragma once

// Command implementations behind the cfhf executable. Each returns a Report:
// named tables rendered either as CSV blocks or as one JSON object.

#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cfhf/analysis.hpp"
#include "cfhf/config.hpp"
#include "cfhf/dataset.hpp"
#include "cfhf/fitting.hpp"
#include "cfhf/perturbation.hpp"
#include "cfhf/spectra.hpp"

namespace cfhf {

using Cell = std::variant<std::monostate, std::string, double, long long>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct Report {
  std::vector<std::pair<std::string, Table>> tables;
  nlohmann::json scalars = nlohmann::json::object();

  const Table& table(const std::string& name) const {
    for (const auto& [n, t] : tables) if (n == name) return t;
    throw InvalidArgument("report has no table '" + name + "'");
  }
};

enum class OutputFormat { Csv, Json };

namespace detail {

// Nine significant digits everywhere, so CSV and JSON carry the same numbers.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  return fmt::format("{:.9g}", v);
}

inline std::string cell_text(const Cell& c) {
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  if (std::holds_alternative<double>(c)) return format_number(std::get<double>(c));
  if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
  return {};
}

inline nlohmann::json cell_json(const Cell& c) {
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  if (std::holds_alternative<long long>(c)) return std::get<long long>(c);
  if (std::holds_alternative<double>(c)) {
    const double v = std::get<double>(c);
    if (!std::isfinite(v)) return format_number(v);  // JSON has no inf/nan
    return std::stod(format_number(v));
  }
  return nullptr;
}

inline nlohmann::json scalar_json(double v) { return cell_json(Cell{v}); }

}  // namespace detail

inline void render_csv(std::ostream& out, const Report& r) {
  bool first = true;
  for (const auto& [name, t] : r.tables) {
    if (r.tables.size() > 1) {
      if (!first) out << '\n';
      out << "# " << name << '\n';
    }
    first = false;
    for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << t.columns[k];
    out << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << detail::cell_text(row[k]);
      out << '\n';
    }
  }
  if (!r.scalars.empty()) {
    out << "\n# summary\nquantity,value\n";
    for (const auto& [k, v] : r.scalars.items()) {
      out << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    }
  }
}

inline nlohmann::json to_json(const Report& r) {
  nlohmann::json j = r.scalars;
  for (const auto& [name, t] : r.tables) {
    auto arr = nlohmann::json::array();
    for (const auto& row : t.rows) {
      nlohmann::json o = nlohmann::json::object();
      for (std::size_t k = 0; k < row.size(); ++k) o[t.columns[k]] = detail::cell_json(row[k]);
      arr.push_back(std::move(o));
    }
    j[name] = std::move(arr);
  }
  return j;
}

inline void render(std::ostream& out, const Report& r, OutputFormat f) {
  if (f == OutputFormat::Json) {
    out << to_json(r).dump(2) << '\n';
  } else {
    render_csv(out, r);
  }
}

inline std::string level_name(int n) { return "8." + std::to_string(n); }

// ---------------------------------------------------------------------------

// CF levels in the layout n, E_n, irrep, <Jz>. Levels closer than the
// doublet threshold (e.g. a vanishing crystal field) share one row.
inline Report cmd_levels(const RunConfig& cfg) {
  const auto cf = solve_cf(cfg.cf, cfg.system);
  Table t{{"level", "energy_cm1", "irrep", "jz", "moment_mu_b", "degeneracy"}, {}};
  for (std::size_t k = 0; k < cf.levels.size();) {
    std::size_t end = k + 1;
    while (end < cf.levels.size() && std::abs(cf.levels[end].energy - cf.levels[k].energy) < kDoubletThreshold) ++end;
    const auto& first = cf.levels[k];
    if (end == k + 1) {
      const Cell jz = first.is_doublet() ? Cell{first.jz(1)} : Cell{};
      const Cell mu = first.is_doublet() ? Cell{magnetic_moment(first, cfg.g_j)} : Cell{};
      t.rows.push_back({level_name(first.index), first.energy, std::string(irrep_name(first.irrep)), jz, mu,
                        static_cast<long long>(first.degeneracy)});
    } else {
      std::string irreps;
      long long deg = 0;
      for (std::size_t i = k; i < end; ++i) {
        const std::string name(irrep_name(cf.levels[i].irrep));
        if (irreps.find(name) == std::string::npos) irreps += (irreps.empty() ? "" : "+") + name;
        deg += cf.levels[i].degeneracy;
      }
      t.rows.push_back({level_name(first.index) + "-" + level_name(cf.levels[end - 1].index), first.energy, irreps,
                        Cell{}, Cell{}, deg});
    }
    k = end;
  }
  Report r;
  r.tables.emplace_back("levels", std::move(t));
  return r;
}

// Hyperfine-resolved lines of one transition from exact diagonalization,
// optionally beside the second-order perturbative energies. Singlet-singlet
// lines are degenerate in +-m_z and are reported once per |m_z|.
inline Report cmd_hf(const RunConfig& cfg, std::pair<int, int> transition, bool perturbative) {
  const auto [ni, nf] = transition;
  const auto cf = solve_cf(cfg.cf, cfg.system);
  if (ni < 1 || nf < 1 || ni > cf.size() || nf > cf.size() || ni == nf) {
    throw InvalidArgument("unknown transition " + level_name(ni) + "-" + level_name(nf) + " (levels 8.1.." +
                          level_name(cf.size()) + ")");
  }
  const auto levels = hf_levels_exact(cf, cfg.cf, cfg.hf);
  const auto lines = transition_lines(levels, ni, nf);
  const bool merge = !cf.level(ni).is_doublet() && !cf.level(nf).is_doublet();

  Table t{{"transition", "m_z", "energy_cm1"}, {}};
  if (perturbative) {
    t.columns.emplace_back("energy_perturbative_cm1");
    t.columns.emplace_back("difference_cm1");
  }
  const std::string name = level_name(ni) + "-" + level_name(nf);
  for (const auto& line : lines) {
    if (merge && line.m_z.twice() < 0) continue;
    std::vector<Cell> row{name, merge ? "+-" + line.m_z.str() : line.m_z.str(), line.energy};
    if (perturbative) {
      const double e = cf.level(nf).energy + delta_full(nf, 1, line.m_z, cf, cfg.hf) - cf.level(ni).energy -
                       delta_full(ni, 1, line.m_z, cf, cfg.hf);
      row.emplace_back(e);
      row.emplace_back(line.energy - e);
    }
    t.rows.push_back(std::move(row));
  }
  Report r;
  r.tables.emplace_back("lines", std::move(t));
  return r;
}

enum class FitMode { CfAj, B, RefractiveIndex };

inline std::vector<RefractivePoint> load_refractive_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open refractive-index data '" + path + "'");
  std::vector<RefractivePoint> pts;
  std::string line;
  int no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = detail::split_csv(t);
    if (!header) {
      if (cells != std::vector<std::string>{"wavenumber_cm1", "refractive_index"}) {
        throw ParseError(path, no, "expected header 'wavenumber_cm1,refractive_index'");
      }
      header = true;
      continue;
    }
    if (cells.size() != 2) throw ParseError(path, no, "expected 2 columns, found " + std::to_string(cells.size()));
    try {
      pts.push_back({detail::parse_double(cells[0], "wavenumber_cm1"), detail::parse_double(cells[1], "refractive_index")});
    } catch (const InvalidArgument& e) {
      throw ParseError(path, no, e.what());
    }
  }
  if (!header) throw ParseError(path, 0, "missing header");
  return pts;
}

namespace detail {

inline void add_fit_tables(Report& r, const FitResult& f) {
  Table p{{"parameter", "value", "error"}, {}};
  for (std::size_t k = 0; k < f.names.size(); ++k) {
    p.rows.push_back({f.names[k], f.params(static_cast<Eigen::Index>(k)), f.param_errors(static_cast<Eigen::Index>(k))});
  }
  Table c{{"row"}, {}};
  for (const auto& n : f.names) c.columns.push_back(n);
  for (std::size_t a = 0; a < f.names.size(); ++a) {
    std::vector<Cell> row{f.names[a]};
    for (std::size_t b = 0; b < f.names.size(); ++b) {
      row.emplace_back(f.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
    }
    c.rows.push_back(std::move(row));
  }
  r.tables.emplace_back("parameters", std::move(p));
  r.tables.emplace_back("covariance", std::move(c));
  r.scalars["chi2"] = scalar_json(f.chi2);
  r.scalars["dof"] = f.dof;
  r.scalars["chi2_per_dof"] = scalar_json(f.dof > 0 ? f.chi2 / f.dof : std::nan(""));
  r.scalars["iterations"] = f.iterations;
  if (f.singular_direction) {
    std::string dir;
    for (std::size_t k = 0; k < f.names.size(); ++k) {
      dir += (k ? " " : "") + f.names[k] + "=" + format_number((*f.singular_direction)(static_cast<Eigen::Index>(k)));
    }
    r.scalars["undetermined_direction"] = dir;
  }
}

inline FitMask mask_from_names(const std::vector<std::string>& names) {
  FitMask m{};
  const auto all = cf_aj_names();
  for (const auto& n : names) {
    const auto it = std::find(all.begin(), all.end(), n);
    if (it == all.end()) throw InvalidArgument("unknown fit parameter '" + n + "'");
    m[static_cast<std::size_t>(it - all.begin())] = true;
  }
  return m;
}

}  // namespace detail

inline Report cmd_fit(const RunConfig& cfg, const std::string& data_path, FitMode mode) {
  Report r;
  if (mode == FitMode::RefractiveIndex) {
    const auto pts = load_refractive_csv(data_path);
    const auto f = fit_refractive(pts, {cfg.refractive_a, cfg.refractive_nu0, cfg.refractive_c}, cfg.fit);
    r.scalars["mode"] = "refindex";
    detail::add_fit_tables(r, f);
    Table res{{"wavenumber_cm1", "measured", "predicted", "residual"}, {}};
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double e = f.residuals(static_cast<Eigen::Index>(i));
      res.rows.push_back({pts[i].nu, pts[i].n, pts[i].n - e, e});
    }
    r.tables.emplace_back("residuals", std::move(res));
    return r;
  }

  const auto ds = load_dataset(data_path);
  FitResult f;
  if (mode == FitMode::CfAj) {
    f = fit_cf_aj(ds, cfg.cf, cfg.hf.a_j, detail::mask_from_names(cfg.free_parameters), cfg.fit, cfg.system);
    r.scalars["mode"] = "cf_aj";
  } else {
    f = fit_b(ds, cfg.cf, cfg.hf.a_j, cfg.initial_b, cfg.fit, cfg.system);
    r.scalars["mode"] = "b";
  }
  detail::add_fit_tables(r, f);
  Table res{{"transition", "m_z", "measured", "sigma", "predicted", "residual"}, {}};
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const auto& row = ds.rows[i];
    const double w = f.residuals(static_cast<Eigen::Index>(i));
    const double s = *row.uncertainty;
    res.rows.push_back({level_name(row.n_init) + "-" + level_name(row.n_final),
                        row.hf_averaged ? Cell{} : Cell{row.m_z.str()}, row.energy, s, row.energy - w * s, w});
  }
  if (mode == FitMode::CfAj) {
    for (std::size_t i = 0; i < ds.moments.size(); ++i) {
      const auto& m = ds.moments[i];
      const double w = f.residuals(static_cast<Eigen::Index>(ds.rows.size() + i));
      res.rows.push_back({"jz:" + level_name(m.level), Cell{}, m.jz, m.sigma, m.jz - w * m.sigma, w});
    }
  }
  r.tables.emplace_back("residuals", std::move(res));
  return r;
}

inline Report cmd_analyze(const std::string& data_path) {
  const auto a = analyze_lambda(load_dataset(data_path));
  Table d{{"series", "transition", "m_z", "value_cm1"}, {}};
  for (const auto* s : {&a.d1, &a.d2, &a.d3}) {
    for (const auto& p : s->points) {
      d.rows.push_back({"D" + std::to_string(s->which), level_name(s->n_init) + "-" + level_name(s->n_final),
                        p.m_z.str(), p.value});
    }
  }
  Table sl{{"series", "slope", "slope_err", "s_value", "intercept"}, {}};
  const std::pair<const char*, const SlopeFit*> fits[] = {{"D1", &a.fit1}, {"D2", &a.fit2}, {"D3", &a.fit3}};
  for (const auto& [name, f] : fits) sl.rows.push_back({name, f->slope, f->slope_err, f->s_value(), f->intercept});
  Table lam{{"coefficient", "value_cm1", "error_cm1"}, {}};
  lam.rows.push_back({"lambda1", a.lambda1.value, a.lambda1.error});
  lam.rows.push_back({"lambda2", a.lambda2.value, a.lambda2.error});
  lam.rows.push_back({"lambda3", a.lambda3.value, a.lambda3.error});
  Report r;
  r.tables.emplace_back("differences", std::move(d));
  r.tables.emplace_back("slopes", std::move(sl));
  r.tables.emplace_back("lambda", std::move(lam));
  return r;
}

// Lines of every configured transition with Boltzmann intensities at the
// configured temperature.
inline std::vector<TransitionLine> synth_lines(const RunConfig& cfg) {
  if (cfg.transitions.empty()) return {};
  const auto cf = solve_cf(cfg.cf, cfg.system);
  const auto levels = hf_levels_exact(cf, cfg.cf, cfg.hf);
  std::vector<TransitionLine> all;
  for (const auto& [ni, nf] : cfg.transitions) {
    if (ni < 1 || nf < 1 || ni > cf.size() || nf > cf.size() || ni == nf) {
      throw InvalidArgument("unknown transition " + level_name(ni) + "-" + level_name(nf));
    }
    auto lines = transition_lines(levels, ni, nf);
    assign_intensities(lines, cf, levels, cfg.temperature, cfg.intensity);
    all.insert(all.end(), lines.begin(), lines.end());
  }
  return all;
}

inline std::vector<double> synth_grid(const RunConfig& cfg, const std::vector<TransitionLine>& lines) {
  if (!cfg.grid.automatic()) return linear_grid(cfg.grid.min, cfg.grid.max, cfg.grid.points);
  if (lines.empty()) throw InvalidArgument("synth: no transitions; give grid_min, grid_max and grid_points");
  double lo = lines.front().energy;
  double hi = lo;
  for (const auto& l : lines) {
    lo = std::min(lo, l.energy);
    hi = std::max(hi, l.energy);
  }
  if (cfg.isotope.enabled) {
    lo = std::min(lo, lo + cfg.isotope.splitting);
    hi = std::max(hi, hi + cfg.isotope.splitting);
  }
  const double step = 1e-3;
  lo -= 10.0 * cfg.peak.fwhm;
  hi += 10.0 * cfg.peak.fwhm;
  return linear_grid(lo, hi, static_cast<int>(std::ceil((hi - lo) / step)) + 1);
}

inline Report cmd_synth(const RunConfig& cfg) {
  const auto lines = synth_lines(cfg);
  const auto spec = synthesize(lines, cfg.peak, cfg.isotope, synth_grid(cfg, lines));
  Table t{{"wavenumber_cm1", "absorbance"}, {}};
  t.rows.reserve(spec.grid.size());
  for (std::size_t k = 0; k < spec.grid.size(); ++k) t.rows.push_back({spec.grid[k], spec.absorbance[k]});
  Report r;
  r.tables.emplace_back("spectrum", std::move(t));
  return r;
}

}  // namespace cfhf
