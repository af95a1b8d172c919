#pragma once

// Weighted least-squares fits: crystal field + A_J against first-order line
// positions, B against exact hyperfine spectra, and the refractive-index
// pole model.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfhf/dataset.hpp"
#include "cfhf/hamiltonian.hpp"
#include "cfhf/least_squares.hpp"

namespace cfhf {

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd param_errors;
  double chi2 = 0.0;
  int dof = 0;
  Eigen::VectorXd residuals;  // (measured - predicted) / sigma, dataset order
  int iterations = 0;
  std::vector<double> chi2_history;
  std::optional<Eigen::VectorXd> singular_direction;

  double value(std::string_view name) const { return params(index(name)); }
  double error(std::string_view name) const { return param_errors(index(name)); }
  Eigen::Index index(std::string_view name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InvalidArgument("fit has no parameter '" + std::string(name) + "'");
    return it - names.begin();
  }
};

namespace detail {

inline FitResult to_fit_result(std::vector<std::string> names, const LeastSquaresResult& r) {
  return {std::move(names), r.params, r.covariance, r.errors, r.chi2, r.dof, r.residuals,
          r.iterations, r.chi2_history, r.singular_direction};
}

inline double row_sigma(const TransitionLine& row) { return *row.uncertainty; }

}  // namespace detail

// CF transition energy plus the first-order hyperfine shift
// a_j * m_z * (<Jz>_final - <Jz>_init) on the sigma=+1 members. HF-averaged
// rows get the CF energy alone (the linear shift averages out).
inline std::vector<double> predict_lines_first_order(const CFSpectrum& cf, double a_j,
                                                     const std::vector<TransitionLine>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const auto& lo = cf.level(row.n_init);
    const auto& hi = cf.level(row.n_final);
    double e = hi.energy - lo.energy;
    if (!row.hf_averaged) e += a_j * row.m_z.value() * (hi.jz(1) - lo.jz(1));
    out.push_back(e);
  }
  return out;
}

inline std::vector<double> predict_lines_first_order(const CFParameters& p, double a_j,
                                                     const std::vector<TransitionLine>& rows,
                                                     const SpinSystem& sys = {}) {
  p.validate();
  return predict_lines_first_order(solve_cf(p, sys), a_j, rows);
}

// Parameter order: the 7 CF coefficients, then a_j.
inline constexpr std::size_t kCfAjCount = CFParameters::count + 1;
using FitMask = std::array<bool, kCfAjCount>;  // true = free

inline FitMask default_cf_aj_mask() {
  FitMask m{};
  m.fill(true);
  m[3] = false;  // b4m4: fixed by the choice of x axis
  return m;
}

inline std::vector<std::string> cf_aj_names() {
  std::vector<std::string> n(CFParameters::names.begin(), CFParameters::names.end());
  n.emplace_back("a_j");
  return n;
}

// Typical magnitudes, used for finite-difference steps and convergence.
inline std::array<double, kCfAjCount> cf_aj_scales() {
  return {0.1, 1e-3, 1e-2, 1e-2, 1e-5, 1e-4, 1e-4, 1e-2};
}

// Simultaneous CF + A_J fit of HF-resolved lines, HF-averaged rows and <Jz>
// pseudo-observations. Fixed parameters keep their initial values.
inline FitResult fit_cf_aj(const TransitionDataset& ds, const CFParameters& initial, double a_j0,
                           const FitMask& mask = default_cf_aj_mask(), const LeastSquaresOptions& opt = {},
                           const SpinSystem& sys = {}) {
  ds.require_uncertainties();
  initial.validate();
  const auto all_names = cf_aj_names();
  const auto scales = cf_aj_scales();
  std::array<double, kCfAjCount> full{};
  const auto cf0 = initial.as_array();
  std::copy(cf0.begin(), cf0.end(), full.begin());
  full.back() = a_j0;

  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < kCfAjCount; ++k) if (mask[k]) free.push_back(k);
  if (free.empty()) throw InvalidArgument("fit_cf_aj: no free parameters");
  const auto n_obs = ds.observation_count();
  if (n_obs <= free.size()) {
    throw InvalidArgument("fit_cf_aj: " + std::to_string(n_obs) + " observations for " +
                          std::to_string(free.size()) + " free parameters (need dof >= 1)");
  }
  for (const auto& row : ds.rows) {
    if (row.n_init < 1 || row.n_final < 1 || row.n_init > sys.electronic_dim() || row.n_final > sys.electronic_dim()) {
      throw InvalidArgument("fit_cf_aj: level index out of range in row 8." + std::to_string(row.n_init) + "-8." +
                            std::to_string(row.n_final));
    }
  }

  auto expand = [full, free](const Eigen::VectorXd& x) {
    auto f = full;
    for (std::size_t k = 0; k < free.size(); ++k) f[free[k]] = x(static_cast<Eigen::Index>(k));
    return f;
  };

  LeastSquaresProblem pb;
  pb.residuals = [&ds, &sys, expand, n_obs](const Eigen::VectorXd& x) {
    const auto f = expand(x);
    std::array<double, CFParameters::count> cf{};
    std::copy(f.begin(), f.end() - 1, cf.begin());
    Eigen::VectorXd r(static_cast<Eigen::Index>(n_obs));
    try {
      const auto spec = solve_cf(CFParameters::from_array(cf), sys);
      const auto pred = predict_lines_first_order(spec, f.back(), ds.rows);
      Eigen::Index k = 0;
      for (std::size_t i = 0; i < ds.rows.size(); ++i, ++k) {
        r(k) = (ds.rows[i].energy - pred[i]) / detail::row_sigma(ds.rows[i]);
      }
      for (const auto& m : ds.moments) r(k++) = (m.jz - spec.level(m.level).jz(1)) / m.sigma;
    } catch (const Error&) {
      // Parameters where the level structure cannot be classified.
      r.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return r;
  };
  Eigen::VectorXd x0(static_cast<Eigen::Index>(free.size()));
  pb.scale.resize(x0.size());
  for (std::size_t k = 0; k < free.size(); ++k) {
    x0(static_cast<Eigen::Index>(k)) = full[free[k]];
    pb.scale(static_cast<Eigen::Index>(k)) = scales[free[k]];
    pb.names.push_back(all_names[free[k]]);
  }
  if (!pb.residuals(x0).allFinite()) {
    throw InvalidArgument("fit_cf_aj: initial parameters do not give a classifiable spectrum");
  }
  return detail::to_fit_result(pb.names, levenberg_marquardt(pb, x0, opt));
}

// Line energies from the exact electron-nuclear spectrum (sigma=+1 branch);
// HF-averaged rows get the mean over m_z.
inline std::vector<double> predict_lines_exact(const std::vector<HFLevel>& levels, const SpinSystem& sys,
                                               const std::vector<TransitionLine>& rows) {
  const auto ms = nuclear_projections(sys);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    auto line = [&](HalfInt m) {
      return find_hf_level(levels, row.n_final, 1, m).energy - find_hf_level(levels, row.n_init, 1, m).energy;
    };
    if (row.hf_averaged) {
      double acc = 0.0;
      for (auto m : ms) acc += line(m);
      out.push_back(acc / double(ms.size()));
    } else {
      out.push_back(line(row.m_z));
    }
  }
  return out;
}

// One-parameter fit of the quadrupole constant with CF parameters and a_j
// held fixed. Moment rows do not depend on B and are ignored.
inline FitResult fit_b(const TransitionDataset& ds, const CFParameters& p, double a_j, double b0,
                       const LeastSquaresOptions& opt = {}, const SpinSystem& sys = {}) {
  ds.require_uncertainties();
  p.validate();
  if (ds.rows.size() < 2) throw InvalidArgument("fit_b: need at least 2 rows");
  const auto cf = solve_cf(p, sys);
  LeastSquaresProblem pb;
  pb.names = {"b_quad"};
  pb.scale = Eigen::VectorXd::Constant(1, 0.01);
  pb.residuals = [&ds, &cf, &p, &sys, a_j](const Eigen::VectorXd& x) {
    const auto levels = hf_levels_exact(cf, p, {a_j, x(0)});
    const auto pred = predict_lines_exact(levels, sys, ds.rows);
    Eigen::VectorXd r(static_cast<Eigen::Index>(ds.rows.size()));
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
      r(static_cast<Eigen::Index>(i)) = (ds.rows[i].energy - pred[i]) / detail::row_sigma(ds.rows[i]);
    }
    return r;
  };
  return detail::to_fit_result(pb.names, levenberg_marquardt(pb, Eigen::VectorXd::Constant(1, b0), opt));
}

// n(nu) = a / (nu - nu0) + c.
struct RefractiveModel {
  double a = 0.0;
  double nu0 = 0.0;
  double c = 0.0;
  double operator()(double nu) const { return a / (nu - nu0) + c; }
};

struct RefractivePoint {
  double nu = 0.0;
  double n = 0.0;
};

// Unweighted fit; the covariance is scaled by chi2/dof. A constant data set
// leaves nu0 undetermined, which is reported through singular_direction and
// an infinite error rather than an exception.
inline FitResult fit_refractive(const std::vector<RefractivePoint>& pts, const RefractiveModel& initial,
                                const LeastSquaresOptions& opt = {}) {
  if (pts.size() < 4) throw InvalidArgument("fit_refractive needs at least 4 points");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : pts) {
    lo = std::min(lo, p.nu);
    hi = std::max(hi, p.nu);
  }
  auto outside = [lo, hi](double nu0) { return nu0 < lo || nu0 > hi; };
  if (!outside(initial.nu0)) throw InvalidArgument("fit_refractive: initial nu0 lies inside the data range");

  LeastSquaresProblem pb;
  pb.names = {"a", "nu0", "c"};
  pb.scale = Eigen::Vector3d(std::max(std::abs(initial.a), 1.0), std::max(std::abs(initial.nu0), 1.0),
                             std::max(std::abs(initial.c), 1.0));
  // The pole may not cross the data.
  const bool above = initial.nu0 > hi;
  pb.admissible = [lo, hi, above](const Eigen::VectorXd& x) { return above ? x(1) > hi : x(1) < lo; };
  pb.residuals = [&pts](const Eigen::VectorXd& x) {
    const RefractiveModel m{x(0), x(1), x(2)};
    Eigen::VectorXd r(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) r(static_cast<Eigen::Index>(i)) = pts[i].n - m(pts[i].nu);
    return r;
  };
  pb.on_singular = SingularPolicy::Report;
  auto res = detail::to_fit_result(pb.names, levenberg_marquardt(pb, Eigen::Vector3d(initial.a, initial.nu0, initial.c), opt));
  if (res.dof > 0) {
    // Undetermined directions keep their infinite variance.
    const double s2 = res.chi2 / res.dof;
    for (Eigen::Index i = 0; i < res.covariance.rows(); ++i) {
      for (Eigen::Index j = 0; j < res.covariance.cols(); ++j) {
        if (std::isfinite(res.covariance(i, j))) res.covariance(i, j) *= s2;
      }
    }
    res.param_errors = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return res;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticOptions {
  double sigma_12 = 0.01;   // 8.1 -> 8.2 lines
  double sigma_13 = 0.001;  // 8.1 -> 8.3 lines
  double sigma_23 = 0.003;  // 8.2 -> 8.3 lines
  double sigma_avg = 0.5;   // HF-averaged 8.1 -> 8.n centroids, n >= 4
  double sigma_moment = 0.01;
  std::vector<int> moment_levels{1, 6};
  bool noise = false;
  unsigned seed = 1;
};

// Line list shaped like the measured one, generated with the first-order
// model (so a fit of the same model can recover the input exactly).
inline TransitionDataset synthetic_dataset(const CFParameters& p, double a_j, const SyntheticOptions& o = {},
                                           const SpinSystem& sys = {}) {
  const auto cf = solve_cf(p, sys);
  TransitionDataset ds;
  ds.metadata.source = "synthetic";
  const struct { int ni, nf; double sigma; } fams[] = {{1, 2, o.sigma_12}, {1, 3, o.sigma_13}, {2, 3, o.sigma_23}};
  for (const auto& f : fams) {
    for (auto m : nuclear_projections(sys)) {
      TransitionLine row{f.ni, f.nf, m, 0.0, f.sigma, std::nullopt, false};
      ds.rows.push_back(row);
    }
  }
  for (int n = 4; n <= cf.size(); ++n) ds.rows.push_back({1, n, HalfInt{}, 0.0, o.sigma_avg, std::nullopt, true});
  const auto pred = predict_lines_first_order(cf, a_j, ds.rows);
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < ds.rows.size(); ++k) {
    ds.rows[k].energy = pred[k] + (o.noise ? gauss(rng) * *ds.rows[k].uncertainty : 0.0);
  }
  for (int n : o.moment_levels) {
    const double jz = cf.level(n).jz(1);
    ds.moments.push_back({n, jz + (o.noise ? gauss(rng) * o.sigma_moment : 0.0), o.sigma_moment});
  }
  return ds;
}

}  // namespace cfhf
