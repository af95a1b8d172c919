#pragma once

// Inverse analysis of measured line lists and spectra: neighbour differences
// D(m_z), slope regression, lambda extraction and peak fitting.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfhf/dataset.hpp"
#include "cfhf/least_squares.hpp"
#include "cfhf/spectra.hpp"

namespace cfhf {

struct DifferencePoint {
  HalfInt m_z;  // lower member of the neighbouring pair
  double value = 0.0;
  std::optional<double> sigma;
};

// which = 1 for 8.2->8.3, 2 for 8.1->8.2, 3 for 8.1->8.3; 0 for any other family.
struct DifferenceSeries {
  int which = 0;
  int n_init = 0;
  int n_final = 0;
  std::vector<DifferencePoint> points;
};

inline int difference_index(int n_init, int n_final) {
  if (n_init == 2 && n_final == 3) return 1;
  if (n_init == 1 && n_final == 2) return 2;
  if (n_init == 1 && n_final == 3) return 3;
  return 0;
}

// D(m) = E(m+1) - E(m) over a contiguous, symmetric set of m_z values.
inline DifferenceSeries difference_series(std::vector<TransitionLine> lines) {
  if (lines.size() < 2) throw InvalidArgument("difference_series needs at least 2 lines");
  const int ni = lines.front().n_init;
  const int nf = lines.front().n_final;
  for (const auto& l : lines) {
    if (l.n_init != ni || l.n_final != nf) throw InvalidArgument("difference_series: lines from more than one transition");
    if (l.hf_averaged) throw InvalidArgument("difference_series: HF-averaged row has no m_z");
  }
  std::sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.m_z < b.m_z; });
  for (std::size_t k = 1; k < lines.size(); ++k) {
    if (lines[k].m_z == lines[k - 1].m_z) throw InvalidArgument("difference_series: duplicate m_z " + lines[k].m_z.str());
    if (lines[k].m_z.twice() - lines[k - 1].m_z.twice() != 2) {
      throw InvalidArgument("difference_series: missing m_z between " + lines[k - 1].m_z.str() + " and " +
                            lines[k].m_z.str());
    }
  }
  if (lines.front().m_z != -lines.back().m_z) {
    throw InvalidArgument("difference_series: m_z range " + lines.front().m_z.str() + ".." + lines.back().m_z.str() +
                          " is not symmetric");
  }
  DifferenceSeries s{difference_index(ni, nf), ni, nf, {}};
  for (std::size_t k = 0; k + 1 < lines.size(); ++k) {
    DifferencePoint p{lines[k].m_z, lines[k + 1].energy - lines[k].energy, std::nullopt};
    if (lines[k].uncertainty && lines[k + 1].uncertainty) p.sigma = std::hypot(*lines[k].uncertainty, *lines[k + 1].uncertainty);
    s.points.push_back(p);
  }
  return s;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_err = 0.0;
  double s_value() const { return -slope; }  // sign convention of the reported slopes
};

// Weighted straight line through the series. Point sigmas are used as
// weights when every point has one (or `uncertainties` overrides them); the
// slope error is the regression covariance scaled by the reduced chi2.
inline SlopeFit fit_slope(const DifferenceSeries& series, std::optional<std::vector<double>> uncertainties = {}) {
  const std::size_t n = series.points.size();
  if (n < 3) throw InvalidArgument("fit_slope needs at least 3 points");
  if (uncertainties && uncertainties->size() != n) throw InvalidArgument("fit_slope: uncertainty count mismatch");
  std::vector<double> w(n, 1.0);
  const bool all_sigma = std::all_of(series.points.begin(), series.points.end(), [](const auto& p) { return p.sigma.has_value(); });
  for (std::size_t k = 0; k < n; ++k) {
    std::optional<double> s = uncertainties ? std::optional((*uncertainties)[k]) : (all_sigma ? series.points[k].sigma : std::nullopt);
    if (s) {
      if (!(*s > 0.0)) throw InvalidArgument("fit_slope: uncertainties must be positive");
      w[k] = 1.0 / (*s * *s);
    }
  }
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = series.points[k].m_z.value();
    const double y = series.points[k].value;
    sw += w[k];
    sx += w[k] * x;
    sy += w[k] * y;
    sxx += w[k] * x * x;
    sxy += w[k] * x * y;
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 1e-12 * sw * sxx)) throw InvalidArgument("fit_slope: degenerate abscissae");
  SlopeFit f;
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  double chi2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = series.points[k].value - f.intercept - f.slope * series.points[k].m_z.value();
    chi2 += w[k] * r * r;
  }
  f.slope_err = std::sqrt(sw / det * chi2 / double(n - 2));
  return f;
}

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

inline void require_same_grid(const DifferenceSeries& a, const DifferenceSeries& b) {
  bool same = a.points.size() == b.points.size();
  for (std::size_t k = 0; same && k < a.points.size(); ++k) same = a.points[k].m_z == b.points[k].m_z;
  if (!same) {
    throw InvalidArgument("difference series D" + std::to_string(a.which) + " and D" + std::to_string(b.which) +
                          " have different m_z grids");
  }
}

}  // namespace detail

// lambda1 = -(s(D2) + s(D3)) / 4 with s the fitted dD/dm_z.
inline Estimate extract_lambda1(const DifferenceSeries& d2, const DifferenceSeries& d3) {
  detail::require_same_grid(d2, d3);
  const auto f2 = fit_slope(d2);
  const auto f3 = fit_slope(d3);
  return {-(f2.slope + f3.slope) / 4.0, std::hypot(f2.slope_err, f3.slope_err) / 4.0};
}

// lambda2 = (s2 + s3 - 2 s1) / 4, lambda3 = (s2 + s3 + 2 s1) / 4.
inline std::pair<Estimate, Estimate> extract_lambda23(const DifferenceSeries& d1, const DifferenceSeries& d2,
                                                      const DifferenceSeries& d3) {
  detail::require_same_grid(d1, d2);
  detail::require_same_grid(d2, d3);
  const auto f1 = fit_slope(d1);
  const auto f2 = fit_slope(d2);
  const auto f3 = fit_slope(d3);
  const double err = std::sqrt(f2.slope_err * f2.slope_err + f3.slope_err * f3.slope_err +
                               4.0 * f1.slope_err * f1.slope_err) / 4.0;
  return {{(f2.slope + f3.slope - 2.0 * f1.slope) / 4.0, err}, {(f2.slope + f3.slope + 2.0 * f1.slope) / 4.0, err}};
}

struct LambdaAnalysis {
  DifferenceSeries d1, d2, d3;
  SlopeFit fit1, fit2, fit3;
  Estimate lambda1, lambda2, lambda3;
};

inline LambdaAnalysis analyze_lambda(const TransitionDataset& ds) {
  LambdaAnalysis a;
  const std::pair<int, int> fam[3] = {{2, 3}, {1, 2}, {1, 3}};
  DifferenceSeries* slots[3] = {&a.d1, &a.d2, &a.d3};
  for (int k = 0; k < 3; ++k) {
    const auto rows = ds.family(fam[k].first, fam[k].second);
    if (rows.empty()) {
      throw InvalidArgument("dataset has no 8." + std::to_string(fam[k].first) + "-8." +
                            std::to_string(fam[k].second) + " lines");
    }
    *slots[k] = difference_series(rows);
  }
  a.fit1 = fit_slope(a.d1);
  a.fit2 = fit_slope(a.d2);
  a.fit3 = fit_slope(a.d3);
  a.lambda1 = extract_lambda1(a.d2, a.d3);
  std::tie(a.lambda2, a.lambda3) = extract_lambda23(a.d1, a.d2, a.d3);
  return a;
}

// ---------------------------------------------------------------------------
// Peak fitting

struct PeakFitResult {
  std::vector<PeakModel> peaks;        // ascending center
  std::vector<std::string> names;      // parameter order of `covariance`
  Eigen::MatrixXd covariance;          // scaled by chi2/dof (unit weights)
  Eigen::VectorXd errors;
  double chi2 = 0.0;                   // residual sum of squares
  int dof = 0;
  int iterations = 0;
  std::vector<double> chi2_history;
};

namespace detail {

inline std::vector<double> smooth3(const std::vector<double>& y) {
  std::vector<double> s(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = std::min(k + 1, y.size() - 1);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += y[j];
    s[k] = acc / double(hi - lo + 1);
  }
  return s;
}

// Indices of local maxima, tallest first.
inline std::vector<std::size_t> local_maxima(const std::vector<double>& y) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 1; k + 1 < y.size(); ++k) {
    if (y[k] > y[k - 1] && y[k] >= y[k + 1] && y[k] > 0.0) idx.push_back(k);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return y[a] > y[b]; });
  return idx;
}

// Full width at half maximum around index k, linearly interpolated.
inline double half_max_width(const std::vector<double>& x, const std::vector<double>& y, std::size_t k) {
  const double half = 0.5 * y[k];
  std::size_t l = k;
  while (l > 0 && y[l] > half) --l;
  std::size_t r = k;
  while (r + 1 < y.size() && y[r] > half) ++r;
  auto cross = [&](std::size_t a, std::size_t b) {
    if (y[a] == y[b]) return x[a];
    return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
  };
  const double xl = l == k ? x[k] : cross(l, l + 1);
  const double xr = r == k ? x[k] : cross(r - 1, r);
  return xr - xl;
}

struct PeakLayout {
  int n_peaks = 0;
  bool shared = false;
  int size() const { return shared ? 1 + 2 * n_peaks : 3 * n_peaks; }
  int center(int k) const { return shared ? 1 + 2 * k : 3 * k; }
  int amplitude(int k) const { return shared ? 2 + 2 * k : 3 * k + 1; }
  int fwhm(int k) const { return shared ? 0 : 3 * k + 2; }
};

inline std::vector<PeakModel> unpack(const PeakLayout& lay, const Eigen::VectorXd& x, PeakShape shape) {
  std::vector<PeakModel> peaks;
  for (int k = 0; k < lay.n_peaks; ++k) peaks.push_back({shape, x(lay.center(k)), x(lay.fwhm(k)), x(lay.amplitude(k))});
  return peaks;
}

inline Eigen::VectorXd pack(const PeakLayout& lay, const std::vector<PeakModel>& peaks) {
  Eigen::VectorXd x(lay.size());
  for (int k = 0; k < lay.n_peaks; ++k) {
    const auto& p = peaks[static_cast<std::size_t>(k)];
    x(lay.center(k)) = p.center;
    x(lay.amplitude(k)) = p.amplitude;
    x(lay.fwhm(k)) = p.fwhm;  // shared layout keeps the last one written
  }
  if (lay.shared) {
    double mean = 0.0;
    for (const auto& p : peaks) mean += p.fwhm;
    x(0) = mean / double(peaks.size());
  }
  return x;
}

inline LeastSquaresResult run_peak_fit(const Spectrum& spec, const PeakLayout& lay, PeakShape shape,
                                       const std::vector<PeakModel>& start, const LeastSquaresOptions& opt) {
  const double lo = spec.grid.front();
  const double hi = spec.grid.back();
  const double span = hi - lo;
  const double peak = *std::max_element(spec.absorbance.begin(), spec.absorbance.end());
  const double inf = std::numeric_limits<double>::infinity();

  LeastSquaresProblem pb;
  pb.residuals = [&spec, lay, shape](const Eigen::VectorXd& x) {
    const auto peaks = unpack(lay, x, shape);
    Eigen::VectorXd r(static_cast<Eigen::Index>(spec.grid.size()));
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
      double model = 0.0;
      for (const auto& p : peaks) model += p(spec.grid[i]);
      r(static_cast<Eigen::Index>(i)) = spec.absorbance[i] - model;
    }
    return r;
  };
  pb.scale.resize(lay.size());
  pb.lower.resize(lay.size());
  pb.upper.resize(lay.size());
  for (int k = 0; k < lay.n_peaks; ++k) {
    pb.scale(lay.center(k)) = span;
    pb.lower(lay.center(k)) = lo;
    pb.upper(lay.center(k)) = hi;
    pb.scale(lay.amplitude(k)) = std::max(std::abs(peak), 1e-300);
    pb.lower(lay.amplitude(k)) = 0.0;
    pb.upper(lay.amplitude(k)) = inf;
    pb.scale(lay.fwhm(k)) = spec.spacing();
    pb.lower(lay.fwhm(k)) = spec.spacing();
    pb.upper(lay.fwhm(k)) = span;
  }
  pb.names.assign(static_cast<std::size_t>(lay.size()), "fwhm");
  for (int k = 0; k < lay.n_peaks; ++k) {
    const std::string id = std::to_string(k + 1);
    pb.names[static_cast<std::size_t>(lay.center(k))] = "center" + id;
    pb.names[static_cast<std::size_t>(lay.amplitude(k))] = "amplitude" + id;
    if (!lay.shared) pb.names[static_cast<std::size_t>(lay.fwhm(k))] = "fwhm" + id;
  }
  return levenberg_marquardt(pb, pack(lay, start), opt);
}

}  // namespace detail

// Fits n_peaks profiles of the given shape to a background-free spectrum.
// Start: centers and heights at the n_peaks tallest local maxima of the
// 3-point smoothed data, every fwhm from the half-maximum width of the
// tallest one. If fewer maxima exist, the found peaks are fitted first and
// each missing peak is seeded at the largest residual.
inline PeakFitResult fit_peaks(const Spectrum& spec, int n_peaks, PeakShape shape, bool shared_fwhm,
                               const LeastSquaresOptions& opt = {}) {
  spec.validate();
  if (n_peaks < 1) throw InvalidArgument("fit_peaks: n_peaks must be >= 1");
  const auto n_pts = static_cast<int>(spec.grid.size());
  const int n_par = shared_fwhm ? 1 + 2 * n_peaks : 3 * n_peaks;
  if (n_pts <= n_par) throw InvalidArgument("fit_peaks: spectrum has too few points for " + std::to_string(n_peaks) + " peaks");

  const auto smooth = detail::smooth3(spec.absorbance);
  auto maxima = detail::local_maxima(smooth);
  if (maxima.empty()) {
    const auto top = std::max_element(smooth.begin(), smooth.end()) - smooth.begin();
    if (!(smooth[static_cast<std::size_t>(top)] > 0.0)) throw InvalidArgument("fit_peaks: spectrum has no positive signal");
    maxima.push_back(static_cast<std::size_t>(top));
  }
  const double width = std::clamp(detail::half_max_width(spec.grid, smooth, maxima.front()), spec.spacing(),
                                  spec.grid.back() - spec.grid.front());

  std::vector<PeakModel> start;
  for (std::size_t k = 0; k < maxima.size() && static_cast<int>(k) < n_peaks; ++k) {
    start.push_back({shape, spec.grid[maxima[k]], width, spec.absorbance[maxima[k]]});
  }
  std::vector<double> history;
  int iterations = 0;
  while (static_cast<int>(start.size()) < n_peaks) {
    const detail::PeakLayout lay{static_cast<int>(start.size()), shared_fwhm};
    const auto partial = detail::run_peak_fit(spec, lay, shape, start, opt);
    iterations += partial.iterations;
    history.insert(history.end(), partial.chi2_history.begin(), partial.chi2_history.end());
    start = detail::unpack(lay, partial.params, shape);
    Eigen::Index at = 0;
    const double res_max = partial.residuals.maxCoeff(&at);
    if (!(res_max > 0.0)) throw FitError("fit_peaks: no residual signal left to seed peak " + std::to_string(start.size() + 1));
    start.push_back({shape, spec.grid[static_cast<std::size_t>(at)], start.front().fwhm, res_max});
  }

  const detail::PeakLayout lay{n_peaks, shared_fwhm};
  const auto fit = detail::run_peak_fit(spec, lay, shape, start, opt);
  history.insert(history.end(), fit.chi2_history.begin(), fit.chi2_history.end());

  PeakFitResult out;
  out.chi2 = fit.chi2;
  out.dof = fit.dof;
  out.iterations = iterations + fit.iterations;
  out.chi2_history = std::move(history);

  // Reorder by center and carry the covariance along.
  auto peaks = detail::unpack(lay, fit.params, shape);
  std::vector<int> order(static_cast<std::size_t>(n_peaks));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return peaks[static_cast<std::size_t>(a)].center < peaks[static_cast<std::size_t>(b)].center;
  });
  std::vector<int> perm;
  if (shared_fwhm) {
    perm.push_back(0);
    out.names.push_back("fwhm");
  }
  for (int k = 0; k < n_peaks; ++k) {
    const int src = order[static_cast<std::size_t>(k)];
    out.peaks.push_back(peaks[static_cast<std::size_t>(src)]);
    const std::string id = std::to_string(k + 1);
    perm.push_back(lay.center(src));
    out.names.push_back("center" + id);
    perm.push_back(lay.amplitude(src));
    out.names.push_back("amplitude" + id);
    if (!shared_fwhm) {
      perm.push_back(lay.fwhm(src));
      out.names.push_back("fwhm" + id);
    }
  }
  const double s2 = fit.dof > 0 ? fit.chi2 / fit.dof : 0.0;
  const auto np = static_cast<Eigen::Index>(perm.size());
  out.covariance.resize(np, np);
  for (Eigen::Index a = 0; a < np; ++a) {
    for (Eigen::Index b = 0; b < np; ++b) {
      out.covariance(a, b) = s2 * fit.covariance(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
    }
  }
  out.errors = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

}  // namespace cfhf
