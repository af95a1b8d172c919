#pragma once

// Forward synthesis of absorbance spectra from hyperfine-resolved levels.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

#include "cfhf/hamiltonian.hpp"

namespace cfhf {

// Boltzmann constant in cm^-1 / K.
inline constexpr double kBoltzmannWavenumber = 0.695035;

// A line n_init -> n_final at conserved m_z. Kramers partners (sigma, m) and
// (-sigma, -m) give the same energy, so a line is stored once, on the
// sigma=+1 branch.
struct TransitionLine {
  int n_init = 0;
  int n_final = 0;
  HalfInt m_z;
  double energy = 0.0;
  std::optional<double> uncertainty;
  std::optional<double> intensity;
  bool hf_averaged = false;  // dataset rows that carry only the centroid
};

enum class PeakShape { Gaussian, Lorentzian };

inline constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

// Peak with height `amplitude` at `center`.
struct PeakModel {
  PeakShape shape = PeakShape::Gaussian;
  double center = 0.0;
  double fwhm = 0.017;
  double amplitude = 1.0;

  double operator()(double x) const {
    const double d = x - center;
    if (shape == PeakShape::Gaussian) {
      const double s = fwhm / kFwhmPerSigma;
      return amplitude * std::exp(-0.5 * d * d / (s * s));
    }
    const double g = 0.5 * fwhm;
    return amplitude * g * g / (d * d + g * g);
  }

  double area() const {
    if (shape == PeakShape::Gaussian) {
      return amplitude * fwhm / kFwhmPerSigma * std::sqrt(2.0 * std::numbers::pi);
    }
    return amplitude * std::numbers::pi * 0.5 * fwhm;
  }

  void validate() const {
    if (!(fwhm > 0.0) || !std::isfinite(fwhm)) throw InvalidArgument("peak fwhm must be positive");
  }
};

// Satellite from Ho ions with one 6Li neighbour.
struct IsotopeConfig {
  double splitting = 0.0098;
  double satellite_ratio = 0.33;
  bool enabled = true;

  void validate() const {
    if (!std::isfinite(splitting)) throw InvalidArgument("isotope splitting must be finite");
    if (!(satellite_ratio >= 0.0)) throw InvalidArgument("isotope satellite ratio must be >= 0");
  }
};

// Absorbance A = log10(I0 / I) sampled on an ascending wavenumber grid.
struct Spectrum {
  std::vector<double> grid;
  std::vector<double> absorbance;

  void validate() const {
    if (grid.size() != absorbance.size()) throw InvalidArgument("spectrum grid/absorbance length mismatch");
    for (std::size_t k = 1; k < grid.size(); ++k) {
      if (!(grid[k] > grid[k - 1])) throw InvalidArgument("spectrum grid must be strictly ascending");
    }
  }

  double spacing() const { return grid.size() > 1 ? (grid.back() - grid.front()) / double(grid.size() - 1) : 0.0; }
};

inline std::vector<double> linear_grid(double lo, double hi, int points) {
  if (points < 2 || !(hi > lo)) throw InvalidArgument("grid needs >= 2 points and hi > lo");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) g[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (points - 1);
  return g;
}

// Lines n_init -> n_final, one per m_z, energy E_final(m) - E_init(m) on the
// sigma=+1 branch of both levels.
inline std::vector<TransitionLine> transition_lines(const std::vector<HFLevel>& levels, int n_init,
                                                    int n_final) {
  std::vector<TransitionLine> lines;
  for (const auto& lo : levels) {
    if (lo.n != n_init || lo.sigma != 1) continue;
    const auto it = std::find_if(levels.begin(), levels.end(), [&](const HFLevel& h) {
      return h.n == n_final && h.sigma == 1 && h.m_z == lo.m_z;
    });
    if (it == levels.end()) {
      throw InvalidArgument("no level 8." + std::to_string(n_final) + " at m_z = " + lo.m_z.str());
    }
    TransitionLine line;
    line.n_init = n_init;
    line.n_final = n_final;
    line.m_z = lo.m_z;
    line.energy = it->energy - lo.energy;
    lines.push_back(line);
  }
  if (lines.empty()) throw InvalidArgument("no levels 8." + std::to_string(n_init));
  return lines;
}

// Normalized thermal populations of every hyperfine state.
inline std::map<HFLabel, double> boltzmann_weights(const std::vector<HFLevel>& levels, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (levels.empty()) return {};
  const double e0 = std::min_element(levels.begin(), levels.end(), [](const HFLevel& a, const HFLevel& b) {
                      return a.energy < b.energy;
                    })->energy;
  std::map<HFLabel, double> w;
  double z = 0.0;
  for (const auto& h : levels) {
    const double b = std::exp(-(h.energy - e0) / (kBoltzmannWavenumber * temperature));
    w[label_of(h)] = b;
    z += b;
  }
  for (auto& [label, value] : w) value /= z;
  return w;
}

enum class IntensityModel { Unit, JzSquared, LadderSquared };

// Line intensity = population of the initial state (both Kramers partners)
// times a matrix-element factor: 1, |<f|Jz|i>|^2 or
// |<f|J+|i>|^2 + |<f|J-|i>|^2 over the sigma=+1 CF states.
inline void assign_intensities(std::vector<TransitionLine>& lines, const CFSpectrum& cf,
                               const std::vector<HFLevel>& levels, double temperature,
                               IntensityModel model = IntensityModel::Unit) {
  const auto weights = boltzmann_weights(levels, temperature);
  const ComplexMatrix jz = build_jz(cf.system.j).entries();
  const ComplexMatrix jp = build_jplus(cf.system.j).entries();
  for (auto& line : lines) {
    double pop = weights.at({line.n_init, 1, line.m_z});
    if (cf.level(line.n_init).is_doublet()) pop += weights.at({line.n_init, -1, -line.m_z});
    double factor = 1.0;
    if (model != IntensityModel::Unit) {
      const ComplexVector& a = cf.level(line.n_init).state(1);
      factor = 0.0;
      // Sum over both final members: the ladder operators reach the partner.
      for (const auto& b : cf.level(line.n_final).eigenvectors) {
        if (model == IntensityModel::JzSquared) {
          factor += std::norm(b.dot(jz * a));
        } else {
          factor += std::norm(b.dot(jp * a)) + std::norm(b.dot(jp.adjoint() * a));
        }
      }
    }
    line.intensity = pop * factor;
  }
}

// Sum of one peak per line (height = shape.amplitude * line intensity), each
// with an optional isotope satellite at center + splitting.
inline Spectrum synthesize(const std::vector<TransitionLine>& lines, const PeakModel& shape,
                           const IsotopeConfig& iso, std::vector<double> grid) {
  shape.validate();
  iso.validate();
  if (grid.empty()) throw InvalidArgument("synthesize: empty grid");
  Spectrum s{std::move(grid), {}};
  s.absorbance.assign(s.grid.size(), 0.0);
  for (const auto& line : lines) {
    PeakModel p = shape;
    p.center = line.energy;
    p.amplitude = shape.amplitude * line.intensity.value_or(1.0);
    PeakModel sat = p;
    sat.center += iso.splitting;
    sat.amplitude *= iso.satellite_ratio;
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      s.absorbance[k] += p(s.grid[k]);
      if (iso.enabled) s.absorbance[k] += sat(s.grid[k]);
    }
  }
  s.validate();
  return s;
}

}  // namespace cfhf
