#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cfhf/spectra.hpp"

using namespace cfhf;

namespace {

const CFParameters kRef = CFParameters::lithium_yttrium_fluoride();

const std::vector<HFLevel>& ref_levels() {
  static const auto levels = hf_levels_exact(kRef, HyperfineConstants::holmium());
  return levels;
}

double trapezoid(const Spectrum& s) {
  double acc = 0.0;
  for (std::size_t k = 1; k < s.grid.size(); ++k) {
    acc += 0.5 * (s.absorbance[k] + s.absorbance[k - 1]) * (s.grid[k] - s.grid[k - 1]);
  }
  return acc;
}

TransitionLine line_at(double e, double intensity = 1.0) {
  TransitionLine l;
  l.energy = e;
  l.intensity = intensity;
  return l;
}

}  // namespace

TEST(Spectra, GroundToFirstSingletLines) {
  const auto lines = transition_lines(ref_levels(), 1, 2);
  ASSERT_EQ(lines.size(), 8u);
  // m = -7/2 is the highest line, m = +7/2 the lowest.
  EXPECT_NEAR(lines.front().energy, 7.33, 0.03);
  EXPECT_NEAR(lines.back().energy, 6.31, 0.03);
  const double mean = std::accumulate(lines.begin(), lines.end(), 0.0,
                                      [](double a, const TransitionLine& l) { return a + l.energy; }) / 8.0;
  EXPECT_NEAR(mean, 6.849, 0.03);
  for (const auto& l : lines) EXPECT_EQ(l.n_final, 2);
}

TEST(Spectra, SingletToSingletLinesAreEvenInM) {
  const auto lines = transition_lines(ref_levels(), 2, 3);
  ASSERT_EQ(lines.size(), 8u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(lines[k].energy, lines[7 - k].energy, 1e-9);
  EXPECT_NEAR(lines[3].energy, 16.45, 0.05);
}

TEST(Spectra, SwappingLevelsNegatesEnergies) {
  const auto up = transition_lines(ref_levels(), 1, 3);
  const auto down = transition_lines(ref_levels(), 3, 1);
  for (std::size_t k = 0; k < up.size(); ++k) EXPECT_NEAR(up[k].energy, -down[k].energy, 1e-12);
}

TEST(Spectra, NoHyperfineCollapsesLines) {
  const auto cf = solve_cf(kRef, {});
  const auto lines = transition_lines(hf_levels_exact(cf, kRef, {0, 0}), 1, 2);
  for (const auto& l : lines) EXPECT_NEAR(l.energy, cf.level(2).energy, 1e-9);
}

TEST(Spectra, MissingLevelThrows) {
  EXPECT_THROW(transition_lines(ref_levels(), 1, 14), InvalidArgument);
  EXPECT_THROW(transition_lines(ref_levels(), 20, 2), InvalidArgument);
}

TEST(Spectra, BoltzmannLimits) {
  const auto hot = boltzmann_weights(ref_levels(), 1e9);
  for (const auto& [label, w] : hot) EXPECT_NEAR(w, 1.0 / 136.0, 1e-6);

  std::vector<HFLevel> two{{1, 1, HalfInt(0), 0.0, 0.0}, {2, 1, HalfInt(0), kBoltzmannWavenumber, 0.0}};
  const auto w = boltzmann_weights(two, 1.0);
  EXPECT_NEAR(w.at({2, 1, HalfInt(0)}) / w.at({1, 1, HalfInt(0)}), std::exp(-1.0), 1e-12);
  EXPECT_THROW(boltzmann_weights(two, 0.0), InvalidArgument);
}

TEST(Spectra, FirstSingletIsPopulatedAtNineKelvin) {
  const auto w = boltzmann_weights(ref_levels(), 9.0);
  double p1 = 0.0, p2 = 0.0, total = 0.0;
  for (const auto& [label, v] : w) {
    total += v;
    if (label.n == 1) p1 += v;
    if (label.n == 2) p2 += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  // E2 = 6.83 cm^-1, kT = 6.26 cm^-1; singlet has half the states of the doublet.
  EXPECT_NEAR(p2 / p1, 0.5 * std::exp(-6.849 / (kBoltzmannWavenumber * 9.0)), 0.02);
  EXPECT_GT(p2, 0.1);
}

TEST(Spectra, IntensitiesFollowTemperature) {
  const auto cf = solve_cf(kRef, {});
  auto cold = transition_lines(ref_levels(), 2, 3);
  auto warm = cold;
  assign_intensities(cold, cf, ref_levels(), 3.0);
  assign_intensities(warm, cf, ref_levels(), 9.0);
  EXPECT_LT(*cold[0].intensity, *warm[0].intensity);
  auto jz_lines = transition_lines(ref_levels(), 2, 3);
  assign_intensities(jz_lines, cf, ref_levels(), 9.0, IntensityModel::JzSquared);
  EXPECT_GT(*jz_lines[0].intensity, 0.0);  // both G2: Jz connects them
  auto ladder = transition_lines(ref_levels(), 2, 3);
  assign_intensities(ladder, cf, ref_levels(), 9.0, IntensityModel::LadderSquared);
  EXPECT_NEAR(*ladder[0].intensity, 0.0, 1e-20);  // G2 -> G2 has no ladder step
}

TEST(Spectra, GaussianHalfWidth) {
  const PeakModel p{PeakShape::Gaussian, 10.0, 0.009, 1.0};
  EXPECT_NEAR(p(10.0 + 0.0045), 0.5, 1e-9);
  EXPECT_NEAR(p(10.0 - 0.0045), 0.5, 1e-9);
  const PeakModel l{PeakShape::Lorentzian, 10.0, 0.009, 2.0};
  EXPECT_NEAR(l(10.0 + 0.0045), 1.0, 1e-12);
}

TEST(Spectra, SatelliteIsResolved) {
  const auto grid = linear_grid(9.98, 10.03, 5001);
  const auto s = synthesize({line_at(10.0)}, {PeakShape::Gaussian, 0, 0.005, 1.0}, {0.0098, 0.33, true}, grid);
  std::vector<double> maxima;
  for (std::size_t k = 1; k + 1 < s.grid.size(); ++k) {
    if (s.absorbance[k] > s.absorbance[k - 1] && s.absorbance[k] > s.absorbance[k + 1]) maxima.push_back(s.grid[k]);
  }
  ASSERT_EQ(maxima.size(), 2u);
  EXPECT_NEAR(maxima[1] - maxima[0], 0.0098, 2e-5);
}

TEST(Spectra, IntegratedAbsorbance) {
  const PeakModel g{PeakShape::Gaussian, 0, 0.01, 1.0};
  const auto grid = linear_grid(10 - 20 * 0.01, 10 + 20 * 0.01, 801);  // 20 points per fwhm
  const auto s = synthesize({line_at(10.0, 2.0)}, g, {0.0098, 0.33, false}, grid);
  PeakModel ref = g;
  ref.amplitude = 2.0;
  EXPECT_NEAR(trapezoid(s) / ref.area(), 1.0, 1e-3);

  const PeakModel l{PeakShape::Lorentzian, 0, 0.01, 1.0};
  const auto wide = linear_grid(10 - 500 * 0.01, 10 + 500 * 0.01, 20001);
  const auto sl = synthesize({line_at(10.0)}, l, {0.0098, 0.33, false}, wide);
  EXPECT_NEAR(trapezoid(sl) / l.area(), 1.0, 0.02);
}

TEST(Spectra, EmptyLineListGivesZeroSpectrum) {
  const auto s = synthesize({}, {}, {}, linear_grid(0, 1, 11));
  for (double v : s.absorbance) EXPECT_EQ(v, 0.0);
}

TEST(Spectra, InvalidInputs) {
  EXPECT_THROW(synthesize({}, {PeakShape::Gaussian, 0, 0.0, 1}, {}, linear_grid(0, 1, 3)), InvalidArgument);
  EXPECT_THROW(synthesize({}, {}, {}, {}), InvalidArgument);
  EXPECT_THROW(synthesize({}, {}, {0.01, -1.0, true}, linear_grid(0, 1, 3)), InvalidArgument);
  EXPECT_THROW(linear_grid(1, 0, 3), InvalidArgument);
  Spectrum bad{{0, 1, 1}, {0, 0, 0}};
  EXPECT_THROW(bad.validate(), InvalidArgument);
}
