#pragma once

// Crystal-field and electron-nuclear Hamiltonians of a rare-earth ion at an S4
// site, their diagonalization, and symmetry labelling of the eigenstates.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cfhf/angular.hpp"

namespace cfhf {

// Crystal-field coefficients B_k^q in cm^-1.
struct CFParameters {
  double b20 = 0.0;
  double b40 = 0.0;
  double b44 = 0.0;
  double b4m4 = 0.0;
  double b60 = 0.0;
  double b64 = 0.0;
  double b6m4 = 0.0;

  static constexpr std::size_t count = 7;
  static constexpr std::array<std::string_view, count> names = {"b20", "b40", "b44", "b4m4",
                                                                "b60", "b64", "b6m4"};
  static constexpr std::array<std::pair<int, int>, count> ranks = {
      {{2, 0}, {4, 0}, {4, 4}, {4, -4}, {6, 0}, {6, 4}, {6, -4}}};

  // Refined LiYF4:Ho3+ set, B_4^-4 held at zero.
  static CFParameters lithium_yttrium_fluoride() {
    return {-2.66e-1, 1.68e-3, 2.81e-2, 0.0, 5.74e-6, 5.60e-4, 0.0};
  }

  std::array<double, count> as_array() const { return {b20, b40, b44, b4m4, b60, b64, b6m4}; }

  static CFParameters from_array(const std::array<double, count>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }

  double& operator[](std::size_t k) {
    switch (k) {
      case 0: return b20;
      case 1: return b40;
      case 2: return b44;
      case 3: return b4m4;
      case 4: return b60;
      case 5: return b64;
      case 6: return b6m4;
      default: throw InvalidArgument("CF parameter index out of range");
    }
  }
  double operator[](std::size_t k) const { return const_cast<CFParameters&>(*this)[k]; }

  void validate() const {
    for (std::size_t k = 0; k < count; ++k) {
      if (!std::isfinite((*this)[k])) {
        throw InvalidArgument("CF parameter " + std::string(names[k]) + " is not finite");
      }
    }
  }

  bool operator==(const CFParameters&) const = default;
};

// Dipolar (A_J) and quadrupolar (B) hyperfine constants in cm^-1.
struct HyperfineConstants {
  double a_j = 0.0;
  double b_quad = 0.0;

  static HyperfineConstants holmium() { return {0.02703, 0.04}; }

  void validate() const {
    if (!std::isfinite(a_j) || !std::isfinite(b_quad)) {
      throw InvalidArgument("hyperfine constants must be finite");
    }
  }
};

inline constexpr double kLandeGHolmium = 1.25;
inline constexpr double kDoubletThreshold = 1e-6;  // cm^-1
inline constexpr double kSectorLeakTolerance = 1e-8;

inline OperatorMatrix build_cf_hamiltonian(const CFParameters& p, const SpinSystem& sys) {
  p.validate();
  sys.validate();
  OperatorMatrix h = OperatorMatrix::zero(spin_basis(sys.j));
  const auto values = p.as_array();
  for (std::size_t k = 0; k < CFParameters::count; ++k) {
    if (values[k] == 0.0) continue;
    const auto [rank, order] = CFParameters::ranks[k];
    h += values[k] * build_stevens(rank, order, sys.j);
  }
  return h;
}

// J.I = Jz Iz + (J+ I- + J- I+)/2 on the product space.
inline OperatorMatrix build_j_dot_i(const SpinSystem& sys) {
  const auto jz = build_jz(sys.j);
  const auto jp = build_jplus(sys.j);
  const auto iz = build_jz(sys.i);
  const auto ip = build_jplus(sys.i);
  return kron(jz, iz) + 0.5 * (kron(jp, ip.adjoint()) + kron(jp.adjoint(), ip));
}

// A_J J.I + B/[2I(2I-1)J(2J-1)] (3(J.I)^2 + 3/2 J.I - I(I+1)J(J+1)).
inline OperatorMatrix build_hf_hamiltonian(const HyperfineConstants& hf, const SpinSystem& sys) {
  hf.validate();
  sys.validate();
  const auto ji = build_j_dot_i(sys);
  OperatorMatrix h = hf.a_j * ji;
  if (hf.b_quad != 0.0) {
    const double i = sys.i.value();
    const double j = sys.j.value();
    const double denom = 2.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0);
    if (denom == 0.0) {
      throw InvalidArgument("quadrupolar coupling needs i >= 1 and j >= 1");
    }
    const auto id = OperatorMatrix::identity(ji.basis());
    const auto quad = 3.0 * (ji * ji) + 1.5 * ji - (i * (i + 1.0) * j * (j + 1.0)) * id;
    h += (hf.b_quad / denom) * quad;
  }
  return h;
}

struct Eigensystem {
  Eigen::VectorXd values;   // ascending
  ComplexMatrix vectors;    // column k belongs to values(k)
};

namespace detail {

// Rotates every column so its largest-magnitude entry (first on ties) is real
// and positive.
inline void fix_phases(ComplexMatrix& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const double a = std::abs(v(r, c));
      if (a > best_abs + 1e-12) {
        best_abs = a;
        best = r;
      }
    }
    if (best_abs > 0.0) v.col(c) *= std::conj(v(best, c)) / best_abs;
  }
}

// Groups consecutive ascending eigenvalues whose neighbour gap is below tol.
inline std::vector<std::pair<int, int>> clusters(const Eigen::VectorXd& values, double tol) {
  std::vector<std::pair<int, int>> out;
  const int n = static_cast<int>(values.size());
  int start = 0;
  for (int k = 1; k <= n; ++k) {
    if (k == n || values(k) - values(k - 1) >= tol) {
      out.emplace_back(start, k);
      start = k;
    }
  }
  return out;
}

// Re-bases each degenerate cluster so that vectors carry a single sector
// label, then orders vectors inside each (cluster, sector) group by the
// expectation of `secondary`.
inline void resolve_degenerate(Eigensystem& es, const std::vector<int>& sector_of_basis,
                               const ComplexMatrix& secondary, double tol) {
  Eigen::VectorXd sector_diag(static_cast<Eigen::Index>(sector_of_basis.size()));
  for (std::size_t k = 0; k < sector_of_basis.size(); ++k) {
    sector_diag(static_cast<Eigen::Index>(k)) = sector_of_basis[k];
  }
  for (const auto& [lo, hi] : clusters(es.values, tol)) {
    const int d = hi - lo;
    if (d < 2) continue;
    ComplexMatrix sub = es.vectors.middleCols(lo, d);
    const ComplexMatrix proj = sub.adjoint() * sector_diag.asDiagonal() * sub;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> s(0.5 * (proj + proj.adjoint()));
    sub = sub * s.eigenvectors();

    // Inside each sector group, diagonalize the secondary operator.
    const Eigen::VectorXd labels = s.eigenvalues();
    int g0 = 0;
    for (int g = 1; g <= d; ++g) {
      if (g == d || std::abs(labels(g) - labels(g0)) > 0.5) {
        const int gd = g - g0;
        if (gd > 1) {
          ComplexMatrix block = sub.middleCols(g0, gd);
          const ComplexMatrix m = block.adjoint() * secondary * block;
          Eigen::SelfAdjointEigenSolver<ComplexMatrix> s2(0.5 * (m + m.adjoint()));
          sub.middleCols(g0, gd) = block * s2.eigenvectors();
        }
        g0 = g;
      }
    }
    es.vectors.middleCols(lo, d) = sub;
  }
}

inline int mod4(int v) { return ((v % 4) + 4) % 4; }

}  // namespace detail

inline Eigensystem diagonalize(const OperatorMatrix& h) {
  const double defect = h.hermiticity_defect();
  if (defect > 1e-10) {
    throw InvalidArgument("diagonalize: matrix not Hermitian (max |A - A^H| = " +
                          std::to_string(defect) + ")");
  }
  const ComplexMatrix sym = 0.5 * (h.entries() + h.entries().adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error("diagonalize: eigensolver failed to converge");
  }
  Eigensystem es{solver.eigenvalues(), solver.eigenvectors()};
  detail::fix_phases(es.vectors);
  return es;
}

enum class Irrep { Gamma1, Gamma2, Gamma34 };

inline std::string_view irrep_name(Irrep g) {
  switch (g) {
    case Irrep::Gamma1: return "G1";
    case Irrep::Gamma2: return "G2";
    case Irrep::Gamma34: return "G34";
  }
  return "?";
}

// One crystal-field level 8.n. For doublets, eigenvectors[0] is the sigma=+1
// member and eigenvectors[1] its time-reversed partner.
struct CFLevel {
  int index = 0;
  double energy = 0.0;
  Irrep irrep = Irrep::Gamma1;
  int degeneracy = 1;
  double jz_expect = 0.0;  // <Jz> of the sigma=+1 member
  std::vector<ComplexVector> eigenvectors;
  std::vector<int> sectors;  // M mod 4 support of each eigenvector

  bool is_doublet() const { return degeneracy == 2; }

  const ComplexVector& state(int sigma) const {
    if (sigma != 1 && sigma != -1) throw InvalidArgument("sigma must be +1 or -1");
    if (!is_doublet() || sigma == 1) return eigenvectors.front();
    return eigenvectors.back();
  }

  double jz(int sigma) const { return is_doublet() ? sigma * jz_expect : 0.0; }
};

inline double magnetic_moment(const CFLevel& level, double g_j = kLandeGHolmium) {
  return g_j * level.jz_expect;
}

inline int m_sector(HalfInt m) { return detail::mod4(m.twice() / 2); }

// Labels the crystal-field eigensystem by S4 irrep (M mod 4 sector of the
// eigenvector support: 0 -> G1, 2 -> G2, 1 and 3 -> G34 doublet). Energies
// are shifted so the lowest level sits at zero.
//
// sigma=+1 is the doublet member lying in the sector that holds the
// positive-<Jz> member of the lowest doublet; sector 3 when no doublet
// exists.
inline std::vector<CFLevel> classify_levels(const Eigensystem& eigen, const SpinSystem& sys) {
  if (!sys.j.is_integer()) {
    throw InvalidArgument("S4 classification needs integer j, got " + sys.j.str());
  }
  const int dim = sys.electronic_dim();
  if (eigen.values.size() != dim || eigen.vectors.rows() != dim) {
    throw InvalidArgument("eigensystem dimension does not match 2j+1");
  }
  const auto basis = spin_basis(sys.j);
  std::vector<int> sector(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k) sector[k] = m_sector(basis[k].m_electronic);

  Eigensystem es = eigen;
  const ComplexMatrix jz = build_jz(sys.j).entries();
  detail::resolve_degenerate(es, sector, jz, kDoubletThreshold);
  detail::fix_phases(es.vectors);

  struct State {
    double energy;
    int sector;
    double jz;
    ComplexVector v;
  };
  std::vector<State> states;
  for (int c = 0; c < dim; ++c) {
    const ComplexVector v = es.vectors.col(c);
    std::array<double, 4> weight{};
    for (int r = 0; r < dim; ++r) weight[static_cast<std::size_t>(sector[static_cast<std::size_t>(r)])] += std::norm(v(r));
    const auto dominant = static_cast<int>(std::max_element(weight.begin(), weight.end()) - weight.begin());
    for (int r = 0; r < dim; ++r) {
      if (sector[static_cast<std::size_t>(r)] != dominant && std::abs(v(r)) > kSectorLeakTolerance) {
        throw SymmetryError("eigenvector " + std::to_string(c) +
                            " mixes M mod 4 sectors; Hamiltonian is not S4 invariant");
      }
    }
    const double e = (v.adjoint() * jz * v)(0, 0).real();
    states.push_back({es.values(c), dominant, e, v});
  }

  const double ground = es.values.minCoeff();
  std::vector<CFLevel> levels;
  for (const auto& [lo, hi] : detail::clusters(es.values, kDoubletThreshold)) {
    std::vector<const State*> odd_plus, odd_minus;
    for (int k = lo; k < hi; ++k) {
      const State& s = states[static_cast<std::size_t>(k)];
      if (s.sector == 0 || s.sector == 2) {
        CFLevel level;
        level.energy = s.energy - ground;
        level.irrep = s.sector == 0 ? Irrep::Gamma1 : Irrep::Gamma2;
        level.eigenvectors = {s.v};
        level.sectors = {s.sector};
        levels.push_back(std::move(level));
      } else {
        (s.sector == 1 ? odd_plus : odd_minus).push_back(&s);
      }
    }
    if (odd_plus.size() != odd_minus.size()) {
      throw SymmetryError("unpaired G34 state near E = " + std::to_string(states[static_cast<std::size_t>(lo)].energy - ground));
    }
    auto by_jz = [](const State* a, const State* b) { return a->jz < b->jz; };
    std::sort(odd_plus.begin(), odd_plus.end(), by_jz);
    std::sort(odd_minus.begin(), odd_minus.end(), by_jz);
    for (std::size_t k = 0; k < odd_plus.size(); ++k) {
      const State* a = odd_plus[k];
      const State* b = odd_minus[odd_minus.size() - 1 - k];
      CFLevel level;
      level.energy = 0.5 * (a->energy + b->energy) - ground;
      level.irrep = Irrep::Gamma34;
      level.degeneracy = 2;
      // Ordered (sector 3, sector 1) for now; sigma assignment below.
      level.eigenvectors = {b->v, a->v};
      level.sectors = {3, 1};
      level.jz_expect = b->jz;
      levels.push_back(std::move(level));
    }
  }
  std::stable_sort(levels.begin(), levels.end(), [](const CFLevel& a, const CFLevel& b) {
    return std::tuple(a.energy, a.irrep) < std::tuple(b.energy, b.irrep);
  });

  int plus_sector = 3;
  for (const auto& level : levels) {
    if (level.is_doublet()) {
      if (level.jz_expect < -1e-12) plus_sector = 1;
      break;
    }
  }
  for (std::size_t k = 0; k < levels.size(); ++k) {
    auto& level = levels[k];
    level.index = static_cast<int>(k) + 1;
    if (level.is_doublet() && plus_sector == 1) {
      std::swap(level.eigenvectors[0], level.eigenvectors[1]);
      std::swap(level.sectors[0], level.sectors[1]);
      level.jz_expect = -level.jz_expect;
    }
  }
  return levels;
}

// Crystal-field levels together with the data needed to interpret them.
struct CFSpectrum {
  SpinSystem system;
  std::vector<CFLevel> levels;
  double ground_energy = 0.0;  // absolute lowest eigenvalue of H_CF

  const CFLevel& level(int n) const {
    if (n < 1 || n > static_cast<int>(levels.size())) {
      throw InvalidArgument("CF level index " + std::to_string(n) + " out of range 1.." +
                            std::to_string(levels.size()));
    }
    return levels[static_cast<std::size_t>(n - 1)];
  }
  int size() const { return static_cast<int>(levels.size()); }
};

inline CFSpectrum solve_cf(const CFParameters& p, const SpinSystem& sys) {
  const auto es = diagonalize(build_cf_hamiltonian(p, sys));
  auto levels = classify_levels(es, sys);
  // Zero at the ground level itself (a doublet mean sits ~1e-13 above the min).
  const double shift = levels.front().energy;
  for (auto& l : levels) l.energy -= shift;
  return {sys, std::move(levels), es.values.minCoeff() + shift};
}

// One electron-nuclear eigenstate |8.n^sigma, m_z>.
struct HFLevel {
  int n = 0;
  int sigma = 1;
  HalfInt m_z;
  double energy = 0.0;      // measured from the CF ground level
  double correction = 0.0;  // energy - E_n

  bool operator==(const HFLevel&) const = default;
};

struct HFLabel {
  int n = 0;
  int sigma = 1;
  HalfInt m_z;
  auto operator<=>(const HFLabel&) const = default;
};

inline HFLabel label_of(const HFLevel& h) { return {h.n, h.sigma, h.m_z}; }

// Exact electron-nuclear levels from the full (2j+1)(2i+1) Hamiltonian. Each
// eigenstate is labelled by its largest squared overlap with |8.n^sigma> (x)
// |m_z>; a label claimed twice raises SymmetryError.
inline std::vector<HFLevel> hf_levels_exact(const CFSpectrum& cf, const CFParameters& p,
                                            const HyperfineConstants& hf) {
  const SpinSystem& sys = cf.system;
  const auto h_cf = build_cf_hamiltonian(p, sys);
  const auto h = kron(h_cf, build_identity(sys.i)) + build_hf_hamiltonian(hf, sys);
  Eigensystem es = diagonalize(h);

  // M + m is conserved mod 4 by S4 and the hyperfine coupling; Kramers
  // partners fall in different classes, so this splits every pair.
  std::vector<int> total_sector;
  for (const auto& b : h.basis()) {
    total_sector.push_back(((b.m_electronic.twice() + b.m_nuclear->twice()) % 8 + 8) % 8);
  }
  const ComplexMatrix iz = kron(build_identity(sys.j), build_jz(sys.i)).entries();
  detail::resolve_degenerate(es, total_sector, iz, 1e-7);
  detail::fix_phases(es.vectors);

  const int ni = sys.nuclear_dim();
  const int dim = sys.product_dim();
  std::vector<HFLabel> labels;
  ComplexMatrix products(dim, dim);
  int col = 0;
  for (const auto& level : cf.levels) {
    for (int s = 0; s < level.degeneracy; ++s) {
      const int sigma = s == 0 ? 1 : -1;
      const ComplexVector& v = level.state(sigma);
      for (int im = 0; im < ni; ++im) {
        ComplexVector prod = ComplexVector::Zero(dim);
        for (int r = 0; r < v.size(); ++r) prod(r * ni + im) = v(r);
        products.col(col++) = prod;
        labels.push_back({level.index, sigma, HalfInt::from_twice(2 * im - sys.i.twice())});
      }
    }
  }
  if (col != dim) throw SymmetryError("CF levels do not span the electronic space");

  const Eigen::MatrixXd overlap = (products.adjoint() * es.vectors).cwiseAbs2();
  std::vector<int> owner(static_cast<std::size_t>(dim), -1);
  std::vector<HFLevel> out;
  out.reserve(static_cast<std::size_t>(dim));
  for (int c = 0; c < dim; ++c) {
    Eigen::Index best = 0;
    overlap.col(c).maxCoeff(&best);
    if (owner[static_cast<std::size_t>(best)] >= 0) {
      const auto& l = labels[static_cast<std::size_t>(best)];
      throw SymmetryError("ambiguous hyperfine labelling: |8." + std::to_string(l.n) +
                          (l.sigma > 0 ? "+" : "-") + ", " + l.m_z.str() +
                          "> claimed by two eigenstates; hyperfine coupling too strong for "
                          "perturbative labels");
    }
    owner[static_cast<std::size_t>(best)] = c;
    const auto& l = labels[static_cast<std::size_t>(best)];
    const double e = es.values(c) - cf.ground_energy;
    out.push_back({l.n, l.sigma, l.m_z, e, e - cf.level(l.n).energy});
  }
  std::sort(out.begin(), out.end(), [](const HFLevel& a, const HFLevel& b) {
    return std::tuple(a.n, -a.sigma, a.m_z) < std::tuple(b.n, -b.sigma, b.m_z);
  });
  return out;
}

inline std::vector<HFLevel> hf_levels_exact(const CFParameters& p, const HyperfineConstants& hf,
                                            const SpinSystem& sys = {}) {
  return hf_levels_exact(solve_cf(p, sys), p, hf);
}

inline const HFLevel& find_hf_level(const std::vector<HFLevel>& levels, int n, int sigma,
                                    HalfInt m_z) {
  for (const auto& h : levels) {
    if (h.n == n && h.sigma == sigma && h.m_z == m_z) return h;
  }
  throw InvalidArgument("no hyperfine level |8." + std::to_string(n) + (sigma > 0 ? "+" : "-") +
                        ", " + m_z.str() + ">");
}

inline std::vector<HalfInt> nuclear_projections(const SpinSystem& sys) {
  std::vector<HalfInt> out;
  for (int t = -sys.i.twice(); t <= sys.i.twice(); t += 2) out.push_back(HalfInt::from_twice(t));
  return out;
}

}  // namespace cfhf
