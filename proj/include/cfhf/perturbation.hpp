#pragma once

// Perturbative hyperfine corrections of crystal-field levels: second order in
// A_J, first order in B.
//
// Conventions: dE_nj = E_n - E_j; the electronic ladder operator J+ pairs with
// the nuclear I-, contributing (I(I+1) - m(m-1))/4, and J- pairs with I+,
// contributing (I(I+1) - m(m+1))/4.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cfhf/hamiltonian.hpp"

namespace cfhf {

struct LambdaCoefficients {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;

  double operator[](int n) const {
    switch (n) {
      case 1: return lambda1;
      case 2: return lambda2;
      case 3: return lambda3;
      default: throw InvalidArgument("lambda index must be 1, 2 or 3");
    }
  }
};

namespace detail {

// Operators and spin constants shared by all correction formulas.
struct PerturbationContext {
  const CFSpectrum& cf;
  ComplexMatrix jz;
  ComplexMatrix jp;
  ComplexMatrix jm;
  ComplexMatrix quad;  // 3Jz^2 - J(J+1)
  double ii;           // I(I+1)
  double quad_denom;   // 4I(2I-1)J(2J-1)

  explicit PerturbationContext(const CFSpectrum& spectrum) : cf(spectrum) {
    const auto& sys = cf.system;
    jz = build_jz(sys.j).entries();
    jp = build_jplus(sys.j).entries();
    jm = jp.adjoint();
    const double j = sys.j.value();
    const double i = sys.i.value();
    quad = 3.0 * jz * jz - j * (j + 1.0) * ComplexMatrix::Identity(jz.rows(), jz.cols());
    ii = i * (i + 1.0);
    quad_denom = 4.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0);
  }

  static double element2(const ComplexVector& bra, const ComplexMatrix& op, const ComplexVector& ket) {
    return std::norm(bra.dot(op * ket));
  }
  static double expect(const ComplexVector& v, const ComplexMatrix& op) {
    return v.dot(op * v).real();
  }

  double factor_raise(double m) const { return ii - m * (m - 1.0); }  // with J+
  double factor_lower(double m) const { return ii - m * (m + 1.0); }  // with J-

  double quadrupole_term(const ComplexVector& v, double b, double m) const {
    if (b == 0.0) return 0.0;
    if (quad_denom == 0.0) throw InvalidArgument("quadrupolar term needs i >= 1 and j >= 1");
    return b * expect(v, quad) / quad_denom * (3.0 * m * m - ii);
  }

  double denominator(int n, int j, double numerator_scale) const {
    const double de = cf.level(n).energy - cf.level(j).energy;
    if (std::abs(de) < kDoubletThreshold && numerator_scale > 1e-20) {
      throw DegeneracyError("vanishing energy denominator between levels 8." + std::to_string(n) +
                            " and 8." + std::to_string(j));
    }
    return de;
  }

  // Ladder operator that connects `ket` (sector s) to a bra in sector s+1
  // (J+) or s-1 (J-); returns +1, -1, or 0 when no ladder step connects them.
  static int ladder_direction(int bra_sector, int ket_sector) {
    if (mod4(ket_sector + 1) == bra_sector) return 1;
    if (mod4(ket_sector - 1) == bra_sector) return -1;
    return 0;
  }
};

inline int sector_of(const CFLevel& level, int sigma) {
  return level.is_doublet() && sigma == -1 ? level.sectors.back() : level.sectors.front();
}

}  // namespace detail

// General second-order formula summing over every other CF level j and both
// members of doublets. max_level > 0 truncates the sum to j <= max_level.
inline double delta_full(int n, int sigma, HalfInt m_z, const CFSpectrum& cf,
                         const HyperfineConstants& hf, int max_level = 0) {
  const detail::PerturbationContext ctx(cf);
  const auto& level = cf.level(n);
  const ComplexVector& v = level.state(sigma);
  const double m = m_z.value();
  const double a = hf.a_j;

  double result = a * ctx.expect(v, ctx.jz) * m;
  if (a != 0.0) {
    for (const auto& other : cf.levels) {
      if (other.index == n) continue;
      if (max_level > 0 && other.index > max_level) continue;
      for (const auto& w : other.eigenvectors) {
        const double ez = ctx.element2(w, ctx.jz, v);
        const double ep = ctx.element2(w, ctx.jp, v);
        const double em = ctx.element2(w, ctx.jm, v);
        const double de = ctx.denominator(n, other.index, ez + ep + em);
        result += a * a / de *
                  (ez * m * m + 0.25 * ep * ctx.factor_raise(m) + 0.25 * em * ctx.factor_lower(m));
      }
    }
  }
  return result + ctx.quadrupole_term(v, hf.b_quad, m);
}

// Ground-doublet correction delta_{8.1^sigma, m_z}, grouped by the irrep of the
// admixed level: G1 and G2 singlets through the symmetry-allowed ladder
// operator, other G34 doublets through Jz, plus the first-order B term.
// Time reversal: delta(-, m) = delta(+, -m).
inline double delta_doublet(HalfInt m_z, int sigma, const CFSpectrum& cf, const HyperfineConstants& hf) {
  const auto& ground = cf.level(1);
  if (!ground.is_doublet()) throw InvalidArgument("delta_doublet: ground level is not a doublet");
  if (sigma == -1) return delta_doublet(-m_z, 1, cf, hf);
  if (sigma != 1) throw InvalidArgument("sigma must be +1 or -1");

  const detail::PerturbationContext ctx(cf);
  const ComplexVector& v = ground.state(1);
  const int v_sector = detail::sector_of(ground, 1);
  const double m = m_z.value();
  const double a = hf.a_j;

  double first = a * ctx.expect(v, ctx.jz) * m;
  double singlets = 0.0;
  double doublets = 0.0;
  if (a != 0.0) {
    for (const auto& other : cf.levels) {
      if (other.index == 1) continue;
      if (other.is_doublet()) {
        const ComplexVector& w = other.state(1);
        const double ez = ctx.element2(w, ctx.jz, v);
        doublets += a * a / ctx.denominator(1, other.index, ez) * ez * m * m;
      } else {
        const ComplexVector& w = other.state(1);
        const int dir = detail::PerturbationContext::ladder_direction(other.sectors.front(), v_sector);
        if (dir == 0) continue;
        const double e2 = ctx.element2(w, dir > 0 ? ctx.jp : ctx.jm, v);
        const double factor = dir > 0 ? ctx.factor_raise(m) : ctx.factor_lower(m);
        singlets += a * a / (4.0 * ctx.denominator(1, other.index, e2)) * e2 * factor;
      }
    }
  }
  return first + singlets + doublets + ctx.quadrupole_term(v, hf.b_quad, m);
}

// Singlet correction delta_{8.n, m_z}: same-irrep singlets through Jz and both
// members of every doublet through the ladder operators. The doublet members
// combine to (I(I+1) - m^2)/2, so the result is even in m_z.
inline double delta_singlet(int n, HalfInt m_z, const CFSpectrum& cf, const HyperfineConstants& hf) {
  const auto& level = cf.level(n);
  if (level.is_doublet()) throw InvalidArgument("delta_singlet: level 8." + std::to_string(n) + " is a doublet");

  const detail::PerturbationContext ctx(cf);
  const ComplexVector& v = level.state(1);
  const int v_sector = level.sectors.front();
  const double m = m_z.value();
  const double a = hf.a_j;

  double result = 0.0;
  if (a != 0.0) {
    for (const auto& other : cf.levels) {
      if (other.index == n) continue;
      if (other.is_doublet()) {
        const ComplexVector& w = other.state(1);
        const int dir = detail::PerturbationContext::ladder_direction(detail::sector_of(other, 1), v_sector);
        if (dir == 0) continue;
        const double e2 = ctx.element2(w, dir > 0 ? ctx.jp : ctx.jm, v);
        result += a * a / (2.0 * ctx.denominator(n, other.index, e2)) * e2 * (ctx.ii - m * m);
      } else if (other.irrep == level.irrep) {
        const double ez = ctx.element2(other.state(1), ctx.jz, v);
        result += a * a / ctx.denominator(n, other.index, ez) * ez * m * m;
      }
    }
  }
  return result + ctx.quadrupole_term(v, hf.b_quad, m);
}

// K_{i,j}(m_z): correction of level i caused by level j inside the three-level
// model (8.1 doublet, 8.2 and 8.3 singlets, B = 0). K_{1,1} is the first-order
// doublet shift; K_{i,j} = -K_{j,i}.
inline double k_correction(int i, int j, HalfInt m_z, const CFSpectrum& cf, double a_j) {
  if (i < 1 || i > 3 || j < 1 || j > 3 || (i == j && i != 1)) {
    throw InvalidArgument("k_correction: invalid index pair (" + std::to_string(i) + "," +
                          std::to_string(j) + ")");
  }
  if (cf.size() < 3 || !cf.level(1).is_doublet() || cf.level(2).is_doublet() || cf.level(3).is_doublet()) {
    throw InvalidArgument("k_correction: needs a ground doublet and two singlets above it");
  }
  const detail::PerturbationContext ctx(cf);
  const double m = m_z.value();
  const auto& ground = cf.level(1);
  const ComplexVector& g = ground.state(1);

  if (i == 1 && j == 1) return a_j * ctx.expect(g, ctx.jz) * m;
  if (i == 1) {
    const auto& s = cf.level(j);
    const int dir = detail::PerturbationContext::ladder_direction(s.sectors.front(), detail::sector_of(ground, 1));
    if (dir == 0) return 0.0;
    const double e2 = ctx.element2(s.state(1), dir > 0 ? ctx.jp : ctx.jm, g);
    const double factor = dir > 0 ? ctx.factor_raise(m) : ctx.factor_lower(m);
    return a_j * a_j / 4.0 * e2 / ctx.denominator(1, j, e2) * factor;
  }
  if (i == 2 && j == 3) {
    const double ez = ctx.element2(cf.level(3).state(1), ctx.jz, cf.level(2).state(1));
    return a_j * a_j * ez / ctx.denominator(2, 3, ez) * m * m;
  }
  return -k_correction(j, i, m_z, cf, a_j);
}

// Three-level assembly of the corrections from K_{i,j}. Singlet rows use
// K_{n,1}(m) + K_{n,1}(-m), the contribution of both ground-doublet members.
inline double restricted_delta(int n, HalfInt m_z, const CFSpectrum& cf, double a_j) {
  switch (n) {
    case 1:
      return k_correction(1, 1, m_z, cf, a_j) + k_correction(1, 2, m_z, cf, a_j) +
             k_correction(1, 3, m_z, cf, a_j);
    case 2:
      return k_correction(2, 3, m_z, cf, a_j) + k_correction(2, 1, m_z, cf, a_j) +
             k_correction(2, 1, -m_z, cf, a_j);
    case 3:
      return k_correction(3, 2, m_z, cf, a_j) + k_correction(3, 1, m_z, cf, a_j) +
             k_correction(3, 1, -m_z, cf, a_j);
    default:
      throw InvalidArgument("restricted_delta: n must be 1, 2 or 3");
  }
}

// Least-squares fit y = c0 + c1 x + c2 x^2; returns (c0, c1, c2).
inline Eigen::Vector3d quadratic_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw InvalidArgument("quadratic_fit needs >= 3 points");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(x.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    a(r, 0) = 1.0;
    a(r, 1) = x[k];
    a(r, 2) = x[k] * x[k];
    b(r) = y[k];
  }
  return a.colPivHouseholderQr().solve(b);
}

// lambda_n = twice the m_z^2 coefficient of the correction of level n (sigma=+1
// branch), from a quadratic regression over all nuclear projections.
template <class Correction>
LambdaCoefficients lambda_from_corrections(const SpinSystem& sys, Correction&& correction) {
  const auto ms = nuclear_projections(sys);
  std::vector<double> x;
  for (auto m : ms) x.push_back(m.value());
  LambdaCoefficients out;
  double* slots[3] = {&out.lambda1, &out.lambda2, &out.lambda3};
  for (int n = 1; n <= 3; ++n) {
    std::vector<double> y;
    for (auto m : ms) y.push_back(correction(n, m));
    *slots[n - 1] = 2.0 * quadratic_fit(x, y)(2);
  }
  return out;
}

inline LambdaCoefficients lambda_from_model(const CFSpectrum& cf, const HyperfineConstants& hf,
                                            int max_level = 0) {
  return lambda_from_corrections(cf.system, [&](int n, HalfInt m) {
    return delta_full(n, 1, m, cf, hf, max_level);
  });
}

// Same extraction applied to exactly diagonalized levels.
inline LambdaCoefficients lambda_from_exact(const std::vector<HFLevel>& levels, const SpinSystem& sys) {
  return lambda_from_corrections(sys, [&](int n, HalfInt m) {
    return find_hf_level(levels, n, 1, m).correction;
  });
}

}  // namespace cfhf
