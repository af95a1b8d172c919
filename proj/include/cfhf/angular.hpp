#pragma once

// Angular-momentum operator matrices and Stevens operator equivalents.
//
// Single-spin operators act on |M>, M = -j..+j in ascending order. Product
// spaces |M> (x) |m> are ordered lexicographically by (M, m), so the flat index
// is (M + j) * (2i + 1) + (m + i).

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfhf/errors.hpp"
#include "cfhf/half_integer.hpp"

namespace cfhf {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline void require_valid_spin(HalfInt s, const char* what) {
  if (s.twice() < 0) {
    throw InvalidArgument(std::string(what) + " must be non-negative, got " + s.str());
  }
}

struct SpinSystem {
  HalfInt j = HalfInt(8);
  HalfInt i = HalfInt::from_twice(7);

  static SpinSystem holmium() { return {}; }

  int electronic_dim() const { return j.twice() + 1; }
  int nuclear_dim() const { return i.twice() + 1; }
  int product_dim() const { return electronic_dim() * nuclear_dim(); }

  void validate() const {
    require_valid_spin(j, "electronic angular momentum j");
    require_valid_spin(i, "nuclear spin i");
  }
};

// One basis label: electronic projection M, and for product spaces the nuclear
// projection m.
struct BasisLabel {
  HalfInt m_electronic;
  std::optional<HalfInt> m_nuclear;

  bool operator==(const BasisLabel&) const = default;
};

inline std::vector<BasisLabel> spin_basis(HalfInt j) {
  std::vector<BasisLabel> basis;
  for (int t = -j.twice(); t <= j.twice(); t += 2) basis.push_back({HalfInt::from_twice(t), {}});
  return basis;
}

class OperatorMatrix {
 public:
  OperatorMatrix() = default;

  OperatorMatrix(ComplexMatrix entries, std::vector<BasisLabel> basis)
      : entries_(std::move(entries)), basis_(std::move(basis)) {
    if (entries_.rows() != entries_.cols()) {
      throw InvalidArgument("operator matrix must be square");
    }
    if (static_cast<Eigen::Index>(basis_.size()) != entries_.rows()) {
      throw InvalidArgument("basis length " + std::to_string(basis_.size()) +
                            " does not match dimension " + std::to_string(entries_.rows()));
    }
  }

  static OperatorMatrix zero(std::vector<BasisLabel> basis) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    return {ComplexMatrix::Zero(n, n), std::move(basis)};
  }

  static OperatorMatrix identity(std::vector<BasisLabel> basis) {
    const auto n = static_cast<Eigen::Index>(basis.size());
    return {ComplexMatrix::Identity(n, n), std::move(basis)};
  }

  int dim() const { return static_cast<int>(entries_.rows()); }
  const ComplexMatrix& entries() const { return entries_; }
  const std::vector<BasisLabel>& basis() const { return basis_; }
  Complex operator()(int row, int col) const { return entries_(row, col); }

  OperatorMatrix adjoint() const { return {entries_.adjoint(), basis_}; }

  double hermiticity_defect() const {
    return (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
  }
  bool is_hermitian(double tol = 1e-12) const { return hermiticity_defect() <= tol; }

  OperatorMatrix& operator+=(const OperatorMatrix& o) {
    check_same_space(o);
    entries_ += o.entries_;
    return *this;
  }
  OperatorMatrix& operator-=(const OperatorMatrix& o) {
    check_same_space(o);
    entries_ -= o.entries_;
    return *this;
  }
  OperatorMatrix& operator*=(Complex s) {
    entries_ *= s;
    return *this;
  }

  friend OperatorMatrix operator+(OperatorMatrix a, const OperatorMatrix& b) { return a += b; }
  friend OperatorMatrix operator-(OperatorMatrix a, const OperatorMatrix& b) { return a -= b; }
  friend OperatorMatrix operator*(Complex s, OperatorMatrix a) { return a *= s; }
  friend OperatorMatrix operator*(double s, OperatorMatrix a) { return a *= Complex(s, 0.0); }

  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    a.check_same_space(b);
    return {a.entries_ * b.entries_, a.basis_};
  }

  void check_same_space(const OperatorMatrix& o) const {
    if (dim() != o.dim()) {
      throw InvalidArgument("dimension mismatch: " + std::to_string(dim()) + " vs " +
                            std::to_string(o.dim()));
    }
  }

 private:
  ComplexMatrix entries_;
  std::vector<BasisLabel> basis_;
};

inline OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) {
  return a * b - b * a;
}

// Electronic (x) nuclear product. Both factors must be single-spin operators.
inline OperatorMatrix kron(const OperatorMatrix& electronic, const OperatorMatrix& nuclear) {
  const auto& a = electronic.entries();
  const auto& b = nuclear.entries();
  const Eigen::Index nb = b.rows();
  ComplexMatrix out(a.rows() * nb, a.cols() * nb);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      out.block(r * nb, c * nb, nb, nb) = a(r, c) * b;
    }
  }
  std::vector<BasisLabel> basis;
  basis.reserve(static_cast<std::size_t>(out.rows()));
  for (const auto& e : electronic.basis()) {
    for (const auto& n : nuclear.basis()) basis.push_back({e.m_electronic, n.m_electronic});
  }
  return {std::move(out), std::move(basis)};
}

inline OperatorMatrix build_identity(HalfInt j) {
  require_valid_spin(j, "j");
  return OperatorMatrix::identity(spin_basis(j));
}

inline OperatorMatrix build_jz(HalfInt j) {
  require_valid_spin(j, "j");
  auto basis = spin_basis(j);
  const auto n = static_cast<Eigen::Index>(basis.size());
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) m(k, k) = basis[static_cast<std::size_t>(k)].m_electronic.value();
  return {std::move(m), std::move(basis)};
}

// <M+1|J+|M> = sqrt(j(j+1) - M(M+1)).
inline OperatorMatrix build_jplus(HalfInt j) {
  require_valid_spin(j, "j");
  auto basis = spin_basis(j);
  const auto n = static_cast<Eigen::Index>(basis.size());
  const double jj = j.value() * (j.value() + 1.0);
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double mm = basis[static_cast<std::size_t>(k)].m_electronic.value();
    m(k + 1, k) = std::sqrt(jj - mm * (mm + 1.0));
  }
  return {std::move(m), std::move(basis)};
}

inline OperatorMatrix build_jminus(HalfInt j) { return build_jplus(j).adjoint(); }

namespace detail {

inline ComplexMatrix power(const ComplexMatrix& a, int n) {
  ComplexMatrix r = ComplexMatrix::Identity(a.rows(), a.cols());
  for (int k = 0; k < n; ++k) r = r * a;
  return r;
}

}  // namespace detail

// Stevens operator equivalent O_k^q in the Hutchings normalization.
//
//   q > 0: cosine form  c/2 {P(Jz), J+^q + J-^q}     (anticommutator halves)
//   q < 0: sine form   -i c/2 {P(Jz), J+^|q| - J-^|q|}
//
// Supported: (2,0) (4,0) (4,±4) (6,0) (6,±4), the set closed under S4.
inline OperatorMatrix build_stevens(int k, int q, HalfInt j) {
  require_valid_spin(j, "j");
  auto basis = spin_basis(j);
  const auto n = static_cast<Eigen::Index>(basis.size());
  const double x = j.value() * (j.value() + 1.0);
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  const ComplexMatrix jz = build_jz(j).entries();
  const ComplexMatrix jz2 = jz * jz;
  const ComplexMatrix jz4 = jz2 * jz2;
  const ComplexMatrix jp = build_jplus(j).entries();
  const ComplexMatrix jm = jp.adjoint();

  ComplexMatrix out;
  if (k == 2 && q == 0) {
    out = 3.0 * jz2 - x * id;
  } else if (k == 4 && q == 0) {
    out = 35.0 * jz4 - (30.0 * x - 25.0) * jz2 + (3.0 * x * x - 6.0 * x) * id;
  } else if (k == 6 && q == 0) {
    out = 231.0 * jz4 * jz2 - (315.0 * x - 735.0) * jz4 +
          (105.0 * x * x - 525.0 * x + 294.0) * jz2 +
          (-5.0 * x * x * x + 40.0 * x * x - 60.0 * x) * id;
  } else if (k == 4 && (q == 4 || q == -4)) {
    const ComplexMatrix p4 = detail::power(jp, 4);
    const ComplexMatrix m4 = detail::power(jm, 4);
    out = q > 0 ? ComplexMatrix(0.5 * (p4 + m4)) : ComplexMatrix(Complex(0.0, -0.5) * (p4 - m4));
  } else if (k == 6 && (q == 4 || q == -4)) {
    const ComplexMatrix p4 = detail::power(jp, 4);
    const ComplexMatrix m4 = detail::power(jm, 4);
    const ComplexMatrix poly = 11.0 * jz2 - (x + 38.0) * id;
    const ComplexMatrix ladder = q > 0 ? ComplexMatrix(p4 + m4) : ComplexMatrix(p4 - m4);
    const Complex pref = q > 0 ? Complex(0.25, 0.0) : Complex(0.0, -0.25);
    out = pref * (poly * ladder + ladder * poly);
  } else {
    throw InvalidArgument("unsupported Stevens operator O_" + std::to_string(k) + "^" +
                          std::to_string(q));
  }
  return {std::move(out), std::move(basis)};
}

// exp(i * angle * Jz), diagonal in the |M> basis.
inline OperatorMatrix build_rotation_z(HalfInt j, double angle) {
  auto basis = spin_basis(j);
  const auto n = static_cast<Eigen::Index>(basis.size());
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    m(k, k) = std::polar(1.0, angle * basis[static_cast<std::size_t>(k)].m_electronic.value());
  }
  return {std::move(m), std::move(basis)};
}

}  // namespace cfhf
