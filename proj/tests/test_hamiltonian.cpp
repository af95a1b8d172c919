#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "cfhf/hamiltonian.hpp"

using namespace cfhf;

namespace {

const CFParameters kRef = CFParameters::lithium_yttrium_fluoride();

struct Row {
  double energy;
  Irrep irrep;
  double jz;
};

// Published levels (rounded parameters) and the values this code freezes for
// the same parameters.
const Row kPublished[] = {
    {0.0, Irrep::Gamma34, 5.40},  {6.84, Irrep::Gamma2, 0},    {23.31, Irrep::Gamma2, 0},
    {47.60, Irrep::Gamma1, 0},    {56.92, Irrep::Gamma1, 0},   {72.10, Irrep::Gamma34, -3.59},
    {190.88, Irrep::Gamma1, 0},   {257.47, Irrep::Gamma34, -2.30}, {275.31, Irrep::Gamma2, 0},
    {275.38, Irrep::Gamma1, 0},   {288.66, Irrep::Gamma1, 0},  {294.65, Irrep::Gamma34, 4.51},
    {303.37, Irrep::Gamma2, 0}};
const double kFrozen[] = {0.0, 6.8301, 23.3410, 47.6040, 56.8890, 72.1070, 190.8000,
                          257.3300, 275.1530, 275.2850, 288.5250, 294.5600, 303.2970};

}  // namespace

TEST(Hamiltonian, ReferenceLevelsMatchPublishedTable) {
  const auto cf = solve_cf(kRef, {});
  ASSERT_EQ(cf.size(), 13);
  for (int n = 1; n <= 13; ++n) {
    const auto& want = kPublished[n - 1];
    const auto& got = cf.level(n);
    EXPECT_NEAR(got.energy, want.energy, want.energy < 100 ? 1.0 : 5.0) << "8." << n;
    EXPECT_EQ(got.irrep, want.irrep) << "8." << n;
    if (got.is_doublet()) {
      EXPECT_NEAR(got.jz(1), want.jz, 0.10) << "8." << n;
    }
  }
}

TEST(Hamiltonian, ReferenceLevelsFrozen) {
  const auto cf = solve_cf(kRef, {});
  for (int n = 1; n <= 13; ++n) EXPECT_NEAR(cf.level(n).energy, kFrozen[n - 1], 1e-3) << "8." << n;
  EXPECT_NEAR(cf.level(1).jz(1), 5.395, 1e-3);
  EXPECT_NEAR(cf.level(6).jz(1), -3.597, 1e-3);
  EXPECT_NEAR(cf.level(8).jz(1), -2.302, 1e-3);
  EXPECT_NEAR(cf.level(12).jz(1), 4.504, 1e-3);
  EXPECT_NEAR(magnetic_moment(cf.level(6)), 1.25 * -3.597, 2e-3);
}

TEST(Hamiltonian, DoubletStructure) {
  const auto cf = solve_cf(kRef, {});
  int states = 0;
  for (const auto& l : cf.levels) {
    states += l.degeneracy;
    if (l.is_doublet()) {
      EXPECT_EQ(l.sectors[0], 3);  // sigma=+1 convention
      EXPECT_EQ(l.sectors[1], 1);
      EXPECT_NEAR(l.jz(-1), -l.jz(1), 1e-15);
    } else {
      EXPECT_EQ(l.jz(1), 0.0);
    }
  }
  EXPECT_EQ(states, 17);
}

TEST(Hamiltonian, EigenvectorsAreEigenstates) {
  const auto h = build_cf_hamiltonian(kRef, {}).entries();
  const auto cf = solve_cf(kRef, {});
  for (const auto& l : cf.levels) {
    for (const auto& v : l.eigenvectors) {
      EXPECT_NEAR(v.norm(), 1.0, 1e-12);
      const double e = (v.adjoint() * h * v)(0, 0).real() - cf.ground_energy;
      EXPECT_NEAR(e, l.energy, 1e-9);
      EXPECT_LT((h * v - (l.energy + cf.ground_energy) * v).norm(), 1e-9);
    }
  }
}

TEST(Hamiltonian, ZeroCrystalFieldIsFullyDegenerate) {
  const auto cf = solve_cf(CFParameters{}, {});
  int states = 0;
  for (const auto& l : cf.levels) {
    EXPECT_NEAR(l.energy, 0.0, 1e-12);
    states += l.degeneracy;
  }
  EXPECT_EQ(states, 17);
}

TEST(Hamiltonian, AxialFieldDoubletsCarrySharpM) {
  // B20 alone: levels are |+-M> at 3M^2. Odd M pairs into a doublet with
  // <Jz> = +-M; +-M with M even share a sector and stay two singlets.
  const auto cf = solve_cf(CFParameters{1.0, 0, 0, 0, 0, 0, 0}, {});
  EXPECT_EQ(cf.level(1).degeneracy, 1);
  EXPECT_EQ(cf.level(2).degeneracy, 2);
  EXPECT_NEAR(std::abs(cf.level(2).jz(1)), 1.0, 1e-12);
  EXPECT_NEAR(cf.level(2).energy, 3.0, 1e-9);
  EXPECT_EQ(cf.level(3).degeneracy, 1);
  EXPECT_EQ(cf.level(4).degeneracy, 1);
  EXPECT_NEAR(cf.level(4).energy, 12.0, 1e-9);
  EXPECT_EQ(cf.level(3).irrep, Irrep::Gamma2);
}

TEST(Hamiltonian, NonS4PerturbationIsRejected) {
  const HalfInt j(8);
  const auto jx = 0.5 * (build_jplus(j) + build_jminus(j));
  const auto h = build_stevens(2, 0, j) + 0.3 * jx;
  EXPECT_THROW(classify_levels(diagonalize(h), {}), SymmetryError);
}

TEST(Hamiltonian, HalfIntegerJIsRejectedForClassification) {
  SpinSystem sys{HalfInt::from_twice(15), HalfInt::from_twice(7)};
  const auto h = build_stevens(2, 0, sys.j);
  EXPECT_THROW(classify_levels(diagonalize(h), sys), InvalidArgument);
}

TEST(Hamiltonian, NonHermitianInputIsRejected) {
  const auto jp = build_jplus(HalfInt(2));
  EXPECT_THROW(diagonalize(jp), InvalidArgument);
}

TEST(Hamiltonian, HyperfineOperatorStructure) {
  SpinSystem sys;
  const auto jdi = build_j_dot_i(sys);
  EXPECT_EQ(jdi.dim(), 136);
  EXPECT_TRUE(jdi.is_hermitian());
  // J.I commutes with Fz = Jz + Iz.
  const auto fz = kron(build_jz(sys.j), build_identity(sys.i)) + kron(build_identity(sys.j), build_jz(sys.i));
  EXPECT_LT(commutator(jdi, fz).entries().cwiseAbs().maxCoeff(), 1e-10);
  // Eigenvalues of J.I are [F(F+1) - J(J+1) - I(I+1)]/2 for F = 9/2..23/2.
  const auto es = diagonalize(jdi);
  for (int c = 0; c < 136; ++c) {
    const double v = es.values(c);
    bool ok = false;
    for (int tf = 9; tf <= 23; tf += 2) {
      const double f = tf / 2.0;
      if (std::abs(v - 0.5 * (f * (f + 1) - 72.0 - 15.75)) < 1e-9) ok = true;
    }
    EXPECT_TRUE(ok) << v;
  }
}

TEST(Hamiltonian, ExactHyperfineLevelsPairUnderTimeReversal) {
  const auto cf = solve_cf(kRef, {});
  const auto levels = hf_levels_exact(cf, kRef, HyperfineConstants::holmium());
  ASSERT_EQ(levels.size(), 136u);
  for (const auto& h : levels) {
    if (!cf.level(h.n).is_doublet()) {
      EXPECT_EQ(h.sigma, 1);
      const auto& partner = find_hf_level(levels, h.n, 1, -h.m_z);
      EXPECT_NEAR(h.energy, partner.energy, 1e-9);
    } else {
      const auto& partner = find_hf_level(levels, h.n, -h.sigma, -h.m_z);
      EXPECT_NEAR(h.energy, partner.energy, 1e-9);
    }
  }
}

TEST(Hamiltonian, ExactGroundLadderSpacing) {
  const auto levels = hf_levels_exact(kRef, HyperfineConstants::holmium());
  // Consecutive m_z on 8.1+ differ by about A_J <Jz> = 0.146.
  for (int t = -7; t < 7; t += 2) {
    const double d = find_hf_level(levels, 1, 1, HalfInt::from_twice(t + 2)).energy -
                     find_hf_level(levels, 1, 1, HalfInt::from_twice(t)).energy;
    EXPECT_NEAR(d, 0.02703 * 5.395, 0.01);
  }
}

TEST(Hamiltonian, ZeroHyperfineGivesCfEnergies) {
  const auto cf = solve_cf(kRef, {});
  const auto levels = hf_levels_exact(cf, kRef, {0.0, 0.0});
  for (const auto& h : levels) EXPECT_NEAR(h.correction, 0.0, 1e-9);
}

TEST(Hamiltonian, LookupErrors) {
  const auto cf = solve_cf(kRef, {});
  EXPECT_THROW(cf.level(0), InvalidArgument);
  EXPECT_THROW(cf.level(14), InvalidArgument);
  EXPECT_THROW(cf.level(1).state(0), InvalidArgument);
  const auto levels = hf_levels_exact(cf, kRef, HyperfineConstants::holmium());
  EXPECT_THROW(find_hf_level(levels, 2, -1, HalfInt::from_twice(1)), InvalidArgument);
}

TEST(Hamiltonian, ParameterValidation) {
  CFParameters p = kRef;
  p.b40 = std::nan("");
  EXPECT_THROW(p.validate(), InvalidArgument);
  EXPECT_THROW(kRef[7], InvalidArgument);
  EXPECT_EQ(CFParameters::from_array(kRef.as_array()), kRef);
}
