#include <doctest.h>

#include <random>

#include "heom/error.hpp"
#include "heom/models.hpp"
#include "heom/system.hpp"

using namespace heom;

namespace {

Matrix random_hermitian(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
  return 0.5 * (m + m.adjoint());
}

Matrix sx() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
Matrix sy() {
  Matrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}
Matrix sz() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace

TEST_CASE("spin-boson operators by Pauli algebra") {
  const ModelSetup m = build_spin_boson({});
  CHECK((m.model.a_operator(0, 0.0) - (-1.0) * sy()).norm() < 1e-14);
  // V2 = (sx + sz)/sqrt2: [sx, sz] = -2i sy and B = -[[V1,V2],V1] = 2 sqrt2 sz.
  CHECK((m.model.b_operator(0, 1) - 2.0 * std::sqrt(2.0) * sz()).norm() < 1e-13);
  CHECK_THROWS_AS(m.model.b_operator(1, 1), InvalidArgument);

  SpinBosonParams commuting;
  commuting.s_z = 0.0;
  CHECK(build_spin_boson(commuting).model.b_operator(0, 1).norm() == 0.0);

  SpinBosonParams dephasing;
  dephasing.s_x = 0.0;
  CHECK(build_spin_boson(dephasing).model.a_operator(1, 0.0).norm() == 0.0);
}

TEST_CASE("driven hamiltonian is hermitian and its derivative is the power operator") {
  ThreeLevelParams p;
  const ModelSetup m = build_three_level(p);
  CHECK(m.model.period() == doctest::Approx(2.0 * M_PI / p.Omega));
  const double h = 1e-4;
  for (double t : {0.0, 0.7, 3.1, 11.0}) {
    const Matrix ht = m.model.hamiltonian_at(t);
    CHECK(hermiticity_defect(ht) < 1e-12);
    const Matrix fd = (m.model.hamiltonian_at(t + h) - m.model.hamiltonian_at(t - h)) / (2.0 * h);
    CHECK((fd - m.model.power_operator(t)).norm() < 1e-8);
    const Matrix a = kI * (ht * m.model.coupling(0) - m.model.coupling(0) * ht);
    CHECK((a - m.model.a_operator(0, t)).norm() == 0.0);
  }
  // The drive adds (0,2)-free structure: A_1 picks up (0,2)/(2,0) entries.
  CHECK(std::abs(m.model.a_operator(0, 0.3)(0, 2)) > 0.0);
  CHECK(std::abs(m.model.a_operator(0, 0.0)(0, 1)) == doctest::Approx(p.omega1));
}

TEST_CASE("b operator hermiticity for every preset") {
  for (const ModelSetup& m : {build_spin_boson({}), build_three_level({})}) {
    const Matrix b = m.model.b_operator(0, 1);
    CHECK(hermiticity_defect(b) < 1e-14);
    const Matrix b2 = m.model.b_operator(1, 0);
    CHECK(hermiticity_defect(b2) < 1e-14);
  }
}

TEST_CASE("superoperators against naive application") {
  std::mt19937_64 rng(7);
  const ModelSetup m = build_spin_boson({});
  const NoiseDecomposition& bath = m.baths[0];
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_hermitian(2, rng);
    const Matrix v = m.model.coupling(0);
    const Matrix phi_x = kI * (v * x - x * v);
    CHECK((apply_phi(m.model, 0, x) - phi_x).norm() < 1e-13);
    CHECK(std::abs(apply_phi(m.model, 0, x).trace()) < 1e-13);
    const Matrix phi2 = SuperOp::compose(phi(m.model, 0), phi(m.model, 0)).apply(x);
    CHECK((phi2 - kI * (v * phi_x - phi_x * v)).norm() < 1e-13);
    const ExpTerm& e = bath.terms()[0];
    const Matrix th = apply_theta(m.model, m.baths, 0, 0, x);
    CHECK((th - (e.c_real * phi_x - e.c_imag * (v * x + x * v))).norm() < 1e-13);
    const Matrix phith =
        SuperOp::compose(phi(m.model, 0), theta(m.model, 0, e)).apply(x);
    CHECK((phith - kI * (v * th - th * v)).norm() < 1e-13);
  }
  const Matrix id = Matrix::Identity(2, 2);
  CHECK((apply_psi(m.model, 0, id) - 2.0 * sx()).norm() < 1e-15);
  // Theta with c' = 1, c'' = 0 reduces to Phi.
  const Matrix x = random_hermitian(2, rng);
  CHECK((theta(m.model, 0, {1.0, 0.0, 1.0}).apply(x) - apply_phi(m.model, 0, x)).norm() < 1e-15);
}

TEST_CASE("model invariants") {
  SpinBosonParams bad;
  bad.s_x = bad.s_z = 0.0;
  CHECK_THROWS_AS(build_spin_boson(bad), InvalidArgument);
  ThreeLevelParams order;
  order.omega2 = 1.5;
  CHECK_THROWS_AS(build_three_level(order), InvalidArgument);

  SpinBosonParams p;
  p.s_x = 3.0;
  p.s_z = 4.0;
  const Matrix v2 = build_spin_boson(p).model.coupling(1);
  CHECK((v2 * v2 - Matrix::Identity(2, 2)).norm() < 1e-14);

  const ModelSetup a = build_spin_boson({});
  const ModelSetup b = build_spin_boson({});
  CHECK(a.model_hash == b.model_hash);
  CHECK(a.decomposition_hash == b.decomposition_hash);
  CHECK(a.model_hash != build_spin_boson(p).model_hash);

  ThreeLevelParams off;
  off.g = 0.0;
  CHECK_FALSE(build_three_level(off).model.driven());
}
