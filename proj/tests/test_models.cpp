#include <doctest.h>

#include "heom/currents.hpp"
#include "heom/models.hpp"
#include "oracles.hpp"

using namespace heom;

namespace {

SpinBosonParams commuting(double eta) {
  SpinBosonParams p;
  p.s_z = 0.0;
  for (auto& b : p.baths) b.eta = eta;
  return p;
}

}  // namespace

TEST_CASE("redfield oracle reproduces the golden-rule current") {
  for (double eta : {0.001, 0.01}) {
    const SpinBosonParams p = commuting(eta);
    const ModelSetup m = build_spin_boson(p);
    const RedfieldSolution red = redfield_steady_current_oracle(m.model, m.specs);
    const double w0 = p.omega0;
    const double j1 = oracle::drude_j(eta, 2.0, w0), j2 = oracle::drude_j(eta, 2.0, w0);
    const double expected =
        oracle::golden_rule_current(w0, j1, oracle::bose(w0, 2.0), j2, oracle::bose(w0, 1.0));
    CHECK(red.current[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(red.current[1] == doctest::Approx(-expected).epsilon(1e-9));
    CHECK(std::abs(red.rho.trace() - 1.0) < 1e-12);
  }
}

TEST_CASE("redfield oracle trivial limits") {
  SpinBosonParams p = commuting(0.01);
  p.baths[1].temperature = p.baths[0].temperature;
  const ModelSetup eq = build_spin_boson(p);
  CHECK(std::abs(redfield_steady_current_oracle(eq.model, eq.specs).current[0]) < 1e-14);

  SpinBosonParams drained = commuting(0.01);
  drained.baths[1].eta = 0.0;
  const ModelSetup m = build_spin_boson(drained);
  CHECK(std::abs(redfield_steady_current_oracle(m.model, m.specs).current[0]) < 1e-14);

  const ModelSetup engine = build_three_level({});
  CHECK_THROWS_AS(redfield_steady_current_oracle(engine.model, engine.specs), InvalidArgument);
}

TEST_CASE("half-sided correlation transform") {
  const BathSpec spec{0.2, 2.0, 1.0, 0};
  const cplx at_zero = half_fourier_correlation(spec, 0.0);
  CHECK(at_zero.real() == doctest::Approx(0.2 * 1.0));
  // int_0^inf C^I(t) dt comes from the Drude pole alone: -eta gamma / 2.
  CHECK(at_zero.imag() == doctest::Approx(-0.5 * 0.2 * 2.0).epsilon(1e-12));
  // Detailed balance of the real part.
  const double w = 0.7;
  const double ratio = half_fourier_correlation(spec, w).real() / half_fourier_correlation(spec, -w).real();
  CHECK(ratio == doctest::Approx(std::exp(w / 1.0)).epsilon(1e-12));
}

TEST_CASE("weak-coupling hierarchy agrees with the oracle") {
  const SpinBosonParams p = commuting(0.001);
  SpinBosonParams q = p;
  for (auto& b : q.baths) b.pade_terms = 2;
  const ModelSetup m = build_spin_boson(q);
  const Hierarchy h(m.model, m.baths, 3);
  HierarchyState s = h.initial_state(m.rho0);
  REQUIRE(solve_stationary(h, s).converged);
  const double heom_q = bhc(h, s, 0, 0.0);
  const double ref = redfield_steady_current_oracle(m.model, m.specs).current[0];
  CHECK(std::abs(heom_q - ref) < 0.1 * std::abs(ref));
}

TEST_CASE("engine shows population inversion at weak coupling") {
  ThreeLevelParams p;
  p.g = 0.0;
  const ModelSetup m = build_three_level(p);
  const Hierarchy h(m.model, m.baths, 3);
  HierarchyState s = h.initial_state(m.rho0);
  REQUIRE(solve_stationary(h, s).converged);
  const Matrix rho = s.rho();
  CHECK(rho(1, 1).real() > rho(2, 2).real());
}
