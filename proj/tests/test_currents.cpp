#include <doctest.h>

#include <cmath>

#include "heom/currents.hpp"
#include "heom/models.hpp"

using namespace heom;

namespace {

HierarchyState steady(const Hierarchy& h, const Matrix& rho0) {
  HierarchyState s = h.initial_state(rho0);
  REQUIRE(solve_stationary(h, s).converged);
  return s;
}

Trajectory synthetic_cycle(double period, int n, const std::function<double(double)>& power) {
  Trajectory traj{TrajectoryKind::Periodic, period, {}};
  for (int i = 0; i < n; ++i) {
    CurrentRecord r;
    r.t = period * i / n;
    r.rho = Matrix::Identity(2, 2) / 2.0;
    r.power = power(r.t);
    r.q_s = {0.0, 0.0};
    r.q_b = {0.0, 0.0};
    r.h_int = {0.0, 0.0};
    r.h_int_rate = {0.0, 0.0};
    traj.records.push_back(r);
  }
  return traj;
}

}  // namespace

TEST_CASE("estimators vanish without coupling and need a first tier") {
  SpinBosonParams p;
  for (auto& b : p.baths) b.eta = 0.0;
  const ModelSetup m = build_spin_boson(p);
  const Hierarchy h(m.model, m.baths, 2);
  const HierarchyState s = h.initial_state(m.rho0);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(shc(h, s, k, 0.0) == 0.0);
    CHECK(bhc(h, s, k, 0.0) == 0.0);
    CHECK(interaction_energy(h, s, k) == 0.0);
  }
  CHECK(power(h, s, 0.0) == 0.0);
  const Hierarchy flat(m.model, m.baths, 0);
  CHECK_THROWS_AS(shc(flat, flat.initial_state(m.rho0), 0, 0.0), InvalidArgument);
}

TEST_CASE("steady-state energy balance and commuting couplings") {
  SpinBosonParams p;
  p.s_z = 0.0;
  const ModelSetup m = build_spin_boson(p);
  const Hierarchy h(m.model, m.baths, 4);
  const HierarchyState s = steady(h, m.rho0);
  const CurrentRecord r = evaluate_record(h, s, 0.0);
  CHECK(r.q_b[0] > 0.0);
  CHECK(std::abs(r.q_b[0] - r.q_s[0]) < 1e-10 * r.q_b[0]);
  CHECK(std::abs(r.q_b[0] + r.q_b[1]) < 1e-12);

  Trajectory traj{TrajectoryKind::Steady, 0.0, {r}};
  finalize(traj);
  CHECK(std::abs(traj.records[0].casbi[0]) < 1e-10 * r.q_b[0]);
  CHECK(max_first_law_residual(traj) < 1e-12);
}

TEST_CASE("non-commuting steady state: casbi equals bhc - shc") {
  const ModelSetup m = build_spin_boson({});
  const Hierarchy h(m.model, m.baths, 4);
  const HierarchyState s = steady(h, m.rho0);
  Trajectory traj{TrajectoryKind::Steady, 0.0, {evaluate_record(h, s, 0.0)}};
  finalize(traj);
  const auto& r = traj.records[0];
  CHECK(r.casbi[0] == doctest::Approx(r.q_b[0] - r.q_s[0]).epsilon(1e-14));
  CHECK(std::abs(r.casbi[0]) > 1e-3 * r.q_b[0]);
  const double clausius[] = {r.q_b[0], r.q_b[1]};
  const double temps[] = {2.0, 1.0};
  CHECK(second_law_check(clausius, temps, 1e-8).passed);
}

TEST_CASE("transient first law closes along the trajectory") {
  SpinBosonParams p;
  for (auto& b : p.baths) b.eta = 0.1;
  const ModelSetup m = build_spin_boson(p);
  const Hierarchy h(m.model, m.baths, 6);
  Matrix excited = Matrix::Zero(2, 2);
  excited(0, 0) = 1.0;
  const TransientResult tr =
      propagate_transient(h, h.initial_state(excited), 0.005, 6.0, 4, record_observable(h));
  Trajectory traj{TrajectoryKind::Transient, 0.0, {}};
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    traj.records.push_back(unpack(tr.samples[i], tr.times[i], 2, 2));
  finalize(traj);
  const double scale = energy_flow_scale(traj);
  CHECK(scale > 1e-2);
  CHECK(max_first_law_residual(traj) < 1e-5 * scale);
  CHECK(tr.max_trace_defect < 1e-10);

  // The recorded rates are the time derivatives of the recorded energies.
  const auto& rs = traj.records;
  const double step = rs[1].t - rs[0].t;
  auto centered = [&](std::size_t i, auto get) {
    return (get(i - 2) - 8.0 * get(i - 1) + 8.0 * get(i + 1) - get(i + 2)) / (12.0 * step);
  };
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < rs.size(); ++i) {
    worst = std::max(worst, std::abs(centered(i, [&](std::size_t j) { return rs[j].system_energy; }) -
                                     rs[i].system_energy_rate));
    for (std::size_t k = 0; k < 2; ++k)
      worst = std::max(worst, std::abs(centered(i, [&](std::size_t j) { return rs[j].h_int[k]; }) -
                                       rs[i].h_int_rate[k]));
  }
  CHECK(worst < 1e-3 * scale);
}

TEST_CASE("equilibrium: no currents, negative interaction energy linear in eta") {
  double hint_small = 0.0;
  for (double eta : {0.005, 0.01}) {
    SpinBosonParams p;
    for (auto& b : p.baths) {
      b.eta = eta;
      b.temperature = 1.5;
      b.pade_terms = 3;
    }
    const ModelSetup m = build_spin_boson(p);
    const Hierarchy h(m.model, m.baths, 4);
    const HierarchyState s = steady(h, m.rho0);
    const CurrentRecord r = evaluate_record(h, s, 0.0);
    CHECK(std::abs(r.q_b[0]) < 1e-8);
    CHECK(std::abs(r.q_b[1]) < 1e-8);
    CHECK(r.h_int[0] < 0.0);
    if (hint_small == 0.0)
      hint_small = r.h_int[0];
    else
      CHECK(r.h_int[0] / hint_small == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("cycle integrals on synthetic signals") {
  const double period = 4.0;
  const Trajectory constant = synthetic_cycle(period, 64, [](double) { return 0.3; });
  CHECK(cycle_average(constant).work == doctest::Approx(0.3 * period).epsilon(1e-14));
  const Trajectory wave = synthetic_cycle(period, 64, [&](double t) { return std::sin(2 * M_PI * t / period); });
  CHECK(std::abs(cycle_average(wave).work) < 1e-14);
  Trajectory not_periodic = constant;
  not_periodic.kind = TrajectoryKind::Transient;
  CHECK_THROWS_AS(cycle_average(not_periodic), InvalidArgument);
  Trajectory no_rates = constant;
  no_rates.records[3].h_int_rate.clear();
  CHECK_THROWS_AS(finalize(no_rates), InvalidArgument);
}

TEST_CASE("efficiency guard and Clausius functional") {
  CycleIntegrals c{-0.2, {0.5, -0.3}, {0.8, -0.6}};
  const Efficiencies e = efficiencies(c);
  REQUIRE(e.system.has_value());
  CHECK(*e.system == doctest::Approx(0.4));
  CHECK(*e.bath == doctest::Approx(0.25));
  c.q_s[0] = 1e-13;
  CHECK_FALSE(efficiencies(c).system.has_value());

  const double heat[] = {1.0, -0.5};
  const double temps[] = {2.0, 1.0};
  const ClausiusCheck eq = second_law_check(heat, temps, 1e-8);
  CHECK(eq.value == doctest::Approx(0.0));
  CHECK(eq.passed);
  const double reversed[] = {-1.0, 1.0};
  CHECK_FALSE(second_law_check(reversed, temps, 1e-8).passed);
}
