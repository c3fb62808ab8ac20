#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "heom/currents.hpp"
#include "heom/hierarchy.hpp"
#include "heom/models.hpp"
#include "oracles.hpp"

using namespace heom;

namespace {

Matrix pauli(char which) {
  Matrix m(2, 2);
  if (which == 'x') m << 0, 1, 1, 0;
  if (which == 'y') m << 0, -kI, kI, 0;
  if (which == 'z') m << 1, 0, 0, -1;
  return m;
}

std::uint64_t choose(int n, int k) {
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void fill_random(HierarchyState& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (std::size_t id = 0; id < s.num_ados(); ++id) {
    auto a = s.ado(id);
    for (int i = 0; i < s.dim(); ++i)
      for (int j = 0; j < s.dim(); ++j) a(i, j) = cplx(n(rng), n(rng));
    a = (0.5 * (a + a.adjoint())).eval();
  }
  s.ado(0) /= s.ado(0).trace();
}

Observable rho_observable() {
  return [](const HierarchyState& s, double) {
    const Matrix r = s.rho();
    return std::vector<double>{r(0, 0).real(), r(0, 1).real(), r(0, 1).imag()};
  };
}

}  // namespace

TEST_CASE("simplex counts and ranking") {
  CHECK(simplex_count(2, 1) == 3);
  CHECK(simplex_count(4, 10) == 1001);
  for (int m = 1; m <= 6; ++m)
    for (int n = 0; n <= 7; ++n) CHECK(simplex_count(m, n) == choose(m + n, n));
  CHECK(simplex_count(200, 200) == std::numeric_limits<std::uint64_t>::max());

  const int modes = 4, depth = 5;
  std::set<std::vector<int>> seen;
  int prev_order = 0;
  for (std::uint64_t r = 0; r < simplex_count(modes, depth); ++r) {
    const std::vector<int> n = simplex_unrank(r, modes);
    CHECK(simplex_rank(n) == r);
    int order = 0;
    for (int v : n) order += v;
    CHECK(order >= prev_order);
    prev_order = order;
    seen.insert(n);
  }
  CHECK(seen.size() == simplex_count(modes, depth));
}

TEST_CASE("ado table layout and neighbors") {
  const AdoTable small({2}, 1);
  CHECK(small.size() == 3);
  const std::vector<int> e0{1, 0};
  const std::size_t id = small.id_of(e0);
  CHECK(small.down(id, 0) == 0);
  CHECK(small.up(id, 0) == kNoAdo);
  const AdoTable deeper({2}, 2);
  CHECK(deeper.up(deeper.id_of(e0), 0) != kNoAdo);
  CHECK(deeper.order(deeper.up(deeper.id_of(e0), 0)) == 2);

  const AdoTable t({3, 2}, 4);
  CHECK(t.size() == choose(9, 4));
  CHECK(t.first_mode(1) == 3);
  CHECK(t.bath_of_mode(4) == 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (int m = 0; m < t.num_modes(); ++m) {
      const std::size_t u = t.up(i, m);
      if (u != kNoAdo) CHECK(t.down(u, m) == i);
      if (t.index(i)[m] == 0) CHECK(t.down(i, m) == kNoAdo);
    }
  }
}

TEST_CASE("per-bath depth caps") {
  const AdoTable t({2, 3}, 5, {-1, 1});
  std::size_t brute = 0;
  for (std::uint64_t r = 0; r < simplex_count(5, 5); ++r) {
    const auto n = simplex_unrank(r, 5);
    if (n[2] + n[3] + n[4] <= 1) ++brute;
  }
  CHECK(t.size() == brute);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto idx = t.index(i);
    std::vector<int> n(idx.begin(), idx.end());
    CHECK(t.id_of(n) == i);
  }
  TableLimits tiny;
  tiny.max_ados = 100;
  CHECK_THROWS_AS(AdoTable({4, 4}, 8, {}, tiny), ResourceError);
}

TEST_CASE("decoupled hierarchy is unitary") {
  SpinBosonParams p;
  for (auto& b : p.baths) b.eta = 0.0;
  const ModelSetup m = build_spin_boson(p);
  const Hierarchy h(m.model, m.baths, 3);
  Matrix rho0(2, 2);
  rho0 << 0.5, 0.5, 0.5, 0.5;  // sigma_x eigenstate
  HierarchyState s = h.initial_state(rho0);
  const HierarchyState d = h.rhs(s, 0.0);
  const Matrix hs = m.model.h_static();
  CHECK((d.rho() - (-kI) * (hs * rho0 - rho0 * hs)).norm() < 1e-15);
  for (std::size_t id = 1; id < d.num_ados(); ++id) CHECK(d.ado(id).norm() == 0.0);

  auto error_after = [&](double dt) {
    HierarchyState st = h.initial_state(rho0);
    Rk4Integrator rk(h);
    const int steps = static_cast<int>(std::lround(2.0 * M_PI / dt));
    for (int i = 0; i < steps; ++i) rk.step(st, dt);
    const double t = steps * dt;
    const double sx = (pauli('x') * st.rho()).trace().real();
    CHECK(std::abs(sx - std::cos(t)) < 1e-4);
    Matrix exact = rho0;
    exact(0, 1) = 0.5 * std::exp(-kI * t);
    exact(1, 0) = std::conj(exact(0, 1));
    return (st.rho() - exact).norm();
  };
  const double e1 = error_after(0.1), e2 = error_after(0.05);
  CHECK(e1 < 1e-5);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("top-level trace is conserved for arbitrary states") {
  const ModelSetup m = build_spin_boson({});
  const Hierarchy h(m.model, m.baths, 3);
  HierarchyState s(h.table_ptr(), 2);
  fill_random(s, 3);
  const HierarchyState d = h.rhs(s, 0.0);
  CHECK(std::abs(d.rho().trace()) < 1e-13);
  // Hermitian ADOs map to Hermitian derivatives.
  CHECK(d.hermiticity_defect() < 1e-13);
}

TEST_CASE("pure dephasing matches the influence functional") {
  const double w0 = 1.0, eta = 0.1, gamma = 2.0, temp = 1.0;
  Matrix h = 0.5 * w0 * pauli('z');
  SystemModel model(h, {pauli('z')});
  const NoiseDecomposition bath = pade_decompose({eta, gamma, temp, 4});
  const Hierarchy hier(model, {bath}, 8);
  Matrix rho0 = Matrix::Constant(2, 2, 0.5);
  HierarchyState s = hier.initial_state(rho0);
  Rk4Integrator rk(hier);
  const double dt = 0.005;

  // Gamma(t) = 4 int_0^t (t - u) C^R(u) du, integrated term by term over
  // the Matsubara series.
  auto decay = [&](double t) {
    auto piece = [t](double c, double nu) { return c * (nu * t - 1.0 + std::exp(-nu * t)) / (nu * nu); };
    double g = piece(0.5 * eta * gamma * gamma / std::tan(gamma / (2.0 * temp)), gamma);
    for (long k = 1; k < 2'000'000; ++k) {
      const double nu = 2.0 * M_PI * temp * k;
      g += piece(2.0 * eta * gamma * gamma * temp * nu / (nu * nu - gamma * gamma), nu);
    }
    return 4.0 * g;
  };
  double worst = 0.0;
  for (int i = 1; i <= 600; ++i) {
    rk.step(s, dt);
    if (i % 100 == 0) {
      const double t = i * dt;
      const cplx expected = 0.5 * std::exp(-kI * w0 * t) * std::exp(-decay(t));
      worst = std::max(worst, std::abs(s.rho()(0, 1) - expected));
    }
  }
  CHECK(worst < 2e-5);
}

TEST_CASE("stationary solve agrees with propagation and is unique") {
  const ModelSetup m = build_spin_boson({});
  const Hierarchy h(m.model, m.baths, 4);
  SteadyOptions plain;
  plain.direct = false;
  plain.window = 5.0;
  plain.tol = 1e-10;
  const SteadyResult a = propagate_to_steady(h, h.initial_state(m.rho0), plain, rho_observable());
  CHECK(a.max_trace_defect < 1e-10);
  CHECK(a.max_hermiticity_defect < 1e-9);

  HierarchyState direct = h.initial_state(m.rho0);
  const StationaryReport rep = solve_stationary(h, direct);
  CHECK(rep.converged);
  CHECK((direct.rho() - a.state.rho()).norm() < 1e-8);

  Matrix ground = Matrix::Zero(2, 2);
  ground(1, 1) = 1.0;
  HierarchyState other = h.initial_state(ground);
  solve_stationary(h, other);
  CHECK((other.rho() - direct.rho()).norm() < 1e-10);

  SteadyOptions cheap;
  cheap.window = 1.0;
  cheap.tol = 1e-10;
  const SteadyResult c = propagate_to_steady(h, h.initial_state(ground), cheap, rho_observable());
  CHECK(c.history.size() == 1);
  CHECK((c.state.rho() - direct.rho()).norm() < 1e-10);
}

TEST_CASE("steady propagation reports non-convergence") {
  const ModelSetup m = build_spin_boson({});
  const Hierarchy h(m.model, m.baths, 2);
  SteadyOptions o;
  o.direct = false;
  o.accelerate = false;
  o.window = 1.0;
  o.t_max = 2.0;
  CHECK_THROWS_AS(propagate_to_steady(h, h.initial_state(m.rho0), o, rho_observable()),
                  ConvergenceError);
}

TEST_CASE("serial and threaded sweeps agree") {
  SpinBosonParams p;
  for (auto& b : p.baths) b.eta = 0.3;
  const ModelSetup m = build_spin_boson(p);
  Hierarchy h(m.model, m.baths, 6);
  HierarchyState s(h.table_ptr(), 2);
  fill_random(s, 11);
  const HierarchyState serial = h.rhs(s, 0.0);
  h.set_threads(4);
  const HierarchyState threaded = h.rhs(s, 0.0);
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < serial.data().size(); ++i) {
    diff = std::max(diff, std::abs(serial.data()[i] - threaded.data()[i]));
    scale = std::max(scale, std::abs(serial.data()[i]));
  }
  CHECK(diff <= 1e-12 * scale);
}

TEST_CASE("non-finite steps name the offending ado") {
  SpinBosonParams p;
  for (auto& b : p.baths) b.eta = 1.0;
  const ModelSetup m = build_spin_boson(p);
  const Hierarchy h(m.model, m.baths, 4);
  HierarchyState s = h.initial_state(m.rho0);
  Rk4Integrator rk(h);
  bool thrown = false;
  try {
    for (int i = 0; i < 2000; ++i) rk.step(s, 5.0);
  } catch (const NumericalError& e) {
    thrown = true;
    CHECK(e.ado() < h.table().size());
  }
  CHECK(thrown);
}

TEST_CASE("checkpoint round trip") {
  const ModelSetup m = build_spin_boson({});
  const Hierarchy h(m.model, m.baths, 3);
  HierarchyState s(h.table_ptr(), 2, 4.25);
  fill_random(s, 5);
  const auto path = std::filesystem::temp_directory_path() / "heom_test_checkpoint.bin";
  save_checkpoint(path, h, s);
  const HierarchyState back = load_checkpoint(path, h);
  CHECK(back.time() == 4.25);
  CHECK(std::equal(s.data().begin(), s.data().end(), back.data().begin()));

  const Hierarchy deeper(m.model, m.baths, 4);
  CHECK_THROWS_AS(load_checkpoint(path, deeper), InvalidArgument);
  SpinBosonParams p;
  p.s_x = 0.5;
  const ModelSetup other = build_spin_boson(p);
  const Hierarchy h2(other.model, other.baths, 3);
  CHECK_THROWS_AS(load_checkpoint(path, h2), InvalidArgument);
  std::filesystem::remove(path);
}

TEST_CASE("undriven periodic propagation is constant") {
  ThreeLevelParams p;
  p.g = 0.0;
  const ModelSetup m = build_three_level(p);
  const Hierarchy h(m.model, m.baths, 2);
  HierarchyState start = h.initial_state(m.rho0);
  solve_stationary(h, start);
  PeriodicOptions o;
  o.dt = 0.05;
  o.samples_per_cycle = 16;
  o.tol = 1e-9;
  const PeriodicResult r = propagate_periodic(h, start, o, record_observable(h));
  for (const auto& s : r.samples)
    for (std::size_t q = 0; q < s.size(); ++q) CHECK(std::abs(s[q] - r.samples[0][q]) < 1e-9);
  CHECK(r.steps_per_cycle % 16 == 0);
  CHECK(r.dt * r.steps_per_cycle == doctest::Approx(r.period));
}
