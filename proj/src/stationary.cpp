#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "heom/hierarchy.hpp"
#include "krylov.hpp"

namespace heom {

namespace {

using detail::CVec;

/// Inverse of the ADO-diagonal blocks, (G - s I)^{-1} with s the damping of
/// each ADO. Uses one eigendecomposition of G when it is well conditioned.
class BlockJacobi {
 public:
  BlockJacobi(const Hierarchy& h, const Matrix& g, Matrix top, double shift) : h_(h), g_(g) {
    dd_ = static_cast<int>(g.rows());
    // Without delta terms the top block can be singular (populations of a
    // diagonal H have no local dynamics); shift the dynamical rows then.
    Eigen::FullPivLU<Matrix> probe(top);
    if (probe.rank() < dd_) top.bottomRows(dd_ - 1) -= shift * Matrix::Identity(dd_, dd_).bottomRows(dd_ - 1);
    top_lu_.compute(top);
    Eigen::ComplexEigenSolver<Matrix> es(g);
    w_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
    Eigen::PartialPivLU<Matrix> lu(w_);
    winv_ = lu.inverse();
    const double cond = w_.norm() * winv_.norm();
    use_eigen_ = es.info() == Eigen::Success && std::isfinite(cond) && cond < 1e8;
  }

  void apply(const CVec& in_vec, CVec& out_vec) const {
    const cplx* in = in_vec.data();
    cplx* out = out_vec.data();
    const std::size_t n = h_.table().size();
    using CV = Eigen::VectorXcd;
    for (std::size_t id = 0; id < n; ++id) {
      Eigen::Map<const CV> x(in + id * dd_, dd_);
      Eigen::Map<CV> y(out + id * dd_, dd_);
      if (id == 0) {
        y = top_lu_.solve(CV(x));
        continue;
      }
      const double s = h_.damping(id);
      if (use_eigen_) {
        CV z = winv_ * x;
        for (int i = 0; i < dd_; ++i) z(i) /= (lambda_(i) - s);
        y = w_ * z;
      } else {
        Matrix a = g_ - s * Matrix::Identity(dd_, dd_);
        y = a.partialPivLu().solve(CV(x));
      }
    }
  }

 private:
  const Hierarchy& h_;
  Matrix g_;
  int dd_ = 0;
  Eigen::PartialPivLU<Matrix> top_lu_;
  Matrix w_, winv_;
  Eigen::VectorXcd lambda_;
  bool use_eigen_ = false;
};

/// Diagonal similarity that balances the up (coefficient 1) and down
/// (coefficient n_m c_m) couplings between tiers.
std::vector<double> tier_scales(const Hierarchy& h) {
  const AdoTable& tab = h.table();
  std::vector<double> mag(tab.num_modes());
  for (int m = 0; m < tab.num_modes(); ++m) {
    const ExpTerm& e = h.term_of_mode(m);
    const double a = std::abs(cplx(e.c_real, e.c_imag));
    mag[m] = a > 0.0 ? a : 1.0;
  }
  std::vector<double> scale(tab.size());
  for (std::size_t id = 0; id < tab.size(); ++id) {
    const auto idx = tab.index(id);
    double lg = 0.0;
    for (int m = 0; m < tab.num_modes(); ++m)
      lg += 0.5 * (std::lgamma(idx[m] + 1.0) + idx[m] * std::log(mag[m]));
    scale[id] = std::exp(lg);
  }
  return scale;
}

/// Solves G(x) = e_0 where G is `map` with its first component replaced by
/// Tr rho, in tier-scaled variables. Writes the solution back into `state`.
detail::GmresResult solve_with_trace_row(const Hierarchy& h, HierarchyState& state,
                                         const std::function<void(HierarchyState&, HierarchyState&)>& map,
                                         const detail::LinearMap& precond,
                                         const detail::GmresOptions& opt) {
  const int d = h.model().dim();
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  const std::size_t n_ado = h.table().size();
  const std::size_t n = n_ado * dd;
  const std::vector<double> scale = tier_scales(h);

  HierarchyState work(h.table_ptr(), d, state.time());
  HierarchyState image(h.table_ptr(), d, state.time());
  auto apply_a = [&](const CVec& y, CVec& out) {
    cplx* x = work.data().data();
    for (std::size_t id = 0; id < n_ado; ++id)
      for (std::size_t i = 0; i < dd; ++i) x[id * dd + i] = y[id * dd + i] * scale[id];
    cplx tr{0.0, 0.0};
    for (int i = 0; i < d; ++i) tr += x[i * (d + 1)];
    map(work, image);
    const cplx* r = image.data().data();
    for (std::size_t id = 0; id < n_ado; ++id)
      for (std::size_t i = 0; i < dd; ++i) out[id * dd + i] = r[id * dd + i] / scale[id];
    out[0] = tr;
  };

  CVec b(n, cplx{0.0, 0.0});
  b[0] = 1.0;
  CVec y(n);
  const cplx* x0 = state.data().data();
  for (std::size_t id = 0; id < n_ado; ++id)
    for (std::size_t i = 0; i < dd; ++i) y[id * dd + i] = x0[id * dd + i] / scale[id];

  const detail::GmresResult res = detail::gmres(apply_a, precond, b, y, opt);

  cplx* x = state.data().data();
  for (std::size_t id = 0; id < n_ado; ++id)
    for (std::size_t i = 0; i < dd; ++i) x[id * dd + i] = y[id * dd + i] * scale[id];
  // Drop the round-off anti-Hermitian part of every ADO.
  for (std::size_t id = 0; id < n_ado; ++id) {
    auto a = state.ado(id);
    a = (0.5 * (a + a.adjoint())).eval();
  }
  return res;
}

detail::GmresOptions gmres_options(const StationaryOptions& opt) {
  return {opt.tol, opt.restart, opt.max_iterations, opt.max_basis_bytes};
}

}  // namespace

StationaryReport solve_stationary(const Hierarchy& h, HierarchyState& state,
                                  const StationaryOptions& opt) {
  if (h.model().driven()) throw InvalidArgument("stationary solve requires an undriven model");
  const AdoTable& tab = h.table();
  const int d = h.model().dim();
  const double t = state.time();

  // The first equation of the top block is replaced by Tr rho = 1; the top
  // equation's trace is identically zero, so the system stays consistent.
  const Matrix g = h.local_generator(t);
  Matrix top = g;
  top.row(0).setZero();
  for (int i = 0; i < d; ++i) top(0, i * (d + 1)) = 1.0;
  double shift = std::numeric_limits<double>::infinity();
  for (int m = 0; m < tab.num_modes(); ++m) shift = std::min(shift, h.term_of_mode(m).rate);
  if (!std::isfinite(shift)) shift = 1.0;
  const BlockJacobi precond(h, g, top, shift);

  auto generator = [&](HierarchyState& in, HierarchyState& out) { h.rhs(in, t, out.data()); };
  auto pre = [&](const CVec& in, CVec& out) { precond.apply(in, out); };
  const detail::GmresResult g_res = solve_with_trace_row(h, state, generator, pre, gmres_options(opt));

  StationaryReport rep;
  rep.converged = g_res.converged;
  rep.iterations = g_res.iterations;
  rep.restarts = g_res.restarts;
  rep.scaled_residual = g_res.residual;
  HierarchyState deriv(h.table_ptr(), d, t);
  h.rhs(state, t, deriv.data());
  rep.derivative_residual = deriv.rho().norm() / std::max(state.rho().norm(), 1e-300);
  return rep;
}

StationaryReport solve_periodic_fixed_point(const Hierarchy& h, HierarchyState& state,
                                            long steps_per_cycle, double dt,
                                            const StationaryOptions& opt) {
  if (steps_per_cycle < 1 || !(dt > 0.0)) throw InvalidArgument("cycle discretization must be positive");
  const double t0 = state.time();
  Rk4Integrator rk(h);
  auto cycle_residual = [&](HierarchyState& in, HierarchyState& out) {
    out = in;
    out.set_time(t0);
    for (long i = 0; i < steps_per_cycle; ++i) {
      rk.step(out, dt);
      out.set_time(t0 + (i + 1) * dt);
    }
    const cplx* a = in.data().data();
    cplx* o = out.data().data();
    for (std::size_t q = 0; q < in.data().size(); ++q) o[q] -= a[q];
  };
  const detail::GmresResult g_res =
      solve_with_trace_row(h, state, cycle_residual, {}, gmres_options(opt));
  state.set_time(t0);

  StationaryReport rep;
  rep.converged = g_res.converged;
  rep.iterations = g_res.iterations;
  rep.restarts = g_res.restarts;
  rep.scaled_residual = g_res.residual;
  HierarchyState mapped(h.table_ptr(), h.model().dim(), t0);
  cycle_residual(state, mapped);
  rep.derivative_residual = mapped.rho().norm() / std::max(state.rho().norm(), 1e-300);
  return rep;
}

}  // namespace heom
