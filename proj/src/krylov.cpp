#include "krylov.hpp"

#include <algorithm>
#include <cmath>

namespace heom::detail {

namespace {

cplx dot(const CVec& a, const CVec& b) {
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double nrm(const CVec& a) {
  long double s = 0;
  for (const auto& z : a) s += std::norm(z);
  return std::sqrt(static_cast<double>(s));
}

}  // namespace

GmresResult gmres(const LinearMap& a, const LinearMap& precond, const CVec& b, CVec& x,
                  const GmresOptions& opt) {
  const std::size_t n = b.size();
  const double vec_bytes = static_cast<double>(n) * sizeof(cplx);
  const int fit = static_cast<int>(std::floor(opt.max_basis_bytes / std::max(vec_bytes, 1.0))) - 3;
  int m = std::clamp(std::min(opt.restart, fit), 2, 400);
  const int shortest = std::min(m, 8);

  GmresResult res;
  CVec r(n), tmp(n), z(n), x_prev(n);
  std::vector<CVec> basis(m + 1, CVec(n));
  Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(m + 1, m);
  std::vector<cplx> cs(m), sn(m), g(m + 1);
  auto apply_m = [&](const CVec& in, CVec& out) {
    if (precond)
      precond(in, out);
    else
      out = in;
  };
  auto true_residual = [&]() {
    a(x, tmp);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - tmp[i];
    return nrm(r);
  };

  double beta = true_residual();
  while (res.iterations < opt.max_iterations && beta > opt.tol) {
    for (std::size_t i = 0; i < n; ++i) basis[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), cplx{0.0, 0.0});
    g[0] = beta;
    hess.setZero();
    int used = 0;
    for (int j = 0; j < m && res.iterations < opt.max_iterations; ++j) {
      ++res.iterations;
      apply_m(basis[j], z);
      a(z, tmp);
      for (int i = 0; i <= j; ++i) {
        const cplx hij = dot(basis[i], tmp);
        hess(i, j) = hij;
        for (std::size_t q = 0; q < n; ++q) tmp[q] -= hij * basis[i][q];
      }
      const double hn = nrm(tmp);
      hess(j + 1, j) = hn;
      if (hn > 0.0)
        for (std::size_t q = 0; q < n; ++q) basis[j + 1][q] = tmp[q] / hn;
      for (int i = 0; i < j; ++i) {
        const cplx u = hess(i, j), v = hess(i + 1, j);
        hess(i, j) = std::conj(cs[i]) * u + std::conj(sn[i]) * v;
        hess(i + 1, j) = -sn[i] * u + cs[i] * v;
      }
      const cplx u = hess(j, j), v = hess(j + 1, j);
      const double den = std::sqrt(std::norm(u) + std::norm(v));
      cs[j] = den > 0.0 ? u / den : cplx(1.0);
      sn[j] = den > 0.0 ? v / den : cplx(0.0);
      hess(j, j) = den;
      hess(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = std::conj(cs[j]) * g[j];
      used = j + 1;
      if (std::abs(g[j + 1]) <= opt.tol || hn == 0.0) break;
    }
    Eigen::VectorXcd coef(used);
    for (int i = used - 1; i >= 0; --i) {
      cplx s = g[i];
      for (int k = i + 1; k < used; ++k) s -= hess(i, k) * coef(k);
      coef(i) = s / hess(i, i);
    }
    std::fill(tmp.begin(), tmp.end(), cplx{0.0, 0.0});
    for (int k = 0; k < used; ++k)
      for (std::size_t q = 0; q < n; ++q) tmp[q] += coef(k) * basis[k][q];
    apply_m(tmp, z);
    x_prev = x;
    for (std::size_t q = 0; q < n; ++q) x[q] += z[q];
    const double next = true_residual();
    ++res.restarts;
    if (next < 0.999 * beta) {
      beta = next;
      continue;
    }
    // A long cycle can lose the true residual to round-off in the update even
    // when the recurrence estimate is small. Undo it and retry shorter.
    x = x_prev;
    beta = true_residual();
    if (m == shortest) break;
    m = std::max(shortest, m / 2);
  }
  res.residual = beta;
  res.converged = beta <= opt.tol;
  return res;
}

}  // namespace heom::detail
