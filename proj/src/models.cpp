#include "heom/models.hpp"

#include <cmath>
#include <sstream>

#include "heom/error.hpp"
#include "heom/hierarchy.hpp"

namespace heom {

namespace {

Matrix pauli_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Matrix pauli_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Matrix projector(int dim, int a, int b) {
  Matrix m = Matrix::Zero(dim, dim);
  m(a, b) = 1.0;
  return m;
}

ModelSetup finish(std::string name, SystemModel model, std::vector<BathSpec> specs) {
  std::vector<NoiseDecomposition> baths;
  for (const auto& s : specs) baths.push_back(pade_decompose(s));
  const int d = model.dim();
  ModelSetup out{std::move(name), std::move(model), std::move(specs), std::move(baths),
                 Matrix::Identity(d, d) / static_cast<double>(d)};
  out.model_hash = fingerprint(out.model);
  out.decomposition_hash = fingerprint(std::span<const NoiseDecomposition>(out.baths));
  return out;
}

}  // namespace

ModelSetup build_spin_boson(const SpinBosonParams& p) {
  const double norm = std::hypot(p.s_x, p.s_z);
  if (!(norm > 0.0)) throw InvalidArgument("spin-boson mixing vector (s_x, s_z) must be nonzero");
  if (!std::isfinite(p.omega0)) throw InvalidArgument("omega0 must be finite");
  Matrix v2 = (p.s_x * pauli_x() + p.s_z * pauli_z()) / norm;
  SystemModel model(0.5 * p.omega0 * pauli_z(), {pauli_x(), v2});
  return finish("spin-boson", std::move(model), {p.baths[0], p.baths[1]});
}

ModelSetup build_three_level(const ThreeLevelParams& p) {
  if (!(p.omega1 > p.omega2 && p.omega2 > 0.0))
    throw InvalidArgument("three-level engine requires omega1 > omega2 > 0");
  Matrix h = Matrix::Zero(3, 3);
  h(1, 1) = p.omega1;
  h(2, 2) = p.omega2;
  Matrix v1 = projector(3, 0, 1) + projector(3, 1, 0);
  Matrix v2 = projector(3, 0, 2) + projector(3, 2, 0);
  Drive drive{p.g, p.Omega, projector(3, 1, 2)};
  SystemModel model(h, {v1, v2}, drive);
  return finish("three-level-engine", std::move(model), {p.baths[0], p.baths[1]});
}

cplx half_fourier_correlation(const BathSpec& spec, double omega) {
  spec.validate();
  if (spec.eta == 0.0) return 0.0;
  const double eta = spec.eta;
  const double g = spec.gamma;
  const double temp = spec.temperature;

  // Real part: half the full transform, S(w)/2 = J(w) (n(w) + 1).
  double re = 0.0;
  if (std::abs(omega) < 1e-10 * std::max(1.0, temp)) {
    re = eta * temp;
  } else {
    const double j = eta * g * g * omega / (omega * omega + g * g);
    re = j / (-std::expm1(-omega / temp));
  }

  // Imaginary part from the Matsubara expansion: sum_j Im c_j / (nu_j - i w).
  const double s = std::sin(g / (2.0 * temp));
  if (std::abs(s) < 1e-12) throw InvalidArgument("gamma collides with a Matsubara frequency");
  const cplx c0(0.5 * eta * g * g * std::cos(g / (2.0 * temp)) / s, -0.5 * eta * g * g);
  double im = (c0 / cplx(g, -omega)).imag();
  // Tail beyond m_max is O(1/m^3) for the imaginary part.
  const long m_max = 200000;
  long double acc = 0;
  for (long m = m_max; m >= 1; --m) {
    const double nu = 2.0 * M_PI * m * temp;
    const double c = 2.0 * eta * g * g * temp * nu / (nu * nu - g * g);
    acc += c * omega / (nu * nu + omega * omega);
  }
  im += static_cast<double>(acc);
  return {re, im};
}

RedfieldSolution redfield_steady_current_oracle(const SystemModel& model,
                                                const std::vector<BathSpec>& baths) {
  if (model.driven()) throw InvalidArgument("Redfield oracle requires an undriven model");
  if (baths.size() != model.num_baths())
    throw InvalidArgument("one bath specification per coupling operator required");
  const int d = model.dim();
  Eigen::SelfAdjointEigenSolver<Matrix> es(model.h_static());
  const Matrix u = es.eigenvectors();
  const Eigen::VectorXd e = es.eigenvalues();
  const Matrix h = e.cast<cplx>().asDiagonal();

  std::vector<Matrix> vs, lambdas;
  for (std::size_t k = 0; k < baths.size(); ++k) {
    const Matrix v = u.adjoint() * model.coupling(k) * u;
    Matrix lam(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        lam(a, b) = v(a, b) == 0.0 ? cplx(0.0) : v(a, b) * half_fourier_correlation(baths[k], e(b) - e(a));
    vs.push_back(v);
    lambdas.push_back(lam);
  }

  auto dissipator = [&](std::size_t k, const Matrix& rho) -> Matrix {
    const Matrix x = lambdas[k] * rho - rho * lambdas[k].adjoint();
    return -(vs[k] * x - x * vs[k]);
  };
  auto generator = [&](const Matrix& rho) -> Matrix {
    Matrix out = -kI * (h * rho - rho * h);
    for (std::size_t k = 0; k < vs.size(); ++k) out += dissipator(k, rho);
    return out;
  };

  const int n = d * d;
  Matrix big(n, n);
  for (int c = 0; c < n; ++c) {
    Matrix basis = Matrix::Zero(d, d);
    basis(c % d, c / d) = 1.0;
    const Matrix col = generator(basis);
    big.col(c) = Eigen::Map<const Eigen::VectorXcd>(col.data(), n);
  }
  Eigen::JacobiSVD<Matrix> svd(big, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double top = sv(0);
  if (n > 1 && sv(n - 2) < 1e-10 * top) {
    std::ostringstream os;
    os << "Redfield generator has a degenerate null space (second-smallest singular value "
       << sv(n - 2) << ")";
    throw ConvergenceError(os.str());
  }
  const Eigen::VectorXcd null = svd.matrixV().col(n - 1);
  Matrix rho = Eigen::Map<const Matrix>(null.data(), d, d);
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint()).eval();

  RedfieldSolution out;
  for (std::size_t k = 0; k < vs.size(); ++k)
    out.current.push_back((h * dissipator(k, rho)).trace().real());
  out.rho = u * rho * u.adjoint();
  return out;
}

}  // namespace heom
