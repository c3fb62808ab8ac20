#include "heom/bath.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "heom/error.hpp"

namespace heom {

namespace {

constexpr double kPi = std::numbers::pi;

void disable_gsl_abort() {
  static std::once_flag flag;
  std::call_once(flag, [] { gsl_set_error_handler_off(); });
}

struct GslWorkspace {
  explicit GslWorkspace(std::size_t n) : w(gsl_integration_workspace_alloc(n)), size(n) {}
  ~GslWorkspace() { gsl_integration_workspace_free(w); }
  GslWorkspace(const GslWorkspace&) = delete;
  GslWorkspace& operator=(const GslWorkspace&) = delete;
  gsl_integration_workspace* w;
  std::size_t size;
};

struct QawoTable {
  QawoTable(double omega, double length, enum gsl_integration_qawo_enum kind)
      : t(gsl_integration_qawo_table_alloc(omega, length, kind, 60)) {}
  ~QawoTable() { gsl_integration_qawo_table_free(t); }
  QawoTable(const QawoTable&) = delete;
  QawoTable& operator=(const QawoTable&) = delete;
  gsl_integration_qawo_table* t;
};

// Unit-coupling Drude density and the thermal part 2 J(w) n(w).
struct DrudeParams {
  double gamma;
  double temperature;
};

double unit_drude(double w, void* p) {
  const auto* d = static_cast<const DrudeParams*>(p);
  return d->gamma * d->gamma * w / (w * w + d->gamma * d->gamma) / kPi;
}

double unit_thermal(double w, void* p) {
  const auto* d = static_cast<const DrudeParams*>(p);
  const double g2 = d->gamma * d->gamma;
  const double x = w / d->temperature;
  // w * n(w) -> T as w -> 0
  const double w_n = x < 1e-12 ? d->temperature : w / std::expm1(x);
  return 2.0 * g2 / (w * w + g2) * w_n / kPi;
}

[[noreturn]] void quadrature_failure(const char* what, int status, double abserr,
                                     double tol) {
  std::ostringstream os;
  os << "correlation quadrature did not converge (" << what << "): "
     << gsl_strerror(status) << "; achieved abs error " << abserr
     << " vs requested " << tol;
  throw ConvergenceError(os.str());
}

}  // namespace

void BathSpec::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("bath eta must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("bath gamma must be > 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw InvalidArgument("bath temperature must be > 0");
  if (pade_terms < 0) throw InvalidArgument("pade_terms must be >= 0");
}

PadeBose pade_bose_poles(int n) {
  PadeBose out;
  if (n <= 0) return out;

  // Poles: 2 / (positive eigenvalues) of the 2n x 2n tridiagonal matrix with
  // off-diagonals 1/sqrt((2m+1)(2m+3)); zeros from the (2n-1) matrix with
  // 1/sqrt((2m+3)(2m+5)).
  // The spectrum is symmetric about zero (odd sizes carry an exact zero), so
  // keep the `count` largest eigenvalues.
  auto positive_roots = [](int size, int shift, int count) {
    std::vector<double> roots;
    if (size <= 0 || count <= 0) return roots;
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(size);
    Eigen::VectorXd off(std::max(size - 1, 0));
    for (int i = 0; i < size - 1; ++i) {
      const double m = i + 1.0;
      off(i) = 1.0 / std::sqrt((2 * m + 1 + shift) * (2 * m + 3 + shift));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    for (int i = size - count; i < size; ++i) roots.push_back(2.0 / solver.eigenvalues()(i));
    std::sort(roots.begin(), roots.end());
    return roots;
  };

  out.xi = positive_roots(2 * n, 0, n);
  const std::vector<double> zeta = positive_roots(2 * n - 1, 2, n - 1);
  out.eta.resize(out.xi.size());
  for (std::size_t j = 0; j < out.xi.size(); ++j) {
    const double xj2 = out.xi[j] * out.xi[j];
    double prod = 0.5 * n * (2.0 * n + 3.0);
    for (std::size_t k = 0; k < out.xi.size(); ++k) {
      if (k < zeta.size()) prod *= zeta[k] * zeta[k] - xj2;
      if (k != j) prod /= out.xi[k] * out.xi[k] - xj2;
    }
    out.eta[j] = prod;
  }
  return out;
}

double pade_coth_half(const PadeBose& p, double x) {
  double v = 2.0 / x;
  for (std::size_t j = 0; j < p.xi.size(); ++j)
    v += 4.0 * p.eta[j] * x / (x * x + p.xi[j] * p.xi[j]);
  return v;
}

NoiseDecomposition::NoiseDecomposition(std::vector<ExpTerm> terms, double delta_weight)
    : terms_(std::move(terms)), delta_(delta_weight) {
  for (const auto& t : terms_) {
    if (!(t.rate > 0.0)) throw InvalidArgument("decomposition rates must be positive");
    c_imag_zero_ += t.c_imag;
  }
}

std::complex<double> NoiseDecomposition::correlation(double t) const {
  std::complex<double> c{0.0, 0.0};
  for (const auto& term : terms_)
    c += std::complex<double>(term.c_real, term.c_imag) * std::exp(-term.rate * t);
  return c;
}

double drude_spectral_density(const BathSpec& spec, double omega) {
  const double g2 = spec.gamma * spec.gamma;
  return spec.eta * g2 * omega / (omega * omega + g2);
}

QuadratureResult correlation_quadrature_oracle(const BathSpec& spec, double t, double abs_tol) {
  spec.validate();
  if (t < 0) throw InvalidArgument("correlation oracle requires t >= 0");
  if (spec.eta == 0.0) return {};
  disable_gsl_abort();

  // Integrate the unit-coupling density; results scale linearly with eta.
  const double tol = abs_tol / spec.eta;
  DrudeParams params{spec.gamma, spec.temperature};
  constexpr std::size_t kLimit = 2000;
  GslWorkspace work(kLimit), cycles(kLimit);

  // J(w) coth(w/2T) falls off like 1/w, so the real part diverges
  // logarithmically at t = 0; adaptive quadrature would report a finite
  // but meaningless value there.
  if (t == 0.0)
    throw ConvergenceError("correlation oracle: Re C(0) diverges for a Drude density");

  QawoTable cos_tab(t, 1.0, GSL_INTEG_COSINE);
  QawoTable sin_tab(t, 1.0, GSL_INTEG_SINE);
  gsl_function drude{&unit_drude, &params};

  double re_tail = 0, re_tail_err = 0;
  int status = gsl_integration_qawf(&drude, 0.0, tol / 3, kLimit, work.w, cycles.w, cos_tab.t,
                                    &re_tail, &re_tail_err);
  if (status != GSL_SUCCESS) quadrature_failure("cosine transform", status, re_tail_err * spec.eta, abs_tol);

  double im = 0, im_err = 0;
  status = gsl_integration_qawf(&drude, 0.0, tol / 3, kLimit, work.w, cycles.w, sin_tab.t, &im,
                                &im_err);
  if (status != GSL_SUCCESS) quadrature_failure("sine transform", status, im_err * spec.eta, abs_tol);

  // 2 J(w) n(w) decays like exp(-w/T); truncate where it is below round-off.
  const double cut = spec.temperature * 50.0 + 10.0 * spec.gamma;
  QawoTable thermal_tab(t, cut, GSL_INTEG_COSINE);
  gsl_function thermal{&unit_thermal, &params};
  double re_th = 0, re_th_err = 0;
  status = gsl_integration_qawo(&thermal, 0.0, tol / 3, 0.0, kLimit, work.w, thermal_tab.t,
                                &re_th, &re_th_err);
  if (status != GSL_SUCCESS) quadrature_failure("thermal part", status, re_th_err * spec.eta, abs_tol);

  const double err = (re_tail_err + re_th_err + im_err) * spec.eta;
  if (err > abs_tol) quadrature_failure("combined", GSL_ETOL, err, abs_tol);
  return {{spec.eta * (re_tail + re_th), -spec.eta * im}, err};
}

double delta_weight(const BathSpec& spec, std::span<const ExpTerm> retained) {
  // Zero-frequency weight: int_0^inf C^R(t) dt = J(w) coth(w/2T) / 2 at w -> 0.
  const double exact = spec.eta * spec.temperature;
  double kept = 0.0;
  for (const auto& term : retained) kept += term.c_real / term.rate;
  double delta = exact - kept;
  double magnitude = exact;
  for (const auto& term : retained) magnitude += std::abs(term.c_real / term.rate);
  const double scale = std::max(magnitude, std::numeric_limits<double>::min());
  if (delta < -1e-10 * scale) {
    std::ostringstream os;
    os << "negative delta weight " << delta << " for pade_terms=" << spec.pade_terms
       << " (inconsistent pole set; choose a different pade_terms)";
    throw InvalidArgument(os.str());
  }
  if (delta < 0) delta = 0.0;
  return delta;
}

NoiseDecomposition pade_decompose(const BathSpec& spec) {
  spec.validate();
  const double g = spec.gamma;
  const double T = spec.temperature;
  const double scale = 0.5 * spec.eta * g * g;

  std::vector<ExpTerm> terms;
  terms.reserve(spec.pade_terms + 1);

  // Drude pole: residue eta gamma^2 / 2 times coth evaluated at w = -i gamma,
  // i.e. cot(gamma / 2T) taken exactly.
  const double half = g / (2.0 * T);
  if (std::abs(std::sin(half)) < 1e-12)
    throw InvalidArgument("Drude pole coincides with a Matsubara frequency");
  terms.push_back({scale / std::tan(half), -scale, g});

  const PadeBose pade = pade_bose_poles(spec.pade_terms);
  for (std::size_t j = 0; j < pade.xi.size(); ++j) {
    const double nu = pade.xi[j] * T;
    if (std::abs(nu - g) <= 1e-8 * g) {
      std::ostringstream os;
      os << "Pade pole " << nu << " collides with the Drude cutoff " << g
         << "; choose a different pade_terms";
      throw InvalidArgument(os.str());
    }
    const double c = 2.0 * pade.eta[j] * T * spec.eta * g * g * nu / (nu * nu - g * g);
    terms.push_back({c, 0.0, nu});
  }

  if (spec.eta == 0.0) {
    for (auto& term : terms) term.c_real = term.c_imag = 0.0;
    return NoiseDecomposition(std::move(terms), 0.0);
  }

  const double delta = delta_weight(spec, terms);
  NoiseDecomposition out(std::move(terms), delta);

  // Coefficient signs are pinned against the quadrature oracle, not only by
  // convention: the imaginary part must agree exactly and the real part at
  // long times within a loose bound.
  const double t_probe = 10.0 / g;
  const auto oracle = correlation_quadrature_oracle(spec, t_probe, 1e-9 * std::max(1.0, spec.eta));
  const auto rec = out.correlation(t_probe);
  const double im_tol = 1e-6 * std::abs(oracle.value.imag()) + 1e-9 * spec.eta;
  const double re_tol = 0.05 * std::abs(oracle.value.real()) + 1e-6 * spec.eta * T;
  if (std::abs(rec.imag() - oracle.value.imag()) > im_tol ||
      std::abs(rec.real() - oracle.value.real()) > re_tol) {
    std::ostringstream os;
    os << "decomposition disagrees with the quadrature oracle at t=" << t_probe
       << ": " << rec << " vs " << oracle.value << "; choose a different pade_terms";
    throw InvalidArgument(os.str());
  }
  return out;
}

std::vector<double> fidelity_grid(const BathSpec& spec, int n) {
  std::vector<double> grid(n);
  const double end = 10.0 / spec.gamma;
  for (int i = 0; i < n; ++i) grid[i] = end * (i + 1) / n;
  return grid;
}

FidelityReport decomposition_fidelity(const BathSpec& spec, std::span<const double> grid,
                                      std::span<const std::complex<double>> oracle) {
  const NoiseDecomposition d = pade_decompose(spec);
  FidelityReport rep;
  rep.pade_terms = spec.pade_terms;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rep.scale = std::max(rep.scale, std::abs(oracle[i]));
    rep.max_abs_error = std::max(rep.max_abs_error, std::abs(d.correlation(grid[i]) - oracle[i]));
  }
  return rep;
}

FidelityReport select_pade_terms(BathSpec spec, double rel_tol, int min_terms, int max_terms,
                                 int grid_points) {
  spec.validate();
  const auto grid = fidelity_grid(spec, grid_points);
  std::vector<std::complex<double>> oracle(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    oracle[i] = correlation_quadrature_oracle(spec, grid[i], 1e-11 * std::max(1.0, spec.eta)).value;

  FidelityReport best;
  best.max_abs_error = std::numeric_limits<double>::infinity();
  for (int j = min_terms; j <= max_terms; ++j) {
    spec.pade_terms = j;
    FidelityReport rep;
    try {
      rep = decomposition_fidelity(spec, grid, oracle);
    } catch (const InvalidArgument&) {
      continue;
    }
    if (rep.relative_error() <= rel_tol) return rep;
    if (rep.relative_error() < best.relative_error()) best = rep;
  }
  std::ostringstream os;
  os << "no pade_terms in [" << min_terms << ", " << max_terms << "] reaches relative error "
     << rel_tol << " (best " << best.relative_error() << " at " << best.pade_terms << ")";
  throw ConvergenceError(os.str());
}

}  // namespace heom
