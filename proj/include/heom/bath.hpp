#pragma once

// Drude baths and the exponential-plus-delta expansion of their noise
// correlation function
//
//   C(t) = sum_j (c'_j + i c''_j) exp(-gamma_j |t|) + 2 Delta delta(t).
//
// All quantities are in units of a reference frequency with hbar = k_B = 1.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace heom {

struct BathSpec {
  double eta = 0.0;          // coupling strength
  double gamma = 1.0;        // Drude cutoff
  double temperature = 1.0;  // k_B T / (hbar omega_ref)
  int pade_terms = 0;        // Pade poles retained beyond the Drude pole

  void validate() const;
};

struct ExpTerm {
  double c_real = 0.0;
  double c_imag = 0.0;
  double rate = 0.0;
};

/// Poles and residue weights of the [N-1/N] Pade approximant of the Bose
/// function, 1/(1-e^{-x}) ~ 1/x + 1/2 + sum_j 2 eta_j x / (x^2 + xi_j^2).
struct PadeBose {
  std::vector<double> xi;
  std::vector<double> eta;
};

PadeBose pade_bose_poles(int n);

/// coth(x/2) from the Pade pole expansion, for checking the scheme.
double pade_coth_half(const PadeBose& p, double x);

class NoiseDecomposition {
 public:
  NoiseDecomposition() = default;
  NoiseDecomposition(std::vector<ExpTerm> terms, double delta_weight);

  const std::vector<ExpTerm>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  double delta_weight() const { return delta_; }
  /// Sum of the imaginary coefficients, C^I(0).
  double c_imag_at_zero() const { return c_imag_zero_; }

  /// Exponential part of C(t) for t > 0 (the delta term is excluded).
  std::complex<double> correlation(double t) const;

 private:
  std::vector<ExpTerm> terms_;
  double delta_ = 0.0;
  double c_imag_zero_ = 0.0;
};

/// J(omega) = eta gamma^2 omega / (omega^2 + gamma^2).
double drude_spectral_density(const BathSpec& spec, double omega);

struct QuadratureResult {
  std::complex<double> value;
  double abs_error = 0.0;
};

/// C(t) integrated directly from the spectral density with adaptive
/// quadrature. Throws ConvergenceError (carrying the achieved error) when the
/// requested absolute tolerance is not met; C^R(0) diverges for Drude baths,
/// so t = 0 always fails.
QuadratureResult correlation_quadrature_oracle(const BathSpec& spec, double t,
                                               double abs_tol = 1e-9);

/// Drude pole plus spec.pade_terms Pade poles, and the delta weight of the
/// remaining real-part tail.
NoiseDecomposition pade_decompose(const BathSpec& spec);

/// Integral over t >= 0 of the real-part residual after the retained terms:
/// eta T - sum_j c'_j / gamma_j.
double delta_weight(const BathSpec& spec, std::span<const ExpTerm> retained);

struct FidelityReport {
  int pade_terms = 0;
  double max_abs_error = 0.0;
  double scale = 0.0;  // max |C(t)| on the grid
  double relative_error() const { return scale > 0 ? max_abs_error / scale : max_abs_error; }
};

/// Uniform grid of n points on (0, 10/gamma].
std::vector<double> fidelity_grid(const BathSpec& spec, int n = 200);

/// Pointwise comparison of the decomposition against oracle values
/// precomputed on `grid`.
FidelityReport decomposition_fidelity(const BathSpec& spec, std::span<const double> grid,
                                      std::span<const std::complex<double>> oracle);

/// Smallest pade_terms in [min_terms, max_terms] whose reconstruction error is
/// at most rel_tol times the grid maximum of |C(t)|.
FidelityReport select_pade_terms(BathSpec spec, double rel_tol, int min_terms = 0,
                                 int max_terms = 120, int grid_points = 200);

}  // namespace heom
