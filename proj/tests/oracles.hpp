#pragma once

// Reference values computed independently of the library code paths.

#include <cmath>
#include <complex>

namespace oracle {

/// Drude C(t), t > 0, from the exact cot coefficient plus the Matsubara
/// series summed until the terms drop below round-off.
inline std::complex<double> drude_correlation(double eta, double gamma, double temp, double t) {
  const double c0r = 0.5 * eta * gamma * gamma / std::tan(gamma / (2.0 * temp));
  const double c0i = -0.5 * eta * gamma * gamma;
  std::complex<double> c = std::complex<double>(c0r, c0i) * std::exp(-gamma * t);
  for (long m = 1; m < 50'000'000; ++m) {
    const double nu = 2.0 * M_PI * temp * static_cast<double>(m);
    const double term = 2.0 * eta * gamma * gamma * temp * nu / (nu * nu - gamma * gamma) *
                        std::exp(-nu * t);
    c += term;
    if (std::abs(term) < 1e-18 * std::abs(c)) break;
  }
  return c;
}

/// Bose occupation.
inline double bose(double w, double temp) { return 1.0 / std::expm1(w / temp); }

inline double drude_j(double eta, double gamma, double w) {
  return eta * gamma * gamma * w / (w * w + gamma * gamma);
}

/// Golden-rule heat current into a two-level system (splitting w0) from bath
/// 1 when both baths couple through sigma_x.
inline double golden_rule_current(double w0, double j1, double n1, double j2, double n2) {
  return 2.0 * w0 * j1 * j2 * (n1 - n2) / (j1 * (2.0 * n1 + 1.0) + j2 * (2.0 * n2 + 1.0));
}

}  // namespace oracle
