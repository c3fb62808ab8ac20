#pragma once

// Preset models (two-bath spin-boson, driven three-level engine) and a
// second-order Markovian reference solver for weak coupling.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "heom/bath.hpp"
#include "heom/system.hpp"

namespace heom {

struct SpinBosonParams {
  double omega0 = 1.0;
  double s_x = 1.0;
  double s_z = 1.0;
  std::array<BathSpec, 2> baths{BathSpec{0.01, 2.0, 2.0, 0}, BathSpec{0.01, 2.0, 1.0, 0}};
};

struct ThreeLevelParams {
  double omega1 = 1.0;
  double omega2 = 0.5;
  double g = 0.1;
  double Omega = 0.5;
  std::array<BathSpec, 2> baths{BathSpec{0.01, 2.0, 10.0, 0}, BathSpec{0.001, 2.0, 1.0, 0}};
};

struct ModelSetup {
  std::string preset;
  SystemModel model;
  std::vector<BathSpec> specs;
  std::vector<NoiseDecomposition> baths;
  Matrix rho0;  // maximally mixed
  std::uint64_t model_hash = 0;
  std::uint64_t decomposition_hash = 0;
};

ModelSetup build_spin_boson(const SpinBosonParams& p);
ModelSetup build_three_level(const ThreeLevelParams& p);

struct RedfieldSolution {
  Matrix rho;                   // steady state in the original basis
  std::vector<double> current;  // per-bath heat current into the system
};

/// Steady state and heat currents of the Bloch-Redfield equation built from
/// the Drude densities of `baths` (no secular approximation, Lamb shift
/// included). Throws when the steady state is not unique.
RedfieldSolution redfield_steady_current_oracle(const SystemModel& model,
                                                const std::vector<BathSpec>& baths);

/// One-sided Fourier transform of the bath correlation function,
/// int_0^inf C(t) e^{i w t} dt.
cplx half_fourier_correlation(const BathSpec& spec, double omega);

}  // namespace heom
