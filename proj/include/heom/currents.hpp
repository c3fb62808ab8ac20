#pragma once

// Heat currents, power and interaction energy evaluated from the first tier
// of the hierarchy, plus the first- and second-law audits.
//
// Sign convention: a positive current means energy flows from that bath into
// the system.

#include <optional>
#include <span>
#include <vector>

#include "heom/hierarchy.hpp"

namespace heom {

/// System heat current of bath k.
double shc(const Hierarchy& h, const HierarchyState& state, std::size_t k, double t);
/// Bath heat current of bath k (includes the cross-bath correlation terms).
double bhc(const Hierarchy& h, const HierarchyState& state, std::size_t k, double t);
/// <H_I^k> from the first-tier ADOs of bath k.
double interaction_energy(const Hierarchy& h, const HierarchyState& state, std::size_t k);
/// Tr{dH_S/dt rho}.
double power(const Hierarchy& h, const HierarchyState& state, double t);
double system_energy(const Hierarchy& h, const HierarchyState& state, double t);

struct CurrentRecord {
  double t = 0.0;
  Matrix rho;
  double system_energy = 0.0;
  double power = 0.0;
  std::vector<double> q_s;
  std::vector<double> q_b;
  std::vector<double> h_int;
  /// d<H_S(t)>/dt and d<H_I^k>/dt, taken from the equations of motion.
  double system_energy_rate = 0.0;
  std::vector<double> h_int_rate;
  /// Filled by finalize(): bhc - shc - d<H_I^k>/dt.
  std::vector<double> casbi;
  /// Filled by finalize(): |sum_k Q_B^k - d<H_S + sum_k H_I^k>/dt + W|.
  double first_law_residual = 0.0;
};

CurrentRecord evaluate_record(const Hierarchy& h, const HierarchyState& state, double t);

/// Flat encoding of a record, for use as a propagation observable.
std::vector<double> pack(const CurrentRecord& r);
CurrentRecord unpack(std::span<const double> v, double t, std::size_t baths, int dim);
/// Observable that packs evaluate_record.
Observable record_observable(const Hierarchy& h);

enum class TrajectoryKind { Transient, Steady, Periodic };

struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::Transient;
  /// Drive period for periodic trajectories; records then cover exactly one
  /// cycle on a uniform grid starting at the cycle origin.
  double period = 0.0;
  std::vector<CurrentRecord> records;
};

/// Fills casbi and first_law_residual from the recorded energy rates.
void finalize(Trajectory& traj);

/// Largest magnitude among the currents, power and energy rates.
double energy_flow_scale(const Trajectory& traj);
double max_first_law_residual(const Trajectory& traj);

struct CycleIntegrals {
  double work = 0.0;
  std::vector<double> q_s;
  std::vector<double> q_b;
};

/// Trapezoidal integrals over the single stored cycle of a periodic trajectory.
CycleIntegrals cycle_average(const Trajectory& traj);

struct Efficiencies {
  std::optional<double> system;  // -W / Q_S^1
  std::optional<double> bath;    // -W / Q_B^1
};

inline constexpr double kEfficiencyGuard = 1e-12;
Efficiencies efficiencies(const CycleIntegrals& c);

struct ClausiusCheck {
  double value = 0.0;  // -sum_k Q_k / T_k
  bool passed = false;
};

ClausiusCheck second_law_check(std::span<const double> heat, std::span<const double> temperatures,
                               double tol);

}  // namespace heom
