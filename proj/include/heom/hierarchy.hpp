#pragma once

// Auxiliary density operator (ADO) hierarchy: index bookkeeping, the HEOM
// right-hand side, fixed-step RK4 and the steady / periodic / transient
// drivers built on it.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "heom/bath.hpp"
#include "heom/error.hpp"
#include "heom/system.hpp"

namespace heom {

inline constexpr std::size_t kNoAdo = std::numeric_limits<std::size_t>::max();

/// Number of multi-indices over `modes` non-negative slots with total order
/// <= depth, C(modes + depth, depth). Saturates at UINT64_MAX.
std::uint64_t simplex_count(int modes, int depth);

/// Graded ranking: all indices of lower total order come first, then
/// descending lexicographic order within a total order.
std::uint64_t simplex_rank(std::span<const int> n);
std::vector<int> simplex_unrank(std::uint64_t rank, int modes);

/// Raised when an integration step produces non-finite values.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t ado) : Error(what), ado_(ado) {}
  std::size_t ado() const { return ado_; }

 private:
  std::size_t ado_;
};

struct TableLimits {
  std::size_t max_ados = 50'000'000;
  /// Cap on the memory of the state plus integrator buffers.
  std::size_t max_bytes = std::size_t{3} << 30;
  int dim = 2;
};

/// Index set of the truncated hierarchy with flat ids and +-e_m neighbor
/// tables. Modes are laid out bath by bath: bath k owns modes_per_bath[k]
/// consecutive slots (its Drude pole followed by its Pade poles).
class AdoTable {
 public:
  /// bath_depth_caps, when non-empty, additionally bounds the order carried by
  /// each bath (-1 means uncapped).
  AdoTable(std::vector<int> modes_per_bath, int depth, std::vector<int> bath_depth_caps = {},
           TableLimits limits = {});

  std::size_t size() const { return count_; }
  int depth() const { return depth_; }
  int num_modes() const { return modes_; }
  std::size_t num_baths() const { return modes_per_bath_.size(); }
  const std::vector<int>& modes_per_bath() const { return modes_per_bath_; }
  const std::vector<int>& bath_depth_caps() const { return caps_; }
  int first_mode(std::size_t bath) const { return first_mode_[bath]; }
  int bath_of_mode(int mode) const { return bath_of_mode_[mode]; }

  std::span<const std::uint16_t> index(std::size_t id) const {
    return {indices_.data() + id * modes_, static_cast<std::size_t>(modes_)};
  }
  int order(std::size_t id) const { return orders_[id]; }
  /// kNoAdo when n lies outside the truncated set.
  std::size_t id_of(std::span<const int> n) const;
  std::size_t up(std::size_t id, int mode) const { return up_[id * modes_ + mode]; }
  std::size_t down(std::size_t id, int mode) const { return down_[id * modes_ + mode]; }
  /// Neighbor ids of `id` for every mode (kNoAdo where absent).
  const std::size_t* up_row(std::size_t id) const { return up_.data() + id * modes_; }
  const std::size_t* down_row(std::size_t id) const { return down_.data() + id * modes_; }
  /// ADO carrying a single excitation of term j of bath k.
  std::size_t first_tier(std::size_t bath, int term) const;

 private:
  bool admissible(std::span<const int> n) const;

  std::vector<int> modes_per_bath_;
  std::vector<int> caps_;
  std::vector<int> first_mode_;
  std::vector<int> bath_of_mode_;
  int modes_ = 0;
  int depth_ = 0;
  std::size_t count_ = 0;
  bool capped_ = false;
  std::vector<std::uint16_t> indices_;
  std::vector<std::uint16_t> orders_;
  std::vector<std::size_t> up_;
  std::vector<std::size_t> down_;
  std::vector<std::uint64_t> ranks_;  // sorted simplex ranks, only when capped
};

class HierarchyState {
 public:
  HierarchyState(std::shared_ptr<const AdoTable> table, int dim, double time = 0.0);

  const AdoTable& table() const { return *table_; }
  const std::shared_ptr<const AdoTable>& table_ptr() const { return table_; }
  int dim() const { return dim_; }
  std::size_t num_ados() const { return table_->size(); }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }
  Eigen::Map<Matrix> ado(std::size_t id) {
    return {data_.data() + id * dim_ * dim_, dim_, dim_};
  }
  Eigen::Map<const Matrix> ado(std::size_t id) const {
    return {data_.data() + id * dim_ * dim_, dim_, dim_};
  }
  /// The physical reduced density operator (all-zero index).
  Matrix rho() const { return ado(0); }

  double trace_defect() const;
  double hermiticity_defect() const;

 private:
  std::shared_ptr<const AdoTable> table_;
  int dim_;
  double time_;
  std::vector<cplx> data_;
};

/// The HEOM generator for one model and set of bath decompositions.
class Hierarchy {
 public:
  Hierarchy(SystemModel model, std::vector<NoiseDecomposition> baths,
            std::shared_ptr<const AdoTable> table);
  /// Builds the table from the decompositions (J_k + 1 modes per bath).
  Hierarchy(SystemModel model, std::vector<NoiseDecomposition> baths, int depth,
            std::vector<int> bath_depth_caps = {}, TableLimits limits = {});

  const SystemModel& model() const { return model_; }
  const std::vector<NoiseDecomposition>& baths() const { return baths_; }
  const AdoTable& table() const { return *table_; }
  const std::shared_ptr<const AdoTable>& table_ptr() const { return table_; }
  const ExpTerm& term_of_mode(int mode) const { return mode_terms_[mode]; }

  /// Factorized initial condition: rho0 on top, every other ADO zero.
  HierarchyState initial_state(const Matrix& rho0, double t = 0.0) const;

  /// Writes d/dt of every ADO into `out` (same layout as state.data()).
  void rhs(const HierarchyState& state, double t, std::span<cplx> out) const;
  HierarchyState rhs(const HierarchyState& state, double t) const;

  /// Per-ADO generator terms that do not couple tiers, as a d^2 x d^2 matrix
  /// acting on column-major vec(rho); the damping sum_j n_j gamma_j is excluded.
  Matrix local_generator(double t) const;
  double damping(std::size_t id) const { return damping_[id]; }

  /// Upper bound on the spectral radius of the generator, for step-size
  /// stability checks.
  double stiffness_bound() const;

  /// Number of threads used for the per-ADO sweep (1 = serial).
  void set_threads(int threads) { threads_ = threads < 1 ? 1 : threads; }
  int threads() const { return threads_; }

 private:
  void init();

  SystemModel model_;
  std::vector<NoiseDecomposition> baths_;
  std::shared_ptr<const AdoTable> table_;
  std::vector<ExpTerm> mode_terms_;
  std::vector<double> damping_;  // sum_j n_j gamma_j per ADO
  int threads_ = 1;
};

/// Classical RK4 with scratch buffers sized for one hierarchy.
class Rk4Integrator {
 public:
  explicit Rk4Integrator(const Hierarchy& hierarchy);
  /// Advances state by dt; throws NumericalError naming the first non-finite ADO.
  void step(HierarchyState& state, double dt);

 private:
  const Hierarchy& h_;
  HierarchyState stage_, k_, acc_;
};

/// Observable vector evaluated on a snapshot (used for drift detection and
/// trajectory sampling).
using Observable = std::function<std::vector<double>(const HierarchyState&, double t)>;

struct StationaryOptions {
  /// Target for the preconditioned-system residual (the system is scaled so
  /// that the right-hand side has unit norm).
  double tol = 1e-13;
  int restart = 30;
  int max_iterations = 3000;
  double max_basis_bytes = double(std::size_t{1} << 30);
};

struct StationaryReport {
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  double scaled_residual = 0.0;
  double derivative_residual = 0.0;
};

/// Solves L x = 0 with Tr rho = 1 for an undriven hierarchy by restarted GMRES
/// with block-Jacobi preconditioning, starting from `state`. This null vector
/// is exactly the fixed point of the RK4 map for any step size.
StationaryReport solve_stationary(const Hierarchy& h, HierarchyState& state,
                                  const StationaryOptions& opt = {});

/// Fixed point of the one-cycle RK4 map (steps_per_cycle steps of dt from
/// state.time()) by GMRES on (map - 1) x = 0 with Tr rho = 1. The reported
/// derivative_residual is the relative change of rho over one cycle.
StationaryReport solve_periodic_fixed_point(const Hierarchy& h, HierarchyState& state,
                                            long steps_per_cycle, double dt,
                                            const StationaryOptions& opt = {});

struct SteadyOptions {
  double dt = 0.01;
  double tol = 1e-9;
  double t_max = 1e5;
  /// Length of one probe window between convergence checks.
  double window = 10.0;
  /// Absolute floor used when comparing observables between windows (raised
  /// to 1e-4 of the largest observable magnitude).
  double observable_floor = 1e-9;
  bool accelerate = true;
  int accel_depth = 8;
  /// Start from the GMRES stationary solution; the RK4 probe windows then
  /// confirm it (and take over if the solve stalls).
  bool direct = true;
  /// Length of the first probe window after a converged direct solve.
  double verify_window = 0.2;
};

struct WindowResidual {
  double time = 0.0;
  double derivative = 0.0;
  double drift = 0.0;
};

struct SteadyResult {
  HierarchyState state;
  double elapsed = 0.0;
  double derivative_residual = 0.0;
  double observable_drift = 0.0;
  std::vector<double> observables;
  std::vector<WindowResidual> history;
  double max_trace_defect = 0.0;
  double max_hermiticity_defect = 0.0;
  StationaryReport direct;
};

/// Integrates an undriven hierarchy until ||d rho/dt|| / ||rho|| < tol and the
/// observables drift by less than tol (relative, with floor) between windows.
/// Windows may be combined by reduced-rank extrapolation to skip slow
/// relaxation; convergence is always confirmed on plain integration windows.
SteadyResult propagate_to_steady(const Hierarchy& h, HierarchyState state,
                                 const SteadyOptions& opt, const Observable& obs);

struct PeriodicOptions {
  double dt = 0.01;
  double tol = 1e-9;
  int max_cycles = 20000;
  int samples_per_cycle = 256;
  double observable_floor = 1e-9;
  bool accelerate = true;
  int accel_depth = 10;
  /// Start from the GMRES fixed point of the cycle map.
  bool direct = true;
};

struct PeriodicResult {
  HierarchyState state;  // at the end of the returned cycle
  double period = 0.0;
  double dt = 0.0;
  int steps_per_cycle = 0;
  int cycles = 0;
  /// Sample times of the returned cycle, uniform, first = cycle start.
  std::vector<double> times;
  std::vector<std::vector<double>> samples;
  std::vector<double> drift_history;
  double max_trace_defect = 0.0;
  double max_hermiticity_defect = 0.0;
  StationaryReport direct;
};

/// Integrates whole drive periods until cycle-averaged observables (and the
/// reduced density operator at the cycle boundary) change by less than tol.
PeriodicResult propagate_periodic(const Hierarchy& h, HierarchyState state,
                                  const PeriodicOptions& opt, const Observable& obs);

struct TransientResult {
  HierarchyState state;
  std::vector<double> times;
  std::vector<std::vector<double>> samples;
  double max_trace_defect = 0.0;
  double max_hermiticity_defect = 0.0;
};

TransientResult propagate_transient(const Hierarchy& h, HierarchyState state, double dt,
                                    double t_end, int sample_every, const Observable& obs);

/// Content fingerprints used by the checkpoint format.
std::uint64_t fingerprint(const SystemModel& model);
std::uint64_t fingerprint(std::span<const NoiseDecomposition> baths);

void save_checkpoint(const std::filesystem::path& path, const Hierarchy& h,
                     const HierarchyState& state);
/// Restores a state written by save_checkpoint; throws InvalidArgument when the
/// model, decompositions or layout do not match `h`.
HierarchyState load_checkpoint(const std::filesystem::path& path, const Hierarchy& h);

}  // namespace heom
