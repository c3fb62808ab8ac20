#pragma once

// Run configurations, single runs under automatic convergence control,
// parameter sweeps, and the CSV / manifest artifacts of the command-line tool.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "heom/currents.hpp"
#include "heom/models.hpp"

namespace heom {

inline constexpr const char* kToolVersion = "0.4.0";

enum class RunKind { Steady, Periodic, Transient };

const char* to_string(RunKind k);

struct HierarchySettings {
  int depth = 4;
  /// Per-bath depth caps, -1 = uncapped; empty means no caps.
  std::vector<int> bath_depth_caps;
  double dt = 0.01;
  /// Steady: integration budget. Transient: end time.
  double t_max = 1e4;
  /// Steady-state / periodic-state detection tolerance.
  double tol = 1e-9;
  int samples_per_cycle = 64;
  int max_cycles = 2000;
  /// Transient sampling stride in steps.
  int sample_every = 10;
  std::size_t max_ados = 2'000'000;
};

struct ConvergenceSettings {
  bool enabled = true;
  /// Largest relative change tolerated when N grows by 2.
  double tol_depth = 1e-3;
  /// Largest relative change tolerated when one bath gains a Pade term.
  double tol_pade = 1e-2;
  /// Changes are measured against max(|x|, floor * largest target).
  double floor = 1e-2;
  int max_evaluations = 24;
};

struct AuditSettings {
  bool first_law = true;
  bool second_law = true;
  /// First-law residual bound relative to the largest energy-flow magnitude.
  double tol_first = 1e-5;
  double tol_second = 1e-8;
};

struct SweepSettings {
  std::string path;
  std::vector<double> values;
};

struct RunConfig {
  std::string preset;
  SpinBosonParams spin_boson;
  ThreeLevelParams engine;
  /// "mixed" or "pure:k" (basis state k).
  std::string initial_state = "mixed";
  RunKind kind = RunKind::Steady;
  HierarchySettings hierarchy;
  ConvergenceSettings convergence;
  AuditSettings audit;
  std::optional<SweepSettings> sweep;
  std::string output = "heom";
  int threads = 1;
  /// The document this config was parsed from (after defaults and overrides).
  nlohmann::json document;

  std::vector<BathSpec> baths() const;
  std::uint64_t hash() const;
};

/// Default document of a preset ("spin-boson" or "three-level-engine").
nlohmann::json preset_document(const std::string& preset);

/// Sets a dotted path ("model.baths.0.eta"); "*" addresses every array
/// element. Throws InvalidArgument on an unknown path.
void set_path(nlohmann::json& doc, const std::string& path, const nlohmann::json& value);

/// Merges `overlay` over the defaults of its preset and validates. A
/// reproducibility manifest (anything with a "config" member) is accepted and
/// its embedded config used verbatim.
RunConfig parse_config(const nlohmann::json& overlay);
RunConfig load_config(const std::filesystem::path& path);

/// Hierarchy size and step of one evaluation.
struct Level {
  int depth = 0;
  std::vector<int> pade_terms;
  std::vector<int> bath_depth_caps;
  double dt = 0.0;
  std::size_t ados = 0;
};

struct RunSummary {
  RunKind kind = RunKind::Steady;
  /// Steady / transient: rates at the reported record. Periodic: cycle
  /// integrals (work and heats per cycle).
  std::vector<double> q_s;
  std::vector<double> q_b;
  std::vector<double> h_int;
  double work = 0.0;
  double period = 0.0;
  std::optional<double> eps_s;
  std::optional<double> eps_b;
  double first_law_residual = 0.0;
  double energy_scale = 0.0;
  bool first_law_ok = true;
  double clausius = 0.0;
  bool second_law_ok = true;
  double max_trace_defect = 0.0;
  double max_hermiticity_defect = 0.0;

  /// The scalars watched by the convergence ladder.
  std::vector<double> targets() const;
  bool audit_passed() const { return first_law_ok && second_law_ok; }
};

struct LadderEntry {
  Level level;
  std::vector<double> targets;
  /// "start", "depth" or "pade:k".
  std::string move;
  /// Relative change against the level it was compared with.
  double change = 0.0;
  bool accepted = false;
  double seconds = 0.0;
};

struct RunResult {
  RunConfig config;
  Level level;
  Trajectory trajectory;
  RunSummary summary;
  std::vector<LadderEntry> ladder;
  bool converged = true;
  double seconds = 0.0;
};

/// Smallest Pade count >= requested whose delta weight is non-negative.
int minimal_pade_terms(BathSpec spec, int requested, int max_terms = 40);

/// The model with the Pade counts of `level`.
ModelSetup build_model(const RunConfig& cfg, const Level& level);
Level initial_level(const RunConfig& cfg);

/// One evaluation at a fixed level, audits included.
RunResult execute(const RunConfig& cfg, const Level& level);

/// Relative change between two target vectors (see ConvergenceSettings).
double target_change(const std::vector<double>& a, const std::vector<double>& b, double floor);

/// Called after every ladder evaluation.
using LadderCallback = std::function<void(const LadderEntry&)>;

/// Raises N by 2 and each bath's Pade count by 1 until neither move changes
/// the targets beyond its tolerance. Throws ConvergenceError (carrying the
/// ladder in the message) when the evaluation budget or ADO cap is hit.
RunResult converge(const RunConfig& cfg, const LadderCallback& progress = {});

/// execute() at the configured level, or converge() when enabled.
RunResult run(const RunConfig& cfg, const LadderCallback& progress = {});

struct SweepPoint {
  double value = 0.0;
  std::optional<RunResult> result;
  std::string error;
};

/// Grid points run independently (in parallel when cfg.threads > 1); the
/// output keeps grid order.
std::vector<SweepPoint> sweep(const RunConfig& cfg);

class ConvergenceLadderError : public ConvergenceError {
 public:
  ConvergenceLadderError(const std::string& what, std::vector<LadderEntry> ladder)
      : ConvergenceError(what), ladder_(std::move(ladder)) {}
  const std::vector<LadderEntry>& ladder() const { return ladder_; }

 private:
  std::vector<LadderEntry> ladder_;
};

// Artifacts.

void write_trajectory_csv(const std::filesystem::path& path, const RunResult& r);
/// One row per result; rows with a missing result record the error.
void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points,
                       const std::string& parameter);
nlohmann::json manifest(const RunResult& r);
void write_manifest(const std::filesystem::path& path, const nlohmann::json& m);

struct AuditReport {
  double first_law_residual = 0.0;
  double energy_scale = 0.0;
  bool first_law_ok = true;
  std::optional<double> clausius;
  bool second_law_ok = true;
  /// Largest difference between the stored and recomputed residual columns.
  double stored_residual_mismatch = 0.0;
  std::size_t rows = 0;
};

/// Re-checks the first and second laws on a trajectory CSV written by
/// write_trajectory_csv.
AuditReport audit_trajectory_csv(const std::filesystem::path& path, const AuditSettings& s);

}  // namespace heom
