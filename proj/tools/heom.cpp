// heom: steady, periodic and transient HEOM runs with convergence control.
//
//   heom run --preset spin-boson --steady
//   heom sweep --config configs/spin_boson_eta_sweep.json --threads 4
//   heom converge --preset spin-boson --set model.baths.*.eta=1.0
//   heom audit heom.trajectory.csv
//
// Exit codes: 0 ok, 1 config error, 2 convergence failure, 3 audit failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "heom/runner.hpp"

using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 1, kConvergence = 2, kAudit = 3 };

struct Options {
  std::string preset;
  std::string config;
  std::vector<std::string> sets;
  std::string grid;
  std::string out;
  int threads = 0;
  bool steady = false, periodic = false, transient = false;
  bool no_converge = false;
  bool verbose = false;
};

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

int default_threads() {
  if (const char* env = std::getenv("HEOM_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw heom::InvalidArgument(std::string("HEOM_THREADS is not an integer: ") + env);
    }
  }
  return 0;
}

heom::RunConfig resolve(const Options& o) {
  json doc = json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw heom::InvalidArgument("cannot open config " + o.config);
    try {
      doc = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
      throw heom::InvalidArgument("config " + o.config + ": " + e.what());
    }
    if (doc.contains("config")) doc = doc.at("config");
  }
  if (!o.preset.empty()) {
    if (doc.contains("preset") && doc.at("preset") != o.preset)
      throw heom::InvalidArgument("--preset conflicts with the preset in " + o.config);
    doc["preset"] = o.preset;
  }
  if (o.steady + o.periodic + o.transient > 1) throw heom::InvalidArgument("choose one of --steady/--periodic/--transient");
  if (o.steady) doc["run"] = "steady";
  if (o.periodic) doc["run"] = "periodic";
  if (o.transient) doc["run"] = "transient";
  if (!o.out.empty()) doc["output"] = o.out;

  // Apply --set on the fully defaulted document so any known path works.
  json full = heom::parse_config(doc).document;
  json sweep = full.contains("sweep") ? full["sweep"] : json();
  full.erase("sweep");
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw heom::InvalidArgument("--set expects path=value, got '" + s + "'");
    heom::set_path(full, s.substr(0, eq), parse_value(s.substr(eq + 1)));
  }
  if (!o.grid.empty()) {
    const auto eq = o.grid.find('=');
    if (eq == std::string::npos) throw heom::InvalidArgument("--grid expects path=v1,v2,...");
    std::vector<double> values;
    std::stringstream ss(o.grid.substr(eq + 1));
    for (std::string f; std::getline(ss, f, ',');) {
      try {
        values.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw heom::InvalidArgument("--grid: bad value '" + f + "'");
      }
    }
    sweep = {{"path", o.grid.substr(0, eq)}, {"values", values}};
  }
  if (!sweep.is_null()) full["sweep"] = sweep;
  int threads = o.threads > 0 ? o.threads : default_threads();
  if (threads > 0) full["threads"] = threads;
  if (o.no_converge) full["convergence"]["enabled"] = false;
  return heom::parse_config(full);
}

void print_summary(const heom::RunResult& r) {
  const auto& s = r.summary;
  const bool cyc = s.kind == heom::RunKind::Periodic;
  std::printf("level: N=%d J=(", r.level.depth);
  for (std::size_t k = 0; k < r.level.pade_terms.size(); ++k)
    std::printf("%s%d", k ? "," : "", r.level.pade_terms[k]);
  std::printf(") ados=%zu dt=%.6g  [%.1f s]\n", r.level.ados, r.level.dt, r.seconds);
  for (std::size_t k = 0; k < s.q_b.size(); ++k)
    std::printf("%s_S_%zu = % .10e   %s_B_%zu = % .10e\n", cyc ? "Q_cyc" : "Qdot", k + 1, s.q_s[k],
                cyc ? "Q_cyc" : "Qdot", k + 1, s.q_b[k]);
  std::printf("%s = % .10e\n", cyc ? "W_cyc" : "W_dot", s.work);
  if (cyc) {
    if (s.eps_s) std::printf("eps_S = %.6f\n", *s.eps_s);
    if (s.eps_b) std::printf("eps_B = %.6f\n", *s.eps_b);
  }
  std::printf("first law: residual %.3e of scale %.3e (%s)\n", s.first_law_residual, s.energy_scale,
              s.first_law_ok ? "ok" : "FAILED");
  std::printf("second law: -sum Q_B/T = % .3e (%s)\n", s.clausius, s.second_law_ok ? "ok" : "FAILED");
}

void print_ladder(const std::vector<heom::LadderEntry>& ladder) {
  std::printf("%-8s %4s %-10s %9s %12s %s\n", "move", "N", "J", "ados", "change", "");
  for (const auto& e : ladder) {
    std::string j;
    for (std::size_t k = 0; k < e.level.pade_terms.size(); ++k)
      j += (k ? "," : "") + std::to_string(e.level.pade_terms[k]);
    std::printf("%-8s %4d %-10s %9zu %12.3e %s\n", e.move.c_str(), e.level.depth, j.c_str(), e.level.ados,
                e.change, e.accepted ? "moved" : "");
  }
}

heom::LadderCallback progress(const Options& o) {
  if (!o.verbose) return {};
  return [](const heom::LadderEntry& e) {
    std::string j;
    for (std::size_t k = 0; k < e.level.pade_terms.size(); ++k)
      j += (k ? "," : "") + std::to_string(e.level.pade_terms[k]);
    std::fprintf(stderr, "ladder: %-8s N=%d J=(%s) ados=%zu change=%.3e  [%.1f s]\n", e.move.c_str(), e.level.depth,
                 j.c_str(), e.level.ados, e.change, e.seconds);
  };
}

void write_run(const heom::RunResult& r) {
  const std::string& prefix = r.config.output;
  heom::write_trajectory_csv(prefix + ".trajectory.csv", r);
  heom::write_summary_csv(prefix + ".summary.csv", {heom::SweepPoint{0.0, r, {}}}, "");
  heom::write_manifest(prefix + ".manifest.json", heom::manifest(r));
}

int cmd_run(const Options& o) {
  const heom::RunConfig cfg = resolve(o);
  const heom::RunResult r = heom::run(cfg, progress(o));
  write_run(r);
  print_summary(r);
  return r.summary.audit_passed() ? kOk : kAudit;
}

int cmd_converge(const Options& o) {
  heom::RunConfig cfg = resolve(o);
  cfg.convergence.enabled = true;
  try {
    const heom::RunResult r = heom::converge(cfg, progress(o));
    print_ladder(r.ladder);
    write_run(r);
    print_summary(r);
    return r.summary.audit_passed() ? kOk : kAudit;
  } catch (const heom::ConvergenceLadderError& e) {
    print_ladder(e.ladder());
    throw;
  }
}

int cmd_sweep(const Options& o) {
  const heom::RunConfig cfg = resolve(o);
  if (!cfg.sweep) throw heom::InvalidArgument("sweep needs a sweep block in the config or --grid");
  const std::vector<heom::SweepPoint> points = heom::sweep(cfg);
  const std::string& prefix = cfg.output;
  heom::write_summary_csv(prefix + ".summary.csv", points, cfg.sweep->path);
  json manifests = json::array();
  std::size_t failures = 0;
  bool audit_ok = true;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!p.result) {
      ++failures;
      std::fprintf(stderr, "%s = %g failed: %s\n", cfg.sweep->path.c_str(), p.value, p.error.c_str());
      manifests.push_back({{"value", p.value}, {"error", p.error}});
      continue;
    }
    heom::write_trajectory_csv(prefix + ".point" + std::to_string(i) + ".trajectory.csv", *p.result);
    json m = heom::manifest(*p.result);
    m["value"] = p.value;
    manifests.push_back(std::move(m));
    audit_ok = audit_ok && p.result->summary.audit_passed();
    const auto& s = p.result->summary;
    std::printf("%s = %-12g N=%-3d Q_S1 % .6e  Q_B1 % .6e%s\n", cfg.sweep->path.c_str(), p.value,
                p.result->level.depth, s.q_s[0], s.q_b[0], s.audit_passed() ? "" : "  AUDIT FAILED");
  }
  heom::write_manifest(prefix + ".manifest.json",
                       {{"tool", "heom"}, {"version", heom::kToolVersion}, {"sweep", cfg.document["sweep"]},
                        {"points", manifests}});
  if (failures == points.size()) return kConvergence;
  return audit_ok ? kOk : kAudit;
}

int cmd_audit(const std::string& path, double tol_first, double tol_second) {
  heom::AuditSettings s;
  s.tol_first = tol_first;
  s.tol_second = tol_second;
  const heom::AuditReport r = heom::audit_trajectory_csv(path, s);
  std::printf("rows: %zu\n", r.rows);
  std::printf("first law: residual %.3e of scale %.3e (%s); stored column differs by %.3e\n",
              r.first_law_residual, r.energy_scale, r.first_law_ok ? "ok" : "FAILED", r.stored_residual_mismatch);
  if (r.clausius) std::printf("second law: -sum Q_B/T = % .3e (%s)\n", *r.clausius, r.second_law_ok ? "ok" : "FAILED");
  return r.first_law_ok && r.second_law_ok ? kOk : kAudit;
}

void add_run_options(CLI::App* app, Options& o) {
  app->add_option("--preset", o.preset, "spin-boson or three-level-engine");
  app->add_option("--config", o.config, "JSON run configuration (or a manifest to rerun)");
  app->add_option("--set", o.sets, "override a config value, e.g. model.baths.*.eta=0.1")->take_all();
  app->add_option("--out", o.out, "output path prefix");
  app->add_option("--threads", o.threads, "threads (default: HEOM_THREADS or 1)");
  app->add_flag("--steady", o.steady, "undriven steady state");
  app->add_flag("--periodic", o.periodic, "periodic steady state of a driven model");
  app->add_flag("--transient", o.transient, "fixed-length propagation");
  app->add_flag("--no-converge", o.no_converge, "run at the configured N and J only");
  app->add_flag("-v,--verbose", o.verbose, "report each convergence-ladder evaluation on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HEOM heat-current simulator"};
  app.require_subcommand(1);
  Options run_o, sweep_o, conv_o;
  std::string audit_path;
  double tol_first = heom::AuditSettings{}.tol_first;
  double tol_second = heom::AuditSettings{}.tol_second;

  auto* run = app.add_subcommand("run", "single run with convergence control");
  add_run_options(run, run_o);
  auto* sweep = app.add_subcommand("sweep", "one run per grid value");
  add_run_options(sweep, sweep_o);
  sweep->add_option("--grid", sweep_o.grid, "path=v1,v2,... (overrides the config sweep block)");
  auto* conv = app.add_subcommand("converge", "print the N / J convergence ladder");
  add_run_options(conv, conv_o);
  auto* audit = app.add_subcommand("audit", "re-check the first and second laws on a trajectory CSV");
  audit->add_option("csv", audit_path, "trajectory CSV")->required();
  audit->add_option("--tol-first", tol_first, "first-law tolerance relative to the energy-flow scale");
  audit->add_option("--tol-second", tol_second, "Clausius tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*sweep) return cmd_sweep(sweep_o);
    if (*conv) return cmd_converge(conv_o);
    if (*audit) return cmd_audit(audit_path, tol_first, tol_second);
  } catch (const heom::InvalidArgument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const heom::ConvergenceError& e) {
    std::fprintf(stderr, "convergence failure: %s\n", e.what());
    return kConvergence;
  } catch (const heom::ResourceError& e) {
    std::fprintf(stderr, "resource cap: %s\n", e.what());
    return kConvergence;
  } catch (const heom::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConvergence;
  }
  return kOk;
}
