#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "heom/runner.hpp"

namespace heom {

using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  return out;
}

const char* kUnits =
    "# units: hbar = k_B = 1; time in 1/omega_ref, energies in hbar*omega_ref, currents and power in "
    "hbar*omega_ref^2";
const char* kSign =
    "# sign: Qdot_*_k > 0 means energy flows from bath k into the system; W_dot = <dH_S/dt> is the power "
    "delivered by the drive";

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, sep);) out.push_back(f);
  return out;
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

json level_json(const Level& l) {
  return {{"depth", l.depth}, {"pade_terms", l.pade_terms}, {"bath_depth_caps", l.bath_depth_caps},
          {"dt", l.dt}, {"ados", l.ados}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void write_trajectory_csv(const std::filesystem::path& path, const RunResult& r) {
  std::ofstream out = open_out(path);
  const auto& recs = r.trajectory.records;
  if (recs.empty()) throw InvalidArgument("empty trajectory");
  const int d = static_cast<int>(recs.front().rho.rows());
  const std::size_t nb = recs.front().q_b.size();
  const char* kind = r.trajectory.kind == TrajectoryKind::Steady     ? "steady"
                     : r.trajectory.kind == TrajectoryKind::Periodic ? "periodic"
                                                                     : "transient";
  out << "# heom trajectory, version " << kToolVersion << ", preset " << r.config.preset << "\n";
  out << "# kind: " << kind << "\n";
  out << "# period: " << num(r.trajectory.period) << "\n";
  out << "# dim: " << d << "\n";
  out << "# temperatures:";
  for (const auto& b : r.config.baths()) out << ' ' << num(b.temperature);
  out << "\n" << kUnits << "\n" << kSign << "\n";
  out << "# E_S = <H_S(t)>; H_int_k = <H_I^k>; dE_S_dt and dH_int_k_dt are their rates from the equations of "
         "motion; casbi_k = Qdot_B_k - Qdot_S_k - dH_int_k_dt; "
         "first_law_residual = |sum_k Qdot_B_k - dE_S_dt - sum_k dH_int_k_dt + W_dot|\n";

  out << "t";
  for (int i = 0; i < d; ++i) out << ",pop_" << i;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) out << ",re_rho_" << i << j << ",im_rho_" << i << j;
  for (std::size_t k = 1; k <= nb; ++k) out << ",Qdot_S_" << k;
  for (std::size_t k = 1; k <= nb; ++k) out << ",Qdot_B_" << k;
  out << ",W_dot,E_S,dE_S_dt";
  for (std::size_t k = 1; k <= nb; ++k) out << ",H_int_" << k;
  for (std::size_t k = 1; k <= nb; ++k) out << ",dH_int_" << k << "_dt";
  for (std::size_t k = 1; k <= nb; ++k) out << ",casbi_" << k;
  out << ",first_law_residual\n";

  for (const auto& rec : recs) {
    out << num(rec.t);
    for (int i = 0; i < d; ++i) out << ',' << num(rec.rho(i, i).real());
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) out << ',' << num(rec.rho(i, j).real()) << ',' << num(rec.rho(i, j).imag());
    for (double v : rec.q_s) out << ',' << num(v);
    for (double v : rec.q_b) out << ',' << num(v);
    out << ',' << num(rec.power) << ',' << num(rec.system_energy) << ',' << num(rec.system_energy_rate);
    for (double v : rec.h_int) out << ',' << num(v);
    for (double v : rec.h_int_rate) out << ',' << num(v);
    for (double v : rec.casbi) out << ',' << num(v);
    out << ',' << num(rec.first_law_residual) << "\n";
  }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points,
                       const std::string& parameter) {
  std::ofstream out = open_out(path);
  std::size_t nb = 2;
  RunKind kind = RunKind::Steady;
  for (const auto& p : points)
    if (p.result) {
      nb = p.result->summary.q_b.size();
      kind = p.result->summary.kind;
      break;
    }
  const bool cyc = kind == RunKind::Periodic;
  out << "# heom summary, version " << kToolVersion << ", run " << to_string(kind) << "\n";
  out << kUnits << "\n" << kSign << "\n";
  if (cyc)
    out << "# periodic rows hold cycle integrals: W_cyc = int W_dot dt, Q_*_cyc_k = int Qdot_*_k dt over one "
           "drive period; eps_S = -W_cyc/Q_S_cyc_1, eps_B = -W_cyc/Q_B_cyc_1\n";
  out << "# clausius = -sum_k Q_B_k/T_k (must be >= -tol_second)\n";
  std::vector<std::string> header{"parameter", "value", "status", "depth", "pade_terms", "bath_depth_caps",
                                  "ados", "dt"};
  for (std::size_t k = 1; k <= nb; ++k) header.push_back((cyc ? "Q_S_cyc_" : "Qdot_S_") + std::to_string(k));
  for (std::size_t k = 1; k <= nb; ++k) header.push_back((cyc ? "Q_B_cyc_" : "Qdot_B_") + std::to_string(k));
  if (cyc)
    header.insert(header.end(), {"W_cyc", "period", "eps_S", "eps_B"});
  else
    header.push_back("W_dot");
  for (std::size_t k = 1; k <= nb; ++k) header.push_back("H_int_" + std::to_string(k));
  header.insert(header.end(), {"first_law_residual", "energy_scale", "first_law_ok", "clausius", "second_law_ok",
                               "trace_defect", "hermiticity_defect", "error"});
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << fields[i];
    out << "\n";
  };
  emit(header);

  for (const auto& p : points) {
    std::vector<std::string> f{parameter, num(p.value)};
    if (!p.result) {
      std::string err = p.error;
      for (char& c : err)
        if (c == ',' || c == '\n' || c == '"') c = ' ';
      f.push_back("failed");
      f.resize(header.size() - 1);
      f.push_back(err);
      emit(f);
      continue;
    }
    const RunResult& r = *p.result;
    const RunSummary& sm = r.summary;
    f.insert(f.end(), {sm.audit_passed() ? "ok" : "audit_failed", std::to_string(r.level.depth),
                       join(r.level.pade_terms), join(r.level.bath_depth_caps), std::to_string(r.level.ados),
                       num(r.level.dt)});
    for (double v : sm.q_s) f.push_back(num(v));
    for (double v : sm.q_b) f.push_back(num(v));
    f.push_back(num(sm.work));
    if (cyc)
      f.insert(f.end(), {num(sm.period), sm.eps_s ? num(*sm.eps_s) : "", sm.eps_b ? num(*sm.eps_b) : ""});
    for (double v : sm.h_int) f.push_back(num(v));
    f.insert(f.end(), {num(sm.first_law_residual), num(sm.energy_scale), sm.first_law_ok ? "1" : "0",
                       num(sm.clausius), sm.second_law_ok ? "1" : "0", num(sm.max_trace_defect),
                       num(sm.max_hermiticity_defect), ""});
    emit(f);
  }
}

json manifest(const RunResult& r) {
  json cfg = r.config.document;
  cfg.erase("sweep");
  cfg["hierarchy"]["depth"] = r.level.depth;
  cfg["hierarchy"]["bath_depth_caps"] = r.level.bath_depth_caps;
  cfg["hierarchy"]["dt"] = r.level.dt;
  for (std::size_t k = 0; k < r.level.pade_terms.size(); ++k)
    cfg["model"]["baths"][k]["pade_terms"] = r.level.pade_terms[k];
  cfg["convergence"]["enabled"] = false;

  const ModelSetup setup = build_model(r.config, r.level);
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config.hash()));
  json ladder = json::array();
  for (const auto& e : r.ladder)
    ladder.push_back({{"move", e.move}, {"level", level_json(e.level)}, {"targets", e.targets},
                      {"change", e.change}, {"accepted", e.accepted}, {"seconds", e.seconds}});
  const RunSummary& s = r.summary;
  return {
      {"tool", "heom"},
      {"version", kToolVersion},
      {"config_hash", hash},
      {"model_hash", setup.model_hash},
      {"decomposition_hash", setup.decomposition_hash},
      {"config", cfg},
      {"resolved", level_json(r.level)},
      {"ladder", ladder},
      {"summary",
       {{"kind", to_string(s.kind)},
        {"q_s", s.q_s},
        {"q_b", s.q_b},
        {"h_int", s.h_int},
        {"work", s.work},
        {"period", s.period},
        {"eps_s", optional_json(s.eps_s)},
        {"eps_b", optional_json(s.eps_b)},
        {"first_law_residual", s.first_law_residual},
        {"energy_scale", s.energy_scale},
        {"first_law_ok", s.first_law_ok},
        {"clausius", s.clausius},
        {"second_law_ok", s.second_law_ok},
        {"max_trace_defect", s.max_trace_defect},
        {"max_hermiticity_defect", s.max_hermiticity_defect}}},
      {"seconds", r.seconds},
  };
}

void write_manifest(const std::filesystem::path& path, const json& m) {
  std::ofstream out = open_out(path);
  out << std::setw(2) << m << "\n";
}

AuditReport audit_trajectory_csv(const std::filesystem::path& path, const AuditSettings& s) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) meta[trim(line.substr(1, colon - 1))] = trim(line.substr(colon + 1));
      continue;
    }
    if (header.empty()) {
      for (auto& h : split(line, ',')) header.push_back(trim(h));
      continue;
    }
    std::vector<double> row;
    for (const auto& f : split(line, ',')) {
      try {
        row.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw InvalidArgument("audit: non-numeric field '" + f + "' in " + path.string());
      }
    }
    if (row.size() != header.size()) throw InvalidArgument("audit: ragged row in " + path.string());
    rows.push_back(std::move(row));
  }
  if (header.empty() || rows.empty()) throw InvalidArgument("audit: no data in " + path.string());

  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InvalidArgument("audit: missing column '" + name + "'");
  };
  const std::string kind = meta["kind"];
  Trajectory traj;
  if (kind == "steady")
    traj.kind = TrajectoryKind::Steady;
  else if (kind == "periodic")
    traj.kind = TrajectoryKind::Periodic;
  else if (kind == "transient")
    traj.kind = TrajectoryKind::Transient;
  else
    throw InvalidArgument("audit: unknown trajectory kind '" + kind + "'");
  traj.period = meta.count("period") ? std::stod(meta["period"]) : 0.0;
  std::vector<double> temps;
  {
    std::stringstream ss(meta["temperatures"]);
    for (double t; ss >> t;) temps.push_back(t);
  }
  const std::size_t nb = temps.size();
  int d = 0;
  while (std::find(header.begin(), header.end(), "pop_" + std::to_string(d)) != header.end()) ++d;
  if (d == 0 || nb == 0) throw InvalidArgument("audit: cannot infer dimensions");

  for (const auto& row : rows) {
    CurrentRecord rec;
    rec.t = row[col("t")];
    rec.rho = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) rec.rho(i, i) = row[col("pop_" + std::to_string(i))];
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        const std::string ij = std::to_string(i) + std::to_string(j);
        rec.rho(i, j) = cplx(row[col("re_rho_" + ij)], row[col("im_rho_" + ij)]);
        rec.rho(j, i) = std::conj(rec.rho(i, j));
      }
    for (std::size_t k = 1; k <= nb; ++k) {
      rec.q_s.push_back(row[col("Qdot_S_" + std::to_string(k))]);
      rec.q_b.push_back(row[col("Qdot_B_" + std::to_string(k))]);
      rec.h_int.push_back(row[col("H_int_" + std::to_string(k))]);
      rec.h_int_rate.push_back(row[col("dH_int_" + std::to_string(k) + "_dt")]);
    }
    rec.power = row[col("W_dot")];
    rec.system_energy = row[col("E_S")];
    rec.system_energy_rate = row[col("dE_S_dt")];
    traj.records.push_back(std::move(rec));
  }
  finalize(traj);

  AuditReport rep;
  rep.rows = rows.size();
  const std::size_t res_col = col("first_law_residual");
  for (std::size_t i = 0; i < rows.size(); ++i)
    rep.stored_residual_mismatch =
        std::max(rep.stored_residual_mismatch, std::abs(rows[i][res_col] - traj.records[i].first_law_residual));
  rep.first_law_residual = max_first_law_residual(traj);
  rep.energy_scale = energy_flow_scale(traj);
  rep.first_law_ok = !s.first_law || rep.first_law_residual == 0.0 ||
                     rep.first_law_residual <= s.tol_first * rep.energy_scale;
  if (traj.kind != TrajectoryKind::Transient) {
    const std::vector<double> heat =
        traj.kind == TrajectoryKind::Periodic ? cycle_average(traj).q_b : traj.records.back().q_b;
    const ClausiusCheck c = second_law_check(heat, temps, s.tol_second);
    rep.clausius = c.value;
    rep.second_law_ok = !s.second_law || c.passed;
  }
  return rep;
}

}  // namespace heom
