#include "heom/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "heom/fingerprint.hpp"

namespace heom {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json bath_doc(const BathSpec& b) {
  return {{"eta", b.eta}, {"gamma", b.gamma}, {"temperature", b.temperature}, {"pade_terms", b.pade_terms}};
}

json common_sections(RunKind kind, int depth, std::vector<int> caps, double tol) {
  HierarchySettings h;
  ConvergenceSettings c;
  AuditSettings a;
  return {
      {"run", to_string(kind)},
      {"initial_state", "mixed"},
      {"hierarchy",
       {{"depth", depth},
        {"bath_depth_caps", caps},
        {"dt", h.dt},
        {"t_max", h.t_max},
        {"tol", tol},
        {"samples_per_cycle", h.samples_per_cycle},
        {"max_cycles", h.max_cycles},
        {"sample_every", h.sample_every},
        {"max_ados", h.max_ados}}},
      {"convergence",
       {{"enabled", c.enabled},
        {"tol_depth", c.tol_depth},
        {"tol_pade", c.tol_pade},
        {"floor", c.floor},
        {"max_evaluations", c.max_evaluations}}},
      {"audit",
       {{"first_law", a.first_law},
        {"second_law", a.second_law},
        {"tol_first", a.tol_first},
        {"tol_second", a.tol_second}}},
      {"output", "heom"},
      {"threads", 1},
  };
}

/// Deep merge: objects key by key, equal-length arrays element by element.
void merge_into(json& base, const json& over, const std::string& where) {
  if (base.is_object() && over.is_object()) {
    for (auto it = over.begin(); it != over.end(); ++it) {
      const std::string path = where.empty() ? it.key() : where + "." + it.key();
      if (!base.contains(it.key())) throw InvalidArgument("config: unknown key '" + path + "'");
      merge_into(base[it.key()], it.value(), path);
    }
    return;
  }
  if (base.is_array() && over.is_array() && base.size() == over.size() && !base.empty() &&
      base.front().is_object()) {
    for (std::size_t i = 0; i < base.size(); ++i)
      merge_into(base[i], over[i], where + "." + std::to_string(i));
    return;
  }
  if (base.is_object() != over.is_object())
    throw InvalidArgument("config: '" + where + "' has the wrong type");
  base = over;
}

void set_path_rec(json& node, const std::vector<std::string>& keys, std::size_t i, const json& value,
                  const std::string& full) {
  if (i == keys.size()) {
    if (node.is_object() || node.is_array()) throw InvalidArgument("config: '" + full + "' is not a scalar");
    node = value;
    return;
  }
  const std::string& key = keys[i];
  if (node.is_array()) {
    if (key == "*") {
      for (auto& el : node) set_path_rec(el, keys, i + 1, value, full);
      return;
    }
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw InvalidArgument("config: '" + full + "': '" + key + "' is not an array index");
    }
    if (idx >= node.size()) throw InvalidArgument("config: '" + full + "': index out of range");
    set_path_rec(node[idx], keys, i + 1, value, full);
    return;
  }
  if (!node.is_object() || !node.contains(key)) throw InvalidArgument("config: unknown path '" + full + "'");
  set_path_rec(node[key], keys, i + 1, value, full);
}

template <class T>
T get(const json& doc, const char* section, const char* key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + section + "." + key + ": " + e.what());
  }
}

RunKind parse_kind(const std::string& s) {
  if (s == "steady") return RunKind::Steady;
  if (s == "periodic") return RunKind::Periodic;
  if (s == "transient") return RunKind::Transient;
  throw InvalidArgument("config: run must be steady, periodic or transient (got '" + s + "')");
}

std::array<BathSpec, 2> parse_baths(const json& model) {
  const json& arr = model.at("baths");
  if (!arr.is_array() || arr.size() != 2) throw InvalidArgument("config: model.baths needs two entries");
  std::array<BathSpec, 2> out;
  for (std::size_t k = 0; k < 2; ++k) {
    out[k].eta = arr[k].at("eta").get<double>();
    out[k].gamma = arr[k].at("gamma").get<double>();
    out[k].temperature = arr[k].at("temperature").get<double>();
    out[k].pade_terms = arr[k].at("pade_terms").get<int>();
    out[k].validate();
  }
  return out;
}

std::vector<double> parse_grid(const json& sweep) {
  std::vector<double> values;
  if (sweep.contains("values")) {
    values = sweep.at("values").get<std::vector<double>>();
  } else if (sweep.contains("log") || sweep.contains("linear")) {
    const bool log = sweep.contains("log");
    const json& g = log ? sweep.at("log") : sweep.at("linear");
    const double a = g.at("from").get<double>();
    const double b = g.at("to").get<double>();
    const int n = g.at("points").get<int>();
    if (n < 1) throw InvalidArgument("config: sweep grid needs at least one point");
    if (log && !(a > 0.0 && b > 0.0)) throw InvalidArgument("config: log grid bounds must be positive");
    for (int i = 0; i < n; ++i) {
      const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
      values.push_back(log ? a * std::pow(b / a, f) : a + (b - a) * f);
    }
  }
  if (values.empty()) throw InvalidArgument("config: sweep grid is empty");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("config: sweep grid values must be finite");
  return values;
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string("config: ") + what + " must be positive");
}

Matrix initial_rho(const std::string& state, int dim) {
  if (state == "mixed") return Matrix::Identity(dim, dim) / static_cast<double>(dim);
  if (state.rfind("pure:", 0) == 0) {
    int k = -1;
    try {
      k = std::stoi(state.substr(5));
    } catch (const std::exception&) {
    }
    if (k < 0 || k >= dim) throw InvalidArgument("config: initial_state '" + state + "' out of range");
    Matrix r = Matrix::Zero(dim, dim);
    r(k, k) = 1.0;
    return r;
  }
  throw InvalidArgument("config: initial_state must be 'mixed' or 'pure:k'");
}

std::string level_key(const Level& l) {
  std::ostringstream os;
  os << l.depth;
  for (int j : l.pade_terms) os << ',' << j;
  return os.str();
}

std::string describe(const Level& l) {
  std::ostringstream os;
  os << "N=" << l.depth << " J=(";
  for (std::size_t k = 0; k < l.pade_terms.size(); ++k) os << (k ? "," : "") << l.pade_terms[k];
  os << ") ados=" << l.ados;
  return os.str();
}

std::string ladder_report(const std::vector<LadderEntry>& ladder) {
  std::ostringstream os;
  for (const auto& e : ladder)
    os << "\n  " << e.move << ": " << describe(e.level) << " change=" << e.change
       << (e.accepted ? " (moved)" : "");
  return os.str();
}

}  // namespace

const char* to_string(RunKind k) {
  switch (k) {
    case RunKind::Steady: return "steady";
    case RunKind::Periodic: return "periodic";
    case RunKind::Transient: return "transient";
  }
  return "?";
}

std::vector<BathSpec> RunConfig::baths() const {
  const auto& b = preset == "spin-boson" ? spin_boson.baths : engine.baths;
  return {b.begin(), b.end()};
}

std::uint64_t RunConfig::hash() const { return Fingerprint().add(document.dump()).value(); }

json preset_document(const std::string& preset) {
  if (preset == "spin-boson") {
    SpinBosonParams p;
    for (auto& b : p.baths) b.pade_terms = 2;
    json doc = common_sections(RunKind::Steady, 4, {}, 1e-9);
    doc["preset"] = preset;
    doc["model"] = {{"omega0", p.omega0},
                    {"s_x", p.s_x},
                    {"s_z", p.s_z},
                    {"baths", {bath_doc(p.baths[0]), bath_doc(p.baths[1])}}};
    return doc;
  }
  if (preset == "three-level-engine") {
    ThreeLevelParams p;
    p.baths[1].pade_terms = 1;
    json doc = common_sections(RunKind::Periodic, 4, {-1, 2}, 1e-8);
    doc["preset"] = preset;
    doc["model"] = {{"omega1", p.omega1},
                    {"omega2", p.omega2},
                    {"g", p.g},
                    {"Omega", p.Omega},
                    {"baths", {bath_doc(p.baths[0]), bath_doc(p.baths[1])}}};
    return doc;
  }
  throw InvalidArgument("unknown preset '" + preset + "' (expected spin-boson or three-level-engine)");
}

void set_path(json& doc, const std::string& path, const json& value) {
  std::vector<std::string> keys;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) keys.push_back(part);
  if (keys.empty()) throw InvalidArgument("config: empty path");
  set_path_rec(doc, keys, 0, value, path);
}

RunConfig parse_config(const json& input) {
  if (!input.is_object()) throw InvalidArgument("config: top level must be an object");
  const json& overlay = input.contains("config") ? input.at("config") : input;
  const std::string preset = overlay.value("preset", std::string("spin-boson"));
  json doc = preset_document(preset);
  json rest = overlay;
  json sweep;
  if (rest.contains("sweep")) {
    sweep = rest.at("sweep");
    rest.erase("sweep");
  }
  merge_into(doc, rest, "");

  RunConfig cfg;
  cfg.preset = preset;
  try {
    const json& m = doc.at("model");
    if (preset == "spin-boson") {
      cfg.spin_boson.omega0 = m.at("omega0").get<double>();
      cfg.spin_boson.s_x = m.at("s_x").get<double>();
      cfg.spin_boson.s_z = m.at("s_z").get<double>();
      cfg.spin_boson.baths = parse_baths(m);
    } else {
      cfg.engine.omega1 = m.at("omega1").get<double>();
      cfg.engine.omega2 = m.at("omega2").get<double>();
      cfg.engine.g = m.at("g").get<double>();
      cfg.engine.Omega = m.at("Omega").get<double>();
      cfg.engine.baths = parse_baths(m);
    }
    cfg.initial_state = doc.at("initial_state").get<std::string>();
    cfg.kind = parse_kind(doc.at("run").get<std::string>());
    cfg.output = doc.at("output").get<std::string>();
    cfg.threads = doc.at("threads").get<int>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }

  auto& h = cfg.hierarchy;
  h.depth = get<int>(doc, "hierarchy", "depth");
  h.bath_depth_caps = get<std::vector<int>>(doc, "hierarchy", "bath_depth_caps");
  h.dt = get<double>(doc, "hierarchy", "dt");
  h.t_max = get<double>(doc, "hierarchy", "t_max");
  h.tol = get<double>(doc, "hierarchy", "tol");
  h.samples_per_cycle = get<int>(doc, "hierarchy", "samples_per_cycle");
  h.max_cycles = get<int>(doc, "hierarchy", "max_cycles");
  h.sample_every = get<int>(doc, "hierarchy", "sample_every");
  h.max_ados = get<std::size_t>(doc, "hierarchy", "max_ados");
  auto& c = cfg.convergence;
  c.enabled = get<bool>(doc, "convergence", "enabled");
  c.tol_depth = get<double>(doc, "convergence", "tol_depth");
  c.tol_pade = get<double>(doc, "convergence", "tol_pade");
  c.floor = get<double>(doc, "convergence", "floor");
  c.max_evaluations = get<int>(doc, "convergence", "max_evaluations");
  auto& a = cfg.audit;
  a.first_law = get<bool>(doc, "audit", "first_law");
  a.second_law = get<bool>(doc, "audit", "second_law");
  a.tol_first = get<double>(doc, "audit", "tol_first");
  a.tol_second = get<double>(doc, "audit", "tol_second");

  if (h.depth < 1) throw InvalidArgument("config: hierarchy.depth must be at least 1");
  if (!h.bath_depth_caps.empty() && h.bath_depth_caps.size() != 2)
    throw InvalidArgument("config: hierarchy.bath_depth_caps needs one entry per bath");
  check_positive(h.dt, "hierarchy.dt");
  check_positive(h.t_max, "hierarchy.t_max");
  check_positive(h.tol, "hierarchy.tol");
  if (h.samples_per_cycle < 4 || h.max_cycles < 1 || h.sample_every < 1 || h.max_ados < 1)
    throw InvalidArgument("config: hierarchy sampling settings out of range");
  check_positive(c.tol_depth, "convergence.tol_depth");
  check_positive(c.tol_pade, "convergence.tol_pade");
  if (!(c.floor >= 0.0)) throw InvalidArgument("config: convergence.floor must be non-negative");
  if (c.max_evaluations < 1) throw InvalidArgument("config: convergence.max_evaluations must be positive");
  check_positive(a.tol_first, "audit.tol_first");
  check_positive(a.tol_second, "audit.tol_second");
  if (cfg.threads < 1) throw InvalidArgument("config: threads must be positive");
  initial_rho(cfg.initial_state, preset == "spin-boson" ? 2 : 3);
  if (cfg.kind == RunKind::Periodic && (preset != "three-level-engine" || cfg.engine.g == 0.0))
    throw InvalidArgument("config: a periodic run requires a drive (three-level-engine with g != 0)");

  if (!sweep.is_null()) {
    SweepSettings s;
    try {
      s.path = sweep.at("path").get<std::string>();
      s.values = parse_grid(sweep);
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("config: sweep: ") + e.what());
    }
    json probe = doc;
    set_path(probe, s.path, s.values.front());
    cfg.sweep = std::move(s);
    doc["sweep"] = sweep;
  }
  cfg.document = std::move(doc);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw InvalidArgument("config: " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

int minimal_pade_terms(BathSpec spec, int requested, int max_terms) {
  if (spec.eta == 0.0) return requested;
  for (int j = std::max(requested, 0); j <= max_terms; ++j) {
    spec.pade_terms = j;
    try {
      pade_decompose(spec);
      return j;
    } catch (const InvalidArgument&) {
    }
  }
  throw InvalidArgument("no Pade order up to " + std::to_string(max_terms) +
                        " gives a non-negative delta weight");
}

Level initial_level(const RunConfig& cfg) {
  Level l;
  l.depth = cfg.hierarchy.depth;
  l.bath_depth_caps = cfg.hierarchy.bath_depth_caps;
  l.dt = cfg.hierarchy.dt;
  for (const auto& b : cfg.baths()) l.pade_terms.push_back(minimal_pade_terms(b, b.pade_terms));
  return l;
}

ModelSetup build_model(const RunConfig& cfg, const Level& level) {
  if (cfg.preset == "spin-boson") {
    SpinBosonParams p = cfg.spin_boson;
    for (std::size_t k = 0; k < 2; ++k) p.baths[k].pade_terms = level.pade_terms.at(k);
    return build_spin_boson(p);
  }
  ThreeLevelParams p = cfg.engine;
  for (std::size_t k = 0; k < 2; ++k) p.baths[k].pade_terms = level.pade_terms.at(k);
  return build_three_level(p);
}

std::vector<double> RunSummary::targets() const {
  std::vector<double> t;
  if (kind == RunKind::Periodic) t.push_back(work);
  t.insert(t.end(), q_s.begin(), q_s.end());
  t.insert(t.end(), q_b.begin(), q_b.end());
  return t;
}

RunResult execute(const RunConfig& cfg, const Level& level_in) {
  const auto t0 = Clock::now();
  const ModelSetup setup = build_model(cfg, level_in);
  const int dim = setup.model.dim();
  TableLimits limits;
  limits.max_ados = cfg.hierarchy.max_ados;
  limits.dim = dim;
  Hierarchy h(setup.model, setup.baths, level_in.depth, level_in.bath_depth_caps, limits);
  h.set_threads(cfg.threads);

  RunResult out;
  out.config = cfg;
  out.level = level_in;
  out.level.ados = h.table().size();
  // Keep RK4 inside its stability region (|z| < 2.78 on the negative axis).
  out.level.dt = std::min(level_in.dt, 2.5 / std::max(h.stiffness_bound(), 1e-300));
  const HierarchyState start = h.initial_state(initial_rho(cfg.initial_state, dim));
  const Observable obs = record_observable(h);
  const std::size_t nb = setup.baths.size();
  RunSummary& s = out.summary;
  s.kind = cfg.kind;

  if (cfg.kind == RunKind::Steady) {
    SteadyOptions o;
    o.dt = out.level.dt;
    o.tol = cfg.hierarchy.tol;
    o.t_max = cfg.hierarchy.t_max;
    const SteadyResult r = propagate_to_steady(h, start, o, obs);
    out.trajectory = {TrajectoryKind::Steady, 0.0, {evaluate_record(h, r.state, r.state.time())}};
    s.max_trace_defect = std::max(r.max_trace_defect, r.state.trace_defect());
    s.max_hermiticity_defect = std::max(r.max_hermiticity_defect, r.state.hermiticity_defect());
  } else if (cfg.kind == RunKind::Periodic) {
    PeriodicOptions o;
    o.dt = out.level.dt;
    o.tol = cfg.hierarchy.tol;
    o.max_cycles = cfg.hierarchy.max_cycles;
    o.samples_per_cycle = cfg.hierarchy.samples_per_cycle;
    const PeriodicResult r = propagate_periodic(h, start, o, obs);
    out.level.dt = r.dt;
    out.trajectory = {TrajectoryKind::Periodic, r.period, {}};
    for (std::size_t i = 0; i < r.times.size(); ++i)
      out.trajectory.records.push_back(unpack(r.samples[i], r.times[i], nb, dim));
    s.period = r.period;
    s.max_trace_defect = r.max_trace_defect;
    s.max_hermiticity_defect = r.max_hermiticity_defect;
  } else {
    const TransientResult r =
        propagate_transient(h, start, out.level.dt, cfg.hierarchy.t_max, cfg.hierarchy.sample_every, obs);
    out.trajectory = {TrajectoryKind::Transient, 0.0, {}};
    for (std::size_t i = 0; i < r.times.size(); ++i)
      out.trajectory.records.push_back(unpack(r.samples[i], r.times[i], nb, dim));
    s.max_trace_defect = r.max_trace_defect;
    s.max_hermiticity_defect = r.max_hermiticity_defect;
  }
  finalize(out.trajectory);

  std::vector<double> temps;
  for (const auto& b : setup.specs) temps.push_back(b.temperature);
  if (cfg.kind == RunKind::Periodic) {
    const CycleIntegrals c = cycle_average(out.trajectory);
    s.work = c.work;
    s.q_s = c.q_s;
    s.q_b = c.q_b;
    const Efficiencies e = efficiencies(c);
    s.eps_s = e.system;
    s.eps_b = e.bath;
    s.h_int.assign(nb, 0.0);
  } else {
    const CurrentRecord& last = out.trajectory.records.back();
    s.work = last.power;
    s.q_s = last.q_s;
    s.q_b = last.q_b;
    s.h_int = last.h_int;
  }
  s.first_law_residual = max_first_law_residual(out.trajectory);
  s.energy_scale = energy_flow_scale(out.trajectory);
  s.first_law_ok = !cfg.audit.first_law ||
                   s.first_law_residual <= cfg.audit.tol_first * s.energy_scale || s.first_law_residual == 0.0;
  const ClausiusCheck cl = second_law_check(s.q_b, temps, cfg.audit.tol_second);
  s.clausius = cl.value;
  s.second_law_ok = !cfg.audit.second_law || cfg.kind == RunKind::Transient || cl.passed;
  out.seconds = seconds_since(t0);
  return out;
}

double target_change(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double largest = 0.0;
  for (double v : b) largest = std::max(largest, std::abs(v));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a[i] - b[i]);
    if (diff == 0.0) continue;
    const double scale = std::max(std::abs(b[i]), floor * largest);
    worst = std::max(worst, scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity());
  }
  return worst;
}

RunResult converge(const RunConfig& cfg, const LadderCallback& progress) {
  const auto t0 = Clock::now();
  const ConvergenceSettings& cs = cfg.convergence;
  const std::vector<BathSpec> specs = cfg.baths();
  std::vector<LadderEntry> ladder;
  std::map<std::string, RunResult> seen;
  int evaluations = 0;

  auto evaluate = [&](const Level& l, const std::string& move, const RunResult* base) -> const RunResult& {
    const std::string key = level_key(l);
    auto it = seen.find(key);
    if (it == seen.end()) {
      if (evaluations >= cs.max_evaluations)
        throw ConvergenceLadderError("convergence ladder: evaluation budget of " +
                                         std::to_string(cs.max_evaluations) + " exhausted" +
                                         ladder_report(ladder),
                                     ladder);
      ++evaluations;
      try {
        it = seen.emplace(key, execute(cfg, l)).first;
      } catch (const ResourceError& e) {
        throw ConvergenceLadderError(std::string("convergence ladder: resource cap hit at ") + describe(l) +
                                         " (" + e.what() + ")" + ladder_report(ladder),
                                     ladder);
      } catch (const Error& e) {
        if (dynamic_cast<const InvalidArgument*>(&e)) throw;
        throw ConvergenceLadderError(std::string("convergence ladder: run failed at ") + describe(l) + " (" +
                                         e.what() + ")" + ladder_report(ladder),
                                     ladder);
      }
    }
    const RunResult& r = it->second;
    LadderEntry e{r.level, r.summary.targets(), move, 0.0, false, r.seconds};
    if (base) e.change = target_change(r.summary.targets(), base->summary.targets(), cs.floor);
    ladder.push_back(std::move(e));
    if (progress) progress(ladder.back());
    return r;
  };

  Level cur = initial_level(cfg);
  const RunResult* best = &evaluate(cur, "start", nullptr);
  while (true) {
    bool moved = false;
    Level deeper = cur;
    deeper.depth += 2;
    const RunResult& rd = evaluate(deeper, "depth", best);
    if (ladder.back().change >= cs.tol_depth) {
      ladder.back().accepted = true;
      cur = rd.level;
      best = &rd;
      continue;
    }
    for (std::size_t k = 0; k < specs.size() && !moved; ++k) {
      if (specs[k].eta == 0.0) continue;
      Level richer = cur;
      richer.pade_terms[k] += 1;
      const RunResult& rp = evaluate(richer, "pade:" + std::to_string(k + 1), best);
      if (ladder.back().change >= cs.tol_pade) {
        ladder.back().accepted = true;
        cur = rp.level;
        best = &rp;
        moved = true;
      }
    }
    if (!moved) break;
  }
  RunResult out = *best;
  out.ladder = std::move(ladder);
  out.seconds = seconds_since(t0);
  return out;
}

RunResult run(const RunConfig& cfg, const LadderCallback& progress) {
  if (cfg.convergence.enabled) return converge(cfg, progress);
  return execute(cfg, initial_level(cfg));
}

std::vector<SweepPoint> sweep(const RunConfig& cfg) {
  if (!cfg.sweep) throw InvalidArgument("config: no sweep block");
  const SweepSettings& sw = *cfg.sweep;
  std::vector<SweepPoint> points(sw.values.size());
  const int workers = std::clamp(cfg.threads, 1, static_cast<int>(points.size()));
  const int inner = std::max(1, cfg.threads / workers);
  std::atomic<std::size_t> next{0};

  auto work = [&]() {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      points[i].value = sw.values[i];
      try {
        json doc = cfg.document;
        doc.erase("sweep");
        set_path(doc, sw.path, sw.values[i]);
        doc["threads"] = inner;
        points[i].result = run(parse_config(doc));
      } catch (const Error& e) {
        points[i].error = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return points;
}

}  // namespace heom
