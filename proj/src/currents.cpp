#include "heom/currents.hpp"

#include <algorithm>
#include <cmath>

namespace heom {

namespace {

std::size_t tier_one(const AdoTable& tab, std::size_t k, int j) {
  const std::size_t id = tab.first_tier(k, j);
  if (id == kNoAdo)
    throw InvalidArgument("current estimators need first-tier ADOs (hierarchy depth N >= 1)");
  return id;
}

void check_bath(const Hierarchy& h, std::size_t k) {
  if (k >= h.baths().size()) throw InvalidArgument("bath index out of range");
}

/// Sum of the first-tier ADOs of bath k, optionally weighted by their rates.
Matrix first_tier_sum(const Hierarchy& h, const HierarchyState& s, std::size_t k, bool by_rate) {
  const auto& terms = h.baths()[k].terms();
  Matrix acc = Matrix::Zero(s.dim(), s.dim());
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const double w = by_rate ? terms[j].rate : 1.0;
    acc += w * s.ado(tier_one(h.table(), k, static_cast<int>(j)));
  }
  return acc;
}

cplx trace_product(const Matrix& a, const Matrix& b) { return (a.transpose().cwiseProduct(b)).sum(); }

Matrix comm(const Matrix& a, const Matrix& b) { return a * b - b * a; }

}  // namespace

double shc(const Hierarchy& h, const HierarchyState& s, std::size_t k, double t) {
  check_bath(h, k);
  const Matrix a = h.model().a_operator(k, t);
  const Matrix& v = h.model().coupling(k);
  cplx q = -trace_product(a, first_tier_sum(h, s, k, false));
  const double delta = h.baths()[k].delta_weight();
  if (delta != 0.0) q += kI * delta * trace_product(comm(a, v), s.ado(0));
  return q.real();
}

double bhc(const Hierarchy& h, const HierarchyState& s, std::size_t k, double t) {
  check_bath(h, k);
  const auto& model = h.model();
  const Matrix& v = model.coupling(k);
  const Matrix rho = s.ado(0);
  const double delta = h.baths()[k].delta_weight();

  cplx q = -trace_product(v, first_tier_sum(h, s, k, true));
  q += 2.0 * h.baths()[k].c_imag_at_zero() * trace_product(v * v, rho);
  if (delta != 0.0) {
    const Matrix a = model.a_operator(k, t);
    q += kI * delta * trace_product(comm(a, v), rho);
    for (std::size_t kp = 0; kp < h.baths().size(); ++kp) {
      if (kp == k) continue;
      const Matrix b = model.b_operator(k, kp);
      q -= delta * trace_product(b, first_tier_sum(h, s, kp, false));
      const double delta_p = h.baths()[kp].delta_weight();
      if (delta_p != 0.0)
        q += kI * delta * delta_p * trace_product(comm(b, model.coupling(kp)), rho);
    }
  }
  return q.real();
}

double interaction_energy(const Hierarchy& h, const HierarchyState& s, std::size_t k) {
  check_bath(h, k);
  return trace_product(h.model().coupling(k), first_tier_sum(h, s, k, false)).real();
}

double power(const Hierarchy& h, const HierarchyState& s, double t) {
  if (!h.model().driven()) return 0.0;
  return trace_product(h.model().power_operator(t), s.ado(0)).real();
}

double system_energy(const Hierarchy& h, const HierarchyState& s, double t) {
  return trace_product(h.model().hamiltonian_at(t), s.ado(0)).real();
}

CurrentRecord evaluate_record(const Hierarchy& h, const HierarchyState& s, double t) {
  CurrentRecord r;
  r.t = t;
  r.rho = s.rho();
  r.system_energy = system_energy(h, s, t);
  r.power = power(h, s, t);
  const HierarchyState ds = h.rhs(s, t);
  r.system_energy_rate = trace_product(h.model().hamiltonian_at(t), ds.ado(0)).real() + r.power;
  const std::size_t nb = h.baths().size();
  for (std::size_t k = 0; k < nb; ++k) {
    r.q_s.push_back(shc(h, s, k, t));
    r.q_b.push_back(bhc(h, s, k, t));
    r.h_int.push_back(interaction_energy(h, s, k));
    r.h_int_rate.push_back(interaction_energy(h, ds, k));
  }
  r.casbi.assign(nb, 0.0);
  return r;
}

std::vector<double> pack(const CurrentRecord& r) {
  std::vector<double> v;
  v.push_back(r.system_energy);
  v.push_back(r.power);
  v.insert(v.end(), r.q_s.begin(), r.q_s.end());
  v.insert(v.end(), r.q_b.begin(), r.q_b.end());
  v.insert(v.end(), r.h_int.begin(), r.h_int.end());
  v.push_back(r.system_energy_rate);
  v.insert(v.end(), r.h_int_rate.begin(), r.h_int_rate.end());
  for (Eigen::Index j = 0; j < r.rho.cols(); ++j)
    for (Eigen::Index i = 0; i < r.rho.rows(); ++i) {
      v.push_back(r.rho(i, j).real());
      v.push_back(r.rho(i, j).imag());
    }
  return v;
}

CurrentRecord unpack(std::span<const double> v, double t, std::size_t baths, int dim) {
  const std::size_t need = 3 + 4 * baths + 2 * static_cast<std::size_t>(dim) * dim;
  if (v.size() != need) throw InvalidArgument("packed record has wrong length");
  CurrentRecord r;
  r.t = t;
  std::size_t p = 0;
  r.system_energy = v[p++];
  r.power = v[p++];
  r.q_s.assign(v.begin() + p, v.begin() + p + baths);
  p += baths;
  r.q_b.assign(v.begin() + p, v.begin() + p + baths);
  p += baths;
  r.h_int.assign(v.begin() + p, v.begin() + p + baths);
  p += baths;
  r.system_energy_rate = v[p++];
  r.h_int_rate.assign(v.begin() + p, v.begin() + p + baths);
  p += baths;
  r.rho.resize(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) {
      r.rho(i, j) = cplx(v[p], v[p + 1]);
      p += 2;
    }
  r.casbi.assign(baths, 0.0);
  return r;
}

Observable record_observable(const Hierarchy& h) {
  return [&h](const HierarchyState& s, double t) { return pack(evaluate_record(h, s, t)); };
}

void finalize(Trajectory& traj) {
  for (auto& r : traj.records) {
    const std::size_t nb = r.q_b.size();
    if (r.h_int_rate.size() != nb) throw InvalidArgument("record lacks interaction-energy rates");
    double balance = r.power - r.system_energy_rate;
    r.casbi.assign(nb, 0.0);
    for (std::size_t k = 0; k < nb; ++k) {
      r.casbi[k] = r.q_b[k] - r.q_s[k] - r.h_int_rate[k];
      balance += r.q_b[k] - r.h_int_rate[k];
    }
    r.first_law_residual = std::abs(balance);
  }
}

double energy_flow_scale(const Trajectory& traj) {
  double s = 0.0;
  for (const auto& r : traj.records) {
    s = std::max({s, std::abs(r.power), std::abs(r.system_energy_rate)});
    for (std::size_t k = 0; k < r.q_b.size(); ++k)
      s = std::max({s, std::abs(r.q_s[k]), std::abs(r.q_b[k])});
    for (double v : r.h_int_rate) s = std::max(s, std::abs(v));
  }
  return s;
}

double max_first_law_residual(const Trajectory& traj) {
  double m = 0.0;
  for (const auto& r : traj.records) m = std::max(m, r.first_law_residual);
  return m;
}

CycleIntegrals cycle_average(const Trajectory& traj) {
  if (traj.kind != TrajectoryKind::Periodic || !(traj.period > 0.0))
    throw InvalidArgument("cycle integrals require a periodic steady-state trajectory");
  const auto& rs = traj.records;
  if (rs.size() < 2) throw InvalidArgument("periodic trajectory has too few samples");
  // Samples cover [t0, t0 + T) uniformly; the periodic trapezoid rule closes
  // the cycle with the first sample.
  const double w = traj.period / static_cast<double>(rs.size());
  CycleIntegrals c;
  const std::size_t nb = rs[0].q_b.size();
  c.q_s.assign(nb, 0.0);
  c.q_b.assign(nb, 0.0);
  for (const auto& r : rs) {
    c.work += w * r.power;
    for (std::size_t k = 0; k < nb; ++k) {
      c.q_s[k] += w * r.q_s[k];
      c.q_b[k] += w * r.q_b[k];
    }
  }
  return c;
}

Efficiencies efficiencies(const CycleIntegrals& c) {
  Efficiencies e;
  if (c.q_s.empty() || c.q_b.empty()) return e;
  if (std::abs(c.q_s[0]) >= kEfficiencyGuard) e.system = -c.work / c.q_s[0];
  if (std::abs(c.q_b[0]) >= kEfficiencyGuard) e.bath = -c.work / c.q_b[0];
  return e;
}

ClausiusCheck second_law_check(std::span<const double> heat, std::span<const double> temperatures,
                               double tol) {
  if (heat.size() != temperatures.size())
    throw InvalidArgument("one temperature per heat value required");
  ClausiusCheck c;
  for (std::size_t k = 0; k < heat.size(); ++k) {
    if (!(temperatures[k] > 0.0)) throw InvalidArgument("temperatures must be positive");
    c.value -= heat[k] / temperatures[k];
  }
  c.passed = c.value >= -tol;
  return c;
}

}  // namespace heom
