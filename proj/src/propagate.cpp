#include <algorithm>
#include <cmath>
#include <sstream>

#include "heom/hierarchy.hpp"

namespace heom {

namespace {

double norm2(std::span<const cplx> v) {
  long double s = 0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(static_cast<double>(s));
}

double diff_norm2(std::span<const cplx> a, std::span<const cplx> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(static_cast<double>(s));
}

/// Reduced-rank extrapolation over iterates x_0..x_k of a linear fixed-point
/// map. Coefficients are real and sum to one, so the trace of the top block
/// and its Hermiticity carry over from the iterates.
bool rre_combine(const std::vector<std::vector<cplx>>& xs, std::vector<cplx>& out) {
  const int k = static_cast<int>(xs.size()) - 1;
  if (k < 2) return false;
  const std::size_t n = xs[0].size();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      long double s = 0;
      for (std::size_t q = 0; q < n; ++q) {
        const cplx a = xs[i + 1][q] - xs[i][q];
        const cplx b = xs[j + 1][q] - xs[j][q];
        s += a.real() * b.real() + a.imag() * b.imag();
      }
      gram(i, j) = gram(j, i) = static_cast<double>(s);
    }
  }
  const double scale = gram.diagonal().maxCoeff();
  if (!(scale > 0.0)) return false;
  gram /= scale;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  cod.setThreshold(1e-13);
  Eigen::VectorXd y = cod.solve(ones);
  const double sum = y.sum();
  if (!std::isfinite(sum) || std::abs(sum) < 1e-300) return false;
  y /= sum;
  out.assign(n, cplx{0.0, 0.0});
  for (int i = 0; i < k; ++i) {
    const double w = y(i);
    for (std::size_t q = 0; q < n; ++q) out[q] += w * xs[i][q];
  }
  return std::all_of(out.begin(), out.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

double observable_drift(const std::vector<double>& now, const std::vector<double>& before,
                        double floor) {
  if (now.size() != before.size()) return std::numeric_limits<double>::infinity();
  // Components far below the largest one are judged against it, otherwise
  // round-off in near-zero entries reads as drift.
  double largest = 0.0;
  for (double v : now) largest = std::max(largest, std::abs(v));
  floor = std::max(floor, 1e-4 * largest);
  double worst = 0.0;
  for (std::size_t i = 0; i < now.size(); ++i) {
    const double scale = std::max({std::abs(now[i]), std::abs(before[i]), floor});
    worst = std::max(worst, std::abs(now[i] - before[i]) / scale);
  }
  return worst;
}

/// Caps the number of stored iterates so the extrapolation history stays
/// within roughly 1 GiB.
int history_depth(const HierarchyState& s, int requested) {
  const double bytes = static_cast<double>(s.data().size()) * sizeof(cplx);
  const int fit = static_cast<int>(std::floor((1 << 30) / std::max(bytes, 1.0))) - 1;
  return std::clamp(std::min(requested, fit), 0, 64);
}

void track_defects(const HierarchyState& s, double& trace, double& herm) {
  trace = std::max(trace, s.trace_defect());
  herm = std::max(herm, s.hermiticity_defect());
}

}  // namespace

SteadyResult propagate_to_steady(const Hierarchy& h, HierarchyState state,
                                 const SteadyOptions& opt, const Observable& obs) {
  if (h.model().driven())
    throw InvalidArgument("steady-state propagation requires an undriven model");
  if (!(opt.dt > 0.0) || !(opt.window > 0.0) || !(opt.tol > 0.0))
    throw InvalidArgument("steady-state options must be positive");

  const long steps_per_window = std::max(1L, std::lround(opt.window / opt.dt));
  const double t0 = state.time();
  long steps = 0;
  Rk4Integrator rk(h);
  HierarchyState deriv(h.table_ptr(), h.model().dim());

  SteadyResult res{state};
  if (opt.direct) {
    HierarchyState trial = state;
    res.direct = solve_stationary(h, trial);
    if (res.direct.converged) state = std::move(trial);
  }
  auto full_residual = [&](const HierarchyState& s) {
    h.rhs(s, s.time(), deriv.data());
    return norm2(deriv.data());
  };
  auto top_residual = [&](const HierarchyState& s) {
    h.rhs(s, s.time(), deriv.data());
    return deriv.rho().norm() / std::max(s.rho().norm(), 1e-300);
  };

  int depth = opt.accelerate ? history_depth(state, opt.accel_depth) : 0;
  std::vector<std::vector<cplx>> history;
  std::vector<double> prev = obs(state, state.time());
  int accel_failures = 0;

  // A converged direct solution only needs a short confirming window.
  bool verifying = res.direct.converged;
  while (true) {
    const long n_steps =
        verifying ? std::max(1L, std::lround(opt.verify_window / opt.dt)) : steps_per_window;
    verifying = false;
    for (long i = 0; i < n_steps; ++i) {
      rk.step(state, opt.dt);
      ++steps;
      state.set_time(t0 + steps * opt.dt);
    }
    track_defects(state, res.max_trace_defect, res.max_hermiticity_defect);
    const double r = top_residual(state);
    std::vector<double> now = obs(state, state.time());
    const double drift = observable_drift(now, prev, opt.observable_floor);
    res.history.push_back({state.time() - t0, r, drift});
    prev = now;
    if (r < opt.tol && drift < opt.tol) {
      res.derivative_residual = r;
      res.observable_drift = drift;
      res.observables = std::move(now);
      res.elapsed = state.time() - t0;
      res.state = std::move(state);
      return res;
    }
    if (state.time() - t0 >= opt.t_max) {
      std::ostringstream os;
      os << "steady state not reached by t = " << opt.t_max << " (derivative residual " << r
         << ", observable drift " << drift << ", tol " << opt.tol << ")";
      throw ConvergenceError(os.str());
    }
    if (depth >= 2) {
      history.emplace_back(state.data().begin(), state.data().end());
      if (static_cast<int>(history.size()) > depth) {
        std::vector<cplx> guess;
        if (rre_combine(history, guess)) {
          const double before = full_residual(state);
          HierarchyState trial = state;
          std::copy(guess.begin(), guess.end(), trial.data().begin());
          if (full_residual(trial) < before) {
            state = std::move(trial);
            prev = obs(state, state.time());
            accel_failures = 0;
          } else if (++accel_failures >= 3) {
            depth = 0;
          }
        }
        history.clear();
      }
    }
  }
}

PeriodicResult propagate_periodic(const Hierarchy& h, HierarchyState state,
                                  const PeriodicOptions& opt, const Observable& obs) {
  const double period = h.model().period();
  if (!(period > 0.0)) throw InvalidArgument("periodic propagation requires a drive frequency");
  if (!(opt.dt > 0.0) || opt.samples_per_cycle < 1 || !(opt.tol > 0.0))
    throw InvalidArgument("periodic options must be positive");

  const long min_steps = static_cast<long>(std::ceil(period / opt.dt - 1e-9));
  const long per_sample = std::max(1L, (min_steps + opt.samples_per_cycle - 1) / opt.samples_per_cycle);
  const long steps_per_cycle = per_sample * opt.samples_per_cycle;
  const double dt = period / static_cast<double>(steps_per_cycle);

  PeriodicResult res{state};
  res.period = period;
  res.dt = dt;
  res.steps_per_cycle = static_cast<int>(steps_per_cycle);
  if (opt.direct) {
    HierarchyState trial = state;
    StationaryOptions so;
    so.tol = 1e-12;
    so.restart = 120;
    so.max_iterations = 400;
    res.direct = solve_periodic_fixed_point(h, trial, steps_per_cycle, dt, so);
    if (res.direct.converged) state = std::move(trial);
  }

  Rk4Integrator rk(h);
  const double t0 = state.time();
  long cycle = 0;
  int depth = opt.accelerate ? history_depth(state, opt.accel_depth) : 0;
  std::vector<std::vector<cplx>> history;
  std::vector<double> prev_avg;
  bool have_prev = false;
  double prev_map_residual = std::numeric_limits<double>::infinity();
  std::vector<cplx> rollback;
  bool pending_check = false;
  int accel_failures = 0;

  std::vector<double> times(opt.samples_per_cycle);
  std::vector<std::vector<double>> samples(opt.samples_per_cycle);

  while (true) {
    const double tc = t0 + cycle * period;
    const std::vector<cplx> start(state.data().begin(), state.data().end());
    const Matrix rho_start = state.rho();
    std::vector<double> avg;
    for (int s = 0; s < opt.samples_per_cycle; ++s) {
      const double ts = tc + period * s / opt.samples_per_cycle;
      state.set_time(ts);
      times[s] = ts;
      samples[s] = obs(state, ts);
      if (avg.empty()) avg.assign(samples[s].size(), 0.0);
      for (std::size_t q = 0; q < avg.size() && q < samples[s].size(); ++q) avg[q] += samples[s][q];
      for (long i = 0; i < per_sample; ++i) {
        rk.step(state, dt);
        state.set_time(ts + (i + 1) * dt);
      }
    }
    ++cycle;
    state.set_time(t0 + cycle * period);
    for (double& a : avg) a /= opt.samples_per_cycle;
    track_defects(state, res.max_trace_defect, res.max_hermiticity_defect);

    const double map_residual = diff_norm2(state.data(), start);
    const double rho_change = (state.rho() - rho_start).cwiseAbs().maxCoeff();
    const double drift =
        have_prev ? observable_drift(avg, prev_avg, opt.observable_floor) : std::numeric_limits<double>::infinity();
    res.drift_history.push_back(std::max(drift, rho_change));
    prev_avg = avg;
    have_prev = true;

    if (drift < opt.tol && rho_change < opt.tol) {
      res.cycles = static_cast<int>(cycle);
      res.times = times;
      res.samples = samples;
      res.state = std::move(state);
      return res;
    }
    if (cycle >= opt.max_cycles) {
      std::ostringstream os;
      os << "periodic steady state not reached after " << cycle << " cycles (drift " << drift
         << ", boundary change " << rho_change << ", tol " << opt.tol << ")";
      throw ConvergenceError(os.str());
    }

    if (pending_check) {
      pending_check = false;
      // The cycle started from an extrapolated state: keep it only if it
      // brought the period map closer to its fixed point.
      if (map_residual >= prev_map_residual) {
        std::copy(rollback.begin(), rollback.end(), state.data().begin());
        have_prev = false;
        if (++accel_failures >= 3) depth = 0;
      } else {
        accel_failures = 0;
      }
      history.clear();
    }
    prev_map_residual = map_residual;

    if (depth >= 2) {
      history.emplace_back(state.data().begin(), state.data().end());
      if (static_cast<int>(history.size()) > depth) {
        std::vector<cplx> guess;
        if (rre_combine(history, guess)) {
          rollback.assign(state.data().begin(), state.data().end());
          std::copy(guess.begin(), guess.end(), state.data().begin());
          pending_check = true;
          have_prev = false;
        }
        history.clear();
      }
    }
  }
}

TransientResult propagate_transient(const Hierarchy& h, HierarchyState state, double dt,
                                    double t_end, int sample_every, const Observable& obs) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (sample_every < 1) sample_every = 1;
  const double t0 = state.time();
  const long steps = std::max(0L, std::lround((t_end - t0) / dt));
  Rk4Integrator rk(h);
  TransientResult res{state};
  for (long i = 0; i <= steps; ++i) {
    if (i % sample_every == 0 || i == steps) {
      res.times.push_back(state.time());
      res.samples.push_back(obs(state, state.time()));
      track_defects(state, res.max_trace_defect, res.max_hermiticity_defect);
    }
    if (i == steps) break;
    rk.step(state, dt);
    state.set_time(t0 + (i + 1) * dt);
  }
  res.state = std::move(state);
  return res;
}

}  // namespace heom
