#include "heom/hierarchy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <type_traits>

#include <unsupported/Eigen/KroneckerProduct>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace heom {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > kSaturated) return kSaturated;
  }
  return static_cast<std::uint64_t>(r);
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return (a > kSaturated - b) ? kSaturated : a + b;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

}  // namespace

std::uint64_t simplex_count(int modes, int depth) {
  if (modes < 0 || depth < 0) throw InvalidArgument("simplex_count: negative argument");
  return binom(static_cast<std::uint64_t>(modes) + depth, static_cast<std::uint64_t>(depth));
}

std::uint64_t simplex_rank(std::span<const int> n) {
  const int m = static_cast<int>(n.size());
  if (m == 0) return 0;
  std::uint64_t s = 0;
  for (int v : n) {
    if (v < 0) throw InvalidArgument("simplex_rank: negative index entry");
    s += static_cast<std::uint64_t>(v);
  }
  std::uint64_t rank = s == 0 ? 0 : binom(m + s - 1, m);
  std::uint64_t r = s;
  for (int i = 0; i + 1 < m; ++i) {
    const std::uint64_t rest = static_cast<std::uint64_t>(m - i - 1);
    const auto ni = static_cast<std::uint64_t>(n[i]);
    if (r > ni) rank += binom(r - ni - 1 + rest, rest);
    r -= ni;
  }
  return rank;
}

std::vector<int> simplex_unrank(std::uint64_t rank, int modes) {
  if (modes <= 0) throw InvalidArgument("simplex_unrank: modes must be positive");
  std::uint64_t s = 0;
  while (binom(modes + s, modes) <= rank) ++s;
  std::uint64_t rem = rank - (s == 0 ? 0 : binom(modes + s - 1, modes));
  std::vector<int> n(modes, 0);
  std::uint64_t r = s;
  for (int i = 0; i + 1 < modes; ++i) {
    const std::uint64_t rest = static_cast<std::uint64_t>(modes - i - 1);
    // Entries with first value v (descending) each own C(r - v + rest - 1, rest - 1) indices.
    std::uint64_t v = r;
    for (;; --v) {
      const std::uint64_t block = binom(r - v + rest - 1, rest - 1);
      if (rem < block) break;
      rem -= block;
    }
    n[i] = static_cast<int>(v);
    r -= v;
  }
  n[modes - 1] = static_cast<int>(r);
  return n;
}

// ---------------------------------------------------------------------------
// AdoTable

AdoTable::AdoTable(std::vector<int> modes_per_bath, int depth, std::vector<int> bath_depth_caps,
                   TableLimits limits)
    : modes_per_bath_(std::move(modes_per_bath)), caps_(std::move(bath_depth_caps)), depth_(depth) {
  if (depth < 0) throw InvalidArgument("hierarchy depth must be >= 0");
  if (modes_per_bath_.empty()) throw InvalidArgument("hierarchy needs at least one bath");
  if (!caps_.empty() && caps_.size() != modes_per_bath_.size())
    throw InvalidArgument("one depth cap per bath required");
  if (depth > std::numeric_limits<std::uint16_t>::max())
    throw InvalidArgument("hierarchy depth too large");
  for (std::size_t k = 0; k < modes_per_bath_.size(); ++k) {
    if (modes_per_bath_[k] < 1) throw InvalidArgument("each bath needs at least one mode");
    first_mode_.push_back(modes_);
    for (int j = 0; j < modes_per_bath_[k]; ++j) bath_of_mode_.push_back(static_cast<int>(k));
    modes_ += modes_per_bath_[k];
  }
  if (caps_.empty()) caps_.assign(modes_per_bath_.size(), -1);
  for (int& c : caps_) {
    if (c < 0 || c >= depth_) c = -1;
    if (c >= 0) capped_ = true;
  }

  // Count the admissible set first: per total order s, convolve per-bath counts.
  std::vector<std::uint64_t> by_order(depth_ + 1, 0);
  by_order[0] = 1;
  for (std::size_t k = 0; k < modes_per_bath_.size(); ++k) {
    const int cap = caps_[k] < 0 ? depth_ : caps_[k];
    std::vector<std::uint64_t> next(depth_ + 1, 0);
    for (int s = 0; s <= depth_; ++s) {
      if (by_order[s] == 0) continue;
      for (int a = 0; a <= cap && s + a <= depth_; ++a) {
        const std::uint64_t f = binom(a + modes_per_bath_[k] - 1, modes_per_bath_[k] - 1);
        next[s + a] = sat_add(next[s + a], sat_mul(by_order[s], f));
      }
    }
    by_order.swap(next);
  }
  std::uint64_t total = 0;
  for (auto c : by_order) total = sat_add(total, c);

  const std::uint64_t per_ado_bytes =
      static_cast<std::uint64_t>(limits.dim) * limits.dim * sizeof(cplx) * 4 +
      static_cast<std::uint64_t>(modes_) * (2 * sizeof(std::size_t) + sizeof(std::uint16_t));
  if (total > limits.max_ados || sat_mul(total, per_ado_bytes) > limits.max_bytes) {
    std::ostringstream os;
    os << "hierarchy needs " << total << " ADOs (about " << sat_mul(total, per_ado_bytes) / (1 << 20)
       << " MiB), above the configured cap";
    throw ResourceError(os.str());
  }
  count_ = static_cast<std::size_t>(total);

  indices_.reserve(count_ * modes_);
  orders_.reserve(count_);
  if (capped_) ranks_.reserve(count_);

  // Enumerate in graded descending-lex order, pruning per-bath caps.
  std::vector<int> n(modes_, 0);
  std::vector<int> bath_used(modes_per_bath_.size(), 0);
  auto emit = [&](int s) {
    for (int v : n) indices_.push_back(static_cast<std::uint16_t>(v));
    orders_.push_back(static_cast<std::uint16_t>(s));
    if (capped_) ranks_.push_back(simplex_rank(n));
  };
  auto fill = [&](auto&& self, int pos, int remaining, int s) -> void {
    const int k = bath_of_mode_[pos];
    const int cap = caps_[k] < 0 ? depth_ : caps_[k];
    const int room = cap - bath_used[k];
    if (pos == modes_ - 1) {
      if (remaining > room) return;
      n[pos] = remaining;
      emit(s);
      n[pos] = 0;
      return;
    }
    for (int v = std::min(remaining, room); v >= 0; --v) {
      n[pos] = v;
      bath_used[k] += v;
      self(self, pos + 1, remaining - v, s);
      bath_used[k] -= v;
    }
    n[pos] = 0;
  };
  for (int s = 0; s <= depth_; ++s) fill(fill, 0, s, s);
  if (orders_.size() != count_) throw Error("AdoTable: enumeration count mismatch");

  up_.assign(count_ * modes_, kNoAdo);
  down_.assign(count_ * modes_, kNoAdo);
  std::vector<int> work(modes_);
  for (std::size_t id = 0; id < count_; ++id) {
    const auto idx = index(id);
    for (int m = 0; m < modes_; ++m) work[m] = idx[m];
    for (int m = 0; m < modes_; ++m) {
      if (orders_[id] < depth_) {
        ++work[m];
        up_[id * modes_ + m] = id_of(work);
        --work[m];
      }
      if (work[m] > 0) {
        --work[m];
        down_[id * modes_ + m] = id_of(work);
        ++work[m];
      }
    }
  }
}

bool AdoTable::admissible(std::span<const int> n) const {
  if (static_cast<int>(n.size()) != modes_) return false;
  int total = 0;
  for (std::size_t k = 0; k < modes_per_bath_.size(); ++k) {
    int used = 0;
    for (int j = 0; j < modes_per_bath_[k]; ++j) {
      const int v = n[first_mode_[k] + j];
      if (v < 0) return false;
      used += v;
    }
    if (caps_[k] >= 0 && used > caps_[k]) return false;
    total += used;
  }
  return total <= depth_;
}

std::size_t AdoTable::id_of(std::span<const int> n) const {
  if (!admissible(n)) return kNoAdo;
  const std::uint64_t r = simplex_rank(n);
  if (!capped_) return static_cast<std::size_t>(r);
  const auto it = std::lower_bound(ranks_.begin(), ranks_.end(), r);
  if (it == ranks_.end() || *it != r) return kNoAdo;
  return static_cast<std::size_t>(it - ranks_.begin());
}

std::size_t AdoTable::first_tier(std::size_t bath, int term) const {
  if (bath >= modes_per_bath_.size() || term < 0 || term >= modes_per_bath_[bath])
    throw InvalidArgument("first_tier: index out of range");
  std::vector<int> n(modes_, 0);
  n[first_mode_[bath] + term] = 1;
  return id_of(n);
}

// ---------------------------------------------------------------------------
// HierarchyState

HierarchyState::HierarchyState(std::shared_ptr<const AdoTable> table, int dim, double time)
    : table_(std::move(table)), dim_(dim), time_(time) {
  if (!table_) throw InvalidArgument("HierarchyState needs a table");
  if (dim_ < 1) throw InvalidArgument("HierarchyState dimension must be >= 1");
  data_.assign(table_->size() * dim_ * dim_, cplx{0.0, 0.0});
}

double HierarchyState::trace_defect() const { return std::abs(rho().trace() - 1.0); }

double HierarchyState::hermiticity_defect() const { return heom::hermiticity_defect(rho()); }

// ---------------------------------------------------------------------------
// Hierarchy

namespace {

std::vector<int> modes_of(const std::vector<NoiseDecomposition>& baths) {
  std::vector<int> m;
  for (const auto& b : baths) m.push_back(static_cast<int>(b.size()));
  return m;
}

struct KernelCtx {
  const AdoTable* table;
  const std::vector<Matrix>* couplings;
  const ExpTerm* terms;
  const double* damping;
  const Matrix* local;  // dd x dd generator of the ADO-diagonal terms
  const cplx* in;
  cplx* out;
  int d;
};

// One sweep over [begin, end). The ADO-diagonal part (Liouvillian and delta
// terms) is a precomputed dd x dd matrix acting on vec(rho); the tier
// couplings of bath k reduce to V Y_L + Y_R V with Y_{L,R} = S2 -/+ i X, where
// X collects the upper neighbours plus n_j c'_j times the lower ones and S2
// the n_j c''_j lower terms. Matrices are column-major.
template <int D, bool RealV>
void rhs_range(const KernelCtx& c, std::size_t begin, std::size_t end) {
  const int d = D > 0 ? D : c.d;
  const int dd = d * d;
  const AdoTable& tab = *c.table;
  const std::size_t nbath = tab.num_baths();
  // Sparse form of the local generator; it is typically very sparse.
  struct Entry {
    int i, j;
    cplx v;
  };
  std::vector<Entry> local;
  for (int j = 0; j < dd; ++j)
    for (int i = 0; i < dd; ++i)
      if ((*c.local)(i, j) != 0.0) local.push_back({i, j, (*c.local)(i, j)});

  constexpr int kStack = D > 0 ? D * D : 1;
  std::array<cplx, kStack> xs{}, ss{}, yls{}, yrs{};
  std::vector<cplx> xh, sh, ylh, yrh;
  cplx *x = xs.data(), *s2 = ss.data(), *yl = yls.data(), *yr = yrs.data();
  if constexpr (D <= 0) {
    xh.resize(dd);
    sh.resize(dd);
    ylh.resize(dd);
    yrh.resize(dd);
    x = xh.data();
    s2 = sh.data();
    yl = ylh.data();
    yr = yrh.data();
  }

  std::vector<double> vr_all(nbath * dd);
  std::vector<cplx> vc_all(nbath * dd);
  std::vector<char> has_imag(nbath, 0);
  for (std::size_t k = 0; k < nbath; ++k) {
    const Matrix& v = (*c.couplings)[k];
    for (int q = 0; q < dd; ++q) {
      vr_all[k * dd + q] = v.data()[q].real();
      vc_all[k * dd + q] = v.data()[q];
    }
    for (int m = tab.first_mode(k); m < tab.first_mode(k) + tab.modes_per_bath()[k]; ++m)
      if (c.terms[m].c_imag != 0.0) has_imag[k] = 1;
  }

  for (std::size_t id = begin; id < end; ++id) {
    const cplx* rho = c.in + id * dd;
    cplx* o = c.out + id * dd;
    const double damp = c.damping[id];
    for (int i = 0; i < dd; ++i) o[i] = -damp * rho[i];
    for (const Entry& e : local) o[e.i] += e.v * rho[e.j];
    const auto idx = tab.index(id);
    const std::size_t* up = tab.up_row(id);
    const std::size_t* down = tab.down_row(id);
    for (std::size_t k = 0; k < nbath; ++k) {
      const int m0 = tab.first_mode(k);
      const int m1 = m0 + tab.modes_per_bath()[k];
      const bool imag = has_imag[k];
      bool any = false;
      for (int q = 0; q < dd; ++q) x[q] = s2[q] = 0.0;
      for (int m = m0; m < m1; ++m) {
        if (up[m] != kNoAdo) {
          const cplx* r = c.in + up[m] * dd;
          for (int q = 0; q < dd; ++q) x[q] += r[q];
          any = true;
        }
        const int nm = idx[m];
        if (nm > 0) {
          const cplx* r = c.in + down[m] * dd;
          const double cr = nm * c.terms[m].c_real;
          const double ci = nm * c.terms[m].c_imag;
          for (int q = 0; q < dd; ++q) x[q] += cr * r[q];
          if (ci != 0.0)
            for (int q = 0; q < dd; ++q) s2[q] += ci * r[q];
          any = true;
        }
      }
      if (!any) continue;
      for (int q = 0; q < dd; ++q) {
        const cplx ix(-x[q].imag(), x[q].real());
        yl[q] = imag ? s2[q] - ix : -ix;
        yr[q] = imag ? s2[q] + ix : ix;
      }
      // o += V yl + yr V
      const double* vr = vr_all.data() + k * dd;
      const cplx* vc = vc_all.data() + k * dd;
      for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) {
          cplx acc = 0.0;
          for (int l = 0; l < d; ++l) {
            if constexpr (RealV) {
              acc += vr[i + l * d] * yl[l + j * d];
              acc += yr[i + l * d] * vr[l + j * d];
            } else {
              acc += vc[i + l * d] * yl[l + j * d];
              acc += yr[i + l * d] * vc[l + j * d];
            }
          }
          o[i + j * d] += acc;
        }
      }
    }
  }
}

template <int D, bool RealV>
void rhs_all(const KernelCtx& c, int threads) {
  const std::size_t n = c.table->size();
#ifdef _OPENMP
  if (threads > 1 && n > 64) {
    const auto sn = static_cast<std::int64_t>(n);
#pragma omp parallel num_threads(threads)
    {
      const std::int64_t nt = omp_get_num_threads();
      const std::int64_t t = omp_get_thread_num();
      const std::int64_t b = sn * t / nt;
      const std::int64_t e = sn * (t + 1) / nt;
      rhs_range<D, RealV>(c, static_cast<std::size_t>(b), static_cast<std::size_t>(e));
    }
    return;
  }
#else
  (void)threads;
#endif
  rhs_range<D, RealV>(c, 0, n);
}

}  // namespace

Hierarchy::Hierarchy(SystemModel model, std::vector<NoiseDecomposition> baths,
                     std::shared_ptr<const AdoTable> table)
    : model_(std::move(model)), baths_(std::move(baths)), table_(std::move(table)) {
  init();
}

Hierarchy::Hierarchy(SystemModel model, std::vector<NoiseDecomposition> baths, int depth,
                     std::vector<int> bath_depth_caps, TableLimits limits)
    : model_(std::move(model)), baths_(std::move(baths)) {
  limits.dim = model_.dim();
  table_ = std::make_shared<const AdoTable>(modes_of(baths_), depth, std::move(bath_depth_caps),
                                            limits);
  init();
}

void Hierarchy::init() {
  if (!table_) throw InvalidArgument("Hierarchy needs a table");
  if (baths_.size() != model_.num_baths())
    throw InvalidArgument("number of bath decompositions does not match coupling operators");
  if (table_->num_baths() != baths_.size())
    throw InvalidArgument("ADO table bath count does not match decompositions");
  for (std::size_t k = 0; k < baths_.size(); ++k) {
    if (static_cast<int>(baths_[k].size()) != table_->modes_per_bath()[k])
      throw InvalidArgument("ADO table mode count does not match decomposition");
    for (const auto& t : baths_[k].terms()) mode_terms_.push_back(t);
  }
  damping_.resize(table_->size());
  for (std::size_t id = 0; id < table_->size(); ++id) {
    const auto idx = table_->index(id);
    double g = 0.0;
    for (int m = 0; m < table_->num_modes(); ++m) g += idx[m] * mode_terms_[m].rate;
    damping_[id] = g;
  }
}

HierarchyState Hierarchy::initial_state(const Matrix& rho0, double t) const {
  const int d = model_.dim();
  if (rho0.rows() != d || rho0.cols() != d) throw InvalidArgument("initial state has wrong shape");
  HierarchyState s(table_, d, t);
  s.ado(0) = rho0;
  return s;
}

void Hierarchy::rhs(const HierarchyState& state, double t, std::span<cplx> out) const {
  if (state.table_ptr() != table_ && state.num_ados() != table_->size())
    throw InvalidArgument("state does not belong to this hierarchy");
  if (out.size() != state.data().size()) throw InvalidArgument("rhs output has wrong size");
  const int d = model_.dim();
  const Matrix local = local_generator(t);
  bool real_v = true;
  for (const auto& v : model_.couplings()) real_v = real_v && v.imag().cwiseAbs().maxCoeff() == 0.0;

  KernelCtx c{table_.get(), &model_.couplings(), mode_terms_.data(), damping_.data(), &local,
              state.data().data(), out.data(), d};
  auto run = [&](auto dim_tag) {
    constexpr int D = decltype(dim_tag)::value;
    if (real_v)
      rhs_all<D, true>(c, threads_);
    else
      rhs_all<D, false>(c, threads_);
  };
  switch (d) {
    case 2: run(std::integral_constant<int, 2>{}); break;
    case 3: run(std::integral_constant<int, 3>{}); break;
    case 4: run(std::integral_constant<int, 4>{}); break;
    default: run(std::integral_constant<int, Eigen::Dynamic>{}); break;
  }
}

Matrix Hierarchy::local_generator(double t) const {
  const int d = model_.dim();
  const Matrix h = model_.hamiltonian_at(t);
  // vec(A X B) = (B^T kron A) vec(X), column-major.
  const Matrix id = Matrix::Identity(d, d);
  auto left = [&](const Matrix& a) { return Matrix(Eigen::kroneckerProduct(id, a)); };
  auto right = [&](const Matrix& b) { return Matrix(Eigen::kroneckerProduct(b.transpose(), id)); };
  Matrix local = -kI * (left(h) - right(h));
  for (std::size_t k = 0; k < baths_.size(); ++k) {
    const double delta = baths_[k].delta_weight();
    if (delta == 0.0) continue;
    const Matrix comm = left(model_.coupling(k)) - right(model_.coupling(k));
    local -= delta * (comm * comm);
  }
  return local;
}

HierarchyState Hierarchy::rhs(const HierarchyState& state, double t) const {
  HierarchyState out(table_, model_.dim(), t);
  rhs(state, t, out.data());
  return out;
}

double Hierarchy::stiffness_bound() const {
  auto opnorm = [](const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
  };
  double hnorm = opnorm(model_.h_static());
  if (model_.driven()) {
    const auto& dr = *model_.drive();
    hnorm += 2.0 * std::abs(dr.amplitude) * opnorm(dr.pattern);
  }
  std::vector<double> vnorm;
  for (const auto& v : model_.couplings()) vnorm.push_back(opnorm(v));
  double worst = 0.0;
  for (std::size_t id = 0; id < table_->size(); ++id) {
    const auto idx = table_->index(id);
    double b = damping_[id] + 2.0 * hnorm;
    for (int m = 0; m < table_->num_modes(); ++m) {
      const int k = table_->bath_of_mode(m);
      const double mag = std::abs(cplx(mode_terms_[m].c_real, mode_terms_[m].c_imag));
      // Symmetrized coupling strengths to the neighbouring tiers.
      b += 2.0 * vnorm[k] * (std::sqrt((idx[m] + 1) * mag) + std::sqrt(idx[m] * mag));
    }
    for (std::size_t k = 0; k < baths_.size(); ++k)
      b += 4.0 * baths_[k].delta_weight() * vnorm[k] * vnorm[k];
    worst = std::max(worst, b);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Rk4Integrator

Rk4Integrator::Rk4Integrator(const Hierarchy& hierarchy)
    : h_(hierarchy),
      stage_(hierarchy.table_ptr(), hierarchy.model().dim()),
      k_(hierarchy.table_ptr(), hierarchy.model().dim()),
      acc_(hierarchy.table_ptr(), hierarchy.model().dim()) {}

void Rk4Integrator::step(HierarchyState& state, double dt) {
  const double t = state.time();
  const std::size_t n = state.data().size();
  cplx* y = state.data().data();
  cplx* s = stage_.data().data();
  cplx* k = k_.data().data();
  cplx* a = acc_.data().data();

  h_.rhs(state, t, acc_.data());
  for (std::size_t i = 0; i < n; ++i) s[i] = y[i] + (0.5 * dt) * a[i];
  h_.rhs(stage_, t + 0.5 * dt, k_.data());
  for (std::size_t i = 0; i < n; ++i) {
    a[i] += 2.0 * k[i];
    s[i] = y[i] + (0.5 * dt) * k[i];
  }
  h_.rhs(stage_, t + 0.5 * dt, k_.data());
  for (std::size_t i = 0; i < n; ++i) {
    a[i] += 2.0 * k[i];
    s[i] = y[i] + dt * k[i];
  }
  h_.rhs(stage_, t + dt, k_.data());
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += (dt / 6.0) * (a[i] + k[i]);
    finite = finite && std::isfinite(y[i].real()) && std::isfinite(y[i].imag());
  }
  state.set_time(t + dt);
  if (!finite) {
    const std::size_t dd = static_cast<std::size_t>(state.dim()) * state.dim();
    std::size_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(y[i].real()) || !std::isfinite(y[i].imag())) {
        bad = i / dd;
        break;
      }
    }
    std::ostringstream os;
    os << "non-finite value in ADO " << bad << " at t = " << t + dt
       << " (step size " << dt << " may be too large)";
    throw NumericalError(os.str(), bad);
  }
}

}  // namespace heom
