#pragma once

// Driven finite-dimensional system, its bath coupling operators and the
// superoperator algebra used by the hierarchy and the current estimators.

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "heom/bath.hpp"

namespace heom {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline constexpr cplx kI{0.0, 1.0};

/// Single-tone drive g (e^{-i Omega t} pattern + h.c.).
struct Drive {
  double amplitude = 0.0;
  double frequency = 0.0;
  Matrix pattern;
};

class SystemModel {
 public:
  SystemModel(Matrix h_static, std::vector<Matrix> couplings,
              std::optional<Drive> drive = std::nullopt);

  int dim() const { return static_cast<int>(h_static_.rows()); }
  std::size_t num_baths() const { return couplings_.size(); }
  const Matrix& h_static() const { return h_static_; }
  const Matrix& coupling(std::size_t k) const;
  const std::vector<Matrix>& couplings() const { return couplings_; }
  const std::optional<Drive>& drive() const { return drive_; }
  bool driven() const { return drive_.has_value() && drive_->amplitude != 0.0; }
  /// Drive period 2 pi / Omega (defined even at zero amplitude), or 0 without
  /// a drive descriptor.
  double period() const;

  Matrix hamiltonian_at(double t) const;
  /// dH_S/dt, differentiated analytically.
  Matrix power_operator(double t) const;
  /// A_k(t) = i [H_S(t), V_k].
  Matrix a_operator(std::size_t k, double t) const;
  /// B_{k,k'} = -[[V_k, V_k'], V_k]; throws when k == kp.
  Matrix b_operator(std::size_t k, std::size_t kp) const;

 private:
  Matrix h_static_;
  std::vector<Matrix> couplings_;
  std::optional<Drive> drive_;
};

double hermiticity_defect(const Matrix& m);

/// Linear map on d x d matrices built from left/right multiplication,
/// scaled (anti)commutators, sums and compositions.
class SuperOp {
 public:
  enum class Kind { Left, Right, Commutator, Anticommutator, Sum, Composite };

  static SuperOp left(Matrix a, cplx scale = 1.0);
  static SuperOp right(Matrix a, cplx scale = 1.0);
  static SuperOp commutator(Matrix a, cplx scale = 1.0);
  static SuperOp anticommutator(Matrix a, cplx scale = 1.0);
  static SuperOp sum(std::vector<SuperOp> terms);
  /// outer(inner(x)).
  static SuperOp compose(SuperOp outer, SuperOp inner);

  Kind kind() const { return kind_; }
  SuperOp scaled(cplx s) const;
  Matrix apply(const Matrix& x) const;

 private:
  Kind kind_ = Kind::Left;
  Matrix op_;
  cplx scale_ = 1.0;
  std::vector<SuperOp> children_;
};

/// Phi_k X = i [V_k, X].
SuperOp phi(const SystemModel& model, std::size_t k);
/// Psi_k X = {V_k, X}.
SuperOp psi(const SystemModel& model, std::size_t k);
/// Theta_{k_j} = c'_j Phi_k - c''_j Psi_k.
SuperOp theta(const SystemModel& model, std::size_t k, const ExpTerm& term);
/// L(t) X = [H_S(t), X].
SuperOp liouvillian(const SystemModel& model, double t);

Matrix apply_phi(const SystemModel& model, std::size_t k, const Matrix& x);
Matrix apply_psi(const SystemModel& model, std::size_t k, const Matrix& x);
Matrix apply_theta(const SystemModel& model, std::span<const NoiseDecomposition> baths,
                   std::size_t k, std::size_t j, const Matrix& x);

}  // namespace heom
