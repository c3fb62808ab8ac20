#include "heom/system.hpp"

#include <cmath>
#include <sstream>

#include "heom/error.hpp"

namespace heom {

namespace {

void require_square(const Matrix& m, int dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) {
    std::ostringstream os;
    os << what << " must be " << dim << "x" << dim;
    throw InvalidArgument(os.str());
  }
}

void require_hermitian(const Matrix& m, const char* what) {
  if (hermiticity_defect(m) > 1e-12) throw InvalidArgument(std::string(what) + " is not Hermitian");
}

}  // namespace

double hermiticity_defect(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

SystemModel::SystemModel(Matrix h_static, std::vector<Matrix> couplings,
                         std::optional<Drive> drive)
    : h_static_(std::move(h_static)), couplings_(std::move(couplings)), drive_(std::move(drive)) {
  const int d = dim();
  if (d < 1) throw InvalidArgument("system dimension must be >= 1");
  require_square(h_static_, d, "h_static");
  require_hermitian(h_static_, "h_static");
  for (const auto& v : couplings_) {
    require_square(v, d, "coupling operator");
    require_hermitian(v, "coupling operator");
  }
  if (drive_) {
    require_square(drive_->pattern, d, "drive pattern");
    if (!std::isfinite(drive_->amplitude) || !std::isfinite(drive_->frequency))
      throw InvalidArgument("drive parameters must be finite");
    if (drive_->amplitude != 0.0 && !(drive_->frequency > 0.0))
      throw InvalidArgument("drive frequency must be > 0");
  }
}

const Matrix& SystemModel::coupling(std::size_t k) const {
  if (k >= couplings_.size()) throw InvalidArgument("bath index out of range");
  return couplings_[k];
}

double SystemModel::period() const {
  if (!drive_ || !(drive_->frequency > 0.0)) return 0.0;
  return 2.0 * M_PI / drive_->frequency;
}

Matrix SystemModel::hamiltonian_at(double t) const {
  if (!driven()) return h_static_;
  const cplx phase = std::exp(-kI * drive_->frequency * t);
  Matrix term = drive_->amplitude * phase * drive_->pattern;
  return h_static_ + term + term.adjoint();
}

Matrix SystemModel::power_operator(double t) const {
  if (!driven()) return Matrix::Zero(dim(), dim());
  const double w = drive_->frequency;
  Matrix term = drive_->amplitude * (-kI * w) * std::exp(-kI * w * t) * drive_->pattern;
  return term + term.adjoint();
}

Matrix SystemModel::a_operator(std::size_t k, double t) const {
  const Matrix h = hamiltonian_at(t);
  const Matrix& v = coupling(k);
  return kI * (h * v - v * h);
}

Matrix SystemModel::b_operator(std::size_t k, std::size_t kp) const {
  if (k == kp) throw InvalidArgument("b_operator requires two distinct baths");
  const Matrix& v = coupling(k);
  const Matrix& w = coupling(kp);
  const Matrix c = v * w - w * v;
  // (i)^2 [[V_k, V_k'], V_k]
  return -(c * v - v * c);
}

SuperOp SuperOp::left(Matrix a, cplx scale) {
  SuperOp s;
  s.kind_ = Kind::Left;
  s.op_ = std::move(a);
  s.scale_ = scale;
  return s;
}

SuperOp SuperOp::right(Matrix a, cplx scale) {
  SuperOp s = left(std::move(a), scale);
  s.kind_ = Kind::Right;
  return s;
}

SuperOp SuperOp::commutator(Matrix a, cplx scale) {
  SuperOp s = left(std::move(a), scale);
  s.kind_ = Kind::Commutator;
  return s;
}

SuperOp SuperOp::anticommutator(Matrix a, cplx scale) {
  SuperOp s = left(std::move(a), scale);
  s.kind_ = Kind::Anticommutator;
  return s;
}

SuperOp SuperOp::sum(std::vector<SuperOp> terms) {
  SuperOp s;
  s.kind_ = Kind::Sum;
  s.children_ = std::move(terms);
  return s;
}

SuperOp SuperOp::compose(SuperOp outer, SuperOp inner) {
  SuperOp s;
  s.kind_ = Kind::Composite;
  s.children_.push_back(std::move(outer));
  s.children_.push_back(std::move(inner));
  return s;
}

SuperOp SuperOp::scaled(cplx f) const {
  SuperOp s = *this;
  s.scale_ *= f;
  return s;
}

Matrix SuperOp::apply(const Matrix& x) const {
  switch (kind_) {
    case Kind::Left:
      return scale_ * (op_ * x);
    case Kind::Right:
      return scale_ * (x * op_);
    case Kind::Commutator:
      return scale_ * (op_ * x - x * op_);
    case Kind::Anticommutator:
      return scale_ * (op_ * x + x * op_);
    case Kind::Sum: {
      Matrix out = Matrix::Zero(x.rows(), x.cols());
      for (const auto& c : children_) out += c.apply(x);
      return scale_ * out;
    }
    case Kind::Composite:
      return scale_ * children_[0].apply(children_[1].apply(x));
  }
  return x;
}

SuperOp phi(const SystemModel& model, std::size_t k) {
  return SuperOp::commutator(model.coupling(k), kI);
}

SuperOp psi(const SystemModel& model, std::size_t k) {
  return SuperOp::anticommutator(model.coupling(k), 1.0);
}

SuperOp theta(const SystemModel& model, std::size_t k, const ExpTerm& term) {
  return SuperOp::sum({phi(model, k).scaled(term.c_real), psi(model, k).scaled(-term.c_imag)});
}

SuperOp liouvillian(const SystemModel& model, double t) {
  return SuperOp::commutator(model.hamiltonian_at(t), 1.0);
}

Matrix apply_phi(const SystemModel& model, std::size_t k, const Matrix& x) {
  return phi(model, k).apply(x);
}

Matrix apply_psi(const SystemModel& model, std::size_t k, const Matrix& x) {
  return psi(model, k).apply(x);
}

Matrix apply_theta(const SystemModel& model, std::span<const NoiseDecomposition> baths,
                   std::size_t k, std::size_t j, const Matrix& x) {
  if (k >= baths.size() || k >= model.num_baths()) throw InvalidArgument("bath index out of range");
  if (j >= baths[k].size()) throw InvalidArgument("decomposition term index out of range");
  return theta(model, k, baths[k].terms()[j]).apply(x);
}

}  // namespace heom
