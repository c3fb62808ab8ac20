#pragma once

// Restarted GMRES with right preconditioning on flat complex vectors.

#include <functional>
#include <vector>

#include "heom/system.hpp"

namespace heom::detail {

using CVec = std::vector<cplx>;
/// out = A x (out is pre-sized).
using LinearMap = std::function<void(const CVec& x, CVec& out)>;

struct GmresOptions {
  double tol = 1e-13;  // absolute residual target
  /// Krylov basis length; halved after a cycle that fails to reduce the
  /// true residual.
  int restart = 30;
  int max_iterations = 3000;
  double max_basis_bytes = double(std::size_t{1} << 30);
};

struct GmresResult {
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  double residual = 0.0;
};

/// Solves A x = b starting from x. `precond` may be empty.
GmresResult gmres(const LinearMap& a, const LinearMap& precond, const CVec& b, CVec& x,
                  const GmresOptions& opt);

}  // namespace heom::detail
