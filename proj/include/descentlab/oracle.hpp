#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "descentlab/common.hpp"
#include "descentlab/dataset.hpp"

namespace descentlab {

// Affine description of the interpolating set {w : Phi w = z}: a particular
// solution plus an orthonormal basis of the null space. dim = M - rank(Phi).
struct SolutionSetDescription {
  Vector particular;
  Matrix nullspace_basis;  // M x (M - rank), orthonormal columns
  Index dim = 0;
};

// Throws Infeasible when z is not in the range of Phi (only possible when
// rank < N).
SolutionSetDescription solution_set(const Matrix& Phi, const Vector& z);

struct GdResult {
  Vector w;
  bool converged = false;
  Index steps = 0;
  double grad_norm = 0.0;
};

// Plain gradient descent on ||Phi w - z||^2 + lambda ||w - p||^2, run until
// the gradient norm falls below 1e-10 or the step cap. The step size must be
// below 1/L with L = 2 (sigma_max(Phi)^2 + lambda); 0 picks 0.9/L, with
// sigma_max estimated by power iteration so the oracle never touches the
// solver's factorizations. Non-convergence is reported via the flag, not an
// exception; w is the best iterate seen.
GdResult gd_minimize_eq2(const Matrix& Phi, const Vector& z, double lambda,
                         const Vector& p, Index max_steps = 2000000,
                         double step_size = 0.0);

// Minimum-norm solution norms across a nested feature-map family: for each D
// in D_list (strictly increasing), build the map from the same seed,
// transform the dataset's train rows (all rows when the split is empty) and
// record ||W||_F of the min-norm solve. lambda > 0 switches to the anchored
// ridge with a zero anchor.
std::vector<double> nested_norm_curve(std::uint64_t seed, const Dataset& ds,
                                      const std::vector<Index>& D_list,
                                      double lambda = 0.0);

// Runs every oracle validation (solution-set geometry, min-norm optimality,
// gradient-descent equivalence, nested norm monotonicity, solver limit
// behavior), printing one line per check. Returns the number of failures.
int run_oracle_suite(std::uint64_t seed, std::ostream& out);

}  // namespace descentlab
