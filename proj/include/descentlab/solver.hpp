#pragma once

#include <cstdint>

#include "descentlab/common.hpp"

namespace descentlab {

// One anchored least-squares instance: squared error over N rows plus
// lambda * ||W - anchor||_F^2. An empty anchor means the zero anchor.
struct RidgeProblem {
  Matrix features;  // Phi, N x M
  Matrix targets;   // Z,   N x K
  double lambda = 0.0;
  Matrix anchor;  // M x K, empty => zero

  // Norm of the first anchor column (columns produced by sample_anchor all
  // share it); 0 for an empty anchor.
  double anchor_norm() const {
    return anchor.size() == 0 ? 0.0 : anchor.col(0).norm();
  }
};

struct SolveResult {
  Matrix weights;  // W, M x K
  double train_mse = 0.0;
  double weight_l2 = 0.0;      // Frobenius norm of W
  Vector per_output_norms;     // K column norms
  double residual_norm = 0.0;  // normal-equations residual, Frobenius
  Index rank = 0;              // numerical rank of Phi
};

// Closed-form solve of (Phi^T Phi + lambda I) W = Phi^T Z + lambda * anchor
// via Cholesky, using the algebraically identical dual form when M > 2N.
// lambda = 0 is routed to min_norm_solve. Throws SingularSystem when the
// normal-equations residual cannot be brought under
// 1e-8 * (1 + ||Phi^T Z||_F).
SolveResult anchored_ridge_solve(const RidgeProblem& prob);

// Pseudoinverse solution via SVD with singular-value cutoff
// eps * max(N, M) * sigma_max: the least-Frobenius-norm interpolator when
// rank(Phi) = N <= M, the unique least-squares solution when N > M.
SolveResult min_norm_solve(const Matrix& Phi, const Matrix& Z);

// Each column is an independent uniform draw on the radius-R sphere in M
// dimensions; R = 0 gives the zero matrix.
Matrix sample_anchor(std::uint64_t seed, Index M, Index K, double R);

struct EvalMetrics {
  double mse = 0.0;
  double error_rate = 0.0;
};

// mse averaged over rows * outputs; error rate from argmax predictions with
// ties broken toward the lowest class index.
EvalMetrics evaluate(const Matrix& W, const Matrix& Phi_eval,
                     const Matrix& Z_eval, const IntVector& labels_eval);

// Numerical rank of Phi under the solver's SVD cutoff rule.
Index numerical_rank(const Matrix& Phi);

}  // namespace descentlab
