#include "descentlab/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

#include "descentlab/rng.hpp"

namespace descentlab {

namespace {

constexpr std::uint64_t kTagAnchorCol = 0xa2c4021fu;

double svd_cutoff(const Vector& singular_values, Index rows, Index cols) {
  const double sigma_max =
      singular_values.size() == 0 ? 0.0 : singular_values[0];
  return std::numeric_limits<double>::epsilon() *
         static_cast<double>(std::max(rows, cols)) * sigma_max;
}

Index rank_from_singular_values(const Vector& sv, Index rows, Index cols) {
  const double cutoff = svd_cutoff(sv, rows, cols);
  Index r = 0;
  while (r < sv.size() && sv[r] > cutoff) ++r;
  return r;
}

void fill_norms(SolveResult& res, const Matrix& Phi, const Matrix& Z) {
  res.train_mse = mean_squared_error(Phi * res.weights, Z);
  res.weight_l2 = res.weights.norm();
  res.per_output_norms.resize(res.weights.cols());
  for (Index k = 0; k < res.weights.cols(); ++k)
    res.per_output_norms[k] = res.weights.col(k).norm();
}

}  // namespace

Index numerical_rank(const Matrix& Phi) {
  if (Phi.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(Phi);
  return rank_from_singular_values(svd.singularValues(), Phi.rows(),
                                   Phi.cols());
}

SolveResult anchored_ridge_solve(const RidgeProblem& prob) {
  const Matrix& Phi = prob.features;
  const Matrix& Z = prob.targets;
  const Index n = Phi.rows();
  const Index m = Phi.cols();
  const Index k = Z.cols();

  if (Z.rows() != n) {
    throw DimensionMismatch("anchored_ridge_solve: " + std::to_string(n) +
                            " feature rows vs " + std::to_string(Z.rows()) +
                            " target rows");
  }
  if (prob.anchor.size() != 0 &&
      (prob.anchor.rows() != m || prob.anchor.cols() != k)) {
    throw DimensionMismatch("anchored_ridge_solve: anchor is " +
                            std::to_string(prob.anchor.rows()) + "x" +
                            std::to_string(prob.anchor.cols()) + ", expected " +
                            std::to_string(m) + "x" + std::to_string(k));
  }
  if (prob.lambda < 0.0) throw Error("anchored_ridge_solve: lambda < 0");
  if (prob.lambda == 0.0) return min_norm_solve(Phi, Z);

  const double lambda = prob.lambda;
  const Matrix anchor =
      prob.anchor.size() == 0 ? Matrix::Zero(m, k) : prob.anchor;
  const Matrix rhs = Phi.transpose() * Z + lambda * anchor;  // M x K
  // The anchor term joins the scale: when lambda*||P|| dominates the data
  // term, an absolute bound on the data scale alone is below representable
  // precision.
  const double tol =
      1e-8 * (1.0 + (Phi.transpose() * Z).norm() + lambda * anchor.norm());

  Matrix W;
  // Normal-equations residual of the current W, reused by both routes.
  auto residual = [&](const Matrix& w) -> Matrix {
    return rhs - Phi.transpose() * (Phi * w) - lambda * w;
  };

  if (m <= 2 * n) {
    Matrix A = Phi.transpose() * Phi;
    A.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) {
      throw SingularSystem(
          "anchored_ridge_solve: Cholesky failed on the primal system "
          "(lambda=" +
          std::to_string(lambda) + ")");
    }
    W = llt.solve(rhs);
    // Iterative refinement keeps the residual under the contract even near
    // the interpolation threshold where Phi^T Phi is ill-conditioned.
    for (int pass = 0; pass < 3; ++pass) {
      const Matrix r = residual(W);
      if (r.norm() <= tol) break;
      W += llt.solve(r);
    }
  } else {
    // Dual form: W = anchor + Phi^T (Phi Phi^T + lambda I)^{-1} (Z - Phi*anchor).
    Matrix G = Phi * Phi.transpose();
    G.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) {
      throw SingularSystem(
          "anchored_ridge_solve: Cholesky failed on the dual system (lambda=" +
          std::to_string(lambda) + ")");
    }
    const Matrix rhs_dual = Z - Phi * anchor;  // N x K
    Matrix Y = llt.solve(rhs_dual);
    for (int pass = 0; pass < 3; ++pass) {
      const Matrix r_dual = rhs_dual - Phi * (Phi.transpose() * Y) - lambda * Y;
      // The primal residual equals Phi^T * r_dual, so refining Y refines W.
      if ((Phi.transpose() * r_dual).norm() <= tol) break;
      Y += llt.solve(r_dual);
    }
    W = anchor + Phi.transpose() * Y;
  }

  SolveResult res;
  res.weights = std::move(W);
  res.residual_norm = residual(res.weights).norm();
  if (!(res.residual_norm <= tol) || !res.weights.allFinite()) {
    Eigen::BDCSVD<Matrix> svd(Phi);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
    throw SingularSystem(
        "anchored_ridge_solve: residual " + std::to_string(res.residual_norm) +
        " above tolerance " + std::to_string(tol) +
        "; cond(Phi^T Phi + lambda I) ~ " +
        std::to_string((smax * smax + lambda) /
                       std::max(smin * smin + lambda,
                                std::numeric_limits<double>::min())));
  }
  res.rank = numerical_rank(Phi);
  fill_norms(res, Phi, Z);
  return res;
}

SolveResult min_norm_solve(const Matrix& Phi, const Matrix& Z) {
  const Index n = Phi.rows();
  const Index m = Phi.cols();
  if (Z.rows() != n) {
    throw DimensionMismatch("min_norm_solve: " + std::to_string(n) +
                            " feature rows vs " + std::to_string(Z.rows()) +
                            " target rows");
  }

  SolveResult res;
  if (Phi.size() == 0 || Z.cols() == 0) {
    res.weights = Matrix::Zero(m, Z.cols());
    res.rank = 0;
    res.residual_norm = 0.0;
    fill_norms(res, Phi, Z);
    return res;
  }

  Eigen::BDCSVD<Matrix> svd(Phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Index rank = rank_from_singular_values(sv, n, m);

  // W = V diag(1/sigma) U^T Z over the retained spectrum.
  Matrix coeffs = svd.matrixU().leftCols(rank).transpose() * Z;  // rank x K
  for (Index i = 0; i < rank; ++i) coeffs.row(i) /= sv[i];
  res.weights = svd.matrixV().leftCols(rank) * coeffs;
  res.rank = rank;
  res.residual_norm =
      (Phi.transpose() * (Phi * res.weights) - Phi.transpose() * Z).norm();
  fill_norms(res, Phi, Z);
  return res;
}

Matrix sample_anchor(std::uint64_t seed, Index M, Index K, double R) {
  if (R < 0.0) throw Error("sample_anchor: R must be >= 0");
  Matrix anchor = Matrix::Zero(M, K);
  if (R == 0.0 || M == 0) return anchor;
  for (Index col = 0; col < K; ++col) {
    Rng rng(derive_key({seed, kTagAnchorCol, static_cast<std::uint64_t>(col)}));
    double norm = 0.0;
    do {
      for (Index i = 0; i < M; ++i) anchor(i, col) = rng.next_gaussian();
      norm = anchor.col(col).norm();
    } while (norm == 0.0);
    anchor.col(col) *= R / norm;
  }
  return anchor;
}

EvalMetrics evaluate(const Matrix& W, const Matrix& Phi_eval,
                     const Matrix& Z_eval, const IntVector& labels_eval) {
  if (Phi_eval.cols() != W.rows()) {
    throw DimensionMismatch("evaluate: features have " +
                            std::to_string(Phi_eval.cols()) +
                            " columns, weights have " +
                            std::to_string(W.rows()) + " rows");
  }
  const Matrix pred = Phi_eval * W;
  EvalMetrics metrics;
  metrics.mse = mean_squared_error(pred, Z_eval);
  metrics.error_rate = classification_error_rate(pred, labels_eval);
  return metrics;
}

}  // namespace descentlab
