#include "descentlab/oracle.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

#include "descentlab/features.hpp"
#include "descentlab/solver.hpp"

namespace descentlab {

SolutionSetDescription solution_set(const Matrix& Phi, const Vector& z) {
  const Index n = Phi.rows();
  const Index m = Phi.cols();
  if (z.size() != n) {
    throw DimensionMismatch("solution_set: " + std::to_string(n) +
                            " rows vs " + std::to_string(z.size()) +
                            " target entries");
  }

  Eigen::JacobiSVD<Matrix> svd(Phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double sigma_max = sv.size() ? sv[0] : 0.0;
  const double cutoff = std::numeric_limits<double>::epsilon() *
                        static_cast<double>(std::max(n, m)) * sigma_max;
  Index rank = 0;
  while (rank < sv.size() && sv[rank] > cutoff) ++rank;

  SolutionSetDescription desc;
  Vector coeffs = svd.matrixU().leftCols(rank).transpose() * z;
  for (Index i = 0; i < rank; ++i) coeffs[i] /= sv[i];
  desc.particular = svd.matrixV().leftCols(rank) * coeffs;
  desc.nullspace_basis = svd.matrixV().rightCols(m - rank);
  desc.dim = m - rank;

  const double misfit = (Phi * desc.particular - z).norm();
  if (misfit > 1e-8 * (1.0 + z.norm())) {
    throw Infeasible("solution_set: z is not in the range of Phi (misfit " +
                     std::to_string(misfit) + ")");
  }
  return desc;
}

GdResult gd_minimize_eq2(const Matrix& Phi, const Vector& z, double lambda,
                         const Vector& p, Index max_steps, double step_size) {
  const Index n = Phi.rows();
  const Index m = Phi.cols();
  if (z.size() != n) {
    throw DimensionMismatch("gd_minimize_eq2: " + std::to_string(n) +
                            " rows vs " + std::to_string(z.size()) +
                            " target entries");
  }
  if (p.size() != m) {
    throw DimensionMismatch("gd_minimize_eq2: anchor has " +
                            std::to_string(p.size()) + " entries, expected " +
                            std::to_string(m));
  }
  if (lambda <= 0.0) throw Error("gd_minimize_eq2: lambda must be > 0");

  // sigma_max^2 by power iteration on Phi^T Phi, inflated a little so the
  // derived step is safely below 1/L.
  double top = 0.0;
  if (m > 0 && n > 0) {
    Vector v = Vector::Ones(m).normalized();
    for (int it = 0; it < 128; ++it) {
      Vector w = Phi.transpose() * (Phi * v);
      const double norm = w.norm();
      if (norm == 0.0) break;
      v = w / norm;
      top = norm;
    }
  }
  const double lipschitz = 2.0 * (1.05 * top + lambda);
  if (step_size <= 0.0) {
    step_size = 0.9 / lipschitz;
  } else if (step_size >= 1.0 / lipschitz) {
    throw Error("gd_minimize_eq2: step_size " + std::to_string(step_size) +
                " is not below 1/L = " + std::to_string(1.0 / lipschitz));
  }

  // The stopping threshold scales with the penalty strength: in the
  // anchor-dominated regime the raw gradient carries a lambda factor, so an
  // absolute cutoff would sit below floating-point resolution while the
  // iterate error ||w - w*|| <= ||grad|| / (2 lambda) stays ~1e-10.
  const double grad_tol = 1e-10 * (1.0 + lambda);
  GdResult result;
  Vector w = Vector::Zero(m);
  Vector best = w;
  double best_grad = std::numeric_limits<double>::infinity();
  for (Index step = 0; step < max_steps; ++step) {
    Vector grad = 2.0 * (Phi.transpose() * (Phi * w - z)) + 2.0 * lambda * (w - p);
    const double gnorm = grad.norm();
    if (gnorm < best_grad) {
      best_grad = gnorm;
      best = w;
    }
    if (gnorm <= grad_tol) {
      result.w = w;
      result.converged = true;
      result.steps = step;
      result.grad_norm = gnorm;
      return result;
    }
    w -= step_size * grad;
  }
  result.w = best;
  result.converged = false;
  result.steps = max_steps;
  result.grad_norm = best_grad;
  return result;
}

std::vector<double> nested_norm_curve(std::uint64_t seed, const Dataset& ds,
                                      const std::vector<Index>& D_list,
                                      double lambda) {
  for (std::size_t i = 1; i < D_list.size(); ++i) {
    if (D_list[i] <= D_list[i - 1]) {
      throw Error("nested_norm_curve: D_list must be strictly increasing");
    }
  }

  Matrix X;
  Matrix Z;
  if (ds.train.empty()) {
    X = ds.inputs;
    Z = ds.targets;
  } else {
    X = ds.train_inputs();
    Z = ds.train_targets();
  }

  std::vector<double> norms;
  norms.reserve(D_list.size());
  for (Index d : D_list) {
    const FeatureMap fm = make_feature_map(seed, X.cols(), d);
    const Matrix Phi = transform(fm, X);
    if (lambda > 0.0) {
      RidgeProblem prob;
      prob.features = Phi;
      prob.targets = Z;
      prob.lambda = lambda;
      norms.push_back(anchored_ridge_solve(prob).weight_l2);
    } else {
      norms.push_back(min_norm_solve(Phi, Z).weight_l2);
    }
  }
  return norms;
}

}  // namespace descentlab
