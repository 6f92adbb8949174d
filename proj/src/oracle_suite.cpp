#include <Eigen/Cholesky>

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "descentlab/dataset.hpp"
#include "descentlab/features.hpp"
#include "descentlab/oracle.hpp"
#include "descentlab/rng.hpp"
#include "descentlab/solver.hpp"

namespace descentlab {

namespace {

Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_gaussian();
  return m;
}

Vector random_vector(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.next_gaussian();
  return v;
}

struct CheckReporter {
  std::ostream& out;
  int failures = 0;

  void pass(const std::string& name) { out << "[ ok ] " << name << "\n"; }
  void fail(const std::string& name, const std::string& detail) {
    out << "[FAIL] " << name << ": " << detail << "\n";
    ++failures;
  }
  void report(bool ok, const std::string& name, const std::string& detail) {
    if (ok) pass(name); else fail(name, detail);
  }
};

}  // namespace

int run_oracle_suite(std::uint64_t seed, std::ostream& out) {
  CheckReporter rep{out};

  // Solution-set dimension D - N on random tiny instances, plus the
  // one-constraint two-weight line case.
  {
    bool ok = true;
    std::string detail;
    Rng rng(derive_key({seed, 0x01}));
    for (int trial = 0; trial < 50 && ok; ++trial) {
      const Index m = 2 + static_cast<Index>(rng.next_below(7));  // 2..8
      const Index n = 1 + static_cast<Index>(rng.next_below(
                              static_cast<std::uint64_t>(m)));    // 1..m
      const Matrix phi = trial == 0 ? (Matrix(1, 2) << 1.0, 0.0).finished()
                                    : random_matrix(rng, n, m);
      const Vector z = trial == 0 ? Vector::Ones(1) : random_vector(rng, phi.rows());
      const auto desc = solution_set(phi, z);
      const Index rank = numerical_rank(phi);
      if (desc.dim != phi.cols() - rank) {
        ok = false;
        detail = "dim " + std::to_string(desc.dim) + " != M - rank = " +
                 std::to_string(phi.cols() - rank);
        break;
      }
      for (int probe = 0; probe < 100; ++probe) {
        Vector c = random_vector(rng, desc.dim);
        const Vector w = desc.particular + desc.nullspace_basis * c;
        if ((phi * w - z).norm() > 1e-8 * (1.0 + z.norm())) {
          ok = false;
          detail = "point on the solution set fails to interpolate";
          break;
        }
      }
      const Matrix gram = desc.nullspace_basis.transpose() * desc.nullspace_basis;
      if ((gram - Matrix::Identity(desc.dim, desc.dim)).norm() > 1e-10) {
        ok = false;
        detail = "null-space basis not orthonormal";
      }
    }
    rep.report(ok, "solution_set dimension = M - rank (50 instances)", detail);
  }

  // Min-norm optimality against random points of the solution set.
  {
    bool ok = true;
    std::string detail;
    Rng rng(derive_key({seed, 0x02}));
    for (int trial = 0; trial < 50 && ok; ++trial) {
      const Index n = 1 + static_cast<Index>(rng.next_below(4));  // 1..4
      const Index m = n + 1 + static_cast<Index>(rng.next_below(4));
      const Matrix phi = random_matrix(rng, n, m);
      const Vector z = random_vector(rng, n);
      const auto sol = min_norm_solve(phi, z);
      const auto desc = solution_set(phi, z);
      for (int probe = 0; probe < 100; ++probe) {
        Vector c = random_vector(rng, desc.dim);
        const double other = (desc.particular + desc.nullspace_basis * c).norm();
        if (sol.weight_l2 > other + 1e-10) {
          ok = false;
          detail = "found a smaller-norm interpolant (" +
                   std::to_string(other) + " < " +
                   std::to_string(sol.weight_l2) + ")";
          break;
        }
      }
    }
    rep.report(ok, "min-norm optimality vs 100 random interpolants", detail);
  }

  // Gradient-descent minimizer of the anchored penalty agrees with the
  // closed form.
  {
    bool ok = true;
    std::string detail;
    Rng rng(derive_key({seed, 0x03}));
    const double lambdas[2] = {1e-3, 1.0};
    for (int trial = 0; trial < 20 && ok; ++trial) {
      const Index n = 1 + static_cast<Index>(rng.next_below(5));  // 1..5
      const Index m = 1 + static_cast<Index>(rng.next_below(8));  // 1..8
      const Index k = 1 + static_cast<Index>(rng.next_below(3));  // 1..3
      const double lambda = lambdas[trial % 2];
      const Matrix phi = random_matrix(rng, n, m);
      const Matrix z = random_matrix(rng, n, k);
      const Matrix anchor = random_matrix(rng, m, k);

      RidgeProblem prob;
      prob.features = phi;
      prob.targets = z;
      prob.lambda = lambda;
      prob.anchor = anchor;
      const auto closed = anchored_ridge_solve(prob);

      for (Index col = 0; col < k; ++col) {
        const auto gd = gd_minimize_eq2(phi, z.col(col), lambda, anchor.col(col));
        if (!gd.converged) {
          ok = false;
          detail = "gradient descent did not converge";
          break;
        }
        const double diff =
            (gd.w - closed.weights.col(col)).cwiseAbs().maxCoeff();
        if (diff > 1e-6) {
          ok = false;
          detail = "max-abs difference " + std::to_string(diff) + " > 1e-6";
          break;
        }
      }
    }
    rep.report(ok, "gd_minimize_eq2 matches anchored_ridge_solve (20 instances)",
               detail);
  }

  // Small lambda, zero anchor, started at the origin: gradient descent lands
  // near the min-norm interpolator.
  {
    Rng rng(derive_key({seed, 0x04}));
    const Matrix phi = random_matrix(rng, 3, 8);
    const Vector z = random_vector(rng, 3);
    const auto mn = min_norm_solve(phi, z);
    const auto gd = gd_minimize_eq2(phi, z, 1e-8, Vector::Zero(8));
    const double diff = (gd.w - mn.weights.col(0)).norm();
    rep.report(diff <= 1e-4, "gd with small lambda approaches the min-norm solution",
               "difference " + std::to_string(diff));
  }

  // Nested min-norm solution norms never increase once interpolation holds.
  // Below full row rank the claim is out of scope (dead ReLU columns can
  // leave early maps rank-deficient), so the assertion starts at the first
  // D whose features reach rank N.
  {
    const Dataset ds = synth_gaussian_classes(derive_key({seed, 0x05}), 5, 4,
                                              6, 2.0);  // N = 20
    const Index n = ds.total_rows();
    std::vector<Index> d_list;
    for (Index d = 20; d <= 60; d += 5) d_list.push_back(d);
    const std::uint64_t fm_seed = derive_key({seed, 0x06});
    const auto norms = nested_norm_curve(fm_seed, ds, d_list);

    std::size_t first_interp = d_list.size();
    for (std::size_t i = 0; i < d_list.size(); ++i) {
      const FeatureMap fm = make_feature_map(fm_seed, ds.input_dim(), d_list[i]);
      if (numerical_rank(transform(fm, ds.inputs)) == n) {
        first_interp = i;
        break;
      }
    }
    bool ok = first_interp < d_list.size();
    std::string detail = ok ? "" : "no D in the list reaches rank N";
    for (std::size_t i = first_interp + 1; ok && i < norms.size(); ++i) {
      if (norms[i] > norms[i - 1] + 1e-8) {
        ok = false;
        detail = "norm rose from " + std::to_string(norms[i - 1]) + " to " +
                 std::to_string(norms[i]) + " at D = " +
                 std::to_string(d_list[i]);
      }
    }
    rep.report(ok, "nested min-norm curve is non-increasing (N=20, D=20..60)",
               detail);
  }

  // Tangent case: duplicating a column whose min-norm weight is zero leaves
  // the norm unchanged. A dead ReLU feature (all-negative projections on
  // non-negative inputs) is the natural zero-weight column.
  {
    Rng rng(derive_key({seed, 0x07}));
    Matrix phi = random_matrix(rng, 3, 6).cwiseAbs();
    phi.col(2).setZero();  // dead feature
    const Vector z = random_vector(rng, 3);
    const auto base = min_norm_solve(phi, z);
    Matrix grown(phi.rows(), phi.cols() + 1);
    grown.leftCols(phi.cols()) = phi;
    grown.col(phi.cols()) = phi.col(2);
    const auto extended = min_norm_solve(grown, z);
    const double delta = std::abs(extended.weight_l2 - base.weight_l2);
    rep.report(delta <= 1e-8,
               "duplicating a zero-weight column keeps the min-norm norm",
               "norm changed by " + std::to_string(delta));
  }

  // Solver limit behavior: huge lambda returns the anchor, tiny lambda with
  // zero anchor returns the min-norm solution, primal and dual forms agree.
  {
    Rng rng(derive_key({seed, 0x08}));
    bool ok = true;
    std::string detail;

    const Matrix phi = random_matrix(rng, 4, 6);
    const Matrix z = random_matrix(rng, 4, 2);
    const Matrix anchor = sample_anchor(derive_key({seed, 0x09}), 6, 2, 3.0);

    RidgeProblem huge;
    huge.features = phi;
    huge.targets = z;
    huge.lambda = 1e10 * (phi.transpose() * phi).norm();
    huge.anchor = anchor;
    const auto at_anchor = anchored_ridge_solve(huge);
    if ((at_anchor.weights - anchor).norm() > 1e-4 * (1.0 + anchor.norm())) {
      ok = false;
      detail = "large-lambda solution does not return the anchor";
    }

    RidgeProblem tiny;
    tiny.features = phi;
    tiny.targets = z;
    tiny.lambda = 1e-10;
    const auto near_min = anchored_ridge_solve(tiny);
    const auto mn = min_norm_solve(phi, z);
    if (ok && (near_min.weights - mn.weights).norm() > 1e-4) {
      ok = false;
      detail = "tiny-lambda solution is far from min-norm";
    }

    if (ok) {
      // Force both routes on the same instance: M <= 2N picks the primal,
      // a wide copy with duplicated rows picks the dual.
      RidgeProblem prob;
      prob.features = random_matrix(rng, 3, 10);  // M > 2N: dual route
      prob.targets = random_matrix(rng, 3, 2);
      prob.lambda = 1e-6;
      const auto dual = anchored_ridge_solve(prob);
      // Primal route on the identical algebra via the normal equations.
      Matrix a = prob.features.transpose() * prob.features;
      a.diagonal().array() += prob.lambda;
      const Matrix rhs = prob.features.transpose() * prob.targets;
      const Matrix primal = a.ldlt().solve(rhs);
      if ((dual.weights - primal).norm() > 1e-8 * (1.0 + primal.norm())) {
        ok = false;
        detail = "primal and dual solutions disagree";
      }
    }
    rep.report(ok, "anchored ridge limit and primal/dual agreement", detail);
  }

  return rep.failures;
}

}  // namespace descentlab
