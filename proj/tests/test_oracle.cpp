#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "descentlab/dataset.hpp"
#include "descentlab/features.hpp"
#include "descentlab/oracle.hpp"
#include "descentlab/rng.hpp"
#include "descentlab/solver.hpp"

using namespace descentlab;

namespace {

Matrix random_matrix(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_gaussian();
  return m;
}

}  // namespace

TEST_CASE("solution_set of one constraint in two weights is a line") {
  const Matrix phi = (Matrix(1, 2) << 1.0, 0.0).finished();
  const Vector z = Vector::Ones(1);
  const auto desc = solution_set(phi, z);
  CHECK(desc.dim == 1);
  CHECK(desc.particular[0] == doctest::Approx(1.0));
  CHECK(desc.particular[1] == doctest::Approx(0.0));
  // The null direction is the second axis.
  CHECK(std::abs(desc.nullspace_basis(1, 0)) == doctest::Approx(1.0));
}

TEST_CASE("solution_set of an identity system is a point") {
  const auto desc =
      solution_set(Matrix::Identity(2, 2), (Vector(2) << 3.0, 4.0).finished());
  CHECK(desc.dim == 0);
  CHECK((desc.particular - (Vector(2) << 3.0, 4.0).finished()).norm() <= 1e-12);
}

TEST_CASE("random full-row-rank 3x7 system has a 4-dimensional set") {
  Rng rng(3);
  const Matrix phi = random_matrix(rng, 3, 7);
  const Vector z = random_matrix(rng, 3, 1);
  const auto desc = solution_set(phi, z);
  CHECK(desc.dim == 4);
  for (int probe = 0; probe < 100; ++probe) {
    const Vector c = random_matrix(rng, 4, 1);
    const Vector w = desc.particular + desc.nullspace_basis * c;
    CHECK((phi * w - z).norm() <= 1e-8 * (1.0 + z.norm()));
  }
}

TEST_CASE("solution_set rejects infeasible targets") {
  // Rank-1 system; z outside the column span.
  Matrix phi(2, 2);
  phi << 1.0, 0.0, 2.0, 0.0;
  const Vector z = (Vector(2) << 1.0, 3.0).finished();
  CHECK_THROWS_AS(solution_set(phi, z), Infeasible);
}

TEST_CASE("gradient descent oracle") {
  SUBCASE("huge lambda converges to the anchor") {
    const auto gd =
        gd_minimize_eq2(Matrix::Ones(1, 1), Vector::Zero(1), 1e12,
                        Vector::Constant(1, 5.0));
    CHECK(gd.converged);
    CHECK(gd.w[0] == doctest::Approx(5.0).epsilon(1e-9));
  }
  SUBCASE("matches the closed form on random tiny instances") {
    Rng rng(17);
    for (int trial = 0; trial < 5; ++trial) {
      const Index n = 1 + static_cast<Index>(rng.next_below(5));
      const Index m = 1 + static_cast<Index>(rng.next_below(8));
      const Matrix phi = random_matrix(rng, n, m);
      const Vector z = random_matrix(rng, n, 1);
      const Vector p = random_matrix(rng, m, 1);
      const double lambda = trial % 2 == 0 ? 1e-3 : 1.0;

      RidgeProblem prob;
      prob.features = phi;
      prob.targets = z;
      prob.lambda = lambda;
      prob.anchor = p;
      const SolveResult closed = anchored_ridge_solve(prob);
      const GdResult gd = gd_minimize_eq2(phi, z, lambda, p);
      REQUIRE(gd.converged);
      CHECK((gd.w - closed.weights.col(0)).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
  SUBCASE("rejects oversized steps and bad lambda") {
    const Matrix phi = Matrix::Ones(2, 2);
    CHECK_THROWS_AS(
        gd_minimize_eq2(phi, Vector::Zero(2), 0.0, Vector::Zero(2)), Error);
    CHECK_THROWS_AS(
        gd_minimize_eq2(phi, Vector::Zero(2), 1.0, Vector::Zero(2), 100, 1e6),
        Error);
  }
  SUBCASE("reports non-convergence instead of throwing") {
    Rng rng(19);
    const Matrix phi = random_matrix(rng, 2, 6);
    const GdResult gd = gd_minimize_eq2(phi, random_matrix(rng, 2, 1), 1e-6,
                                        Vector::Zero(6), 3);
    CHECK_FALSE(gd.converged);
    CHECK(gd.steps == 3);
  }
}

TEST_CASE("nested_norm_curve") {
  const Dataset ds = synth_gaussian_classes(23, 5, 4, 6, 2.0);  // 20 rows

  SUBCASE("below the rank threshold values are reported, not asserted") {
    const auto norms = nested_norm_curve(23, ds, {2, 4, 6});
    CHECK(norms.size() == 3);
    for (double v : norms) CHECK(std::isfinite(v));
  }
  SUBCASE("requires a strictly increasing D list") {
    CHECK_THROWS_AS(nested_norm_curve(23, ds, {4, 4}), Error);
  }
  SUBCASE("non-increasing across the interpolating regime") {
    std::vector<Index> d_list;
    for (Index d = 20; d <= 60; d += 5) d_list.push_back(d);
    const auto norms = nested_norm_curve(23, ds, d_list);
    // Find the first interpolating D, then the norms must not rise.
    std::size_t start = d_list.size();
    for (std::size_t i = 0; i < d_list.size(); ++i) {
      const FeatureMap fm = make_feature_map(23, ds.input_dim(), d_list[i]);
      if (numerical_rank(transform(fm, ds.inputs)) == ds.total_rows()) {
        start = i;
        break;
      }
    }
    REQUIRE(start < d_list.size());
    for (std::size_t i = start + 1; i < norms.size(); ++i) {
      CHECK(norms[i] <= norms[i - 1] + 1e-8);
    }
  }
}

TEST_CASE("duplicating columns of an underdetermined system") {
  Rng rng(29);
  Matrix phi = random_matrix(rng, 3, 6).cwiseAbs();
  phi.col(4).setZero();  // a dead ReLU feature
  const Vector z = random_matrix(rng, 3, 1);
  const auto base = min_norm_solve(phi, z);

  SUBCASE("zero-weight column: the tangent case, norm unchanged") {
    Matrix grown(3, 7);
    grown.leftCols(6) = phi;
    grown.col(6) = phi.col(4);
    const auto ext = min_norm_solve(grown, z);
    CHECK(std::abs(ext.weight_l2 - base.weight_l2) <= 1e-8);
  }
  SUBCASE("active column: the secant case, norm strictly drops") {
    Matrix grown(3, 7);
    grown.leftCols(6) = phi;
    grown.col(6) = phi.col(0);
    const auto ext = min_norm_solve(grown, z);
    CHECK(ext.weight_l2 <= base.weight_l2 + 1e-10);
    CHECK(ext.weight_l2 < base.weight_l2 - 1e-6);
  }
}

TEST_CASE("the full oracle suite passes") {
  std::ostringstream out;
  CHECK(run_oracle_suite(1, out) == 0);
  CHECK(out.str().find("[FAIL]") == std::string::npos);
  CHECK(out.str().find("[ ok ]") != std::string::npos);
}
