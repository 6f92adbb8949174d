#include "descentlab/features.hpp"

#include <cmath>

#include "descentlab/rng.hpp"

namespace descentlab {

namespace {
constexpr std::uint64_t kTagFeatureRow = 0xfea72b4du;
}

FeatureMap make_feature_map(std::uint64_t seed, Index P, Index D,
                            bool include_bias, double feature_scale) {
  if (P < 1) throw Error("make_feature_map: P must be >= 1");
  if (D < 0) throw Error("make_feature_map: D must be >= 0");

  FeatureMap fm;
  fm.seed = seed;
  fm.input_dim = P;
  fm.num_features = D;
  fm.include_bias = include_bias;
  fm.feature_scale = feature_scale;
  fm.projection.resize(D, P);

  const double sigma = feature_scale / std::sqrt(static_cast<double>(P));
  for (Index d = 0; d < D; ++d) {
    Rng rng(derive_key({seed, kTagFeatureRow, static_cast<std::uint64_t>(d)}));
    for (Index j = 0; j < P; ++j) fm.projection(d, j) = sigma * rng.next_gaussian();
  }
  return fm;
}

Matrix transform(const FeatureMap& fm, const Matrix& X) {
  if (X.cols() != fm.input_dim) {
    throw DimensionMismatch("transform: X has " + std::to_string(X.cols()) +
                            " columns, feature map expects " +
                            std::to_string(fm.input_dim));
  }
  Matrix out(X.rows(), fm.output_dim());
  if (fm.num_features > 0) {
    out.leftCols(fm.num_features) =
        (X * fm.projection.transpose()).cwiseMax(0.0);
  }
  if (fm.include_bias) out.col(fm.output_dim() - 1).setOnes();
  return out;
}

}  // namespace descentlab
