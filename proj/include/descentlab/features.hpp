#pragma once

#include <cstdint>

#include "descentlab/common.hpp"

namespace descentlab {

// Seeded random ReLU feature map. Row d of the projection is drawn from a
// substream keyed by (seed, d), so the first D rows are identical for every
// feature count sharing the same seed: growing D appends columns without
// touching existing ones.
struct FeatureMap {
  std::uint64_t seed = 0;
  Index input_dim = 0;     // P
  Index num_features = 0;  // D, excluding the constant bias column
  bool include_bias = true;
  double feature_scale = 1.0;
  Matrix projection;  // D x P

  // Columns produced by transform(): D features plus the bias column.
  Index output_dim() const { return num_features + (include_bias ? 1 : 0); }
};

// Projection rows ~ Gaussian with standard deviation feature_scale / sqrt(P).
FeatureMap make_feature_map(std::uint64_t seed, Index P, Index D,
                            bool include_bias = true,
                            double feature_scale = 1.0);

// Returns max(0, X * projection^T), with an all-ones last column when the
// map includes the bias feature.
Matrix transform(const FeatureMap& fm, const Matrix& X);

}  // namespace descentlab
