#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descentlab/common.hpp"

namespace descentlab {

// A loaded dataset: normalized inputs, integer labels, one-hot targets and an
// optional train/test split (row indices into the full matrices).
//
// Invariants (checked by validate()):
//   - every row of targets sums to exactly 1,
//   - all input entries lie in [0, 1],
//   - train and test index sets are disjoint subsets of {0..N_total-1}.
struct Dataset {
  Matrix inputs;    // N_total x P
  IntVector labels; // N_total, values in {0..K-1}
  Matrix targets;   // N_total x K, one-hot
  std::vector<Index> train;
  std::vector<Index> test;

  Index total_rows() const { return inputs.rows(); }
  Index input_dim() const { return inputs.cols(); }
  Index num_classes() const { return targets.cols(); }

  Matrix gather_inputs(const std::vector<Index>& rows) const;
  Matrix gather_targets(const std::vector<Index>& rows) const;
  IntVector gather_labels(const std::vector<Index>& rows) const;

  Matrix train_inputs() const { return gather_inputs(train); }
  Matrix train_targets() const { return gather_targets(train); }
  IntVector train_labels() const { return gather_labels(train); }
  Matrix test_inputs() const { return gather_inputs(test); }
  Matrix test_targets() const { return gather_targets(test); }
  IntVector test_labels() const { return gather_labels(test); }

  void validate() const;
};

// Builds the one-hot matrix for labels in {0..K-1}.
Matrix one_hot(const IntVector& labels, Index num_classes);

// Reads the big-endian IDX pair (images magic 0x803, labels magic 0x801).
// Pixels are scaled by 1/255; K is inferred as max(label)+1; the split is
// left empty. Throws BadMagic / CountMismatch / TruncatedFile naming the
// offending file.
Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path);

enum class SplitMode { Uniform, Balanced };

// Deterministic shuffle keyed by seed; the first n_train shuffled indices
// become the train set and the next n_test the test set. Balanced mode draws
// near-equal per-class counts instead of one global shuffle.
Dataset subsample_and_split(const Dataset& ds, std::uint64_t seed,
                            Index n_train, Index n_test,
                            SplitMode mode = SplitMode::Uniform);

// K Gaussian class centers scaled by center_scale, unit-noise points around
// them, then an affine rescale of every coordinate into [0, 1]. Rows are
// grouped by class; the split is left empty.
Dataset synth_gaussian_classes(std::uint64_t seed, Index n_per_class, Index K,
                               Index P, double center_scale);

// descentlab-dataset v1 cache format (see README for the byte layout).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace descentlab
