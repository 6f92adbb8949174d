#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "descentlab/common.hpp"
#include "descentlab/dataset.hpp"

namespace descentlab {

// Single-hidden-layer MLP with ReLU hidden units and a linear output layer,
// trained by mini-batch SGD on mean squared error against one-hot targets.
struct MlpState {
  Matrix w1;  // h x P
  Vector b1;  // h
  Matrix w2;  // K x h
  Vector b2;  // K
  Index hidden = 0;
  double init_scale = 0.1;
  Index total_epochs_trained = 0;

  enum class StopReason { EpochCap, EarlyStopped };
  StopReason stop_reason = StopReason::EpochCap;

  Index input_dim() const { return w1.cols(); }
  Index output_dim() const { return b2.size(); }
  // h*P + h + K*h + K, the count plotted against the N*K threshold line.
  Index param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
  double weight_l2() const;
  bool all_finite() const;
};

struct TrainConfig {
  double learning_rate = 0.01;
  Index batch_size = 32;
  Index max_epochs = 500;
  Index patience = 20;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  bool early_stop = false;
};

struct EpochRecord {
  Index epoch = 0;  // cumulative over the state's lifetime
  double train_mse = 0.0;
  double val_mse = 0.0;  // NaN when no validation set is carved
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  double w1_norm = 0.0, b1_norm = 0.0, w2_norm = 0.0, b2_norm = 0.0;
};

// Weights ~ Gaussian(0, init_scale^2 / fan_in) per layer, biases zero.
// Deterministic in seed; rows/columns use per-index substreams so growth can
// reuse the same scheme.
MlpState init_mlp(std::uint64_t seed, Index P, Index h, Index K,
                  double init_scale);

// ReLU(X W1^T + b1) W2^T + b2. Throws NonFiniteValue if the output contains
// NaN or Inf.
Matrix mlp_forward(const MlpState& state, const Matrix& X);

struct MlpGradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  double loss = 0.0;  // (1/(n*K)) sum of squared errors
};

// Full-batch gradients of the mean squared error by backpropagation.
MlpGradients mlp_backprop(const MlpState& state, const Matrix& X,
                          const Matrix& Z);

// One pass over a seeded shuffle of the rows; returns the epoch training mse
// (per-batch losses accumulated before each update). Increments
// total_epochs_trained, which also keys the shuffle substream.
double sgd_epoch(MlpState& state, const Matrix& X, const Matrix& Z,
                 const TrainConfig& cfg);

// Trains on the dataset's train split. With early_stop, a validation set of
// round(val_fraction * n) rows (at least 1) is carved from the train split
// and the best-validation weights are restored on return; otherwise the full
// split is used and the state runs to max_epochs.
TrainLog train_mlp(MlpState& state, const Dataset& ds, const TrainConfig& cfg);

// Copies the trained weights and appends freshly initialized rows/columns for
// the new_h - h new neurons. Throws ShrinkNotAllowed when new_h < h.
MlpState grow_hidden(const MlpState& state, std::uint64_t seed, Index new_h);

struct MlpCurvePoint {
  Index hidden = 0;
  std::uint64_t seed = 0;
  Index num_params = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double train_error_rate = 0.0;
  double test_error_rate = 0.0;
  double weight_l2 = 0.0;
  Index epochs_trained = 0;  // epochs spent at this capacity
  std::int64_t wall_time_ms = 0;
};

// The weight-reuse growth protocol: walk h_list in order; while
// h <= switch_off_h the network is grown from the previous trained state,
// afterwards each h trains from scratch. switch_off_h = nullopt never
// switches off (pure reuse chain); a value below min(h_list) trains every
// network from scratch.
std::vector<MlpCurvePoint> reuse_sweep(const Dataset& ds,
                                       const std::vector<Index>& h_list,
                                       std::optional<Index> switch_off_h,
                                       const TrainConfig& cfg,
                                       double init_scale);

}  // namespace descentlab
