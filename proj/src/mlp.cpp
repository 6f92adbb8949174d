#include "descentlab/mlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "descentlab/rng.hpp"

namespace descentlab {

namespace {

constexpr std::uint64_t kTagInitW1 = 0x311d7a01u;
constexpr std::uint64_t kTagInitW2 = 0x311d7a02u;
constexpr std::uint64_t kTagEpochShuffle = 0xe70c54a9u;
constexpr std::uint64_t kTagValCarve = 0x7a11d5e7u;
constexpr std::uint64_t kTagChainInit = 0xc4a10901u;
constexpr std::uint64_t kTagChainGrow = 0xc4a10902u;
constexpr std::uint64_t kTagChainTrain = 0xc4a10903u;

// Per-index substreams: row i of W1 and column j of W2 each get their own
// stream, so grow_hidden can extend a state without replaying old draws.
void fill_w1_rows(Matrix& w1, std::uint64_t seed, Index first_row,
                  double init_scale) {
  const Index p = w1.cols();
  const double sigma = init_scale / std::sqrt(static_cast<double>(p));
  for (Index i = first_row; i < w1.rows(); ++i) {
    Rng rng(derive_key({seed, kTagInitW1, static_cast<std::uint64_t>(i)}));
    for (Index j = 0; j < p; ++j) w1(i, j) = sigma * rng.next_gaussian();
  }
}

void fill_w2_cols(Matrix& w2, std::uint64_t seed, Index first_col,
                  double init_scale) {
  const Index h = w2.cols();
  if (h == 0) return;
  const double sigma = init_scale / std::sqrt(static_cast<double>(h));
  for (Index j = first_col; j < h; ++j) {
    Rng rng(derive_key({seed, kTagInitW2, static_cast<std::uint64_t>(j)}));
    for (Index i = 0; i < w2.rows(); ++i) w2(i, j) = sigma * rng.next_gaussian();
  }
}

}  // namespace

double MlpState::weight_l2() const {
  return std::sqrt(w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() +
                   b2.squaredNorm());
}

bool MlpState::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

MlpState init_mlp(std::uint64_t seed, Index P, Index h, Index K,
                  double init_scale) {
  if (init_scale <= 0.0) throw Error("init_mlp: init_scale must be > 0");
  MlpState state;
  state.hidden = h;
  state.init_scale = init_scale;
  state.w1.resize(h, P);
  state.b1 = Vector::Zero(h);
  state.w2.resize(K, h);
  state.b2 = Vector::Zero(K);
  fill_w1_rows(state.w1, seed, 0, init_scale);
  fill_w2_cols(state.w2, seed, 0, init_scale);
  return state;
}

Matrix mlp_forward(const MlpState& state, const Matrix& X) {
  if (X.cols() != state.input_dim()) {
    throw DimensionMismatch("mlp_forward: input has " +
                            std::to_string(X.cols()) + " columns, expected " +
                            std::to_string(state.input_dim()));
  }
  Matrix hidden =
      ((X * state.w1.transpose()).rowwise() + state.b1.transpose())
          .cwiseMax(0.0);
  Matrix out = hidden * state.w2.transpose();
  out.rowwise() += state.b2.transpose();
  if (!out.allFinite()) {
    throw NonFiniteValue("mlp_forward: non-finite output");
  }
  return out;
}

MlpGradients mlp_backprop(const MlpState& state, const Matrix& X,
                          const Matrix& Z) {
  const Index n = X.rows();
  const Index k = Z.cols();
  if (Z.rows() != n) {
    throw DimensionMismatch("mlp_backprop: " + std::to_string(n) +
                            " inputs vs " + std::to_string(Z.rows()) +
                            " targets");
  }
  const Matrix pre = (X * state.w1.transpose()).rowwise() + state.b1.transpose();
  const Matrix hidden = pre.cwiseMax(0.0);
  Matrix pred = hidden * state.w2.transpose();
  pred.rowwise() += state.b2.transpose();

  const Matrix err = pred - Z;  // n x K
  MlpGradients g;
  g.loss = err.squaredNorm() / static_cast<double>(n * k);
  const Matrix dpred = (2.0 / static_cast<double>(n * k)) * err;
  g.w2 = dpred.transpose() * hidden;
  g.b2 = dpred.colwise().sum().transpose();
  Matrix dhidden = dpred * state.w2;
  dhidden = (pre.array() > 0.0).select(dhidden, 0.0);
  g.w1 = dhidden.transpose() * X;
  g.b1 = dhidden.colwise().sum().transpose();
  return g;
}

double sgd_epoch(MlpState& state, const Matrix& X, const Matrix& Z,
                 const TrainConfig& cfg) {
  const Index n = X.rows();
  const Index k = Z.cols();
  if (Z.rows() != n) {
    throw DimensionMismatch("sgd_epoch: " + std::to_string(n) + " inputs vs " +
                            std::to_string(Z.rows()) + " targets");
  }
  if (cfg.batch_size < 1 || cfg.batch_size > n) {
    throw Error("sgd_epoch: batch_size " + std::to_string(cfg.batch_size) +
                " outside [1, " + std::to_string(n) + "]");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_key({cfg.seed, kTagEpochShuffle,
                      static_cast<std::uint64_t>(state.total_epochs_trained)}));
  rng.shuffle(order);

  double sq_err_sum = 0.0;
  for (Index start = 0; start < n; start += cfg.batch_size) {
    const Index b = std::min(cfg.batch_size, n - start);
    Matrix xb(b, X.cols());
    Matrix zb(b, k);
    for (Index i = 0; i < b; ++i) {
      xb.row(i) = X.row(order[static_cast<std::size_t>(start + i)]);
      zb.row(i) = Z.row(order[static_cast<std::size_t>(start + i)]);
    }
    MlpGradients g = mlp_backprop(state, xb, zb);
    sq_err_sum += g.loss * static_cast<double>(b * k);
    state.w1 -= cfg.learning_rate * g.w1;
    state.b1 -= cfg.learning_rate * g.b1;
    state.w2 -= cfg.learning_rate * g.w2;
    state.b2 -= cfg.learning_rate * g.b2;
  }
  ++state.total_epochs_trained;
  if (!state.all_finite()) {
    throw NonFiniteValue(
        "sgd_epoch: non-finite weights after epoch " +
        std::to_string(state.total_epochs_trained) +
        " (learning_rate likely too high)");
  }
  return sq_err_sum / static_cast<double>(n * k);
}

TrainLog train_mlp(MlpState& state, const Dataset& ds, const TrainConfig& cfg) {
  if (cfg.learning_rate < 0.0)
    throw Error("train_mlp: negative learning_rate");
  if (cfg.early_stop && cfg.patience < 1)
    throw Error("train_mlp: patience must be >= 1 with early_stop");

  std::vector<Index> rows = ds.train;
  TrainLog log;

  std::vector<Index> fit_rows = rows;
  std::vector<Index> val_rows;
  if (cfg.early_stop) {
    if (cfg.val_fraction <= 0.0 || cfg.val_fraction >= 1.0)
      throw Error("train_mlp: val_fraction must be in (0,1)");
    std::vector<Index> shuffled = rows;
    Rng rng(derive_key({cfg.seed, kTagValCarve}));
    rng.shuffle(shuffled);
    const Index n_val = std::max<Index>(
        1, static_cast<Index>(std::llround(cfg.val_fraction *
                                           static_cast<double>(rows.size()))));
    if (n_val >= static_cast<Index>(rows.size()))
      throw Error("train_mlp: validation set would consume the train split");
    val_rows.assign(shuffled.begin(), shuffled.begin() + n_val);
    fit_rows.assign(shuffled.begin() + n_val, shuffled.end());
  }

  const Matrix x_fit = ds.gather_inputs(fit_rows);
  const Matrix z_fit = ds.gather_targets(fit_rows);
  Matrix x_val, z_val;
  if (cfg.early_stop) {
    x_val = ds.gather_inputs(val_rows);
    z_val = ds.gather_targets(val_rows);
  }

  MlpState best = state;
  double best_val = std::numeric_limits<double>::infinity();
  Index bad_streak = 0;
  state.stop_reason = MlpState::StopReason::EpochCap;

  for (Index epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double train_mse = sgd_epoch(state, x_fit, z_fit, cfg);
    EpochRecord rec;
    rec.epoch = state.total_epochs_trained;
    rec.train_mse = train_mse;
    rec.val_mse = std::numeric_limits<double>::quiet_NaN();
    if (cfg.early_stop) {
      rec.val_mse = mean_squared_error(mlp_forward(state, x_val), z_val);
      if (rec.val_mse < best_val) {
        best_val = rec.val_mse;
        best = state;
        bad_streak = 0;
      } else {
        ++bad_streak;
      }
    }
    log.epochs.push_back(rec);
    if (cfg.early_stop && bad_streak >= cfg.patience) {
      state.stop_reason = MlpState::StopReason::EarlyStopped;
      break;
    }
  }

  if (cfg.early_stop && best_val < std::numeric_limits<double>::infinity()) {
    // Keep the best-validation weights whether patience or the epoch cap
    // ended training; the metadata (epoch count, stop reason) stays.
    const auto reason = state.stop_reason;
    const auto epochs = state.total_epochs_trained;
    state.w1 = best.w1;
    state.b1 = best.b1;
    state.w2 = best.w2;
    state.b2 = best.b2;
    state.stop_reason = reason;
    state.total_epochs_trained = epochs;
  }

  log.w1_norm = state.w1.norm();
  log.b1_norm = state.b1.norm();
  log.w2_norm = state.w2.norm();
  log.b2_norm = state.b2.norm();
  return log;
}

MlpState grow_hidden(const MlpState& state, std::uint64_t seed, Index new_h) {
  if (new_h < state.hidden) {
    throw ShrinkNotAllowed("grow_hidden: " + std::to_string(state.hidden) +
                           " -> " + std::to_string(new_h));
  }
  if (new_h == state.hidden) return state;

  MlpState grown = state;
  grown.hidden = new_h;
  grown.w1.conservativeResize(new_h, state.input_dim());
  grown.b1.conservativeResize(new_h);
  grown.b1.tail(new_h - state.hidden).setZero();
  grown.w2.conservativeResize(state.output_dim(), new_h);
  fill_w1_rows(grown.w1, seed, state.hidden, state.init_scale);
  fill_w2_cols(grown.w2, seed, state.hidden, state.init_scale);
  return grown;
}

std::vector<MlpCurvePoint> reuse_sweep(const Dataset& ds,
                                       const std::vector<Index>& h_list,
                                       std::optional<Index> switch_off_h,
                                       const TrainConfig& cfg,
                                       double init_scale) {
  for (std::size_t i = 1; i < h_list.size(); ++i) {
    if (h_list[i] <= h_list[i - 1])
      throw Error("reuse_sweep: h_list must be increasing");
  }

  const Matrix x_train = ds.train_inputs();
  const Matrix z_train = ds.train_targets();
  const IntVector y_train = ds.train_labels();
  const Matrix x_test = ds.test_inputs();
  const Matrix z_test = ds.test_targets();
  const IntVector y_test = ds.test_labels();

  std::vector<MlpCurvePoint> points;
  points.reserve(h_list.size());
  std::optional<MlpState> chain;

  for (Index h : h_list) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool reuse = !switch_off_h.has_value() || h <= *switch_off_h;
    MlpState state =
        (reuse && chain.has_value())
            ? grow_hidden(*chain,
                          derive_key({cfg.seed, kTagChainGrow,
                                      static_cast<std::uint64_t>(h)}),
                          h)
            : init_mlp(derive_key({cfg.seed, kTagChainInit,
                                   static_cast<std::uint64_t>(h)}),
                       ds.input_dim(), h, ds.num_classes(), init_scale);

    TrainConfig cfg_h = cfg;
    cfg_h.seed =
        derive_key({cfg.seed, kTagChainTrain, static_cast<std::uint64_t>(h)});
    const Index epochs_before = state.total_epochs_trained;
    const TrainLog log = train_mlp(state, ds, cfg_h);
    (void)log;

    MlpCurvePoint pt;
    pt.hidden = h;
    pt.seed = cfg_h.seed;
    pt.num_params = state.param_count();
    const Matrix pred_train = mlp_forward(state, x_train);
    const Matrix pred_test = mlp_forward(state, x_test);
    pt.train_mse = mean_squared_error(pred_train, z_train);
    pt.test_mse = mean_squared_error(pred_test, z_test);
    pt.train_error_rate = classification_error_rate(pred_train, y_train);
    pt.test_error_rate = classification_error_rate(pred_test, y_test);
    pt.weight_l2 = state.weight_l2();
    pt.epochs_trained = state.total_epochs_trained - epochs_before;
    pt.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    points.push_back(pt);

    if (reuse) chain = std::move(state);
  }
  return points;
}

}  // namespace descentlab
