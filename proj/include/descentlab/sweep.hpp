#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "descentlab/common.hpp"
#include "descentlab/dataset.hpp"
#include "descentlab/mlp.hpp"

namespace descentlab {

enum class Experiment {
  FeatureSweep,
  AnchorSweep,
  LambdaSweep,
  NnReuseSweep,
  NnScratchSweep,
};

std::string experiment_name(Experiment e);
Experiment experiment_from_name(const std::string& name);
bool is_feature_experiment(Experiment e);

struct DataSpec {
  enum class Source { Synthetic, Mnist, Cache };
  Source source = Source::Synthetic;
  Index n_train = 0;
  Index n_test = 0;
  std::uint64_t seed = 1;
  bool balanced = false;
  std::string mnist_images;
  std::string mnist_labels;
  std::string cache_path;
  Index synth_classes = 10;
  Index synth_dim = 20;
  Index synth_per_class = 0;  // 0 = just enough for n_train + n_test
  double synth_center_scale = 1.0;
};

// Declarative description of one experiment grid. Parsed from the flat
// `key = value` config format (see config.hpp) or built programmatically.
struct SweepConfig {
  Experiment experiment = Experiment::FeatureSweep;
  DataSpec data;
  std::vector<Index> d_grid;  // feature experiments
  std::vector<Index> h_grid;  // nn experiments
  std::vector<double> lambda_grid{1e-8};
  std::vector<double> r_grid{0.0};
  Index repeats = 1;
  std::uint64_t master_seed = 1;
  // nn_reuse_sweep: capacity after which networks train from scratch;
  // nullopt = never switch off (pure weight-reuse chain).
  std::optional<Index> switch_off_h;
  TrainConfig train;
  double init_scale = 0.1;
  double feature_scale = 1.0;
  bool anchor_per_column = false;  // default: one sphere draw shared by all outputs
  std::string out_csv;
  Index jobs = 1;

  void validate() const;
};

// One measured point on an error-vs-capacity curve. A non-empty `error`
// marks a failed point; its metrics are NaN and it is skipped by summaries.
struct CurvePoint {
  std::string experiment;
  std::uint64_t seed = 0;
  Index capacity = 0;  // D for feature models, h for networks
  Index num_params = 0;
  double lambda = 0.0;
  double R = 0.0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double train_error_rate = 0.0;
  double test_error_rate = 0.0;
  double weight_l2 = 0.0;
  std::optional<Index> epochs_trained;  // networks only
  std::int64_t wall_time_ms = 0;
  std::string error;
};

// Constructs the dataset named by the spec and applies the subsample/split.
// Relative mnist/cache paths resolve against $DESCENTLAB_DATA_DIR when set.
Dataset build_dataset(const DataSpec& spec);

// Geometric grid from 10 to 3N, densified within +-20% of the interpolation
// point D = N.
std::vector<Index> default_feature_grid(Index n_train);

// Runs the feature-model grid: for every (lambda, R, D, repeat) build the
// nested feature map, solve the anchored ridge (min-norm when lambda = 0)
// and evaluate both splits. Rows come back in deterministic grid order
// (lambda, then R, then D, then repeat) regardless of the jobs count.
std::vector<CurvePoint> run_feature_sweep(const SweepConfig& cfg);

// Runs the network protocols: weight-reuse chains (with the configured
// switch-off point) or from-scratch trainings per h. Rows are ordered by
// (h, repeat).
std::vector<CurvePoint> run_nn_sweep(const SweepConfig& cfg);

struct CurveSummary {
  Index peak_capacity = 0;
  double peak_test_mse = 0.0;
  double tail_test_mse = 0.0;
  double second_descent_ratio = 0.0;
  Index largest_drop_capacity = 0;
};

// Points must share (experiment, lambda, R); repeats are averaged per
// capacity first. The peak is the argmax of mean test mse over interior
// capacities; largest_drop_capacity is the left edge of the steepest
// decrease between consecutive grid points. Throws EmptyInput.
CurveSummary summarize(const std::vector<CurvePoint>& points);

struct CellKey {
  double lambda = 0.0;
  double R = 0.0;
};

// Splits rows into (lambda, R) cells, preserving first-seen order, and
// summarizes each.
std::vector<std::pair<CellKey, CurveSummary>> summarize_cells(
    const std::vector<CurvePoint>& points);

// CSV with the exact CurvePoint column order, floats as shortest
// round-trip decimals. read_csv throws SchemaMismatch on a bad header.
void write_csv(const std::vector<CurvePoint>& points, const std::string& path);
std::vector<CurvePoint> read_csv(const std::string& path);
extern const char* const kCsvHeader;

// Companion JSON: dataset scale, the N*K threshold and one summary per cell.
void write_summary_json(const SweepConfig& cfg,
                        const std::vector<CurvePoint>& points,
                        const std::string& path);

}  // namespace descentlab
