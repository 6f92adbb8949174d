#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "descentlab/config.hpp"
#include "descentlab/dataset.hpp"
#include "descentlab/features.hpp"
#include "descentlab/mlp.hpp"
#include "descentlab/oracle.hpp"
#include "descentlab/plot.hpp"
#include "descentlab/solver.hpp"
#include "descentlab/sweep.hpp"

namespace py = pybind11;
using namespace descentlab;

PYBIND11_MODULE(_core, m) {
  m.doc() = "descent-lab: anchored ridge / min-norm regression over random "
            "ReLU features, MLP weight-reuse training, and the experiment "
            "sweep harness";

  py::register_exception<Error>(m, "DescentlabError", PyExc_RuntimeError);

  // dataset
  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readonly("inputs", &Dataset::inputs)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("targets", &Dataset::targets)
      .def_readonly("train", &Dataset::train)
      .def_readonly("test", &Dataset::test)
      .def_property_readonly("num_classes", &Dataset::num_classes)
      .def_property_readonly("input_dim", &Dataset::input_dim)
      .def_property_readonly("total_rows", &Dataset::total_rows)
      .def("train_inputs", &Dataset::train_inputs)
      .def("train_targets", &Dataset::train_targets)
      .def("train_labels", &Dataset::train_labels)
      .def("test_inputs", &Dataset::test_inputs)
      .def("test_targets", &Dataset::test_targets)
      .def("test_labels", &Dataset::test_labels);

  py::enum_<SplitMode>(m, "SplitMode")
      .value("Uniform", SplitMode::Uniform)
      .value("Balanced", SplitMode::Balanced);

  m.def("load_mnist_idx", &load_mnist_idx, py::arg("images_path"),
        py::arg("labels_path"));
  m.def("subsample_and_split", &subsample_and_split, py::arg("dataset"),
        py::arg("seed"), py::arg("n_train"), py::arg("n_test"),
        py::arg("mode") = SplitMode::Uniform);
  m.def("synth_gaussian_classes", &synth_gaussian_classes, py::arg("seed"),
        py::arg("n_per_class"), py::arg("num_classes"), py::arg("input_dim"),
        py::arg("center_scale"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("one_hot", &one_hot, py::arg("labels"), py::arg("num_classes"));

  // features
  py::class_<FeatureMap>(m, "FeatureMap")
      .def_readonly("seed", &FeatureMap::seed)
      .def_readonly("input_dim", &FeatureMap::input_dim)
      .def_readonly("num_features", &FeatureMap::num_features)
      .def_readonly("include_bias", &FeatureMap::include_bias)
      .def_readonly("projection", &FeatureMap::projection)
      .def_property_readonly("output_dim", &FeatureMap::output_dim);

  m.def("make_feature_map", &make_feature_map, py::arg("seed"), py::arg("P"),
        py::arg("D"), py::arg("include_bias") = true,
        py::arg("feature_scale") = 1.0);
  m.def("transform", &transform, py::arg("feature_map"), py::arg("X"));

  // solver
  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("weights", &SolveResult::weights)
      .def_readonly("train_mse", &SolveResult::train_mse)
      .def_readonly("weight_l2", &SolveResult::weight_l2)
      .def_readonly("per_output_norms", &SolveResult::per_output_norms)
      .def_readonly("residual_norm", &SolveResult::residual_norm)
      .def_readonly("rank", &SolveResult::rank);

  m.def(
      "anchored_ridge_solve",
      [](const Matrix& features, const Matrix& targets, double lambda,
         const std::optional<Matrix>& anchor) {
        RidgeProblem prob;
        prob.features = features;
        prob.targets = targets;
        prob.lambda = lambda;
        if (anchor.has_value()) prob.anchor = *anchor;
        return anchored_ridge_solve(prob);
      },
      py::arg("features"), py::arg("targets"), py::arg("lambda_"),
      py::arg("anchor") = std::nullopt);
  m.def("min_norm_solve", &min_norm_solve, py::arg("features"),
        py::arg("targets"));
  m.def("sample_anchor", &sample_anchor, py::arg("seed"), py::arg("M"),
        py::arg("K"), py::arg("R"));
  m.def(
      "evaluate",
      [](const Matrix& W, const Matrix& phi, const Matrix& Z,
         const IntVector& labels) {
        const EvalMetrics metrics = evaluate(W, phi, Z, labels);
        return py::make_tuple(metrics.mse, metrics.error_rate);
      },
      py::arg("weights"), py::arg("features"), py::arg("targets"),
      py::arg("labels"));
  m.def("numerical_rank", &numerical_rank, py::arg("matrix"));

  // oracle
  py::class_<SolutionSetDescription>(m, "SolutionSetDescription")
      .def_readonly("particular", &SolutionSetDescription::particular)
      .def_readonly("nullspace_basis", &SolutionSetDescription::nullspace_basis)
      .def_readonly("dim", &SolutionSetDescription::dim);
  py::class_<GdResult>(m, "GdResult")
      .def_readonly("w", &GdResult::w)
      .def_readonly("converged", &GdResult::converged)
      .def_readonly("steps", &GdResult::steps)
      .def_readonly("grad_norm", &GdResult::grad_norm);

  m.def("solution_set", &solution_set, py::arg("features"), py::arg("z"));
  m.def("gd_minimize_eq2", &gd_minimize_eq2, py::arg("features"), py::arg("z"),
        py::arg("lambda_"), py::arg("p"), py::arg("max_steps") = 2000000,
        py::arg("step_size") = 0.0);
  m.def("nested_norm_curve", &nested_norm_curve, py::arg("seed"),
        py::arg("dataset"), py::arg("d_list"), py::arg("lambda_") = 0.0);
  m.def("run_oracle_suite", [](std::uint64_t seed) {
    std::ostringstream out;
    const int failures = run_oracle_suite(seed, out);
    return py::make_tuple(failures, out.str());
  });

  // mlp
  py::class_<MlpState> mlp_state(m, "MlpState");
  py::enum_<MlpState::StopReason>(mlp_state, "StopReason")
      .value("EpochCap", MlpState::StopReason::EpochCap)
      .value("EarlyStopped", MlpState::StopReason::EarlyStopped);
  mlp_state.def_readonly("w1", &MlpState::w1)
      .def_readonly("b1", &MlpState::b1)
      .def_readonly("w2", &MlpState::w2)
      .def_readonly("b2", &MlpState::b2)
      .def_readonly("hidden", &MlpState::hidden)
      .def_readonly("init_scale", &MlpState::init_scale)
      .def_readonly("total_epochs_trained", &MlpState::total_epochs_trained)
      .def_readonly("stop_reason", &MlpState::stop_reason)
      .def_property_readonly("param_count", &MlpState::param_count)
      .def("weight_l2", &MlpState::weight_l2);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("val_fraction", &TrainConfig::val_fraction)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("early_stop", &TrainConfig::early_stop);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("train_mse", &EpochRecord::train_mse)
      .def_readonly("val_mse", &EpochRecord::val_mse);
  py::class_<TrainLog>(m, "TrainLog")
      .def_readonly("epochs", &TrainLog::epochs)
      .def_readonly("w1_norm", &TrainLog::w1_norm)
      .def_readonly("b1_norm", &TrainLog::b1_norm)
      .def_readonly("w2_norm", &TrainLog::w2_norm)
      .def_readonly("b2_norm", &TrainLog::b2_norm);
  py::class_<MlpCurvePoint>(m, "MlpCurvePoint")
      .def_readonly("hidden", &MlpCurvePoint::hidden)
      .def_readonly("seed", &MlpCurvePoint::seed)
      .def_readonly("num_params", &MlpCurvePoint::num_params)
      .def_readonly("train_mse", &MlpCurvePoint::train_mse)
      .def_readonly("test_mse", &MlpCurvePoint::test_mse)
      .def_readonly("train_error_rate", &MlpCurvePoint::train_error_rate)
      .def_readonly("test_error_rate", &MlpCurvePoint::test_error_rate)
      .def_readonly("weight_l2", &MlpCurvePoint::weight_l2)
      .def_readonly("epochs_trained", &MlpCurvePoint::epochs_trained)
      .def_readonly("wall_time_ms", &MlpCurvePoint::wall_time_ms);

  m.def("init_mlp", &init_mlp, py::arg("seed"), py::arg("P"), py::arg("h"),
        py::arg("K"), py::arg("init_scale"));
  m.def("mlp_forward", &mlp_forward, py::arg("state"), py::arg("X"));
  m.def("sgd_epoch", &sgd_epoch, py::arg("state"), py::arg("X"), py::arg("Z"),
        py::arg("config"));
  m.def("train_mlp", &train_mlp, py::arg("state"), py::arg("dataset"),
        py::arg("config"));
  m.def("grow_hidden", &grow_hidden, py::arg("state"), py::arg("seed"),
        py::arg("new_h"));
  m.def("reuse_sweep", &reuse_sweep, py::arg("dataset"), py::arg("h_list"),
        py::arg("switch_off_h"), py::arg("config"), py::arg("init_scale"));

  // sweep harness
  py::enum_<Experiment>(m, "Experiment")
      .value("FeatureSweep", Experiment::FeatureSweep)
      .value("AnchorSweep", Experiment::AnchorSweep)
      .value("LambdaSweep", Experiment::LambdaSweep)
      .value("NnReuseSweep", Experiment::NnReuseSweep)
      .value("NnScratchSweep", Experiment::NnScratchSweep);

  py::class_<DataSpec> data_spec(m, "DataSpec");
  py::enum_<DataSpec::Source>(data_spec, "Source")
      .value("Synthetic", DataSpec::Source::Synthetic)
      .value("Mnist", DataSpec::Source::Mnist)
      .value("Cache", DataSpec::Source::Cache);
  data_spec.def(py::init<>())
      .def_readwrite("source", &DataSpec::source)
      .def_readwrite("n_train", &DataSpec::n_train)
      .def_readwrite("n_test", &DataSpec::n_test)
      .def_readwrite("seed", &DataSpec::seed)
      .def_readwrite("balanced", &DataSpec::balanced)
      .def_readwrite("mnist_images", &DataSpec::mnist_images)
      .def_readwrite("mnist_labels", &DataSpec::mnist_labels)
      .def_readwrite("cache_path", &DataSpec::cache_path)
      .def_readwrite("synth_classes", &DataSpec::synth_classes)
      .def_readwrite("synth_dim", &DataSpec::synth_dim)
      .def_readwrite("synth_per_class", &DataSpec::synth_per_class)
      .def_readwrite("synth_center_scale", &DataSpec::synth_center_scale);

  py::class_<SweepConfig>(m, "SweepConfig")
      .def(py::init<>())
      .def_readwrite("experiment", &SweepConfig::experiment)
      .def_readwrite("data", &SweepConfig::data)
      .def_readwrite("d_grid", &SweepConfig::d_grid)
      .def_readwrite("h_grid", &SweepConfig::h_grid)
      .def_readwrite("lambda_grid", &SweepConfig::lambda_grid)
      .def_readwrite("r_grid", &SweepConfig::r_grid)
      .def_readwrite("repeats", &SweepConfig::repeats)
      .def_readwrite("master_seed", &SweepConfig::master_seed)
      .def_readwrite("switch_off_h", &SweepConfig::switch_off_h)
      .def_readwrite("train", &SweepConfig::train)
      .def_readwrite("init_scale", &SweepConfig::init_scale)
      .def_readwrite("feature_scale", &SweepConfig::feature_scale)
      .def_readwrite("anchor_per_column", &SweepConfig::anchor_per_column)
      .def_readwrite("out_csv", &SweepConfig::out_csv)
      .def_readwrite("jobs", &SweepConfig::jobs)
      .def("validate", &SweepConfig::validate);

  py::class_<CurvePoint>(m, "CurvePoint")
      .def_readonly("experiment", &CurvePoint::experiment)
      .def_readonly("seed", &CurvePoint::seed)
      .def_readonly("capacity", &CurvePoint::capacity)
      .def_readonly("num_params", &CurvePoint::num_params)
      .def_readonly("lambda_", &CurvePoint::lambda)
      .def_readonly("R", &CurvePoint::R)
      .def_readonly("train_mse", &CurvePoint::train_mse)
      .def_readonly("test_mse", &CurvePoint::test_mse)
      .def_readonly("train_error_rate", &CurvePoint::train_error_rate)
      .def_readonly("test_error_rate", &CurvePoint::test_error_rate)
      .def_readonly("weight_l2", &CurvePoint::weight_l2)
      .def_readonly("epochs_trained", &CurvePoint::epochs_trained)
      .def_readonly("wall_time_ms", &CurvePoint::wall_time_ms)
      .def_readonly("error", &CurvePoint::error);

  py::class_<CurveSummary>(m, "CurveSummary")
      .def_readonly("peak_capacity", &CurveSummary::peak_capacity)
      .def_readonly("peak_test_mse", &CurveSummary::peak_test_mse)
      .def_readonly("tail_test_mse", &CurveSummary::tail_test_mse)
      .def_readonly("second_descent_ratio", &CurveSummary::second_descent_ratio)
      .def_readonly("largest_drop_capacity",
                    &CurveSummary::largest_drop_capacity);

  m.def("build_dataset", &build_dataset, py::arg("spec"));
  m.def("default_feature_grid", &default_feature_grid, py::arg("n_train"));
  m.def("run_feature_sweep", &run_feature_sweep, py::arg("config"));
  m.def("run_nn_sweep", &run_nn_sweep, py::arg("config"));
  m.def("summarize", &summarize, py::arg("points"));
  m.def("write_csv", &write_csv, py::arg("points"), py::arg("path"));
  m.def("read_csv", &read_csv, py::arg("path"));
  m.def("write_summary_json", &write_summary_json, py::arg("config"),
        py::arg("points"), py::arg("path"));
  m.def("parse_config_text", &parse_config_text, py::arg("text"),
        py::arg("origin") = "<string>");
  m.def("parse_config_file", &parse_config_file, py::arg("path"));
  m.def("serialize_config", &serialize_config, py::arg("config"));
  m.def("config_hash", &config_hash, py::arg("config"));
  m.def("default_config_text", &default_config_text);

  py::class_<PlotArtifacts>(m, "PlotArtifacts")
      .def_readonly("script_path", &PlotArtifacts::script_path)
      .def_readonly("mean_csv_path", &PlotArtifacts::mean_csv_path)
      .def_readonly("num_cells", &PlotArtifacts::num_cells);
  m.def("emit_plot_script", &emit_plot_script, py::arg("csv_path"),
        py::arg("out_dir") = "");
}
