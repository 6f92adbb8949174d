"""descent-lab: error-vs-capacity experiments for linear feature models and
small MLPs, built on a deterministic C++ core."""

from ._core import (  # noqa: F401
    CurvePoint,
    CurveSummary,
    DataSpec,
    Dataset,
    DescentlabError,
    EpochRecord,
    Experiment,
    FeatureMap,
    GdResult,
    MlpCurvePoint,
    MlpState,
    PlotArtifacts,
    SolutionSetDescription,
    SolveResult,
    SplitMode,
    SweepConfig,
    TrainConfig,
    TrainLog,
    anchored_ridge_solve,
    build_dataset,
    config_hash,
    default_config_text,
    default_feature_grid,
    emit_plot_script,
    evaluate,
    gd_minimize_eq2,
    grow_hidden,
    init_mlp,
    load_dataset,
    load_mnist_idx,
    make_feature_map,
    min_norm_solve,
    mlp_forward,
    nested_norm_curve,
    numerical_rank,
    one_hot,
    parse_config_file,
    parse_config_text,
    read_csv,
    reuse_sweep,
    run_feature_sweep,
    run_nn_sweep,
    run_oracle_suite,
    sample_anchor,
    save_dataset,
    serialize_config,
    sgd_epoch,
    solution_set,
    subsample_and_split,
    summarize,
    synth_gaussian_classes,
    train_mlp,
    transform,
    write_csv,
    write_summary_json,
)

__version__ = "0.1.0"
