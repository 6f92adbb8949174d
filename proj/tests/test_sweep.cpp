#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "descentlab/config.hpp"
#include "descentlab/sweep.hpp"

using namespace descentlab;

namespace {

SweepConfig tiny_feature_config() {
  SweepConfig cfg;
  cfg.experiment = Experiment::FeatureSweep;
  cfg.data.source = DataSpec::Source::Synthetic;
  cfg.data.n_train = 40;
  cfg.data.n_test = 20;
  cfg.data.seed = 3;
  cfg.data.synth_classes = 3;
  cfg.data.synth_dim = 4;
  cfg.data.synth_center_scale = 1.5;
  cfg.d_grid = {0, 5, 20, 60};
  cfg.lambda_grid = {1e-8};
  cfg.r_grid = {0.0};
  cfg.repeats = 2;
  cfg.master_seed = 11;
  return cfg;
}

CurvePoint make_point(Index capacity, double test_mse, Index repeat) {
  CurvePoint p;
  p.experiment = "feature_sweep";
  p.seed = repeat;
  p.capacity = capacity;
  p.num_params = (capacity + 1) * 3;
  p.lambda = 1e-8;
  p.R = 0.0;
  p.train_mse = 0.0;
  p.test_mse = test_mse;
  return p;
}

bool same_numbers(const CurvePoint& a, const CurvePoint& b) {
  auto eq = [](double x, double y) {
    return (std::isnan(x) && std::isnan(y)) || x == y;
  };
  return a.experiment == b.experiment && a.seed == b.seed &&
         a.capacity == b.capacity && a.num_params == b.num_params &&
         eq(a.lambda, b.lambda) && eq(a.R, b.R) &&
         eq(a.train_mse, b.train_mse) && eq(a.test_mse, b.test_mse) &&
         eq(a.train_error_rate, b.train_error_rate) &&
         eq(a.test_error_rate, b.test_error_rate) &&
         eq(a.weight_l2, b.weight_l2) &&
         a.epochs_trained == b.epochs_trained && a.error == b.error;
}

}  // namespace

TEST_CASE("default_feature_grid spans 10..3N and densifies near N") {
  const auto grid = default_feature_grid(300);
  CHECK(grid.front() == 10);
  CHECK(grid.back() == 900);
  Index dense = 0;
  for (Index d : grid)
    if (d >= 240 && d <= 360) ++dense;
  CHECK(dense >= 8);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}

TEST_CASE("run_feature_sweep emits a full deterministic grid") {
  const SweepConfig cfg = tiny_feature_config();
  const auto points = run_feature_sweep(cfg);
  REQUIRE(points.size() == cfg.d_grid.size() * 2);

  SUBCASE("rows follow grid order with repeats innermost") {
    CHECK(points[0].capacity == 0);
    CHECK(points[1].capacity == 0);
    CHECK(points[2].capacity == 5);
    CHECK(points.back().capacity == 60);
  }
  SUBCASE("re-running reproduces every number") {
    const auto again = run_feature_sweep(cfg);
    REQUIRE(again.size() == points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
      CHECK(same_numbers(points[i], again[i]));
  }
  SUBCASE("jobs > 1 produces the identical rows") {
    SweepConfig par = cfg;
    par.jobs = 3;
    const auto threaded = run_feature_sweep(par);
    REQUIRE(threaded.size() == points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
      CHECK(same_numbers(points[i], threaded[i]));
  }
  SUBCASE("no error rows on a healthy grid") {
    for (const auto& p : points) CHECK(p.error.empty());
  }
}

TEST_CASE("bias-only model matches the mean predictor in closed form") {
  SweepConfig cfg = tiny_feature_config();
  cfg.d_grid = {0};
  cfg.repeats = 1;
  const auto points = run_feature_sweep(cfg);
  REQUIRE(points.size() == 1);

  // With a single constant column and tiny lambda the solution is the
  // column-mean of the targets; the train mse is the variance around it.
  const Dataset ds = build_dataset(cfg.data);
  const Matrix z = ds.train_targets();
  const Matrix mean = z.colwise().mean();
  double var = 0.0;
  for (Index i = 0; i < z.rows(); ++i)
    var += (z.row(i) - mean).squaredNorm();
  var /= static_cast<double>(z.rows() * z.cols());
  CHECK(points[0].train_mse == doctest::Approx(var).epsilon(1e-6));
}

TEST_CASE("anchors change over-parameterized solutions") {
  SweepConfig cfg = tiny_feature_config();
  cfg.experiment = Experiment::AnchorSweep;
  cfg.d_grid = {60};
  cfg.repeats = 1;
  cfg.r_grid = {0.0, 50.0};
  const auto points = run_feature_sweep(cfg);
  REQUIRE(points.size() == 2);
  CHECK(points[0].R == 0.0);
  CHECK(points[1].R == 50.0);
  CHECK(points[1].weight_l2 > points[0].weight_l2);
  CHECK(points[1].test_mse > points[0].test_mse);
}

TEST_CASE("run_nn_sweep") {
  SweepConfig cfg;
  cfg.experiment = Experiment::NnScratchSweep;
  cfg.data.source = DataSpec::Source::Synthetic;
  cfg.data.n_train = 30;
  cfg.data.n_test = 15;
  cfg.data.seed = 5;
  cfg.data.synth_classes = 3;
  cfg.data.synth_dim = 4;
  cfg.train.max_epochs = 5;
  cfg.train.batch_size = 8;
  cfg.h_grid = {1};
  cfg.repeats = 1;

  SUBCASE("a single tiny network gives one point") {
    const auto points = run_nn_sweep(cfg);
    REQUIRE(points.size() == 1);
    CHECK(points[0].capacity == 1);
    CHECK(points[0].epochs_trained.has_value());
    CHECK(*points[0].epochs_trained == 5);
    CHECK(points[0].num_params == 1 * 4 + 1 + 3 * 1 + 3);
    CHECK(points[0].error.empty());
  }
  SUBCASE("chain failures become marked rows, not aborts") {
    SweepConfig bad = cfg;
    bad.train.batch_size = 500;  // larger than the train split
    const auto points = run_nn_sweep(bad);
    REQUIRE(points.size() == 1);
    CHECK_FALSE(points[0].error.empty());
    CHECK(std::isnan(points[0].test_mse));
  }
  SUBCASE("feature experiments are rejected") {
    SweepConfig wrong = cfg;
    wrong.experiment = Experiment::FeatureSweep;
    wrong.d_grid = {2};
    CHECK_THROWS_AS(run_nn_sweep(wrong), ConfigError);
  }
}

TEST_CASE("summarize") {
  SUBCASE("monotone decreasing curve peaks at the smallest interior capacity") {
    std::vector<CurvePoint> pts;
    for (Index c : {10, 20, 30, 40})
      pts.push_back(make_point(c, 1.0 / c, 0));
    const CurveSummary s = summarize(pts);
    CHECK(s.peak_capacity == 20);
    CHECK(s.tail_test_mse == doctest::Approx(1.0 / 40));
    CHECK(s.largest_drop_capacity == 10);
  }
  SUBCASE("V-then-descent fixture peaks at capacity 50") {
    std::vector<CurvePoint> pts;
    const double shape[] = {0.5, 0.3, 0.9, 2.0, 0.4, 0.2};
    const Index caps[] = {10, 30, 40, 50, 70, 100};
    for (int i = 0; i < 6; ++i) pts.push_back(make_point(caps[i], shape[i], 0));
    const CurveSummary s = summarize(pts);
    CHECK(s.peak_capacity == 50);
    CHECK(s.peak_test_mse == doctest::Approx(2.0));
    CHECK(s.second_descent_ratio == doctest::Approx(10.0));
    CHECK(s.largest_drop_capacity == 50);
  }
  SUBCASE("repeats are averaged per capacity before anything else") {
    std::vector<CurvePoint> pts;
    pts.push_back(make_point(10, 1.0, 0));
    pts.push_back(make_point(10, 3.0, 1));
    pts.push_back(make_point(20, 5.0, 0));
    pts.push_back(make_point(20, 1.0, 1));
    pts.push_back(make_point(30, 0.5, 0));
    pts.push_back(make_point(30, 0.5, 1));
    const CurveSummary s = summarize(pts);
    CHECK(s.peak_capacity == 20);
    CHECK(s.peak_test_mse == doctest::Approx(3.0));  // (5+1)/2
    CHECK(s.tail_test_mse == doctest::Approx(0.5));
  }
  SUBCASE("empty input and mixed cells are rejected") {
    CHECK_THROWS_AS(summarize({}), EmptyInput);
    std::vector<CurvePoint> mixed{make_point(10, 1.0, 0)};
    mixed.push_back(make_point(20, 1.0, 0));
    mixed.back().lambda = 1.0;
    CHECK_THROWS_AS(summarize(mixed), Error);
  }
  SUBCASE("error rows are excluded from the means") {
    std::vector<CurvePoint> pts;
    pts.push_back(make_point(10, 1.0, 0));
    pts.push_back(make_point(20, 2.0, 0));
    CurvePoint bad = make_point(20, 99.0, 1);
    bad.error = "solver exploded";
    bad.test_mse = std::numeric_limits<double>::quiet_NaN();
    pts.push_back(bad);
    pts.push_back(make_point(30, 0.5, 0));
    const CurveSummary s = summarize(pts);
    CHECK(s.peak_test_mse == doctest::Approx(2.0));
  }
}

TEST_CASE("csv round-trip preserves every field") {
  SweepConfig cfg = tiny_feature_config();
  cfg.d_grid = {0, 5};
  auto points = run_feature_sweep(cfg);
  CurvePoint bad;
  bad.experiment = "feature_sweep";
  bad.capacity = 7;
  bad.lambda = 1e-8;
  bad.train_mse = bad.test_mse = std::numeric_limits<double>::quiet_NaN();
  bad.train_error_rate = bad.test_error_rate = bad.weight_l2 =
      std::numeric_limits<double>::quiet_NaN();
  bad.error = "broken, on purpose";
  points.push_back(bad);

  const std::string path = "descentlab_test_roundtrip.csv";
  write_csv(points, path);
  const auto back = read_csv(path);
  REQUIRE(back.size() == points.size());
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    CHECK(same_numbers(points[i], back[i]));
  CHECK(back.back().error == "broken; on purpose");  // sanitized comma
  CHECK(std::isnan(back.back().test_mse));
  std::remove(path.c_str());
}

TEST_CASE("read_csv rejects foreign headers") {
  const std::string path = "descentlab_test_badheader.csv";
  {
    std::ofstream out(path);
    out << "a,b,c\n1,2,3\n";
  }
  CHECK_THROWS_AS(read_csv(path), SchemaMismatch);
  std::remove(path.c_str());
}

TEST_CASE("summary json lists one entry per cell") {
  SweepConfig cfg = tiny_feature_config();
  cfg.d_grid = {0, 5, 20};
  cfg.lambda_grid = {1e-8, 1.0};
  cfg.repeats = 1;
  const auto points = run_feature_sweep(cfg);
  const std::string path = "descentlab_test_summary.json";
  write_summary_json(cfg, points, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("threshold_params") != std::string::npos);
  CHECK(text.find("\"cells\"") != std::string::npos);
  // 2 lambda cells x 1 R cell
  CHECK(std::count(text.begin(), text.end(), '{') >= 3);
  std::remove(path.c_str());
}

TEST_CASE("config parsing") {
  SUBCASE("round-trips through serialize_config") {
    SweepConfig cfg = tiny_feature_config();
    cfg.switch_off_h = 12;
    const SweepConfig back = parse_config_text(serialize_config(cfg));
    CHECK(serialize_config(back) == serialize_config(cfg));
  }
  SUBCASE("unknown keys are an error") {
    CHECK_THROWS_AS(parse_config_text("unknown_key = 3\n"), ConfigError);
  }
  SUBCASE("missing '=' is an error") {
    CHECK_THROWS_AS(parse_config_text("experiment feature_sweep\n"),
                    ConfigError);
  }
  SUBCASE("comments and blank lines are skipped") {
    const SweepConfig cfg = parse_config_text(
        "# a comment\n\nexperiment = lambda_sweep  # trailing\n");
    CHECK(cfg.experiment == Experiment::LambdaSweep);
  }
  SUBCASE("d_grid auto expands from n_train") {
    const SweepConfig cfg =
        parse_config_text("n_train = 300\nd_grid = auto\n");
    CHECK(cfg.d_grid == default_feature_grid(300));
  }
  SUBCASE("switch_off_h accepts never") {
    const SweepConfig cfg = parse_config_text("switch_off_h = never\n");
    CHECK_FALSE(cfg.switch_off_h.has_value());
    const SweepConfig cfg2 = parse_config_text("switch_off_h = 7\n");
    CHECK(cfg2.switch_off_h == Index{7});
  }
  SUBCASE("overrides apply after the config and reject conflicts") {
    SweepConfig cfg = parse_config_text("n_train = 10\n");
    apply_overrides(cfg, {"n_train=20", "n_test=5", "n_train=20"});
    CHECK(cfg.data.n_train == 20);
    CHECK_THROWS_AS(apply_overrides(cfg, {"n_train=1", "n_train=2"}),
                    ConfigError);
    CHECK_THROWS_AS(apply_overrides(cfg, {"notakey"}), ConfigError);
  }
  SUBCASE("validation catches malformed grids") {
    SweepConfig cfg = tiny_feature_config();
    cfg.d_grid = {5, 5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.d_grid = {};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_feature_config();
    cfg.repeats = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("config hash is stable and value-sensitive") {
    SweepConfig a = tiny_feature_config();
    SweepConfig b = tiny_feature_config();
    CHECK(config_hash(a) == config_hash(b));
    b.master_seed = 999;
    CHECK(config_hash(a) != config_hash(b));
  }
  SUBCASE("the default template parses cleanly") {
    const SweepConfig cfg = parse_config_text(default_config_text());
    CHECK(cfg.experiment == Experiment::FeatureSweep);
    CHECK(cfg.data.n_train == 300);
  }
}
