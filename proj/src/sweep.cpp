#include "descentlab/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "descentlab/features.hpp"
#include "descentlab/rng.hpp"
#include "descentlab/solver.hpp"

namespace descentlab {

namespace {

constexpr std::uint64_t kTagFeatureMapSeed = 0x0f5eed01u;
constexpr std::uint64_t kTagPointSeed = 0x0f5eed02u;
constexpr std::uint64_t kTagNnChain = 0x0f5eed03u;

double now_nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Runs fn(0..n-1) on up to `jobs` threads. Results must be written to
// pre-allocated slots so completion order never shows in the output.
void parallel_for(Index n, Index jobs, const std::function<void(Index)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  const Index workers = std::min<Index>(jobs, n);
  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (Index t = 0; t < workers; ++t) {
    threads.emplace_back([&] {
      for (;;) {
        const Index i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string resolve_data_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("DESCENTLAB_DATA_DIR");
  if (dir == nullptr || *dir == '\0') return path;
  std::string base(dir);
  if (base.back() != '/') base += '/';
  return base + path;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string sanitize_error(std::string msg) {
  for (char& c : msg) {
    if (c == ',' ) c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return msg;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

const char* const kCsvHeader =
    "experiment,seed,capacity,num_params,lambda,R,train_mse,test_mse,"
    "train_error_rate,test_error_rate,weight_l2,epochs_trained,wall_time_ms,"
    "error";

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::FeatureSweep: return "feature_sweep";
    case Experiment::AnchorSweep: return "anchor_sweep";
    case Experiment::LambdaSweep: return "lambda_sweep";
    case Experiment::NnReuseSweep: return "nn_reuse_sweep";
    case Experiment::NnScratchSweep: return "nn_scratch_sweep";
  }
  throw Error("experiment_name: bad enum value");
}

Experiment experiment_from_name(const std::string& name) {
  if (name == "feature_sweep") return Experiment::FeatureSweep;
  if (name == "anchor_sweep") return Experiment::AnchorSweep;
  if (name == "lambda_sweep") return Experiment::LambdaSweep;
  if (name == "nn_reuse_sweep") return Experiment::NnReuseSweep;
  if (name == "nn_scratch_sweep") return Experiment::NnScratchSweep;
  throw ConfigError("unknown experiment '" + name + "'");
}

bool is_feature_experiment(Experiment e) {
  return e == Experiment::FeatureSweep || e == Experiment::AnchorSweep ||
         e == Experiment::LambdaSweep;
}

void SweepConfig::validate() const {
  auto check_sorted = [](const auto& grid, const char* name) {
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (!(grid[i] > grid[i - 1]))
        throw ConfigError(std::string(name) + " must be strictly increasing");
    }
  };
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (is_feature_experiment(experiment)) {
    if (d_grid.empty()) throw ConfigError("d_grid is empty");
    check_sorted(d_grid, "d_grid");
    if (lambda_grid.empty()) throw ConfigError("lambda_grid is empty");
    check_sorted(lambda_grid, "lambda_grid");
    if (r_grid.empty()) throw ConfigError("r_grid is empty");
    check_sorted(r_grid, "r_grid");
    for (double l : lambda_grid)
      if (l < 0) throw ConfigError("lambda must be >= 0");
    for (double r : r_grid)
      if (r < 0) throw ConfigError("R must be >= 0");
  } else {
    if (h_grid.empty()) throw ConfigError("h_grid is empty");
    check_sorted(h_grid, "h_grid");
  }
  if (data.n_train <= 0) throw ConfigError("n_train must be > 0");
  if (data.n_test <= 0) throw ConfigError("n_test must be > 0");
}

Dataset build_dataset(const DataSpec& spec) {
  const SplitMode mode =
      spec.balanced ? SplitMode::Balanced : SplitMode::Uniform;
  switch (spec.source) {
    case DataSpec::Source::Synthetic: {
      const Index k = spec.synth_classes;
      Index per_class = spec.synth_per_class;
      if (per_class <= 0)
        per_class = (spec.n_train + spec.n_test + k - 1) / k;
      Dataset ds = synth_gaussian_classes(spec.seed, per_class, k,
                                          spec.synth_dim,
                                          spec.synth_center_scale);
      return subsample_and_split(ds, spec.seed, spec.n_train, spec.n_test,
                                 mode);
    }
    case DataSpec::Source::Mnist: {
      Dataset ds = load_mnist_idx(resolve_data_path(spec.mnist_images),
                                  resolve_data_path(spec.mnist_labels));
      return subsample_and_split(ds, spec.seed, spec.n_train, spec.n_test,
                                 mode);
    }
    case DataSpec::Source::Cache: {
      Dataset ds = load_dataset(resolve_data_path(spec.cache_path));
      if (spec.n_train == 0 && spec.n_test == 0) {
        if (ds.train.empty())
          throw ConfigError("cache dataset has no stored split");
        return ds;
      }
      return subsample_and_split(ds, spec.seed, spec.n_train, spec.n_test,
                                 mode);
    }
  }
  throw ConfigError("build_dataset: bad source");
}

std::vector<Index> default_feature_grid(Index n_train) {
  std::set<Index> grid;
  const double lo = 10.0;
  const double hi = 3.0 * static_cast<double>(n_train);
  const int base_points = 16;
  for (int i = 0; i < base_points; ++i) {
    const double t = static_cast<double>(i) / (base_points - 1);
    grid.insert(static_cast<Index>(std::llround(lo * std::pow(hi / lo, t))));
  }
  // Densify around the interpolation point D = N where the peak lives.
  const Index step = std::max<Index>(1, n_train / 25);
  for (Index d = static_cast<Index>(0.8 * n_train);
       d <= static_cast<Index>(1.2 * n_train); d += step)
    grid.insert(d);
  return {grid.begin(), grid.end()};
}

std::vector<CurvePoint> run_feature_sweep(const SweepConfig& cfg) {
  if (!is_feature_experiment(cfg.experiment)) {
    throw ConfigError("run_feature_sweep: experiment " +
                      experiment_name(cfg.experiment) +
                      " is not a feature experiment");
  }
  cfg.validate();
  const Dataset ds = build_dataset(cfg.data);
  const Matrix x_train = ds.train_inputs();
  const Matrix z_train = ds.train_targets();
  const IntVector y_train = ds.train_labels();
  const Matrix x_test = ds.test_inputs();
  const Matrix z_test = ds.test_targets();
  const IntVector y_test = ds.test_labels();
  const Index k = ds.num_classes();
  const Index d_max = cfg.d_grid.back();
  const std::uint64_t exp_tag =
      derive_key({static_cast<std::uint64_t>(cfg.experiment)});

  // One nested feature map per repeat, shared across the whole D grid.
  struct RepeatContext {
    Matrix phi_train;  // N x (d_max + 1)
    Matrix phi_test;
  };
  std::vector<RepeatContext> contexts(static_cast<std::size_t>(cfg.repeats));
  for (Index rep = 0; rep < cfg.repeats; ++rep) {
    const std::uint64_t fm_seed =
        derive_key({cfg.master_seed, kTagFeatureMapSeed, exp_tag,
                    static_cast<std::uint64_t>(rep)});
    const FeatureMap fm = make_feature_map(fm_seed, ds.input_dim(), d_max,
                                           true, cfg.feature_scale);
    contexts[static_cast<std::size_t>(rep)].phi_train = transform(fm, x_train);
    contexts[static_cast<std::size_t>(rep)].phi_test = transform(fm, x_test);
  }

  struct Task {
    std::size_t lambda_idx, r_idx, d_idx;
    Index repeat;
  };
  std::vector<Task> tasks;
  for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li)
    for (std::size_t ri = 0; ri < cfg.r_grid.size(); ++ri)
      for (std::size_t di = 0; di < cfg.d_grid.size(); ++di)
        for (Index rep = 0; rep < cfg.repeats; ++rep)
          tasks.push_back(Task{li, ri, di, rep});

  std::vector<CurvePoint> points(tasks.size());
  parallel_for(
      static_cast<Index>(tasks.size()), cfg.jobs, [&](Index ti) {
        const Task& task = tasks[static_cast<std::size_t>(ti)];
        const auto t0 = std::chrono::steady_clock::now();
        const Index d = cfg.d_grid[task.d_idx];
        const double lambda = cfg.lambda_grid[task.lambda_idx];
        const double radius = cfg.r_grid[task.r_idx];
        const Index m = d + 1;

        CurvePoint pt;
        pt.experiment = experiment_name(cfg.experiment);
        pt.seed = derive_key({cfg.master_seed, kTagPointSeed, exp_tag,
                              static_cast<std::uint64_t>(d),
                              static_cast<std::uint64_t>(task.lambda_idx),
                              static_cast<std::uint64_t>(task.r_idx),
                              static_cast<std::uint64_t>(task.repeat)});
        pt.capacity = d;
        pt.num_params = m * k;
        pt.lambda = lambda;
        pt.R = radius;
        try {
          const RepeatContext& ctx =
              contexts[static_cast<std::size_t>(task.repeat)];
          // Nested slice: first d feature columns plus the bias column.
          Matrix phi_tr(x_train.rows(), m);
          phi_tr.leftCols(d) = ctx.phi_train.leftCols(d);
          phi_tr.col(d) = ctx.phi_train.col(d_max);
          Matrix phi_te(x_test.rows(), m);
          phi_te.leftCols(d) = ctx.phi_test.leftCols(d);
          phi_te.col(d) = ctx.phi_test.col(d_max);

          SolveResult sol;
          if (lambda == 0.0) {
            sol = min_norm_solve(phi_tr, z_train);
          } else {
            RidgeProblem prob;
            prob.features = std::move(phi_tr);
            prob.targets = z_train;
            prob.lambda = lambda;
            if (radius > 0.0) {
              prob.anchor = cfg.anchor_per_column
                                ? sample_anchor(pt.seed, m, k, radius)
                                : sample_anchor(pt.seed, m, 1, radius)
                                      .replicate(1, k);
            }
            sol = anchored_ridge_solve(prob);
            phi_tr = std::move(prob.features);
          }
          const EvalMetrics train_metrics =
              evaluate(sol.weights, phi_tr, z_train, y_train);
          const EvalMetrics test_metrics =
              evaluate(sol.weights, phi_te, z_test, y_test);
          pt.train_mse = train_metrics.mse;
          pt.train_error_rate = train_metrics.error_rate;
          pt.test_mse = test_metrics.mse;
          pt.test_error_rate = test_metrics.error_rate;
          pt.weight_l2 = sol.weight_l2;
        } catch (const Error& e) {
          pt.error = e.what();
          pt.train_mse = pt.test_mse = now_nan();
          pt.train_error_rate = pt.test_error_rate = now_nan();
          pt.weight_l2 = now_nan();
        }
        pt.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        points[static_cast<std::size_t>(ti)] = std::move(pt);
      });
  return points;
}

std::vector<CurvePoint> run_nn_sweep(const SweepConfig& cfg) {
  if (is_feature_experiment(cfg.experiment)) {
    throw ConfigError("run_nn_sweep: experiment " +
                      experiment_name(cfg.experiment) +
                      " is not a network experiment");
  }
  cfg.validate();
  const Dataset ds = build_dataset(cfg.data);
  const std::uint64_t exp_tag =
      derive_key({static_cast<std::uint64_t>(cfg.experiment)});

  // Scratch sweeps reuse the chain runner with a switch-off below every h.
  const std::optional<Index> switch_off =
      cfg.experiment == Experiment::NnScratchSweep ? std::optional<Index>{0}
                                                   : cfg.switch_off_h;

  std::vector<std::vector<MlpCurvePoint>> chains(
      static_cast<std::size_t>(cfg.repeats));
  std::vector<std::string> chain_errors(static_cast<std::size_t>(cfg.repeats));
  parallel_for(cfg.repeats, cfg.jobs, [&](Index rep) {
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_key({cfg.master_seed, kTagNnChain, exp_tag,
                                 static_cast<std::uint64_t>(rep)});
    try {
      chains[static_cast<std::size_t>(rep)] =
          reuse_sweep(ds, cfg.h_grid, switch_off, train_cfg, cfg.init_scale);
    } catch (const Error& e) {
      chain_errors[static_cast<std::size_t>(rep)] = e.what();
    }
  });

  std::vector<CurvePoint> points;
  points.reserve(cfg.h_grid.size() * static_cast<std::size_t>(cfg.repeats));
  for (std::size_t hi = 0; hi < cfg.h_grid.size(); ++hi) {
    for (Index rep = 0; rep < cfg.repeats; ++rep) {
      const auto& chain = chains[static_cast<std::size_t>(rep)];
      CurvePoint pt;
      pt.experiment = experiment_name(cfg.experiment);
      pt.capacity = cfg.h_grid[hi];
      pt.lambda = 0.0;
      pt.R = 0.0;
      if (hi < chain.size()) {
        const MlpCurvePoint& src = chain[hi];
        pt.seed = src.seed;
        pt.num_params = src.num_params;
        pt.train_mse = src.train_mse;
        pt.test_mse = src.test_mse;
        pt.train_error_rate = src.train_error_rate;
        pt.test_error_rate = src.test_error_rate;
        pt.weight_l2 = src.weight_l2;
        pt.epochs_trained = src.epochs_trained;
        pt.wall_time_ms = src.wall_time_ms;
      } else {
        // The whole chain failed before reaching this capacity.
        pt.error = chain_errors[static_cast<std::size_t>(rep)].empty()
                       ? "chain aborted"
                       : chain_errors[static_cast<std::size_t>(rep)];
        pt.train_mse = pt.test_mse = now_nan();
        pt.train_error_rate = pt.test_error_rate = now_nan();
        pt.weight_l2 = now_nan();
      }
      points.push_back(std::move(pt));
    }
  }
  return points;
}

CurveSummary summarize(const std::vector<CurvePoint>& points) {
  if (points.empty()) throw EmptyInput("summarize: no points");
  const double lambda = points.front().lambda;
  const double radius = points.front().R;
  const std::string& exp = points.front().experiment;
  for (const CurvePoint& p : points) {
    if (p.lambda != lambda || p.R != radius || p.experiment != exp) {
      throw Error("summarize: points span multiple (experiment, lambda, R) cells");
    }
  }

  // Mean test mse per capacity, error rows excluded.
  std::map<Index, std::pair<double, Index>> acc;
  for (const CurvePoint& p : points) {
    if (!p.error.empty() || std::isnan(p.test_mse)) continue;
    auto& slot = acc[p.capacity];
    slot.first += p.test_mse;
    slot.second += 1;
  }
  if (acc.empty()) throw EmptyInput("summarize: all points are error rows");

  std::vector<Index> caps;
  std::vector<double> mean;
  for (const auto& [cap, sums] : acc) {
    caps.push_back(cap);
    mean.push_back(sums.first / static_cast<double>(sums.second));
  }

  const std::size_t n = caps.size();
  const std::size_t first = n >= 3 ? 1 : 0;
  const std::size_t last = n >= 3 ? n - 1 : n;
  std::size_t peak = first;
  for (std::size_t i = first; i < last; ++i) {
    if (mean[i] > mean[peak]) peak = i;
  }

  CurveSummary s;
  s.peak_capacity = caps[peak];
  s.peak_test_mse = mean[peak];
  s.tail_test_mse = mean[n - 1];
  s.second_descent_ratio =
      s.tail_test_mse > 0
          ? s.peak_test_mse / s.tail_test_mse
          : std::numeric_limits<double>::infinity();
  std::size_t drop = 0;
  double best_drop = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = mean[i] - mean[i + 1];
    if (d > best_drop) {
      best_drop = d;
      drop = i;
    }
  }
  s.largest_drop_capacity = n >= 2 ? caps[drop] : caps[0];
  return s;
}

std::vector<std::pair<CellKey, CurveSummary>> summarize_cells(
    const std::vector<CurvePoint>& points) {
  std::vector<std::pair<CellKey, std::vector<CurvePoint>>> cells;
  for (const CurvePoint& p : points) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const auto& c) {
      return c.first.lambda == p.lambda && c.first.R == p.R;
    });
    if (it == cells.end()) {
      cells.push_back({CellKey{p.lambda, p.R}, {p}});
    } else {
      it->second.push_back(p);
    }
  }
  std::vector<std::pair<CellKey, CurveSummary>> out;
  out.reserve(cells.size());
  for (const auto& [key, pts] : cells) out.push_back({key, summarize(pts)});
  return out;
}

void write_csv(const std::vector<CurvePoint>& points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_csv: cannot open " + path);
  out << kCsvHeader << '\n';
  for (const CurvePoint& p : points) {
    out << p.experiment << ',' << p.seed << ',' << p.capacity << ','
        << p.num_params << ',' << format_double(p.lambda) << ','
        << format_double(p.R) << ',' << format_double(p.train_mse) << ','
        << format_double(p.test_mse) << ','
        << format_double(p.train_error_rate) << ','
        << format_double(p.test_error_rate) << ','
        << format_double(p.weight_l2) << ',';
    if (p.epochs_trained.has_value()) out << *p.epochs_trained;
    out << ',' << p.wall_time_ms << ',' << sanitize_error(p.error) << '\n';
  }
  if (!out) throw Error("write_csv: write failed for " + path);
}

std::vector<CurvePoint> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw SchemaMismatch(path + ": empty file, expected CurvePoint header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) {
    throw SchemaMismatch(path + ": header does not match CurvePoint schema");
  }
  std::vector<CurvePoint> points;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_line(line);
    if (f.size() != 14) {
      throw SchemaMismatch(path + ":" + std::to_string(line_no) +
                           ": expected 14 fields, got " +
                           std::to_string(f.size()));
    }
    CurvePoint p;
    p.experiment = f[0];
    p.seed = std::strtoull(f[1].c_str(), nullptr, 10);
    p.capacity = std::strtoll(f[2].c_str(), nullptr, 10);
    p.num_params = std::strtoll(f[3].c_str(), nullptr, 10);
    p.lambda = std::strtod(f[4].c_str(), nullptr);
    p.R = std::strtod(f[5].c_str(), nullptr);
    p.train_mse = std::strtod(f[6].c_str(), nullptr);
    p.test_mse = std::strtod(f[7].c_str(), nullptr);
    p.train_error_rate = std::strtod(f[8].c_str(), nullptr);
    p.test_error_rate = std::strtod(f[9].c_str(), nullptr);
    p.weight_l2 = std::strtod(f[10].c_str(), nullptr);
    if (!f[11].empty()) p.epochs_trained = std::strtoll(f[11].c_str(), nullptr, 10);
    p.wall_time_ms = std::strtoll(f[12].c_str(), nullptr, 10);
    p.error = f[13];
    points.push_back(std::move(p));
  }
  return points;
}

void write_summary_json(const SweepConfig& cfg,
                        const std::vector<CurvePoint>& points,
                        const std::string& path) {
  nlohmann::ordered_json doc;
  doc["experiment"] = experiment_name(cfg.experiment);
  doc["n_train"] = cfg.data.n_train;
  doc["n_test"] = cfg.data.n_test;
  Index k = cfg.data.synth_classes;
  if (cfg.data.source != DataSpec::Source::Synthetic) {
    k = build_dataset(cfg.data).num_classes();
  }
  doc["num_classes"] = k;
  doc["threshold_params"] = cfg.data.n_train * k;
  doc["cells"] = nlohmann::ordered_json::array();
  for (const auto& [key, summary] : summarize_cells(points)) {
    nlohmann::ordered_json cell;
    cell["lambda"] = key.lambda;
    cell["R"] = key.R;
    cell["peak_capacity"] = summary.peak_capacity;
    cell["peak_test_mse"] = summary.peak_test_mse;
    cell["tail_test_mse"] = summary.tail_test_mse;
    cell["second_descent_ratio"] = summary.second_descent_ratio;
    cell["largest_drop_capacity"] = summary.largest_drop_capacity;
    doc["cells"].push_back(cell);
  }
  std::ofstream out(path);
  if (!out) throw Error("write_summary_json: cannot open " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace descentlab
