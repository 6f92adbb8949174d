#include "descentlab/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

namespace descentlab {

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

struct MeanRow {
  std::string experiment;
  Index capacity = 0;
  Index num_params = 0;
  double train_mse = 0, test_mse = 0, train_err = 0, test_err = 0;
  Index count = 0;
};

}  // namespace

PlotArtifacts emit_plot_script(const std::string& csv_path,
                               const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::vector<CurvePoint> points = read_csv(csv_path);

  const fs::path in_path(csv_path);
  const fs::path dir = out_dir.empty() ? in_path.parent_path() : fs::path(out_dir);
  const std::string stem = in_path.stem().string();
  const fs::path mean_csv = dir / (stem + "_mean.csv");
  const fs::path script = dir / (stem + ".gnuplot");

  // Optional threshold from the sweep's companion summary.
  double threshold_params = -1.0;
  const fs::path summary = in_path.parent_path() / (stem + ".summary.json");
  if (fs::exists(summary)) {
    std::ifstream in(summary);
    try {
      nlohmann::json doc;
      in >> doc;
      if (doc.contains("threshold_params"))
        threshold_params = doc["threshold_params"].get<double>();
    } catch (const nlohmann::json::exception&) {
      std::cerr << "plot: ignoring unreadable summary " << summary << "\n";
    }
  }

  // Average repeats per (lambda, R, capacity); error rows are dropped.
  std::map<std::pair<double, double>, std::map<Index, MeanRow>> cells;
  std::vector<std::pair<double, double>> cell_order;
  for (const CurvePoint& p : points) {
    if (!p.error.empty() || std::isnan(p.test_mse)) continue;
    const std::pair<double, double> key{p.lambda, p.R};
    if (cells.find(key) == cells.end()) cell_order.push_back(key);
    MeanRow& row = cells[key][p.capacity];
    row.experiment = p.experiment;
    row.capacity = p.capacity;
    row.num_params = p.num_params;
    row.train_mse += p.train_mse;
    row.test_mse += p.test_mse;
    row.train_err += p.train_error_rate;
    row.test_err += p.test_error_rate;
    row.count += 1;
  }
  std::sort(cell_order.begin(), cell_order.end());

  {
    std::ofstream out(mean_csv);
    if (!out) throw Error("plot: cannot open " + mean_csv.string());
    out << "experiment,lambda,R,capacity,num_params,train_mse,test_mse,"
           "train_error_rate,test_error_rate,repeats\n";
    for (const auto& key : cell_order) {
      for (const auto& [cap, row] : cells.at(key)) {
        const double n = static_cast<double>(row.count);
        out << row.experiment << ',' << format_double(key.first) << ','
            << format_double(key.second) << ',' << cap << ',' << row.num_params
            << ',' << format_double(row.train_mse / n) << ','
            << format_double(row.test_mse / n) << ','
            << format_double(row.train_err / n) << ','
            << format_double(row.test_err / n) << ',' << row.count << '\n';
      }
    }
  }

  std::ofstream out(script);
  if (!out) throw Error("plot: cannot open " + script.string());
  out << "# generated by descentlab plot from " << csv_path << "\n";
  out << "set datafile separator ','\n";
  out << "set terminal pngcairo size 900,600\n";
  out << "set logscale y\n";
  out << "set xlabel 'number of parameters'\n";
  out << "set ylabel 'squared error'\n";
  out << "set key top right\n";
  if (cell_order.empty()) {
    out << "# no data rows: nothing to plot\n";
    std::cerr << "plot: " << csv_path << " has no data rows; script emitted "
              << "with no series\n";
  }
  std::size_t i = 0;
  for (const auto& [lambda, radius] : cell_order) {
    const std::string lam = format_double(lambda);
    const std::string rad = format_double(radius);
    out << "\nset output '" << stem << "_cell" << i << ".png'\n";
    out << "set title 'lambda = " << lam << ", R = " << rad << "'\n";
    if (threshold_params > 0) {
      out << "set arrow 1 from " << format_double(threshold_params)
          << ", graph 0 to " << format_double(threshold_params)
          << ", graph 1 nohead dashtype 2 lc rgb 'gray40'\n";
    }
    out << "plot '" << mean_csv.filename().string() << "' using ($2==" << lam
        << " && $3==" << rad << " ? $5 : 1/0):6 with linespoints "
        << "title 'train mse', \\\n     '' using ($2==" << lam
        << " && $3==" << rad << " ? $5 : 1/0):7 with linespoints "
        << "title 'test mse'\n";
    if (threshold_params > 0) out << "unset arrow 1\n";
    ++i;
  }

  PlotArtifacts artifacts;
  artifacts.script_path = script.string();
  artifacts.mean_csv_path = mean_csv.string();
  artifacts.num_cells = cell_order.size();
  return artifacts;
}

}  // namespace descentlab
