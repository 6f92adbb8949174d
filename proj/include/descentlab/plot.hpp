#pragma once

#include <string>
#include <vector>

#include "descentlab/sweep.hpp"

namespace descentlab {

struct PlotArtifacts {
  std::string script_path;    // gnuplot script
  std::string mean_csv_path;  // repeats averaged per (lambda, R, capacity)
  std::size_t num_cells = 0;  // plots emitted, one per (lambda, R)
};

// Reads a CurvePoint CSV (SchemaMismatch on a bad header), averages repeats
// per cell and writes a gnuplot script plotting train/test mse against the
// parameter count, one plot per (lambda, R) cell. When a companion
// `<stem>.summary.json` exists next to the CSV, a vertical line marks its
// threshold_params (the N*K over-parameterization threshold). A header-only
// CSV is valid and produces a script with no series plus a warning on
// stderr.
PlotArtifacts emit_plot_script(const std::string& csv_path,
                               const std::string& out_dir = "");

}  // namespace descentlab
