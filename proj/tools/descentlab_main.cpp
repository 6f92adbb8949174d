#include "descentlab/config.hpp"
#include "descentlab/oracle.hpp"
#include "descentlab/plot.hpp"
#include "descentlab/sweep.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <zlib.h>

// httplib pulls <resolv.h>, whose _res macro collides with Eigen internals;
// it must come after every Eigen-dependent header.
#include <httplib.h>

namespace fs = std::filesystem;
using namespace descentlab;

namespace {

struct SweepCli {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = ".";
  Index jobs = 0;
  bool verbose = false;
};

void add_sweep_options(CLI::App* cmd, SweepCli& opts) {
  cmd->add_option("--config", opts.config_path, "sweep config file")
      ->required();
  cmd->add_option("--set", opts.overrides,
                  "config override key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "override master_seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--jobs", opts.jobs, "worker threads");
  cmd->add_flag("--verbose", opts.verbose, "log progress to stderr");
}

SweepConfig load_effective_config(const SweepCli& opts) {
  SweepConfig cfg = parse_config_file(opts.config_path);
  apply_overrides(cfg, opts.overrides);
  if (opts.seed_set) cfg.master_seed = opts.seed;
  if (opts.jobs > 0) cfg.jobs = opts.jobs;
  return cfg;
}

// Output names derive from the config hash so identical configs always map
// to the same files and inputs are never overwritten.
fs::path resolve_out_csv(const SweepConfig& cfg, const SweepCli& opts) {
  if (!cfg.out_csv.empty()) {
    const fs::path p(cfg.out_csv);
    return p.is_absolute() ? p : fs::path(opts.out_dir) / p;
  }
  return fs::path(opts.out_dir) /
         (experiment_name(cfg.experiment) + "_" + config_hash(cfg) + ".csv");
}

int run_sweep_command(const SweepCli& opts, bool feature) {
  const SweepConfig cfg = load_effective_config(opts);
  if (feature != is_feature_experiment(cfg.experiment)) {
    throw ConfigError("experiment " + experiment_name(cfg.experiment) +
                      (feature ? " belongs to nn-sweep" : " belongs to feature-sweep"));
  }
  if (opts.verbose) {
    std::cerr << "effective config:\n" << serialize_config(cfg);
  }
  fs::create_directories(opts.out_dir);
  const std::vector<CurvePoint> points =
      feature ? run_feature_sweep(cfg) : run_nn_sweep(cfg);

  const fs::path csv = resolve_out_csv(cfg, opts);
  write_csv(points, csv.string());
  const fs::path summary =
      csv.parent_path() / (csv.stem().string() + ".summary.json");
  write_summary_json(cfg, points, summary.string());

  Index failed = 0;
  for (const CurvePoint& p : points)
    if (!p.error.empty()) ++failed;
  if (opts.verbose) {
    std::cerr << points.size() << " points, " << failed << " failed\n";
  }
  std::cout << csv.string() << "\n" << summary.string() << "\n";
  return failed == 0 ? 0 : 1;
}

// Minimal gzip decode (zlib with the gzip window flag).
std::string gunzip(const std::string& blob) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw Error("fetch-data: inflateInit failed");
  std::string out;
  out.reserve(blob.size() * 3);
  char buf[65536];
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(blob.data()));
  zs.avail_in = static_cast<uInt>(blob.size());
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error("fetch-data: gzip decode failed (zlib rc " +
                  std::to_string(rc) + ")");
    }
    out.append(buf, sizeof buf - zs.avail_out);
  } while (rc != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

int run_fetch_data(const std::string& url, const std::string& out_path,
                   long long expect_bytes, bool decompress) {
  // http://host[:port]/path
  const std::string prefix = "http://";
  if (url.rfind(prefix, 0) != 0) {
    throw ConfigError("fetch-data: only explicit http:// URLs are supported");
  }
  const std::size_t host_start = prefix.size();
  const std::size_t slash = url.find('/', host_start);
  const std::string host =
      slash == std::string::npos ? url.substr(host_start)
                                 : url.substr(host_start, slash - host_start);
  const std::string path =
      slash == std::string::npos ? "/" : url.substr(slash);

  httplib::Client client(host);
  client.set_read_timeout(60, 0);
  auto res = client.Get(path);
  if (!res || res->status != 200) {
    throw Error("fetch-data: GET " + url + " failed" +
                (res ? " with status " + std::to_string(res->status) : ""));
  }
  std::string body = res->body;
  if (decompress) body = gunzip(body);
  if (expect_bytes >= 0 &&
      static_cast<long long>(body.size()) != expect_bytes) {
    throw Error("fetch-data: " + url + " yielded " +
                std::to_string(body.size()) + " bytes, expected " +
                std::to_string(expect_bytes));
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error("fetch-data: cannot open " + out_path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  std::cout << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"descent-lab: double-descent experiment engine"};
  app.require_subcommand(1);

  SweepCli feature_opts;
  CLI::App* feature_cmd =
      app.add_subcommand("feature-sweep", "run a feature-model experiment grid");
  add_sweep_options(feature_cmd, feature_opts);

  SweepCli nn_opts;
  CLI::App* nn_cmd =
      app.add_subcommand("nn-sweep", "run a network experiment grid");
  add_sweep_options(nn_cmd, nn_opts);

  std::uint64_t oracle_seed = 1;
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle-check", "validate solution-set geometry and solver equivalence");
  oracle_cmd->add_option("--seed", oracle_seed, "base seed for the suite");

  std::string plot_csv;
  std::string plot_out;
  CLI::App* plot_cmd =
      app.add_subcommand("plot", "emit a gnuplot script from a results CSV");
  plot_cmd->add_option("csv", plot_csv, "CurvePoint CSV")->required();
  plot_cmd->add_option("--out", plot_out, "output directory");

  std::string fetch_url, fetch_out;
  long long fetch_expect = -1;
  bool fetch_gunzip = false;
  CLI::App* fetch_cmd = app.add_subcommand(
      "fetch-data", "download a dataset file from an explicit URL");
  fetch_cmd->add_option("--url", fetch_url, "http:// URL to fetch")->required();
  fetch_cmd->add_option("--out", fetch_out, "destination file")->required();
  fetch_cmd->add_option("--expect-bytes", fetch_expect,
                        "fail unless the payload has exactly this many bytes");
  fetch_cmd->add_flag("--gunzip", fetch_gunzip, "gzip-decode before writing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad flags/usage are config errors
  }

  try {
    if (feature_cmd->parsed()) return run_sweep_command(feature_opts, true);
    if (nn_cmd->parsed()) return run_sweep_command(nn_opts, false);
    if (oracle_cmd->parsed()) {
      const int failures = run_oracle_suite(oracle_seed, std::cout);
      if (failures > 0) {
        std::cerr << "oracle-check: " << failures << " check(s) failed\n";
        return 1;
      }
      return 0;
    }
    if (plot_cmd->parsed()) {
      const PlotArtifacts artifacts = emit_plot_script(plot_csv, plot_out);
      std::cout << artifacts.script_path << "\n"
                << artifacts.mean_csv_path << "\n";
      return 0;
    }
    if (fetch_cmd->parsed())
      return run_fetch_data(fetch_url, fetch_out, fetch_expect, fetch_gunzip);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
