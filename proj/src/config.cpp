#include "descentlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "descentlab/rng.hpp"

namespace descentlab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long long r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected unsigned integer, got '" + v + "'");
  }
}

double parse_real(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected real number, got '" + v + "'");
  }
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

std::vector<Index> parse_index_list(const std::string& v,
                                    const std::string& key) {
  std::vector<Index> out;
  for (const std::string& p : split_commas(v))
    out.push_back(parse_int(p, key));
  return out;
}

std::vector<double> parse_real_list(const std::string& v,
                                    const std::string& key) {
  std::vector<double> out;
  for (const std::string& p : split_commas(v)) out.push_back(parse_real(p, key));
  return out;
}

std::string format_real(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

// Applies one key to the config. d_grid = auto is resolved lazily because it
// depends on n_train, which may come later in the file.
void apply_key(SweepConfig& cfg, const std::string& key,
               const std::string& value, bool& d_grid_auto) {
  if (key == "experiment") {
    cfg.experiment = experiment_from_name(value);
  } else if (key == "data_source") {
    if (value == "synthetic") cfg.data.source = DataSpec::Source::Synthetic;
    else if (value == "mnist") cfg.data.source = DataSpec::Source::Mnist;
    else if (value == "cache") cfg.data.source = DataSpec::Source::Cache;
    else throw ConfigError("data_source: unknown source '" + value + "'");
  } else if (key == "mnist_images") {
    cfg.data.mnist_images = value;
  } else if (key == "mnist_labels") {
    cfg.data.mnist_labels = value;
  } else if (key == "cache_path") {
    cfg.data.cache_path = value;
  } else if (key == "n_train") {
    cfg.data.n_train = parse_int(value, key);
  } else if (key == "n_test") {
    cfg.data.n_test = parse_int(value, key);
  } else if (key == "data_seed") {
    cfg.data.seed = parse_u64(value, key);
  } else if (key == "balanced_split") {
    cfg.data.balanced = parse_bool(value, key);
  } else if (key == "synth_classes") {
    cfg.data.synth_classes = parse_int(value, key);
  } else if (key == "synth_dim") {
    cfg.data.synth_dim = parse_int(value, key);
  } else if (key == "synth_per_class") {
    cfg.data.synth_per_class = parse_int(value, key);
  } else if (key == "synth_center_scale") {
    cfg.data.synth_center_scale = parse_real(value, key);
  } else if (key == "master_seed") {
    cfg.master_seed = parse_u64(value, key);
  } else if (key == "d_grid") {
    if (value == "auto") {
      d_grid_auto = true;
    } else {
      d_grid_auto = false;
      cfg.d_grid = parse_index_list(value, key);
    }
  } else if (key == "h_grid") {
    cfg.h_grid = parse_index_list(value, key);
  } else if (key == "lambda_grid") {
    cfg.lambda_grid = parse_real_list(value, key);
  } else if (key == "r_grid") {
    cfg.r_grid = parse_real_list(value, key);
  } else if (key == "repeats") {
    cfg.repeats = parse_int(value, key);
  } else if (key == "switch_off_h") {
    if (value == "never") cfg.switch_off_h.reset();
    else cfg.switch_off_h = parse_int(value, key);
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = parse_real(value, key);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_int(value, key);
  } else if (key == "max_epochs") {
    cfg.train.max_epochs = parse_int(value, key);
  } else if (key == "patience") {
    cfg.train.patience = parse_int(value, key);
  } else if (key == "val_fraction") {
    cfg.train.val_fraction = parse_real(value, key);
  } else if (key == "early_stop") {
    cfg.train.early_stop = parse_bool(value, key);
  } else if (key == "init_scale") {
    cfg.init_scale = parse_real(value, key);
  } else if (key == "feature_scale") {
    cfg.feature_scale = parse_real(value, key);
  } else if (key == "anchor_per_column") {
    cfg.anchor_per_column = parse_bool(value, key);
  } else if (key == "out_csv") {
    cfg.out_csv = value;
  } else if (key == "jobs") {
    cfg.jobs = parse_int(value, key);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

SweepConfig parse_config_text(const std::string& text,
                              const std::string& origin) {
  SweepConfig cfg;
  bool d_grid_auto = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_key(cfg, key, value, d_grid_auto);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  if (d_grid_auto) {
    if (cfg.data.n_train <= 0)
      throw ConfigError(origin + ": d_grid = auto requires n_train");
    cfg.d_grid = default_feature_grid(cfg.data.n_train);
  }
  return cfg;
}

SweepConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_overrides(SweepConfig& cfg,
                     const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> seen;
  bool d_grid_auto = false;
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + ov + "' is not key=value");
    }
    const std::string key = trim(ov.substr(0, eq));
    const std::string value = trim(ov.substr(eq + 1));
    auto it = seen.find(key);
    if (it != seen.end() && it->second != value) {
      throw ConfigError("conflicting overrides for '" + key + "': '" +
                        it->second + "' vs '" + value + "'");
    }
    seen[key] = value;
    apply_key(cfg, key, value, d_grid_auto);
  }
  if (d_grid_auto) {
    if (cfg.data.n_train <= 0)
      throw ConfigError("d_grid = auto requires n_train");
    cfg.d_grid = default_feature_grid(cfg.data.n_train);
  }
}

std::string serialize_config(const SweepConfig& cfg) {
  std::ostringstream out;
  out << "experiment = " << experiment_name(cfg.experiment) << '\n';
  switch (cfg.data.source) {
    case DataSpec::Source::Synthetic: out << "data_source = synthetic\n"; break;
    case DataSpec::Source::Mnist: out << "data_source = mnist\n"; break;
    case DataSpec::Source::Cache: out << "data_source = cache\n"; break;
  }
  if (!cfg.data.mnist_images.empty())
    out << "mnist_images = " << cfg.data.mnist_images << '\n';
  if (!cfg.data.mnist_labels.empty())
    out << "mnist_labels = " << cfg.data.mnist_labels << '\n';
  if (!cfg.data.cache_path.empty())
    out << "cache_path = " << cfg.data.cache_path << '\n';
  out << "n_train = " << cfg.data.n_train << '\n';
  out << "n_test = " << cfg.data.n_test << '\n';
  out << "data_seed = " << cfg.data.seed << '\n';
  out << "balanced_split = " << (cfg.data.balanced ? "true" : "false") << '\n';
  out << "synth_classes = " << cfg.data.synth_classes << '\n';
  out << "synth_dim = " << cfg.data.synth_dim << '\n';
  out << "synth_per_class = " << cfg.data.synth_per_class << '\n';
  out << "synth_center_scale = " << format_real(cfg.data.synth_center_scale)
      << '\n';
  out << "master_seed = " << cfg.master_seed << '\n';
  auto join_idx = [](const std::vector<Index>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(v[i]);
    }
    return s;
  };
  auto join_real = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ',';
      s += format_real(v[i]);
    }
    return s;
  };
  if (!cfg.d_grid.empty()) out << "d_grid = " << join_idx(cfg.d_grid) << '\n';
  if (!cfg.h_grid.empty()) out << "h_grid = " << join_idx(cfg.h_grid) << '\n';
  out << "lambda_grid = " << join_real(cfg.lambda_grid) << '\n';
  out << "r_grid = " << join_real(cfg.r_grid) << '\n';
  out << "repeats = " << cfg.repeats << '\n';
  if (cfg.switch_off_h.has_value())
    out << "switch_off_h = " << *cfg.switch_off_h << '\n';
  else
    out << "switch_off_h = never\n";
  out << "learning_rate = " << format_real(cfg.train.learning_rate) << '\n';
  out << "batch_size = " << cfg.train.batch_size << '\n';
  out << "max_epochs = " << cfg.train.max_epochs << '\n';
  out << "patience = " << cfg.train.patience << '\n';
  out << "val_fraction = " << format_real(cfg.train.val_fraction) << '\n';
  out << "early_stop = " << (cfg.train.early_stop ? "true" : "false") << '\n';
  out << "init_scale = " << format_real(cfg.init_scale) << '\n';
  out << "feature_scale = " << format_real(cfg.feature_scale) << '\n';
  out << "anchor_per_column = " << (cfg.anchor_per_column ? "true" : "false")
      << '\n';
  if (!cfg.out_csv.empty()) out << "out_csv = " << cfg.out_csv << '\n';
  out << "jobs = " << cfg.jobs << '\n';
  return out.str();
}

std::string config_hash(const SweepConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 0x9d3f2c6b1a54e08fULL;
  for (unsigned char c : text) h = mix64(h ^ c);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%08x",
                static_cast<unsigned>(h & 0xffffffffu));
  return buf;
}

std::string default_config_text() {
  return
      "# descent-lab sweep configuration (flat key = value, '#' comments)\n"
      "experiment = feature_sweep   # feature_sweep | anchor_sweep | lambda_sweep\n"
      "                             # | nn_reuse_sweep | nn_scratch_sweep\n"
      "\n"
      "# dataset\n"
      "data_source = synthetic      # synthetic | mnist | cache\n"
      "n_train = 300\n"
      "n_test = 300\n"
      "data_seed = 1\n"
      "balanced_split = false       # per-class balanced subsampling\n"
      "synth_classes = 10\n"
      "synth_dim = 20\n"
      "synth_per_class = 0          # 0 = just enough rows for the split\n"
      "synth_center_scale = 1\n"
      "# mnist_images = train-images-idx3-ubyte\n"
      "# mnist_labels = train-labels-idx1-ubyte\n"
      "# cache_path = dataset.bin\n"
      "\n"
      "# grids\n"
      "d_grid = auto                # or a comma list; feature experiments\n"
      "# h_grid = 2,4,8,16,32,64    # network experiments\n"
      "lambda_grid = 1e-08\n"
      "r_grid = 0\n"
      "repeats = 1\n"
      "master_seed = 1\n"
      "\n"
      "# network training\n"
      "switch_off_h = never         # integer | never (nn_reuse_sweep)\n"
      "learning_rate = 0.01\n"
      "batch_size = 32\n"
      "max_epochs = 500\n"
      "patience = 20\n"
      "val_fraction = 0.1\n"
      "early_stop = false\n"
      "init_scale = 0.1\n"
      "\n"
      "# feature model\n"
      "feature_scale = 1\n"
      "anchor_per_column = false\n"
      "\n"
      "# output\n"
      "# out_csv = results.csv      # default: <experiment>_<confighash>.csv\n"
      "jobs = 1\n";
}

}  // namespace descentlab
