#include "descentlab/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include "descentlab/rng.hpp"

namespace descentlab {

namespace {

constexpr std::uint64_t kTagSplit = 0x5bde1a5cu;
constexpr std::uint64_t kTagClassSplit = 0x2a9f01d3u;
constexpr std::uint64_t kTagCenters = 0x6ce57a11u;
constexpr std::uint64_t kTagPoints = 0x19b7c2f5u;

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw TruncatedFile(path + ": truncated header");
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Matrix Dataset::gather_inputs(const std::vector<Index>& rows) const {
  Matrix out(static_cast<Index>(rows.size()), inputs.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = inputs.row(rows[i]);
  return out;
}

Matrix Dataset::gather_targets(const std::vector<Index>& rows) const {
  Matrix out(static_cast<Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = targets.row(rows[i]);
  return out;
}

IntVector Dataset::gather_labels(const std::vector<Index>& rows) const {
  IntVector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[static_cast<Index>(i)] = labels[rows[i]];
  return out;
}

void Dataset::validate() const {
  const Index n = total_rows();
  if (labels.size() != n || targets.rows() != n) {
    throw DimensionMismatch("Dataset: inputs/labels/targets row counts differ");
  }
  for (Index i = 0; i < n; ++i) {
    if (targets.row(i).sum() != 1.0) {
      throw Error("Dataset: one-hot row " + std::to_string(i) +
                  " does not sum to 1");
    }
  }
  if (n > 0 && (inputs.minCoeff() < 0.0 || inputs.maxCoeff() > 1.0)) {
    throw Error("Dataset: input entries outside [0,1]");
  }
  std::unordered_set<Index> seen;
  for (Index idx : train) {
    if (idx < 0 || idx >= n) throw Error("Dataset: train index out of range");
    if (!seen.insert(idx).second) throw Error("Dataset: duplicate train index");
  }
  for (Index idx : test) {
    if (idx < 0 || idx >= n) throw Error("Dataset: test index out of range");
    if (!seen.insert(idx).second)
      throw Error("Dataset: test index overlaps train");
  }
}

Matrix one_hot(const IntVector& labels, Index num_classes) {
  Matrix t = Matrix::Zero(labels.size(), num_classes);
  for (Index i = 0; i < labels.size(); ++i) {
    const Index k = labels[i];
    if (k < 0 || k >= num_classes) {
      throw Error("one_hot: label " + std::to_string(k) + " outside 0.." +
                  std::to_string(num_classes - 1));
    }
    t(i, k) = 1.0;
  }
  return t;
}

Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw TruncatedFile(images_path + ": cannot open");
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw TruncatedFile(labels_path + ": cannot open");

  const std::uint32_t img_magic = read_be_u32(img, images_path);
  if (img_magic != 0x00000803u) {
    throw BadMagic(images_path + ": expected magic 0x00000803, got 0x" +
                   [&] {
                     char b[16];
                     std::snprintf(b, sizeof b, "%08x", img_magic);
                     return std::string(b);
                   }());
  }
  const std::uint32_t n_images = read_be_u32(img, images_path);
  const std::uint32_t rows = read_be_u32(img, images_path);
  const std::uint32_t cols = read_be_u32(img, images_path);

  const std::uint32_t lab_magic = read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801u) {
    throw BadMagic(labels_path + ": expected magic 0x00000801, got 0x" +
                   [&] {
                     char b[16];
                     std::snprintf(b, sizeof b, "%08x", lab_magic);
                     return std::string(b);
                   }());
  }
  const std::uint32_t n_labels = read_be_u32(lab, labels_path);
  if (n_images != n_labels) {
    throw CountMismatch(images_path + " has " + std::to_string(n_images) +
                        " images but " + labels_path + " has " +
                        std::to_string(n_labels) + " labels");
  }

  const std::size_t pixels = std::size_t(rows) * cols;
  std::vector<unsigned char> img_bytes(std::size_t(n_images) * pixels);
  img.read(reinterpret_cast<char*>(img_bytes.data()),
           static_cast<std::streamsize>(img_bytes.size()));
  if (static_cast<std::size_t>(img.gcount()) != img_bytes.size()) {
    throw TruncatedFile(images_path + ": expected " +
                        std::to_string(img_bytes.size()) + " pixel bytes, got " +
                        std::to_string(img.gcount()));
  }
  std::vector<unsigned char> lab_bytes(n_labels);
  lab.read(reinterpret_cast<char*>(lab_bytes.data()),
           static_cast<std::streamsize>(lab_bytes.size()));
  if (static_cast<std::size_t>(lab.gcount()) != lab_bytes.size()) {
    throw TruncatedFile(labels_path + ": expected " +
                        std::to_string(lab_bytes.size()) + " label bytes, got " +
                        std::to_string(lab.gcount()));
  }

  Dataset ds;
  ds.inputs.resize(n_images, static_cast<Index>(pixels));
  for (std::uint32_t i = 0; i < n_images; ++i) {
    for (std::size_t j = 0; j < pixels; ++j) {
      ds.inputs(i, static_cast<Index>(j)) =
          img_bytes[std::size_t(i) * pixels + j] / 255.0;
    }
  }
  ds.labels.resize(n_labels);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    ds.labels[i] = lab_bytes[i];
    max_label = std::max(max_label, int(lab_bytes[i]));
  }
  ds.targets = one_hot(ds.labels, max_label + 1);
  ds.validate();
  return ds;
}

Dataset subsample_and_split(const Dataset& ds, std::uint64_t seed,
                            Index n_train, Index n_test, SplitMode mode) {
  if (n_train + n_test > ds.total_rows()) {
    throw NotEnoughRows("subsample_and_split: requested " +
                        std::to_string(n_train + n_test) + " rows from " +
                        std::to_string(ds.total_rows()));
  }
  Dataset out = ds;
  out.train.clear();
  out.test.clear();

  if (mode == SplitMode::Uniform) {
    std::vector<Index> order(static_cast<std::size_t>(ds.total_rows()));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_key({seed, kTagSplit}));
    rng.shuffle(order);
    out.train.assign(order.begin(), order.begin() + n_train);
    out.test.assign(order.begin() + n_train, order.begin() + n_train + n_test);
  } else {
    // Per-class shuffles, then near-equal draws per class (remainders go to
    // the lowest class indices). Spill to a shared pool if a class runs dry.
    const Index k = ds.num_classes();
    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(k));
    for (Index i = 0; i < ds.total_rows(); ++i)
      by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    for (Index c = 0; c < k; ++c) {
      Rng rng(derive_key({seed, kTagClassSplit, static_cast<std::uint64_t>(c)}));
      rng.shuffle(by_class[static_cast<std::size_t>(c)]);
    }
    std::vector<std::size_t> cursor(static_cast<std::size_t>(k), 0);
    auto take = [&](Index want, std::vector<Index>& dest) {
      for (Index c = 0; c < k; ++c) {
        Index quota = want / k + (c < want % k ? 1 : 0);
        auto& pool = by_class[static_cast<std::size_t>(c)];
        auto& cur = cursor[static_cast<std::size_t>(c)];
        while (quota > 0 && cur < pool.size()) {
          dest.push_back(pool[cur++]);
          --quota;
        }
      }
      // Classes may be too small to meet their quota; round-robin the rest.
      Index c = 0;
      while (dest.size() < static_cast<std::size_t>(want)) {
        auto& pool = by_class[static_cast<std::size_t>(c)];
        auto& cur = cursor[static_cast<std::size_t>(c)];
        if (cur < pool.size()) dest.push_back(pool[cur++]);
        c = (c + 1) % k;
      }
    };
    take(n_train, out.train);
    take(n_test, out.test);
  }
  out.validate();
  return out;
}

Dataset synth_gaussian_classes(std::uint64_t seed, Index n_per_class, Index K,
                               Index P, double center_scale) {
  if (K < 2) throw Error("synth_gaussian_classes: K must be >= 2");
  if (P < 1) throw Error("synth_gaussian_classes: P must be >= 1");

  Matrix centers(K, P);
  {
    Rng rng(derive_key({seed, kTagCenters}));
    for (Index k = 0; k < K; ++k)
      for (Index j = 0; j < P; ++j)
        centers(k, j) = center_scale * rng.next_gaussian();
  }

  const Index n_total = n_per_class * K;
  Dataset ds;
  ds.inputs.resize(n_total, P);
  ds.labels.resize(n_total);
  for (Index k = 0; k < K; ++k) {
    Rng rng(derive_key({seed, kTagPoints, static_cast<std::uint64_t>(k)}));
    for (Index i = 0; i < n_per_class; ++i) {
      const Index row = k * n_per_class + i;
      ds.labels[row] = static_cast<int>(k);
      for (Index j = 0; j < P; ++j)
        ds.inputs(row, j) = centers(k, j) + rng.next_gaussian();
    }
  }

  // Affine rescale of each coordinate into [0,1]; a degenerate coordinate
  // (zero span) maps to 0.5.
  for (Index j = 0; j < P; ++j) {
    const double lo = ds.inputs.col(j).minCoeff();
    const double hi = ds.inputs.col(j).maxCoeff();
    if (hi > lo) {
      ds.inputs.col(j) = (ds.inputs.col(j).array() - lo) / (hi - lo);
    } else {
      ds.inputs.col(j).setConstant(0.5);
    }
  }

  ds.targets = one_hot(ds.labels, K);
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_dataset: cannot open " + path);
  out << "descentlab-dataset v1\n";
  out << ds.total_rows() << ' ' << ds.input_dim() << ' ' << ds.num_classes()
      << ' ' << ds.train.size() << ' ' << ds.test.size() << '\n';

  auto write_doubles = [&](const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p),
              static_cast<std::streamsize>(n * sizeof(double)));
  };
  // Row-major little-endian doubles.
  for (Index i = 0; i < ds.total_rows(); ++i) {
    for (Index j = 0; j < ds.input_dim(); ++j) {
      const double v = ds.inputs(i, j);
      write_doubles(&v, 1);
    }
  }
  for (Index i = 0; i < ds.labels.size(); ++i) {
    const std::int64_t v = ds.labels[i];
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  auto write_indices = [&](const std::vector<Index>& idx) {
    for (Index v : idx) {
      const std::uint64_t u = static_cast<std::uint64_t>(v);
      out.write(reinterpret_cast<const char*>(&u), sizeof u);
    }
  };
  write_indices(ds.train);
  write_indices(ds.test);
  if (!out) throw Error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_dataset: cannot open " + path);
  std::string header;
  std::getline(in, header);
  if (header != "descentlab-dataset v1") {
    throw SchemaMismatch(path + ": bad header '" + header + "'");
  }
  Index n = 0, p = 0, k = 0;
  std::size_t n_train = 0, n_test = 0;
  in >> n >> p >> k >> n_train >> n_test;
  in.ignore(1);  // trailing newline
  if (!in) throw TruncatedFile(path + ": truncated dimension line");

  Dataset ds;
  ds.inputs.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      ds.inputs(i, j) = v;
    }
  }
  ds.labels.resize(n);
  for (Index i = 0; i < n; ++i) {
    std::int64_t v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    ds.labels[i] = static_cast<int>(v);
  }
  auto read_indices = [&](std::size_t count, std::vector<Index>& idx) {
    idx.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t u;
      in.read(reinterpret_cast<char*>(&u), sizeof u);
      idx[i] = static_cast<Index>(u);
    }
  };
  read_indices(n_train, ds.train);
  read_indices(n_test, ds.test);
  if (!in) throw TruncatedFile(path + ": truncated payload");
  ds.targets = one_hot(ds.labels, k);
  ds.validate();
  return ds;
}

}  // namespace descentlab
