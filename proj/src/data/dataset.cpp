#include "cl2o/data/dataset.hpp"

#include "cl2o/numcore/random.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace cl2o {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;  // 2051
constexpr std::uint32_t kLabelMagic = 0x00000801;  // 2049

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void value(T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes(buf, sizeof(T));
  }
};

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t off, const std::string& path) {
  if (off + 4 > buf.size()) throw FormatError("'" + path + "': truncated IDX header");
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) | (std::uint32_t{buf[off + 2]} << 8) |
         std::uint32_t{buf[off + 3]};
}

}  // namespace

std::string Dataset::content_hash() const {
  Fnv1a f;
  f.value<std::int64_t>(images.rows());
  f.value<std::int64_t>(images.cols());
  f.value<std::int32_t>(num_labels);
  for (Index i = 0; i < images.rows(); ++i)
    for (Index j = 0; j < images.cols(); ++j) f.value<double>(images(i, j));
  for (int l : labels) f.value<std::int32_t>(l);
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 0; k < 16; ++k) out[15 - k] = hex[(f.h >> (4 * k)) & 0xf];
  return out;
}

Dataset Dataset::slice(Index begin, Index end) const {
  if (begin < 0 || end < begin || end > size()) throw InvalidArgument("Dataset::slice: range out of bounds");
  Dataset out;
  out.images = images.middleRows(begin, end - begin);
  out.labels.assign(labels.begin() + begin, labels.begin() + end);
  out.num_labels = num_labels;
  out.name = name + "[" + std::to_string(begin) + ":" + std::to_string(end) + "]";
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, std::optional<std::size_t> limit) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (be32(img, 0, images_path) != kImageMagic) {
    throw FormatError("'" + images_path + "': wrong magic number (expected 2051 for IDX images)");
  }
  if (be32(lab, 0, labels_path) != kLabelMagic) {
    throw FormatError("'" + labels_path + "': wrong magic number (expected 2049 for IDX labels)");
  }
  const std::size_t n_img = be32(img, 4, images_path);
  const std::size_t rows = be32(img, 8, images_path);
  const std::size_t cols = be32(img, 12, images_path);
  const std::size_t n_lab = be32(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw FormatError("IDX count mismatch: " + std::to_string(n_img) + " images vs " + std::to_string(n_lab) +
                      " labels");
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + n_img * pixels) throw FormatError("'" + images_path + "': truncated pixel data");
  if (lab.size() < 8 + n_lab) throw FormatError("'" + labels_path + "': truncated label data");

  const std::size_t n = limit ? std::min(*limit, n_img) : n_img;
  Dataset ds;
  ds.name = std::filesystem::path(images_path).filename().string();
  ds.images.resize(static_cast<Index>(n), static_cast<Index>(pixels));
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      ds.images(static_cast<Index>(i), static_cast<Index>(p)) = img[16 + i * pixels + p] / 255.0;
    }
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_labels = std::max(10, max_label + 1);
  return ds;
}

Dataset make_synthetic_classification(std::size_t n, Index p, int num_labels, double separation, std::uint64_t seed) {
  if (num_labels < 1 || n < static_cast<std::size_t>(num_labels)) {
    throw InvalidArgument("make_synthetic_classification: need N >= L >= 1");
  }
  if (p < 1) throw InvalidArgument("make_synthetic_classification: need P >= 1");
  Rng rng(derive_seed(seed, 0xda7a));
  // Sparse class prototypes on a zero background, like pen strokes.
  std::bernoulli_distribution stroke(0.2);
  Matrix means = Matrix::Zero(num_labels, p);
  for (int c = 0; c < num_labels; ++c) {
    for (Index j = 0; j < p; ++j) {
      if (stroke(rng)) means(c, j) = 0.1 * separation;
    }
  }
  // class-balanced label sequence, then shuffled
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(num_labels));
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset ds;
  ds.name = "synthetic";
  ds.num_labels = num_labels;
  ds.labels = labels;
  ds.images.resize(static_cast<Index>(n), p);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      const double pixel = means(labels[i], j) + 0.2 * noise(rng);
      ds.images(static_cast<Index>(i), j) = std::clamp(pixel, 0.0, 1.0);
    }
  }
  return ds;
}

DeskData load_desk_data(const std::string& data_dir, std::size_t train_images, std::size_t eval_images,
                        std::uint64_t seed, double synthetic_separation) {
  std::string dir = data_dir;
  if (const char* env = std::getenv("CL2O_DATA_DIR"); env != nullptr && *env != '\0') dir = env;
  namespace fs = std::filesystem;
  DeskData out;
  if (!dir.empty()) {
    const fs::path base(dir);
    const fs::path ti = base / "train-images-idx3-ubyte";
    const fs::path tl = base / "train-labels-idx1-ubyte";
    if (fs::exists(ti) && fs::exists(tl)) {
      const fs::path ei = base / "t10k-images-idx3-ubyte";
      const fs::path el = base / "t10k-labels-idx1-ubyte";
      if (fs::exists(ei) && fs::exists(el)) {
        out.train = load_idx(ti.string(), tl.string(), train_images);
        out.eval = load_idx(ei.string(), el.string(), eval_images);
      } else {
        Dataset all = load_idx(ti.string(), tl.string(), train_images + eval_images);
        const Index cut = std::min<Index>(static_cast<Index>(train_images), all.size());
        out.train = all.slice(0, cut);
        out.eval = all.slice(cut, all.size());
      }
      return out;
    }
  }
  Dataset all = make_synthetic_classification(train_images + eval_images, 784, 10, synthetic_separation, seed);
  out.train = all.slice(0, static_cast<Index>(train_images));
  out.eval = all.slice(static_cast<Index>(train_images), all.size());
  out.train.name = "synthetic-train";
  out.eval.name = "synthetic-eval";
  out.synthetic = true;
  return out;
}

}  // namespace cl2o
