#pragma once

#include "cl2o/numcore/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cl2o {

/// Images as an N x P matrix with entries in [0, 1] plus labels in [0, L).
struct Dataset {
  Matrix images;
  std::vector<int> labels;
  int num_labels = 0;
  std::string name;

  Index size() const { return images.rows(); }
  Index pixels() const { return images.cols(); }

  /// FNV-1a 64 over shape, pixel bit patterns and labels, as 16 hex digits.
  std::string content_hash() const;

  /// Rows [begin, end) as a new dataset.
  Dataset slice(Index begin, Index end) const;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// IDX image/label pair (big-endian, magic 2051 / 2049). Pixels are scaled
/// by 1/255; `limit` keeps the first N records.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::optional<std::size_t> limit = std::nullopt);

/// Gaussian blobs, one per class, class-balanced up to remainder. Class
/// means are sparse (20% of pixels at 0.1 * separation, the rest 0); pixel
/// noise has std 0.2 and results are clamped into [0, 1].
Dataset make_synthetic_classification(std::size_t n, Index p, int num_labels, double separation,
                                      std::uint64_t seed);

/// Desk-scale train/eval pair: MNIST from `data_dir` (or CL2O_DATA_DIR) when
/// the IDX files are present, otherwise a synthetic stand-in.
struct DeskData {
  Dataset train;
  Dataset eval;
  bool synthetic = false;
};
DeskData load_desk_data(const std::string& data_dir, std::size_t train_images, std::size_t eval_images,
                        std::uint64_t seed, double synthetic_separation);

}  // namespace cl2o
