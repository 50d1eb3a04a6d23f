#pragma once

#include "cl2o/numcore/tensor.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace cl2o {

struct Segment {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index size() const { return rows * cols; }
};

/// Named-segment table over a flat parameter array. Segments are appended
/// contiguously, so they are disjoint and cover [0, size()).
class ParamLayout {
 public:
  /// Appends a rows x cols block stored row-major; returns its offset.
  Index add(std::string name, Index rows, Index cols = 1);

  const Segment& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<Segment>& segments() const { return segments_; }
  Index size() const { return size_; }

  bool operator==(const ParamLayout& other) const;

 private:
  std::vector<Segment> segments_;
  Index size_ = 0;
};

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(ParamLayout layout);
  ParamVector(ParamLayout layout, Vector entries);

  const ParamLayout& layout() const { return layout_; }
  const Vector& entries() const { return entries_; }
  Vector& entries() { return entries_; }
  Index size() const { return entries_.size(); }

  /// Copy of a segment as a rows x cols matrix (row-major unpacking).
  Matrix get(const std::string& name) const;
  void set(const std::string& name, const Matrix& value);

 private:
  ParamLayout layout_;
  Vector entries_;
};

/// Layout with a single segment named "x" of the given length.
ParamLayout flat_layout(Index n, const std::string& name = "x");

}  // namespace cl2o
