#include "cl2o/numcore/param_vector.hpp"

#include <algorithm>

namespace cl2o {

Index ParamLayout::add(std::string name, Index rows, Index cols) {
  if (rows < 0 || cols < 0) throw InvalidArgument("ParamLayout: negative segment shape");
  if (contains(name)) throw InvalidArgument("ParamLayout: duplicate segment '" + name + "'");
  Segment s{std::move(name), size_, rows, cols};
  size_ += s.size();
  segments_.push_back(std::move(s));
  return segments_.back().offset;
}

const Segment& ParamLayout::at(const std::string& name) const {
  auto it = std::find_if(segments_.begin(), segments_.end(), [&](const Segment& s) { return s.name == name; });
  if (it == segments_.end()) throw InvalidArgument("ParamLayout: no segment named '" + name + "'");
  return *it;
}

bool ParamLayout::contains(const std::string& name) const {
  return std::any_of(segments_.begin(), segments_.end(), [&](const Segment& s) { return s.name == name; });
}

bool ParamLayout::operator==(const ParamLayout& other) const {
  if (size_ != other.size_ || segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& a = segments_[i];
    const Segment& b = other.segments_[i];
    if (a.name != b.name || a.offset != b.offset || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

ParamVector::ParamVector(ParamLayout layout) : layout_(std::move(layout)), entries_(Vector::Zero(layout_.size())) {}

ParamVector::ParamVector(ParamLayout layout, Vector entries) : layout_(std::move(layout)), entries_(std::move(entries)) {
  if (entries_.size() != layout_.size()) {
    throw InvalidArgument("ParamVector: entry count " + std::to_string(entries_.size()) +
                          " does not match layout size " + std::to_string(layout_.size()));
  }
}

Matrix ParamVector::get(const std::string& name) const {
  const Segment& s = layout_.at(name);
  return kern::reshape(Matrix(entries_.segment(s.offset, s.size())), s.rows, s.cols);
}

void ParamVector::set(const std::string& name, const Matrix& value) {
  const Segment& s = layout_.at(name);
  if (value.rows() != s.rows || value.cols() != s.cols) {
    throw InvalidArgument("ParamVector::set: shape mismatch for segment '" + name + "'");
  }
  entries_.segment(s.offset, s.size()) = kern::reshape(value, s.size(), 1);
}

ParamLayout flat_layout(Index n, const std::string& name) {
  ParamLayout layout;
  layout.add(name, n, 1);
  return layout;
}

}  // namespace cl2o
