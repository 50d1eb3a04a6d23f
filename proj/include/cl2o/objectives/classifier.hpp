#pragma once

#include "cl2o/data/dataset.hpp"
#include "cl2o/objectives/objective.hpp"

#include <memory>
#include <string>
#include <vector>

namespace cl2o {

enum class Activation { Tanh, Sigmoid, Relu };
Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// Single-layer classifier o(s, x) = act(s W^T + b) with softmax
/// cross-entropy. x packs W (labels x pixels, row-major) followed by b.
///
/// Component f_i is the mean loss over minibatch i and f = sum_i f_i, so
/// component gradients are ordinary minibatch gradients and f is M times
/// the dataset loss when all minibatches have the same size.
class ClassifierObjective : public ObjectiveBase<ClassifierObjective> {
 public:
  ClassifierObjective(std::shared_ptr<const Dataset> data, Activation activation, std::size_t minibatch_size,
                      std::uint64_t partition_seed);

  Index dim() const override { return labels_ * pixels_ + labels_; }
  std::string describe() const override;
  std::size_t num_components() const override { return batches_.size(); }
  double component_weight(std::size_t i) const override;

  Activation activation() const { return activation_; }
  const Dataset& dataset() const { return *data_; }
  std::size_t minibatch_size() const { return minibatch_; }

  /// Cross-entropy averaged over every image of the dataset.
  double mean_loss(const Vector& x) const;
  /// Fraction of correct argmax predictions (lowest index wins ties).
  double accuracy(const Vector& x, const Dataset& data) const;
  std::vector<int> predict(const Vector& x, const Matrix& images) const;

  template <class V>
  V eval_impl(const V& x) const {
    V total = batch_loss(x, batches_[0]);
    for (std::size_t i = 1; i < batches_.size(); ++i) total = ops::add(total, batch_loss(x, batches_[i]));
    return total;
  }
  template <class V>
  V grad_impl(const V& x) const {
    V total = batch_grad(x, batches_[0]);
    for (std::size_t i = 1; i < batches_.size(); ++i) total = ops::add(total, batch_grad(x, batches_[i]));
    return total;
  }
  template <class V>
  V component_eval_impl(std::size_t i, const V& x) const {
    return batch_loss(x, batches_[i]);
  }
  template <class V>
  V component_grad_impl(std::size_t i, const V& x) const {
    return batch_grad(x, batches_[i]);
  }

 private:
  struct Batch {
    std::shared_ptr<const Matrix> images;
    std::shared_ptr<const Matrix> targets;
    double scale = 1.0;  // 1 / batch size
  };

  template <class V>
  V pre_activation(const V& x, const Batch& batch) const;
  template <class V>
  V activate(const V& pre) const;
  template <class V>
  V batch_loss(const V& x, const Batch& batch) const;
  template <class V>
  V batch_grad(const V& x, const Batch& batch) const;

  std::shared_ptr<const Dataset> data_;
  Activation activation_;
  std::size_t minibatch_;
  std::uint64_t partition_seed_;
  Index labels_;
  Index pixels_;
  std::vector<Batch> batches_;
};

std::shared_ptr<const ClassifierObjective> make_classifier_objective(std::shared_ptr<const Dataset> data,
                                                                     Activation activation,
                                                                     std::size_t minibatch_size = 128,
                                                                     std::uint64_t partition_seed = 0);

// ---- template definitions ----

template <class V>
V ClassifierObjective::pre_activation(const V& x, const Batch& batch) const {
  const V S = ops::constant_like(x, batch.images);
  const V W = ops::reshape(ops::slice(x, 0, labels_ * pixels_), labels_, pixels_);
  const V b = ops::slice(x, labels_ * pixels_, labels_);
  return ops::add_row(ops::matmul_nt(S, W), b);
}

template <class V>
V ClassifierObjective::activate(const V& pre) const {
  switch (activation_) {
    case Activation::Tanh: return ops::tanh(pre);
    case Activation::Sigmoid: return ops::sigmoid(pre);
    case Activation::Relu: return ops::relu(pre);
  }
  return pre;
}

template <class V>
V ClassifierObjective::batch_loss(const V& x, const Batch& batch) const {
  const V o = activate(pre_activation(x, batch));
  const V Y = ops::constant_like(x, batch.targets);
  return ops::scale(ops::softmax_ce(o, Y), batch.scale);
}

template <class V>
V ClassifierObjective::batch_grad(const V& x, const Batch& batch) const {
  const V pre = pre_activation(x, batch);
  const V o = activate(pre);
  const V Y = ops::constant_like(x, batch.targets);
  const V d_out = ops::scale(ops::sub(ops::softmax_rows(o), Y), batch.scale);
  V slope;
  switch (activation_) {
    case Activation::Tanh:
      slope = ops::add_scalar(ops::scale(ops::mul(o, o), -1.0), 1.0);
      break;
    case Activation::Sigmoid:
      slope = ops::mul(o, ops::add_scalar(ops::scale(o, -1.0), 1.0));
      break;
    case Activation::Relu:
      slope = ops::step(pre);
      break;
  }
  const V d_pre = ops::mul(d_out, slope);
  const V S = ops::constant_like(x, batch.images);
  const V gW = ops::matmul_tn(d_pre, S);
  const V gb = ops::colsum(d_pre);
  return ops::vcat(ops::reshape(gW, labels_ * pixels_, 1), gb);
}

}  // namespace cl2o
