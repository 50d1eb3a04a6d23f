#include "cl2o/objectives/classifier.hpp"

#include "cl2o/numcore/random.hpp"

#include <algorithm>
#include <numeric>

namespace cl2o {

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  throw InvalidArgument("unknown activation '" + name + "' (expected tanh | sigmoid | relu)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Relu: return "relu";
  }
  return "?";
}

namespace {

std::shared_ptr<const Matrix> one_hot(const std::vector<int>& labels, const std::vector<Index>& rows, int num_labels) {
  auto y = std::make_shared<Matrix>(Matrix::Zero(static_cast<Index>(rows.size()), num_labels));
  for (std::size_t r = 0; r < rows.size(); ++r) (*y)(static_cast<Index>(r), labels[rows[r]]) = 1.0;
  return y;
}

std::shared_ptr<const Matrix> gather(const Matrix& images, const std::vector<Index>& rows) {
  auto s = std::make_shared<Matrix>(static_cast<Index>(rows.size()), images.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) s->row(static_cast<Index>(r)) = images.row(rows[r]);
  return s;
}

}  // namespace

ClassifierObjective::ClassifierObjective(std::shared_ptr<const Dataset> data, Activation activation,
                                         std::size_t minibatch_size, std::uint64_t partition_seed)
    : data_(std::move(data)), activation_(activation), minibatch_(minibatch_size), partition_seed_(partition_seed) {
  if (!data_ || data_->size() == 0) throw InvalidArgument("classifier objective: empty dataset");
  if (minibatch_ == 0 || minibatch_ > static_cast<std::size_t>(data_->size())) {
    throw InvalidArgument("classifier objective: minibatch size must be in [1, N]");
  }
  labels_ = data_->num_labels;
  pixels_ = data_->pixels();
  std::vector<Index> order(static_cast<std::size_t>(data_->size()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(derive_seed(partition_seed, 0xba7c));
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t start = 0; start < order.size(); start += minibatch_) {
    const std::size_t end = std::min(order.size(), start + minibatch_);
    std::vector<Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
    batches_.push_back({gather(data_->images, rows), one_hot(data_->labels, rows, data_->num_labels),
                        1.0 / static_cast<double>(rows.size())});
  }

  non_smooth_ = activation_ == Activation::Relu;
  lower_bound_ = 0.0;
  // The Lipschitz constant of the gradient is not available in closed form;
  // callers that need it estimate it and record the estimate.
  smoothness_ = {0.0, BetaKind::Empirical};
}

std::string ClassifierObjective::describe() const {
  return "classifier activation=" + to_string(activation_) + " n=" + std::to_string(data_->size()) +
         " minibatch=" + std::to_string(minibatch_) + " partition_seed=" + std::to_string(partition_seed_) +
         " dataset=" + data_->content_hash();
}

double ClassifierObjective::component_weight(std::size_t i) const {
  check_component(i);
  return 1.0 / static_cast<double>(batches_.size());
}

double ClassifierObjective::mean_loss(const Vector& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < batches_.size(); ++i) {
    total += component_value(i, x) * static_cast<double>(batches_[i].images->rows());
  }
  return total / static_cast<double>(data_->size());
}

std::vector<int> ClassifierObjective::predict(const Vector& x, const Matrix& images) const {
  if (x.size() != dim()) throw InvalidArgument("classifier predict: parameter dimension mismatch");
  const Matrix W = kern::reshape(Matrix(x.head(labels_ * pixels_)), labels_, pixels_);
  const Matrix b = x.tail(labels_);
  Matrix o = kern::add_row(kern::matmul_nt(images, W), b);
  switch (activation_) {
    case Activation::Tanh: o = kern::tanh(o); break;
    case Activation::Sigmoid: o = kern::sigmoid(o); break;
    case Activation::Relu: o = kern::relu(o); break;
  }
  std::vector<int> out(static_cast<std::size_t>(o.rows()));
  for (Index i = 0; i < o.rows(); ++i) {
    int best = 0;
    for (Index j = 1; j < o.cols(); ++j) {
      if (o(i, j) > o(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double ClassifierObjective::accuracy(const Vector& x, const Dataset& data) const {
  if (data.size() == 0) return 0.0;
  const auto pred = predict(x, data.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::shared_ptr<const ClassifierObjective> make_classifier_objective(std::shared_ptr<const Dataset> data,
                                                                     Activation activation,
                                                                     std::size_t minibatch_size,
                                                                     std::uint64_t partition_seed) {
  if (!data || data->size() == 0) throw InvalidArgument("make_classifier_objective: empty dataset");
  return std::make_shared<const ClassifierObjective>(std::move(data), activation, minibatch_size, partition_seed);
}

}  // namespace cl2o
