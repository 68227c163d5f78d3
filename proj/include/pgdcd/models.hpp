#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "pgdcd/tensor.hpp"

namespace pgdcd {

struct LabeledDataset;

/// An input sample together with the domain its coordinates live in.
struct ImageVec {
  Vec data;
  double domain_lo = 0.0;
  double domain_hi = 1.0;

  ImageVec() = default;
  /// Throws std::invalid_argument if lo >= hi or a coordinate is outside
  /// [lo, hi] or non-finite.
  ImageVec(Vec values, double lo, double hi);

  std::size_t dim() const { return data.size(); }
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  static Matrix identity(std::size_t n);
};

/// Max-shifted softmax.
Vec softmax(std::span<const double> logits);

/// -log softmax(logits)[y] in log-sum-exp form. Throws std::out_of_range
/// for y >= logits.size().
double cross_entropy(std::span<const double> logits, std::size_t y);

/// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> v);

struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

/// A differentiable m-class classifier over R^d.
///
/// forward() must be a pure function of its input: cycle detection relies
/// on identical inputs producing bit-identical logits and gradients.
class ClassifierModel {
 public:
  virtual ~ClassifierModel() = default;

  virtual std::size_t dim_in() const = 0;
  virtual std::size_t num_classes() const = 0;
  /// Architecture tag used in the weights file ("linear", "mlp", "constant").
  virtual std::string_view arch() const = 0;
  virtual std::unique_ptr<ClassifierModel> clone() const = 0;

  Vec forward(std::span<const double> x) const;
  std::size_t predict(std::span<const double> x) const { return argmax(forward(x)); }

  /// Cross-entropy loss at (x, y) and its exact gradient with respect to x.
  LossGrad loss_and_input_grad(std::span<const double> x, std::size_t y) const;

 protected:
  virtual Vec forward_impl(std::span<const double> x) const = 0;
  virtual LossGrad loss_grad_impl(std::span<const double> x, std::size_t y) const = 0;
};

/// logits = W x + b
class LinearSoftmaxModel final : public ClassifierModel {
 public:
  LinearSoftmaxModel(Matrix weights, Vec biases);
  static LinearSoftmaxModel zeros(std::size_t dim_in, std::size_t num_classes);

  std::size_t dim_in() const override { return weights_.cols; }
  std::size_t num_classes() const override { return weights_.rows; }
  std::string_view arch() const override { return "linear"; }
  std::unique_ptr<ClassifierModel> clone() const override {
    return std::make_unique<LinearSoftmaxModel>(*this);
  }

  const Matrix& weights() const { return weights_; }
  const Vec& biases() const { return biases_; }
  Matrix& weights() { return weights_; }
  Vec& biases() { return biases_; }

 protected:
  Vec forward_impl(std::span<const double> x) const override;
  LossGrad loss_grad_impl(std::span<const double> x, std::size_t y) const override;

 private:
  Matrix weights_;
  Vec biases_;
};

enum class Activation { Relu, Tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// One hidden layer: logits = W2 act(W1 x + b1) + b2.
/// ReLU's derivative at 0 is taken as 0.
class MlpModel final : public ClassifierModel {
 public:
  MlpModel(Matrix hidden_weights, Vec hidden_biases, Matrix out_weights, Vec out_biases,
           Activation activation);

  /// He-scaled (relu) or Xavier-scaled (tanh) Gaussian weights, zero biases.
  static MlpModel random_init(std::size_t dim_in, std::size_t hidden, std::size_t num_classes,
                              Activation activation, std::uint64_t seed);

  std::size_t dim_in() const override { return w1_.cols; }
  std::size_t hidden() const { return w1_.rows; }
  std::size_t num_classes() const override { return w2_.rows; }
  std::string_view arch() const override { return "mlp"; }
  std::unique_ptr<ClassifierModel> clone() const override {
    return std::make_unique<MlpModel>(*this);
  }

  Activation activation() const { return act_; }
  const Matrix& hidden_weights() const { return w1_; }
  const Vec& hidden_biases() const { return b1_; }
  const Matrix& out_weights() const { return w2_; }
  const Vec& out_biases() const { return b2_; }
  Matrix& hidden_weights() { return w1_; }
  Vec& hidden_biases() { return b1_; }
  Matrix& out_weights() { return w2_; }
  Vec& out_biases() { return b2_; }

 protected:
  Vec forward_impl(std::span<const double> x) const override;
  LossGrad loss_grad_impl(std::span<const double> x, std::size_t y) const override;

 private:
  Matrix w1_;
  Vec b1_;
  Matrix w2_;
  Vec b2_;
  Activation act_;
};

/// Ignores its input; every gradient is zero.
class ConstantModel final : public ClassifierModel {
 public:
  ConstantModel(std::size_t dim_in, Vec logits);

  std::size_t dim_in() const override { return dim_; }
  std::size_t num_classes() const override { return logits_.size(); }
  std::string_view arch() const override { return "constant"; }
  std::unique_ptr<ClassifierModel> clone() const override {
    return std::make_unique<ConstantModel>(*this);
  }
  const Vec& logits() const { return logits_; }

 protected:
  Vec forward_impl(std::span<const double>) const override { return logits_; }
  LossGrad loss_grad_impl(std::span<const double> x, std::size_t y) const override;

 private:
  std::size_t dim_;
  Vec logits_;
};

/// Central differences of the cross-entropy loss, one coordinate at a time.
Vec finite_diff_grad(const ClassifierModel& model, std::span<const double> x, std::size_t y,
                     double h = 1e-5);

/// Minibatch gradient descent on mean cross-entropy. The batch sequence is
/// drawn from `seed`; identical arguments give bit-identical parameters.
/// Throws std::invalid_argument on an empty dataset.
LinearSoftmaxModel train_toy(const LinearSoftmaxModel& model, const LabeledDataset& data,
                             std::size_t steps, double lr, std::uint64_t seed,
                             std::size_t batch_size = 32);
MlpModel train_toy(const MlpModel& model, const LabeledDataset& data, std::size_t steps, double lr,
                   std::uint64_t seed, std::size_t batch_size = 32);

/// Weights file: versioned text with hexadecimal floats (bit-exact).
void save_model(const ClassifierModel& model, const std::filesystem::path& path);
std::string serialize_model(const ClassifierModel& model);
/// Throws FormatError on malformed, truncated, inconsistent or
/// version-mismatched input.
std::unique_ptr<ClassifierModel> load_model(const std::filesystem::path& path);
std::unique_ptr<ClassifierModel> parse_model(std::string_view text);

}  // namespace pgdcd
