/* Copyright 2026 The IDA Lab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tensor is an immutable value; it is either a constant or the
// output of an operation recorded on a Tape. Vectors are 1 x n matrices and
// scalars are 1 x 1.
//
// Broadcasting is limited to scalar-tensor pairs. Bias rows are expanded with
// broadcast_rows() explicitly.

#ifndef IDA_AUTODIFF_HPP_
#define IDA_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ida::ad {

// Floor applied inside log(): log(max(x, kLogFloor)).
inline constexpr double kLogFloor = 1e-12;

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tape;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  // 1 x n row vector.
  static Tensor row(std::vector<double> values);
  // n x 1 column vector.
  static Tensor column(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return shape_.size(); }

  std::span<const double> values() const;
  double at(std::size_t r, std::size_t c) const;
  // Value of a 1 x 1 tensor.
  double item() const;

  bool recorded() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  // Constant copy with the same values and no history.
  Tensor detach() const;

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

// Accumulators handed to a backward function, one per op input. An input that
// is a constant gets an empty span and must be skipped.
using GradSinks = std::span<const std::span<double>>;
using BackwardFn =
    std::function<void(std::span<const double> upstream, GradSinks inputs)>;

// Append-only record of operations. Confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `value` as a differentiable input (a parameter or an input we
  // want gradients for).
  Tensor leaf(const Tensor& value);

  // Records an op output. Inputs that are constants carry no gradient. All
  // recorded inputs must belong to this tape.
  Tensor record(std::string_view op, Shape shape, std::vector<double> values,
                std::span<const Tensor* const> inputs, BackwardFn backward);

  // Reverse sweep from a scalar loss. May be called once per tape.
  void backward(const Tensor& loss);

  // Gradient of the last backward() w.r.t. `t`. Zero for nodes the loss does
  // not reach.
  Tensor grad(const Tensor& t) const;

  bool has_backward() const { return backward_done_; }
  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<long> inputs;  // -1 marks a constant input
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool backward_done_ = false;
};

// ---- primitive ops ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// log(sigmoid(x)) without saturation.
Tensor log_sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
// log(max(x, kLogFloor)); the gradient is zero on the clamped branch.
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
// Sum of all elements, 1 x 1.
Tensor sum(const Tensor& x);
// Mean of all elements, 1 x 1.
Tensor mean(const Tensor& x);
// Row sums, n x 1.
Tensor sum_cols(const Tensor& x);
// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
// Row-wise Euclidean norm, n x 1. Subgradient zero at the origin.
Tensor row_l2_norm(const Tensor& x);
// Row-wise L1 norm, n x 1.
Tensor row_l1_norm(const Tensor& x);
// max(0, threshold - x) elementwise.
Tensor hinge(const Tensor& x, double threshold);
// [a | b] along the feature axis.
Tensor concat_cols(const Tensor& a, const Tensor& b);
// Stacks a on top of b.
Tensor concat_rows(const Tensor& a, const Tensor& b);
// Rows of x picked by index (repeats allowed).
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
// Tiles a 1 x n row into `rows` x n.
Tensor broadcast_rows(const Tensor& row, std::size_t rows);
// Same values, new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

// Identity forward; backward multiplies the upstream gradient by -lambda.
Tensor grad_reverse(const Tensor& x, double lambda);

// ---- gradient checking ------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t param = 0;  // location of the worst coordinate
  std::size_t index = 0;
  bool ok = true;         // false when NaN was seen
  std::string message;
};

// `f` builds a scalar loss on the given tape from leaf tensors bound to the
// given parameter values. Relative error per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
using LossBuilder =
    std::function<Tensor(Tape& tape, std::span<const Tensor> params)>;

GradCheckResult grad_check(const LossBuilder& f,
                           std::span<const Tensor> params, double eps = 1e-5);

}  // namespace ida::ad

#endif  // IDA_AUTODIFF_HPP_
