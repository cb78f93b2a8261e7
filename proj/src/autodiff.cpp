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

#include "ida/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ida::ad {

std::string Shape::str() const {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape) {
  if (shape.rows == 0 || shape.cols == 0) {
    throw ShapeError("tensor: dimensions must be positive, got " + shape.str());
  }
  if (values.size() != shape.size()) {
    throw ShapeError("tensor: shape " + shape.str() + " needs " +
                     std::to_string(shape.size()) + " values, got " +
                     std::to_string(values.size()));
  }
  values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return filled(shape, 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  return Tensor(shape, std::vector<double>(shape.size(), value));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n, 1}, std::move(values));
}

std::span<const double> Tensor::values() const {
  if (!values_) return {};
  return {values_->data(), values_->size()};
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (r >= shape_.rows || c >= shape_.cols) {
    throw std::out_of_range("tensor index out of range");
  }
  return (*values_)[r * shape_.cols + c];
}

double Tensor::item() const {
  if (shape_.size() != 1) {
    throw ShapeError("item: expected a 1x1 tensor, got " + shape_.str());
  }
  return (*values_)[0];
}

Tensor Tensor::detach() const {
  Tensor out;
  out.shape_ = shape_;
  out.values_ = values_;
  return out;
}

// ---- Tape -------------------------------------------------------------------

Tensor Tape::leaf(const Tensor& value) {
  if (value.size() == 0) throw ShapeError("leaf: empty tensor");
  Tensor out = value.detach();
  nodes_.push_back(Node{value.shape(), {}, nullptr});
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  return out;
}

Tensor Tape::record(std::string_view op, Shape shape,
                    std::vector<double> values,
                    std::span<const Tensor* const> inputs,
                    BackwardFn backward) {
  if (backward_done_) {
    throw std::logic_error(std::string(op) +
                           ": tape already differentiated; use a new tape");
  }
  Node node{shape, {}, std::move(backward)};
  node.inputs.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    if (in->tape_ == nullptr) {
      node.inputs.push_back(-1);
    } else if (in->tape_ != this) {
      throw std::invalid_argument(std::string(op) +
                                  ": inputs recorded on different tapes");
    } else {
      node.inputs.push_back(static_cast<long>(in->node_));
    }
  }
  Tensor out(shape, std::move(values));
  nodes_.push_back(std::move(node));
  out.tape_ = this;
  out.node_ = nodes_.size() - 1;
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     loss.shape().str());
  }
  if (loss.tape_ != this) {
    throw std::invalid_argument("backward: loss is not recorded on this tape");
  }
  if (backward_done_) {
    throw std::logic_error("backward: already called on this tape");
  }
  backward_done_ = true;

  grads_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i].assign(nodes_[i].shape.size(), 0.0);
  }
  grads_[loss.node_][0] = 1.0;

  std::vector<std::span<double>> sinks;
  for (std::size_t i = loss.node_ + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward) continue;
    const auto& g = grads_[i];
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) {
      continue;
    }
    sinks.clear();
    for (long in : node.inputs) {
      if (in < 0) {
        sinks.emplace_back();
      } else {
        sinks.emplace_back(grads_[static_cast<std::size_t>(in)]);
      }
    }
    node.backward(g, sinks);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  if (!backward_done_) {
    throw std::logic_error("grad: backward has not been run");
  }
  if (t.tape_ != this) {
    throw std::invalid_argument("grad: tensor is not recorded on this tape");
  }
  return Tensor(t.shape(), grads_[t.node_]);
}

// ---- ops --------------------------------------------------------------------

namespace {

Tape* common_tape(std::string_view op, std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (t->tape() == nullptr) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw std::invalid_argument(std::string(op) +
                                  ": inputs recorded on different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

void require_nonempty(std::string_view op, const Tensor& t) {
  if (t.size() == 0) {
    throw ShapeError(std::string(op) + ": empty tensor");
  }
}

[[noreturn]] void shape_mismatch(std::string_view op, const Shape& a,
                                 const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.str() + " vs " +
                   b.str());
}

// Result is constant when no input is recorded.
Tensor make(std::string_view op, Shape shape, std::vector<double> values,
            std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  Tape* tape = common_tape(op, inputs);
  if (tape == nullptr) return Tensor(shape, std::move(values));
  std::vector<const Tensor*> in(inputs);
  return tape->record(op, shape, std::move(values), in, std::move(backward));
}

// Elementwise unary op with derivative computed from (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(std::string_view op, const Tensor& x, Fwd fwd, Deriv deriv) {
  require_nonempty(op, x);
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  if (x.tape() == nullptr) return Tensor(x.shape(), std::move(out));
  std::vector<double> saved_in(xv.begin(), xv.end());
  std::vector<double> saved_out = out;
  return make(op, x.shape(), std::move(out), {&x},
              [saved_in = std::move(saved_in), saved_out = std::move(saved_out),
               deriv](std::span<const double> g, GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t i = 0; i < g.size(); ++i) {
                  in[0][i] += g[i] * deriv(saved_in[i], saved_out[i]);
                }
              });
}

enum class Broadcast { none, a_scalar, b_scalar };

Broadcast binary_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  require_nonempty(op, a);
  require_nonempty(op, b);
  if (a.shape() == b.shape()) return Broadcast::none;
  if (a.size() == 1) return Broadcast::a_scalar;
  if (b.size() == 1) return Broadcast::b_scalar;
  shape_mismatch(op, a.shape(), b.shape());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_nonempty("matmul", a);
  require_nonempty("matmul", b);
  if (a.cols() != b.rows()) shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = &out[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return make("matmul", {n, m}, std::move(out), {&a, &b},
              [a = a.detach(), b = b.detach(), n, k, m](
                  std::span<const double> g, GradSinks in) {
                auto av = a.values();
                auto bv = b.values();
                if (!in[0].empty()) {
                  // dA = G * B^T
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < m; ++j) {
                        acc += g[i * m + j] * bv[p * m + j];
                      }
                      in[0][i * k + p] += acc;
                    }
                  }
                }
                if (!in[1].empty()) {
                  // dB = A^T * G
                  for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                      const double aip = av[i * k + p];
                      if (aip == 0.0) continue;
                      double* drow = &in[1][p * m];
                      for (std::size_t j = 0; j < m; ++j) {
                        drow[j] += aip * g[i * m + j];
                      }
                    }
                  }
                }
              });
}

namespace {

// Shared body of add/sub: out = a + sign * b.
Tensor add_signed(std::string_view op, const Tensor& a, const Tensor& b,
                  double sign) {
  const Broadcast bc = binary_shape(op, a, b);
  const Shape shape = bc == Broadcast::a_scalar ? b.shape() : a.shape();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(shape.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = bc == Broadcast::a_scalar ? av[0] : av[i];
    const double y = bc == Broadcast::b_scalar ? bv[0] : bv[i];
    out[i] = x + sign * y;
  }
  return make(op, shape, std::move(out), {&a, &b},
              [bc, sign](std::span<const double> g, GradSinks in) {
                if (!in[0].empty()) {
                  if (bc == Broadcast::a_scalar) {
                    double acc = 0.0;
                    for (double v : g) acc += v;
                    in[0][0] += acc;
                  } else {
                    for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
                  }
                }
                if (!in[1].empty()) {
                  if (bc == Broadcast::b_scalar) {
                    double acc = 0.0;
                    for (double v : g) acc += v;
                    in[1][0] += sign * acc;
                  } else {
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      in[1][i] += sign * g[i];
                    }
                  }
                }
              });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return add_signed("add", a, b, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return add_signed("sub", a, b, -1.0);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast bc = binary_shape("mul", a, b);
  const Shape shape = bc == Broadcast::a_scalar ? b.shape() : a.shape();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(shape.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = bc == Broadcast::a_scalar ? av[0] : av[i];
    const double y = bc == Broadcast::b_scalar ? bv[0] : bv[i];
    out[i] = x * y;
  }
  return make("mul", shape, std::move(out), {&a, &b},
              [a = a.detach(), b = b.detach(), bc](std::span<const double> g,
                                                   GradSinks in) {
                auto av = a.values();
                auto bv = b.values();
                auto aval = [&](std::size_t i) {
                  return bc == Broadcast::a_scalar ? av[0] : av[i];
                };
                auto bval = [&](std::size_t i) {
                  return bc == Broadcast::b_scalar ? bv[0] : bv[i];
                };
                if (!in[0].empty()) {
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const std::size_t dst = bc == Broadcast::a_scalar ? 0 : i;
                    in[0][dst] += g[i] * bval(i);
                  }
                }
                if (!in[1].empty()) {
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const std::size_t dst = bc == Broadcast::b_scalar ? 0 : i;
                    in[1][dst] += g[i] * aval(i);
                  }
                }
              });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      "add_scalar", x, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor log_sigmoid(const Tensor& x) {
  return unary(
      "log_sigmoid", x,
      [](double v) {
        return v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
      },
      [](double in, double) {
        if (in >= 0.0) {
          const double e = std::exp(-in);
          return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(in));
      });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double out) { return out; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(std::max(v, kLogFloor)); },
      [](double in, double) { return in > kLogFloor ? 1.0 / in : 0.0; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double in, double) {
        return in > 0.0 ? 1.0 : (in < 0.0 ? -1.0 : 0.0);
      });
}

Tensor hinge(const Tensor& x, double threshold) {
  return unary(
      "hinge", x,
      [threshold](double v) { return std::max(0.0, threshold - v); },
      [threshold](double in, double) { return in < threshold ? -1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  require_nonempty("sum", x);
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make("sum", {1, 1}, {acc}, {&x},
              [](std::span<const double> g, GradSinks in) {
                if (in[0].empty()) return;
                for (double& d : in[0]) d += g[0];
              });
}

Tensor mean(const Tensor& x) {
  require_nonempty("mean", x);
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_cols(const Tensor& x) {
  require_nonempty("sum_cols", x);
  const std::size_t n = x.rows(), m = x.cols();
  auto xv = x.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i] += xv[i * m + j];
  }
  return make("sum_cols", {n, 1}, std::move(out), {&x},
              [m](std::span<const double> g, GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t i = 0; i < g.size(); ++i) {
                  for (std::size_t j = 0; j < m; ++j) in[0][i * m + j] += g[i];
                }
              });
}

Tensor softmax(const Tensor& x) {
  require_nonempty("softmax", x);
  const std::size_t n = x.rows(), m = x.cols();
  auto xv = x.values();
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &xv[i * m];
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      out[i * m + j] = std::exp(row[j] - mx);
      z += out[i * m + j];
    }
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] /= z;
  }
  std::vector<double> saved = out;
  return make("softmax", x.shape(), std::move(out), {&x},
              [p = std::move(saved), n, m](std::span<const double> g,
                                           GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t i = 0; i < n; ++i) {
                  double dot = 0.0;
                  for (std::size_t j = 0; j < m; ++j) {
                    dot += g[i * m + j] * p[i * m + j];
                  }
                  for (std::size_t j = 0; j < m; ++j) {
                    in[0][i * m + j] += p[i * m + j] * (g[i * m + j] - dot);
                  }
                }
              });
}

Tensor log_softmax(const Tensor& x) {
  require_nonempty("log_softmax", x);
  const std::size_t n = x.rows(), m = x.cols();
  auto xv = x.values();
  std::vector<double> out(n * m);
  std::vector<double> p(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &xv[i * m];
    const double mx = *std::max_element(row, row + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += std::exp(row[j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < m; ++j) {
      out[i * m + j] = row[j] - lz;
      p[i * m + j] = std::exp(out[i * m + j]);
    }
  }
  return make("log_softmax", x.shape(), std::move(out), {&x},
              [p = std::move(p), n, m](std::span<const double> g,
                                       GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t i = 0; i < n; ++i) {
                  double gs = 0.0;
                  for (std::size_t j = 0; j < m; ++j) gs += g[i * m + j];
                  for (std::size_t j = 0; j < m; ++j) {
                    in[0][i * m + j] += g[i * m + j] - p[i * m + j] * gs;
                  }
                }
              });
}

Tensor row_l2_norm(const Tensor& x) {
  require_nonempty("row_l2_norm", x);
  const std::size_t n = x.rows(), m = x.cols();
  auto xv = x.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += xv[i * m + j] * xv[i * m + j];
    out[i] = std::sqrt(s);
  }
  std::vector<double> norms = out;
  return make("row_l2_norm", {n, 1}, std::move(out), {&x},
              [x = x.detach(), norms = std::move(norms), m](
                  std::span<const double> g, GradSinks in) {
                if (in[0].empty()) return;
                auto xv = x.values();
                for (std::size_t i = 0; i < g.size(); ++i) {
                  if (norms[i] == 0.0) continue;
                  const double f = g[i] / norms[i];
                  for (std::size_t j = 0; j < m; ++j) {
                    in[0][i * m + j] += f * xv[i * m + j];
                  }
                }
              });
}

Tensor row_l1_norm(const Tensor& x) {
  return sum_cols(abs(x));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_nonempty("concat_cols", a);
  require_nonempty("concat_cols", b);
  if (a.rows() != b.rows()) shape_mismatch("concat_cols", a.shape(), b.shape());
  const std::size_t n = a.rows(), ma = a.cols(), mb = b.cols();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n * (ma + mb));
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(&av[i * ma], ma, &out[i * (ma + mb)]);
    std::copy_n(&bv[i * mb], mb, &out[i * (ma + mb) + ma]);
  }
  return make("concat_cols", {n, ma + mb}, std::move(out), {&a, &b},
              [n, ma, mb](std::span<const double> g, GradSinks in) {
                for (std::size_t i = 0; i < n; ++i) {
                  const double* grow = &g[i * (ma + mb)];
                  if (!in[0].empty()) {
                    for (std::size_t j = 0; j < ma; ++j) {
                      in[0][i * ma + j] += grow[j];
                    }
                  }
                  if (!in[1].empty()) {
                    for (std::size_t j = 0; j < mb; ++j) {
                      in[1][i * mb + j] += grow[ma + j];
                    }
                  }
                }
              });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_nonempty("concat_rows", a);
  require_nonempty("concat_rows", b);
  if (a.cols() != b.cols()) shape_mismatch("concat_rows", a.shape(), b.shape());
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.size();
  return make("concat_rows", {a.rows() + b.rows(), a.cols()}, std::move(out),
              {&a, &b}, [na](std::span<const double> g, GradSinks in) {
                if (!in[0].empty()) {
                  for (std::size_t i = 0; i < na; ++i) in[0][i] += g[i];
                }
                if (!in[1].empty()) {
                  for (std::size_t i = na; i < g.size(); ++i) {
                    in[1][i - na] += g[i];
                  }
                }
              });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_nonempty("gather_rows", x);
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  const std::size_t m = x.cols();
  auto xv = x.values();
  std::vector<double> out(index.size() * m);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= x.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(index[r]) +
                              " out of range for " + x.shape().str());
    }
    std::copy_n(&xv[index[r] * m], m, &out[r * m]);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make("gather_rows", {index.size(), m}, std::move(out), {&x},
              [idx = std::move(idx), m](std::span<const double> g,
                                        GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t r = 0; r < idx.size(); ++r) {
                  for (std::size_t j = 0; j < m; ++j) {
                    in[0][idx[r] * m + j] += g[r * m + j];
                  }
                }
              });
}

Tensor broadcast_rows(const Tensor& row, std::size_t rows) {
  require_nonempty("broadcast_rows", row);
  if (row.rows() != 1 || rows == 0) {
    throw ShapeError("broadcast_rows: expected a 1xn row, got " +
                     row.shape().str());
  }
  const std::size_t m = row.cols();
  auto rv = row.values();
  std::vector<double> out(rows * m);
  for (std::size_t i = 0; i < rows; ++i) std::copy_n(rv.data(), m, &out[i * m]);
  return make("broadcast_rows", {rows, m}, std::move(out), {&row},
              [rows, m](std::span<const double> g, GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t i = 0; i < rows; ++i) {
                  for (std::size_t j = 0; j < m; ++j) in[0][j] += g[i * m + j];
                }
              });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_nonempty("reshape", x);
  if (shape.size() != x.size()) shape_mismatch("reshape", x.shape(), shape);
  std::vector<double> out(x.values().begin(), x.values().end());
  return make("reshape", shape, std::move(out), {&x},
              [](std::span<const double> g, GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t i = 0; i < g.size(); ++i) in[0][i] += g[i];
              });
}

Tensor grad_reverse(const Tensor& x, double lambda) {
  if (!std::isfinite(lambda)) {
    throw std::invalid_argument("grad_reverse: lambda must be finite");
  }
  if (lambda < 0.0) {
    throw std::invalid_argument("grad_reverse: lambda must be nonnegative, got " +
                                std::to_string(lambda));
  }
  require_nonempty("grad_reverse", x);
  std::vector<double> out(x.values().begin(), x.values().end());
  return make("grad_reverse", x.shape(), std::move(out), {&x},
              [lambda](std::span<const double> g, GradSinks in) {
                if (in[0].empty()) return;
                for (std::size_t i = 0; i < g.size(); ++i) {
                  in[0][i] += -lambda * g[i];
                }
              });
}

// ---- grad_check -------------------------------------------------------------

GradCheckResult grad_check(const LossBuilder& f,
                           std::span<const Tensor> params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be > 0");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(params.size());
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
    Tensor loss = f(tape, leaves);
    if (loss.recorded()) {
      tape.backward(loss);
      for (const Tensor& l : leaves) analytic.push_back(tape.grad(l));
    } else {
      for (const Tensor& p : params) analytic.push_back(Tensor::zeros(p.shape()));
    }
  }

  auto evaluate = [&](std::size_t which, std::size_t index, double delta) {
    Tape tape;
    std::vector<Tensor> leaves;
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (p == which) {
        std::vector<double> v(params[p].values().begin(),
                              params[p].values().end());
        v[index] += delta;
        leaves.push_back(tape.leaf(Tensor(params[p].shape(), std::move(v))));
      } else {
        leaves.push_back(tape.leaf(params[p]));
      }
    }
    return f(tape, leaves).item();
  };

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double numeric =
          (evaluate(p, i, eps) - evaluate(p, i, -eps)) / (2.0 * eps);
      const double a = analytic[p].values()[i];
      if (std::isnan(numeric) || std::isnan(a)) {
        result.ok = false;
        result.param = p;
        result.index = i;
        result.max_rel_error = std::numeric_limits<double>::quiet_NaN();
        result.message = "NaN at param " + std::to_string(p) + " index " +
                         std::to_string(i);
        return result;
      }
      const double rel =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.param = p;
        result.index = i;
      }
    }
  }
  return result;
}

}  // namespace ida::ad
