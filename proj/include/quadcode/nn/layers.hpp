#pragma once

// Forward and backward passes for the fixed layer set used by the word and
// character ConvNets. Backward functions accumulate (+=) into gradient
// tensors so per-example contributions can be summed.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "quadcode/nn/tensor.hpp"
#include "quadcode/rng.hpp"

namespace quadcode::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

inline MatrixMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline ConstMatrixMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
inline VectorMap as_vector(Tensor& t) {
  return VectorMap(t.data(), static_cast<Eigen::Index>(t.size()));
}
inline ConstVectorMap as_vector(const Tensor& t) {
  return ConstVectorMap(t.data(), static_cast<Eigen::Index>(t.size()));
}

// ---------------------------------------------------------------------------
// Embedding: indices [L] into table [V x d] -> [d x L] (channels x time).

inline Tensor embedding_forward(std::span<const std::int32_t> indices, const Tensor& table) {
  if (table.rank() != 2) throw ShapeMismatch("embedding table must be 2-D");
  const std::size_t vocab = table.dim(0), dim = table.dim(1), length = indices.size();
  if (length == 0) throw ShapeMismatch("embedding input is empty");
  Tensor out({dim, length});
  for (std::size_t t = 0; t < length; ++t) {
    const auto row = indices[t];
    if (row < 0 || static_cast<std::size_t>(row) >= vocab) {
      throw ShapeMismatch("embedding index " + std::to_string(row) + " outside table of " +
                          std::to_string(vocab) + " rows");
    }
    for (std::size_t j = 0; j < dim; ++j) out(j, t) = table(static_cast<std::size_t>(row), j);
  }
  return out;
}

// Row 0 (PAD) never receives gradient.
inline void embedding_backward(std::span<const std::int32_t> indices, const Tensor& grad_out,
                               Tensor& grad_table) {
  const std::size_t dim = grad_table.dim(1);
  for (std::size_t t = 0; t < indices.size(); ++t) {
    const auto row = static_cast<std::size_t>(indices[t]);
    if (row == 0) continue;
    for (std::size_t j = 0; j < dim; ++j) grad_table(row, j) += grad_out(j, t);
  }
}

// ---------------------------------------------------------------------------
// Valid 1-D convolution, stride 1.
// out[f, t] = bias[f] + sum_{c,k} input[c, t+k] * weights[f, c, k]

inline std::size_t conv_output_length(std::size_t length, std::size_t kernel) {
  return length >= kernel ? length - kernel + 1 : 0;
}

namespace detail {
// cols[(c*K + k), t] = input[c, t + k]
inline RowMatrix im2col(const Tensor& input, std::size_t kernel, std::size_t out_len) {
  const std::size_t channels = input.dim(0), length = input.dim(1);
  RowMatrix cols(static_cast<Eigen::Index>(channels * kernel), static_cast<Eigen::Index>(out_len));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      std::memcpy(cols.row(static_cast<Eigen::Index>(c * kernel + k)).data(),
                  input.data() + c * length + k, out_len * sizeof(double));
    }
  }
  return cols;
}
}  // namespace detail

inline void check_conv_shapes(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (input.rank() != 2 || weights.rank() != 3 || bias.rank() != 1) {
    throw ShapeMismatch("conv1d expects input [C x L], weights [F x C x K], bias [F]");
  }
  if (weights.dim(1) != input.dim(0)) {
    throw ShapeMismatch("conv1d: weights expect " + std::to_string(weights.dim(1)) +
                        " channels, input has " + std::to_string(input.dim(0)));
  }
  if (bias.dim(0) != weights.dim(0)) throw ShapeMismatch("conv1d: bias length != filters");
  if (input.dim(1) < weights.dim(2)) {
    throw ShapeMismatch("conv1d: input length " + std::to_string(input.dim(1)) +
                        " shorter than kernel " + std::to_string(weights.dim(2)));
  }
}

inline Tensor conv1d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_conv_shapes(input, weights, bias);
  const std::size_t channels = input.dim(0), filters = weights.dim(0), kernel = weights.dim(2);
  const std::size_t out_len = conv_output_length(input.dim(1), kernel);
  const RowMatrix cols = detail::im2col(input, kernel, out_len);
  Tensor out({filters, out_len});
  auto y = as_matrix(out, filters, out_len);
  y.noalias() = as_matrix(weights, filters, channels * kernel) * cols;
  y.colwise() += as_vector(bias);
  return out;
}

// `weight_grad_scale` multiplies the weight-gradient contribution; it is 1
// except in negative-control tests of the gradient checker.
inline void conv1d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out,
                            Tensor* grad_input, Tensor& grad_weights, Tensor& grad_bias,
                            double weight_grad_scale = 1.0) {
  const std::size_t channels = input.dim(0), length = input.dim(1);
  const std::size_t filters = weights.dim(0), kernel = weights.dim(2);
  const std::size_t out_len = conv_output_length(length, kernel);
  require_shape(grad_out, {filters, out_len}, "conv1d backward");
  const RowMatrix cols = detail::im2col(input, kernel, out_len);
  const auto g = as_matrix(grad_out, filters, out_len);
  const auto w = as_matrix(weights, filters, channels * kernel);
  as_matrix(grad_weights, filters, channels * kernel).noalias() +=
      weight_grad_scale * (g * cols.transpose());
  as_vector(grad_bias) += g.rowwise().sum();
  if (grad_input == nullptr) return;
  const RowMatrix grad_cols = w.transpose() * g;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const double* src = grad_cols.row(static_cast<Eigen::Index>(c * kernel + k)).data();
      double* dst = grad_input->data() + c * length + k;
      for (std::size_t t = 0; t < out_len; ++t) dst[t] += src[t];
    }
  }
}

// ---------------------------------------------------------------------------
// Non-overlapping max pooling over time, stride = width, remainder dropped.

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // input time index per output element
};

inline std::size_t pool_output_length(std::size_t length, std::size_t width) {
  return width == 0 ? 0 : length / width;
}

inline PoolResult maxpool1d_forward(const Tensor& input, std::size_t width) {
  if (input.rank() != 2 || width == 0) throw ShapeMismatch("maxpool1d expects [F x L] and width >= 1");
  const std::size_t rows = input.dim(0), length = input.dim(1);
  const std::size_t out_len = pool_output_length(length, width);
  if (out_len == 0) {
    throw ShapeMismatch("maxpool1d: length " + std::to_string(length) + " shorter than width " +
                        std::to_string(width));
  }
  PoolResult r{Tensor({rows, out_len}), std::vector<std::uint32_t>(rows * out_len)};
  for (std::size_t f = 0; f < rows; ++f) {
    const double* in = input.data() + f * length;
    for (std::size_t o = 0; o < out_len; ++o) {
      std::size_t best = o * width;
      for (std::size_t t = best + 1; t < (o + 1) * width; ++t) {
        if (in[t] > in[best]) best = t;  // strict: lowest index wins ties
      }
      r.output(f, o) = in[best];
      r.argmax[f * out_len + o] = static_cast<std::uint32_t>(best);
    }
  }
  return r;
}

inline void maxpool1d_backward(const PoolResult& forward, const Tensor& grad_out,
                               Tensor& grad_input) {
  require_shape(grad_out, forward.output.shape(), "maxpool1d backward");
  const std::size_t rows = grad_out.dim(0), out_len = grad_out.dim(1);
  const std::size_t length = grad_input.dim(1);
  for (std::size_t f = 0; f < rows; ++f) {
    for (std::size_t o = 0; o < out_len; ++o) {
      grad_input[f * length + forward.argmax[f * out_len + o]] += grad_out(f, o);
    }
  }
}

// ---------------------------------------------------------------------------
// Dense: y = W x + b

inline Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2 || bias.rank() != 1 || weights.dim(1) != x.size() ||
      bias.dim(0) != weights.dim(0)) {
    throw ShapeMismatch("dense: weights " + shape_string(weights.shape()) + ", bias " +
                        shape_string(bias.shape()) + ", input " + shape_string(x.shape()));
  }
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  Tensor y({m});
  as_vector(y).noalias() = as_matrix(weights, m, n) * as_vector(x) + as_vector(bias);
  return y;
}

inline void dense_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out,
                           Tensor* grad_x, Tensor& grad_weights, Tensor& grad_bias) {
  const std::size_t m = weights.dim(0), n = weights.dim(1);
  require_shape(grad_out, {m}, "dense backward");
  const auto g = as_vector(grad_out);
  as_matrix(grad_weights, m, n).noalias() += g * as_vector(x).transpose();
  as_vector(grad_bias) += g;
  if (grad_x) as_vector(*grad_x).noalias() += as_matrix(weights, m, n).transpose() * g;
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

inline Tensor relu_forward(Tensor t) {
  for (auto& v : t.values()) v = v > 0.0 ? v : 0.0;
  return t;
}

// `output` is the forward result; gradient passes where output > 0.
inline Tensor relu_backward(const Tensor& output, Tensor grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(output[i] > 0.0)) grad[i] = 0.0;
  }
  return grad;
}

// Inverted dropout. Element i is kept iff the i-th draw of `stream` is
// >= rate; kept values are scaled by 1/(1-rate). The returned mask holds the
// per-element multiplier so backward can reuse it.
struct DropoutResult {
  Tensor output;
  std::vector<double> mask;  // empty when dropout is inactive
};

inline DropoutResult dropout_forward(Tensor t, double rate, const Rng* stream, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ShapeMismatch("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0 || stream == nullptr) return {std::move(t), {}};
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    mask[i] = Rng::to_unit(stream->at(i)) >= rate ? scale : 0.0;
    t[i] *= mask[i];
  }
  return {std::move(t), std::move(mask)};
}

inline Tensor dropout_backward(const std::vector<double>& mask, Tensor grad) {
  if (mask.empty()) return grad;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask[i];
  return grad;
}

inline Tensor flatten(const Tensor& t) { return t.reshaped({t.size()}); }

// Joins 1-D tensors end to end.
inline Tensor concat(std::span<const Tensor> parts) {
  std::vector<double> data;
  for (const auto& p : parts) {
    if (p.rank() != 1) throw ShapeMismatch("concat expects 1-D tensors, got " + shape_string(p.shape()));
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  if (data.empty()) throw ShapeMismatch("concat of nothing");
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

// Splits a gradient of a concat back into per-part gradients.
inline std::vector<Tensor> concat_backward(std::span<const Tensor> parts, const Tensor& grad) {
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::vector<double> slice(grad.values().begin() + static_cast<std::ptrdiff_t>(offset),
                              grad.values().begin() + static_cast<std::ptrdiff_t>(offset + p.size()));
    out.emplace_back(p.shape(), std::move(slice));
    offset += p.size();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

struct SoftmaxCrossEntropy {
  double loss = 0.0;
  Tensor probs;
  Tensor grad;  // d loss / d logits = probs - onehot(true_class)
};

inline Tensor softmax(const Tensor& logits) {
  const double zmax = *std::max_element(logits.values().begin(), logits.values().end());
  Tensor p = logits;
  double sum = 0.0;
  for (auto& v : p.values()) {
    v = std::exp(v - zmax);
    sum += v;
  }
  p *= 1.0 / sum;
  return p;
}

inline SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, std::size_t true_class) {
  if (logits.rank() != 1 || true_class >= logits.size()) {
    throw ShapeMismatch("softmax_cross_entropy: class index outside logits");
  }
  require_finite(logits, "logits");
  const double zmax = *std::max_element(logits.values().begin(), logits.values().end());
  double sum = 0.0;
  for (double z : logits.values()) sum += std::exp(z - zmax);
  SoftmaxCrossEntropy r;
  r.loss = std::log(sum) - (logits[true_class] - zmax);
  r.probs = Tensor(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) r.probs[i] = std::exp(logits[i] - zmax) / sum;
  r.grad = r.probs;
  r.grad[true_class] -= 1.0;
  return r;
}

// Lowest index wins ties.
inline std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[best]) best = i;
  }
  return best;
}

// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = rng.uniform(-a, a);
  return t;
}

}  // namespace quadcode::nn
