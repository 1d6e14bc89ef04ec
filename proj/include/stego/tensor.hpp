#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stego/rng.hpp"

namespace stego {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor with the channel axis innermost. Image activations
/// are [H, W, C]; convolution weights are [kH, kW, Cin, Cout].
///
/// The scalar type is a template parameter so gradient checks can run the
/// exact same kernels in double precision. Production code uses `Tensor`.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Element of an [H, W, C] tensor.
  T& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * shape_[1] + x) * shape_[2] + c]; }
  const T& at(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * shape_[1] + x) * shape_[2] + c];
  }

  void fill(T value);
  // this += other; shapes must match.
  void add(const BasicTensor& other);

  template <class U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const BasicTensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Kernels. Stride is always 1 and padding is always "same": a kernel of
// extent k pads floor((k-1)/2) before and ceil((k-1)/2) after each spatial
// axis. Convolution is cross-correlation (no kernel flip).

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias);

template <class T>
struct Conv2dGrads {
  BasicTensor<T> input;  // empty when not requested
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <class T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                               const BasicTensor<T>& upstream, bool want_input_grad = true);

// Several same-padded convolutions of one input with outputs concatenated
// along channels in argument order. Equal to concat_channels of the separate
// conv2d_forward results, but evaluated with one GEMM per kernel offset over
// all branches covering that offset.
template <class T>
BasicTensor<T> conv2d_multi_forward(const BasicTensor<T>& input, std::span<const BasicTensor<T>* const> weights,
                                    std::span<const BasicTensor<T>* const> biases);

template <class T>
struct MultiConvGrads {
  BasicTensor<T> input;  // empty when not requested
  std::vector<BasicTensor<T>> weights;
  std::vector<BasicTensor<T>> biases;
};

template <class T>
MultiConvGrads<T> conv2d_multi_backward(const BasicTensor<T>& input, std::span<const BasicTensor<T>* const> weights,
                                        const BasicTensor<T>& upstream, bool want_input_grad = true);

template <class T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input);

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& upstream);

template <class T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const> parts);

// Inverse of concat_channels for gradients: slices [H, W, sum(counts)] back into parts.
template <class T>
std::vector<BasicTensor<T>> split_channels(const BasicTensor<T>& upstream, std::span<const std::size_t> counts);

// Train mode adds i.i.d. N(0, stddev^2); eval mode (or stddev 0) copies the input.
template <class T>
BasicTensor<T> gaussian_noise(const BasicTensor<T>& input, double stddev, Mode mode, SplitMix64& rng);

template <class T>
struct MseResult {
  double value = 0.0;
  BasicTensor<T> grad;  // d value / d pred = 2 (pred - target) / N
};

template <class T>
MseResult<T> mse_and_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace stego
