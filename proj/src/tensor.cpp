#include "stego/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <numeric>
#include <sstream>

#include "stego/error.hpp"

namespace stego {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    fail(ErrorKind::invalid_argument, "tensor data length " + std::to_string(data_.size()) +
                                          " does not match shape " + shape_string(shape_));
  }
}

template <class T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <class T>
void BasicTensor<T>::add(const BasicTensor& other) {
  if (other.shape_ != shape_) {
    fail(ErrorKind::invalid_argument, "cannot add " + shape_string(other.shape_) + " into " + shape_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

namespace {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Several same-padded convolutions over one input, laid out inside a common
// kernel frame. Branch b occupies output columns [col, col + cout) and its
// kernel sits at (off_y, off_x) inside the frame.
struct Branch {
  std::size_t kernel_h, kernel_w, out_channels, col, off_y, off_x;
};

struct MultiGeometry {
  std::size_t height, width, in_channels;
  std::size_t frame_h, frame_w, pad_top, pad_left;
  std::size_t total_out = 0;
  std::vector<Branch> branches;

  std::size_t padded_width() const { return width + frame_w - 1; }
  std::size_t grid_rows() const { return height * padded_width(); }
};

template <class T>
MultiGeometry check_multi(const BasicTensor<T>& input, std::span<const BasicTensor<T>* const> weights) {
  if (input.rank() != 3) fail(ErrorKind::invalid_argument, "conv2d input must be [H,W,C], got " + shape_string(input.shape()));
  if (weights.empty()) fail(ErrorKind::invalid_argument, "conv2d needs at least one kernel");
  MultiGeometry g{input.dim(0), input.dim(1), input.dim(2), 0, 0, 0, 0, 0, {}};
  std::size_t pad_bottom = 0, pad_right = 0;
  for (const auto* w : weights) {
    if (w->rank() != 4) {
      fail(ErrorKind::invalid_argument, "conv2d weights must be [kH,kW,Cin,Cout], got " + shape_string(w->shape()));
    }
    if (w->dim(2) != input.dim(2)) {
      fail(ErrorKind::invalid_argument, "conv2d channel mismatch: input " + shape_string(input.shape()) + " has " +
                                            std::to_string(input.dim(2)) + " channels but weights " +
                                            shape_string(w->shape()) + " expect Cin=" + std::to_string(w->dim(2)));
    }
    if (w->dim(0) == 0 || w->dim(1) == 0) fail(ErrorKind::invalid_argument, "conv2d kernel extent must be >= 1");
    // floor((k-1)/2) before, ceil((k-1)/2) after.
    g.pad_top = std::max(g.pad_top, (w->dim(0) - 1) / 2);
    g.pad_left = std::max(g.pad_left, (w->dim(1) - 1) / 2);
    pad_bottom = std::max(pad_bottom, w->dim(0) / 2);
    pad_right = std::max(pad_right, w->dim(1) / 2);
  }
  g.frame_h = g.pad_top + pad_bottom + 1;
  g.frame_w = g.pad_left + pad_right + 1;
  for (const auto* w : weights) {
    g.branches.push_back({w->dim(0), w->dim(1), w->dim(3), g.total_out, g.pad_top - (w->dim(0) - 1) / 2,
                          g.pad_left - (w->dim(1) - 1) / 2});
    g.total_out += w->dim(3);
  }
  return g;
}

// Zero-padded copy of the input on a (H + frame_h - 1) x Wp grid, with
// Wp = W + frame_w - 1 and one slack row, so each frame offset reads one
// contiguous (H * Wp) x Cin matrix. Outputs live on the same padded-width
// grid; columns x >= W are discarded.
template <class T>
std::vector<T> pad_input(const BasicTensor<T>& input, const MultiGeometry& g) {
  const std::size_t wp = g.padded_width();
  std::vector<T> buf((g.height + g.frame_h) * wp * g.in_channels, T(0));
  const std::size_t row = g.width * g.in_channels;
  for (std::size_t y = 0; y < g.height; ++y) {
    std::copy_n(input.data().data() + y * row, row, buf.data() + ((y + g.pad_top) * wp + g.pad_left) * g.in_channels);
  }
  return buf;
}

// At one frame offset, a maximal run of consecutive branches whose kernels
// cover it. Their taps are packed side by side into a Cin x cols matrix.
template <class T>
struct TapRun {
  std::size_t frame_y, frame_x, col, cols;
  std::vector<std::pair<std::size_t, std::size_t>> parts;  // (branch, tap index ky * kW + kx)
  RowMatrix<T> taps;
};

template <class T>
std::vector<TapRun<T>> plan_runs(const MultiGeometry& g, std::span<const BasicTensor<T>* const> weights, bool pack) {
  std::vector<TapRun<T>> runs;
  for (std::size_t a = 0; a < g.frame_h; ++a) {
    for (std::size_t b = 0; b < g.frame_w; ++b) {
      TapRun<T>* open = nullptr;
      for (std::size_t i = 0; i < g.branches.size(); ++i) {
        const Branch& br = g.branches[i];
        const bool covers = a >= br.off_y && a < br.off_y + br.kernel_h && b >= br.off_x && b < br.off_x + br.kernel_w;
        if (!covers) {
          open = nullptr;
          continue;
        }
        if (open == nullptr) {
          runs.push_back({a, b, br.col, 0, {}, {}});
          open = &runs.back();
        }
        open->cols += br.out_channels;
        open->parts.emplace_back(i, (a - br.off_y) * br.kernel_w + (b - br.off_x));
      }
    }
  }
  if (pack) {
    for (auto& run : runs) {
      run.taps.resize(g.in_channels, run.cols);
      std::size_t col = 0;
      for (const auto& [i, tap] : run.parts) {
        const std::size_t cout = g.branches[i].out_channels;
        ConstMatrixMap<T> w(weights[i]->data().data() + tap * g.in_channels * cout, g.in_channels, cout);
        run.taps.middleCols(col, cout) = w;
        col += cout;
      }
    }
  }
  return runs;
}

}  // namespace

template <class T>
BasicTensor<T> conv2d_multi_forward(const BasicTensor<T>& input, std::span<const BasicTensor<T>* const> weights,
                                    std::span<const BasicTensor<T>* const> biases) {
  const MultiGeometry g = check_multi(input, weights);
  if (biases.size() != weights.size()) fail(ErrorKind::invalid_argument, "conv2d needs one bias per kernel");
  for (std::size_t i = 0; i < biases.size(); ++i) {
    if (biases[i]->size() != g.branches[i].out_channels) {
      fail(ErrorKind::invalid_argument, "conv2d bias " + shape_string(biases[i]->shape()) + " does not match Cout=" +
                                            std::to_string(g.branches[i].out_channels));
    }
  }
  const std::size_t wp = g.padded_width();
  const std::size_t rows = g.grid_rows();
  const std::vector<T> padded = pad_input(input, g);
  const auto runs = plan_runs(g, weights, true);

  RowMatrix<T> grid = RowMatrix<T>::Zero(rows, g.total_out);
  for (const auto& run : runs) {
    ConstMatrixMap<T> shifted(padded.data() + (run.frame_y * wp + run.frame_x) * g.in_channels, rows, g.in_channels);
    grid.middleCols(run.col, run.cols).noalias() += shifted * run.taps;
  }

  std::vector<T> bias(g.total_out);
  for (std::size_t i = 0; i < biases.size(); ++i) {
    std::copy_n(biases[i]->data().data(), g.branches[i].out_channels, bias.data() + g.branches[i].col);
  }
  BasicTensor<T> out({g.height, g.width, g.total_out});
  T* dst = out.data().data();
  for (std::size_t y = 0; y < g.height; ++y) {
    for (std::size_t x = 0; x < g.width; ++x) {
      const T* src = grid.data() + (y * wp + x) * g.total_out;
      for (std::size_t c = 0; c < g.total_out; ++c) *dst++ = src[c] + bias[c];
    }
  }
  return out;
}

template <class T>
MultiConvGrads<T> conv2d_multi_backward(const BasicTensor<T>& input, std::span<const BasicTensor<T>* const> weights,
                                        const BasicTensor<T>& upstream, bool want_input_grad) {
  const MultiGeometry g = check_multi(input, weights);
  if (upstream.shape() != Shape{g.height, g.width, g.total_out}) {
    fail(ErrorKind::internal, "conv2d backward: upstream " + shape_string(upstream.shape()) +
                                  " does not match forward output [" + std::to_string(g.height) + "," +
                                  std::to_string(g.width) + "," + std::to_string(g.total_out) + "]");
  }
  const std::size_t wp = g.padded_width();
  const std::size_t rows = g.grid_rows();

  // Upstream gradient on the padded-width grid; discarded columns stay zero.
  RowMatrix<T> dgrid = RowMatrix<T>::Zero(rows, g.total_out);
  for (std::size_t y = 0; y < g.height; ++y) {
    std::copy_n(upstream.data().data() + y * g.width * g.total_out, g.width * g.total_out,
                dgrid.data() + y * wp * g.total_out);
  }

  MultiConvGrads<T> grads;
  const Eigen::Matrix<T, 1, Eigen::Dynamic> bias_sum = dgrid.colwise().sum();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const Branch& br = g.branches[i];
    grads.weights.emplace_back(weights[i]->shape());
    grads.biases.emplace_back(Shape{br.out_channels});
    std::copy_n(bias_sum.data() + br.col, br.out_channels, grads.biases.back().data().data());
  }

  const std::vector<T> padded = pad_input(input, g);
  std::vector<T> dpadded;
  if (want_input_grad) dpadded.assign(padded.size(), T(0));
  const auto runs = plan_runs(g, weights, want_input_grad);

  RowMatrix<T> dtaps;
  for (const auto& run : runs) {
    const std::size_t shift = (run.frame_y * wp + run.frame_x) * g.in_channels;
    ConstMatrixMap<T> shifted(padded.data() + shift, rows, g.in_channels);
    const auto dcols = dgrid.middleCols(run.col, run.cols);
    dtaps.noalias() = shifted.transpose() * dcols;
    std::size_t col = 0;
    for (const auto& [i, tap] : run.parts) {
      const std::size_t cout = g.branches[i].out_channels;
      MatrixMap<T> dw(grads.weights[i].data().data() + tap * g.in_channels * cout, g.in_channels, cout);
      dw = dtaps.middleCols(col, cout);
      col += cout;
    }
    if (want_input_grad) {
      MatrixMap<T> dshifted(dpadded.data() + shift, rows, g.in_channels);
      dshifted.noalias() += dcols * run.taps.transpose();
    }
  }

  if (want_input_grad) {
    grads.input = BasicTensor<T>(input.shape());
    const std::size_t row = g.width * g.in_channels;
    for (std::size_t y = 0; y < g.height; ++y) {
      std::copy_n(dpadded.data() + ((y + g.pad_top) * wp + g.pad_left) * g.in_channels, row,
                  grads.input.data().data() + y * row);
    }
  }
  return grads;
}

template <class T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights, const BasicTensor<T>& bias) {
  const BasicTensor<T>* w[] = {&weights};
  const BasicTensor<T>* b[] = {&bias};
  return conv2d_multi_forward<T>(input, w, b);
}

template <class T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                               const BasicTensor<T>& upstream, bool want_input_grad) {
  const BasicTensor<T>* w[] = {&weights};
  auto multi = conv2d_multi_backward<T>(input, w, upstream, want_input_grad);
  return {std::move(multi.input), std::move(multi.weights[0]), std::move(multi.biases[0])};
}

template <class T>
BasicTensor<T> relu_forward(const BasicTensor<T>& input) {
  BasicTensor<T> out = input;
  for (T& v : out.data()) v = v > T(0) ? v : T(0);
  return out;
}

template <class T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& upstream) {
  if (input.shape() != upstream.shape()) fail(ErrorKind::internal, "relu backward shape mismatch");
  BasicTensor<T> grad(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > T(0) ? upstream[i] : T(0);
  return grad;
}

template <class T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const> parts) {
  if (parts.empty()) fail(ErrorKind::invalid_argument, "concat_channels needs at least one part");
  const std::size_t h = parts[0]->dim(0);
  const std::size_t w = parts[0]->dim(1);
  std::size_t total = 0;
  for (const auto* part : parts) {
    if (part->rank() != 3 || part->dim(0) != h || part->dim(1) != w) {
      fail(ErrorKind::invalid_argument, "concat_channels spatial mismatch: " + shape_string(part->shape()) + " vs [" +
                                            std::to_string(h) + "," + std::to_string(w) + ",*]");
    }
    total += part->dim(2);
  }
  BasicTensor<T> out({h, w, total});
  T* dst = out.data().data();
  for (std::size_t p = 0; p < h * w; ++p) {
    for (const auto* part : parts) {
      const std::size_t c = part->dim(2);
      dst = std::copy_n(part->data().data() + p * c, c, dst);
    }
  }
  return out;
}

template <class T>
std::vector<BasicTensor<T>> split_channels(const BasicTensor<T>& upstream, std::span<const std::size_t> counts) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (upstream.rank() != 3 || upstream.dim(2) != total) {
    fail(ErrorKind::invalid_argument, "split_channels: " + shape_string(upstream.shape()) + " does not carry " +
                                          std::to_string(total) + " channels");
  }
  const std::size_t h = upstream.dim(0);
  const std::size_t w = upstream.dim(1);
  std::vector<BasicTensor<T>> parts;
  parts.reserve(counts.size());
  for (std::size_t c : counts) parts.emplace_back(Shape{h, w, c});
  const T* src = upstream.data().data();
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t i = 0; i < counts.size(); ++i) {
      std::copy_n(src, counts[i], parts[i].data().data() + p * counts[i]);
      src += counts[i];
    }
  }
  return parts;
}

template <class T>
BasicTensor<T> gaussian_noise(const BasicTensor<T>& input, double stddev, Mode mode, SplitMix64& rng) {
  if (stddev < 0.0) fail(ErrorKind::invalid_argument, "gaussian_noise stddev must be >= 0");
  BasicTensor<T> out = input;
  if (mode == Mode::eval || stddev == 0.0) return out;
  for (T& v : out.data()) v += static_cast<T>(stddev * rng.normal());
  return out;
}

template <class T>
MseResult<T> mse_and_grad(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape()) {
    fail(ErrorKind::invalid_argument, "mse shape mismatch: " + shape_string(pred.shape()) + " vs " +
                                          shape_string(target.shape()));
  }
  MseResult<T> result;
  result.grad = BasicTensor<T>(pred.shape());
  if (pred.empty()) return result;
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += d * d;
    result.grad[i] = static_cast<T>(2.0 * d / n);
  }
  result.value = sum / n;
  return result;
}

#define STEGO_INSTANTIATE(T)                                                                                     \
  template class BasicTensor<T>;                                                                                 \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,   \
                                          bool);                                                                 \
  template BasicTensor<T> conv2d_multi_forward(const BasicTensor<T>&, std::span<const BasicTensor<T>* const>,       \
                                               std::span<const BasicTensor<T>* const>);                          \
  template MultiConvGrads<T> conv2d_multi_backward(const BasicTensor<T>&, std::span<const BasicTensor<T>* const>,  \
                                                   const BasicTensor<T>&, bool);                                   \
  template BasicTensor<T> relu_forward(const BasicTensor<T>&);                                                   \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>* const>);                               \
  template std::vector<BasicTensor<T>> split_channels(const BasicTensor<T>&, std::span<const std::size_t>);      \
  template BasicTensor<T> gaussian_noise(const BasicTensor<T>&, double, Mode, SplitMix64&);                      \
  template MseResult<T> mse_and_grad(const BasicTensor<T>&, const BasicTensor<T>&);

STEGO_INSTANTIATE(float)
STEGO_INSTANTIATE(double)

#undef STEGO_INSTANTIATE

}  // namespace stego
