#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "stego/tensor.hpp"

namespace stego {

struct Var {
  std::size_t id = 0;
};

enum class OpKind { leaf, conv2d, conv2d_multi, relu, concat, noise };

/// One recorded forward op. Saved activations are the input values, which
/// stay alive (and unmodified) on the tape until it is destroyed.
struct TapeNode {
  OpKind kind = OpKind::leaf;
  std::vector<std::size_t> inputs;
  std::size_t output = 0;
};

/// Reverse-mode tape. Nodes are appended in forward order; backward()
/// walks them in exact reverse.
///
/// Leaves registered with `parameter()` or `constant()` are held by pointer
/// and must outlive the tape.
template <class T>
class BasicTape {
 public:
  using TensorT = BasicTensor<T>;

  Var constant(const TensorT& value);
  Var parameter(const TensorT& value);
  Var input(TensorT value, bool requires_grad);

  Var conv2d(Var input, Var weights, Var bias);
  // Branches over one input, outputs concatenated; see conv2d_multi_forward.
  Var conv2d_multi(Var input, std::span<const Var> weights, std::span<const Var> biases);
  Var relu(Var input);
  Var concat(std::span<const Var> parts);
  Var gaussian_noise(Var input, double stddev, Mode mode, SplitMix64& rng);

  const TensorT& value(Var v) const { return *values_.at(v.id); }
  bool requires_grad(Var v) const { return requires_grad_.at(v.id); }
  // Null until backward() has produced a gradient for v.
  const TensorT* grad(Var v) const;

  // Adds an upstream gradient at v; call once per loss term before backward().
  void seed(Var v, const TensorT& upstream);
  void backward();

  std::span<const TapeNode> nodes() const { return nodes_; }

 private:
  Var push_value(const TensorT* value, bool requires_grad);
  void accumulate(std::size_t id, TensorT&& g);

  std::deque<TensorT> owned_;
  std::vector<const TensorT*> values_;
  std::vector<bool> requires_grad_;
  std::vector<std::optional<TensorT>> grads_;
  std::vector<TapeNode> nodes_;
};

using Tape = BasicTape<float>;

}  // namespace stego
