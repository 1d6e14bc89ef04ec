#include "stego/tape.hpp"

#include "stego/error.hpp"

namespace stego {

template <class T>
Var BasicTape<T>::push_value(const TensorT* value, bool requires_grad) {
  values_.push_back(value);
  requires_grad_.push_back(requires_grad);
  grads_.emplace_back();
  return Var{values_.size() - 1};
}

template <class T>
Var BasicTape<T>::constant(const TensorT& value) {
  Var v = push_value(&value, false);
  nodes_.push_back({OpKind::leaf, {}, v.id});
  return v;
}

template <class T>
Var BasicTape<T>::parameter(const TensorT& value) {
  Var v = push_value(&value, true);
  nodes_.push_back({OpKind::leaf, {}, v.id});
  return v;
}

template <class T>
Var BasicTape<T>::input(TensorT value, bool requires_grad) {
  owned_.push_back(std::move(value));
  Var v = push_value(&owned_.back(), requires_grad);
  nodes_.push_back({OpKind::leaf, {}, v.id});
  return v;
}

template <class T>
Var BasicTape<T>::conv2d(Var input, Var weights, Var bias) {
  owned_.push_back(conv2d_forward(value(input), value(weights), value(bias)));
  const bool rg = requires_grad(input) || requires_grad(weights) || requires_grad(bias);
  Var v = push_value(&owned_.back(), rg);
  nodes_.push_back({OpKind::conv2d, {input.id, weights.id, bias.id}, v.id});
  return v;
}

template <class T>
Var BasicTape<T>::conv2d_multi(Var input, std::span<const Var> weights, std::span<const Var> biases) {
  if (weights.size() != biases.size()) fail(ErrorKind::invalid_argument, "conv2d_multi needs one bias per kernel");
  std::vector<const TensorT*> w, b;
  std::vector<std::size_t> ids{input.id};
  bool rg = requires_grad(input);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    w.push_back(&value(weights[i]));
    b.push_back(&value(biases[i]));
    ids.push_back(weights[i].id);
    ids.push_back(biases[i].id);
    rg = rg || requires_grad(weights[i]) || requires_grad(biases[i]);
  }
  owned_.push_back(conv2d_multi_forward<T>(value(input), w, b));
  Var v = push_value(&owned_.back(), rg);
  nodes_.push_back({OpKind::conv2d_multi, std::move(ids), v.id});
  return v;
}

template <class T>
Var BasicTape<T>::relu(Var input) {
  owned_.push_back(relu_forward(value(input)));
  Var v = push_value(&owned_.back(), requires_grad(input));
  nodes_.push_back({OpKind::relu, {input.id}, v.id});
  return v;
}

template <class T>
Var BasicTape<T>::concat(std::span<const Var> parts) {
  std::vector<const TensorT*> tensors;
  std::vector<std::size_t> ids;
  bool rg = false;
  for (Var p : parts) {
    tensors.push_back(&value(p));
    ids.push_back(p.id);
    rg = rg || requires_grad(p);
  }
  owned_.push_back(concat_channels<T>(tensors));
  Var v = push_value(&owned_.back(), rg);
  nodes_.push_back({OpKind::concat, std::move(ids), v.id});
  return v;
}

template <class T>
Var BasicTape<T>::gaussian_noise(Var input, double stddev, Mode mode, SplitMix64& rng) {
  owned_.push_back(stego::gaussian_noise(value(input), stddev, mode, rng));
  Var v = push_value(&owned_.back(), requires_grad(input));
  nodes_.push_back({OpKind::noise, {input.id}, v.id});
  return v;
}

template <class T>
const typename BasicTape<T>::TensorT* BasicTape<T>::grad(Var v) const {
  const auto& g = grads_.at(v.id);
  return g ? &*g : nullptr;
}

template <class T>
void BasicTape<T>::accumulate(std::size_t id, TensorT&& g) {
  if (!requires_grad_[id]) return;
  if (grads_[id]) {
    grads_[id]->add(g);
  } else {
    grads_[id] = std::move(g);
  }
}

template <class T>
void BasicTape<T>::seed(Var v, const TensorT& upstream) {
  if (upstream.shape() != value(v).shape()) {
    fail(ErrorKind::invalid_argument, "seed gradient " + shape_string(upstream.shape()) + " does not match value " +
                                          shape_string(value(v).shape()));
  }
  accumulate(v.id, TensorT(upstream));
}

template <class T>
void BasicTape<T>::backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const TapeNode& node = *it;
    if (node.kind == OpKind::leaf || !grads_[node.output]) continue;
    const TensorT& up = *grads_[node.output];
    switch (node.kind) {
      case OpKind::conv2d: {
        const std::size_t in = node.inputs[0];
        if (values_[in] == nullptr || values_[node.inputs[1]] == nullptr) {
          fail(ErrorKind::internal, "conv2d backward: saved activations missing");
        }
        auto g = conv2d_backward(*values_[in], *values_[node.inputs[1]], up, requires_grad_[in]);
        if (requires_grad_[in]) accumulate(in, std::move(g.input));
        accumulate(node.inputs[1], std::move(g.weights));
        accumulate(node.inputs[2], std::move(g.bias));
        break;
      }
      case OpKind::conv2d_multi: {
        const std::size_t in = node.inputs[0];
        std::vector<const TensorT*> w;
        for (std::size_t i = 1; i < node.inputs.size(); i += 2) w.push_back(values_[node.inputs[i]]);
        auto g = conv2d_multi_backward<T>(*values_[in], w, up, requires_grad_[in]);
        if (requires_grad_[in]) accumulate(in, std::move(g.input));
        for (std::size_t i = 0; i < w.size(); ++i) {
          accumulate(node.inputs[1 + 2 * i], std::move(g.weights[i]));
          accumulate(node.inputs[2 + 2 * i], std::move(g.biases[i]));
        }
        break;
      }
      case OpKind::relu:
        accumulate(node.inputs[0], relu_backward(*values_[node.inputs[0]], up));
        break;
      case OpKind::concat: {
        std::vector<std::size_t> counts;
        for (std::size_t id : node.inputs) counts.push_back(values_[id]->dim(2));
        auto parts = split_channels(up, counts);
        for (std::size_t i = 0; i < parts.size(); ++i) accumulate(node.inputs[i], std::move(parts[i]));
        break;
      }
      case OpKind::noise:
        accumulate(node.inputs[0], TensorT(up));
        break;
      case OpKind::leaf:
        break;
    }
  }
}

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace stego
