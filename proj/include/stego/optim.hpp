#pragma once

#include <cstdint>

#include "stego/params.hpp"
#include "stego/tensor.hpp"

namespace stego {

/// Adam hyper-parameters with the usual defaults.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// First (p) and second (q) moment accumulators, keyed like the parameters,
/// plus the global step counter. Empty until the first step.
template <class T>
struct BasicAdamState {
  BasicParameterSet<T> p;
  BasicParameterSet<T> q;
  std::uint64_t t = 0;
};

using AdamState = BasicAdamState<float>;

/// One Adam update over every registered parameter:
///
///   p <- b1 p + (1 - b1) g
///   q <- b2 q + (1 - b2) g^2
///   theta <- theta - lr * p_hat / sqrt(q_hat + eps)
///
/// with p_hat = p / (1 - b1^t), q_hat = q / (1 - b2^t). Note eps sits inside
/// the square root. Throws if any parameter lacks a gradient.
template <class T>
void adam_step(BasicParameterSet<T>& params, const BasicParameterSet<T>& grads, BasicAdamState<T>& state,
               const AdamConfig& config);

struct LossConfig {
  double beta = 1.0;  // weight on the secret reconstruction term
};

template <class T>
struct JointLoss {
  double value = 0.0;
  double cover_mse = 0.0;
  double secret_mse = 0.0;
  BasicTensor<T> grad_container;
  BasicTensor<T> grad_revealed;
};

/// L = MSE(cover, container) + beta * MSE(secret, revealed), with gradients
/// w.r.t. container and revealed.
template <class T>
JointLoss<T> joint_loss(const BasicTensor<T>& cover, const BasicTensor<T>& container, const BasicTensor<T>& secret,
                        const BasicTensor<T>& revealed, const LossConfig& config);

}  // namespace stego
