#include "stego/optim.hpp"

#include <cmath>

#include "stego/error.hpp"

namespace stego {

void AdamConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail(ErrorKind::invalid_argument, "adam beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail(ErrorKind::invalid_argument, "adam beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) fail(ErrorKind::invalid_argument, "adam epsilon must be > 0");
  if (!(learning_rate > 0.0)) fail(ErrorKind::invalid_argument, "adam learning rate must be > 0");
}

template <class T>
void adam_step(BasicParameterSet<T>& params, const BasicParameterSet<T>& grads, BasicAdamState<T>& state,
               const AdamConfig& config) {
  config.validate();
  for (const auto& [name, theta] : params.entries()) {
    const auto* g = grads.find(name);
    if (g == nullptr) fail(ErrorKind::invalid_argument, "no gradient for parameter '" + name + "'");
    if (g->shape() != theta.shape()) {
      fail(ErrorKind::invalid_argument, "gradient for '" + name + "' has shape " + shape_string(g->shape()) +
                                            ", parameter is " + shape_string(theta.shape()));
    }
    if (!state.p.contains(name)) {
      state.p.add(name, BasicTensor<T>(theta.shape()));
      state.q.add(name, BasicTensor<T>(theta.shape()));
    }
  }

  const std::uint64_t t = state.t + 1;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));

  for (auto& [name, theta] : params.entries()) {
    const auto& g = grads.at(name);
    auto& p = state.p.at(name);
    auto& q = state.q.at(name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double pi = b1 * static_cast<double>(p[i]) + (1.0 - b1) * gi;
      const double qi = b2 * static_cast<double>(q[i]) + (1.0 - b2) * gi * gi;
      p[i] = static_cast<T>(pi);
      q[i] = static_cast<T>(qi);
      const double p_hat = pi / correction1;
      const double q_hat = qi / correction2;
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) - config.learning_rate * p_hat / std::sqrt(q_hat + config.epsilon));
    }
  }
  state.t = t;
}

template <class T>
JointLoss<T> joint_loss(const BasicTensor<T>& cover, const BasicTensor<T>& container, const BasicTensor<T>& secret,
                        const BasicTensor<T>& revealed, const LossConfig& config) {
  if (config.beta < 0.0) fail(ErrorKind::invalid_argument, "loss beta must be >= 0");
  auto c = mse_and_grad(container, cover);
  auto s = mse_and_grad(revealed, secret);
  JointLoss<T> out;
  out.cover_mse = c.value;
  out.secret_mse = s.value;
  out.value = c.value + config.beta * s.value;
  out.grad_container = std::move(c.grad);
  out.grad_revealed = std::move(s.grad);
  for (T& v : out.grad_revealed.data()) v = static_cast<T>(static_cast<double>(v) * config.beta);
  return out;
}

template void adam_step(BasicParameterSet<float>&, const BasicParameterSet<float>&, BasicAdamState<float>&,
                        const AdamConfig&);
template void adam_step(BasicParameterSet<double>&, const BasicParameterSet<double>&, BasicAdamState<double>&,
                        const AdamConfig&);
template JointLoss<float> joint_loss(const BasicTensor<float>&, const BasicTensor<float>&, const BasicTensor<float>&,
                                     const BasicTensor<float>&, const LossConfig&);
template JointLoss<double> joint_loss(const BasicTensor<double>&, const BasicTensor<double>&,
                                      const BasicTensor<double>&, const BasicTensor<double>&, const LossConfig&);

}  // namespace stego
