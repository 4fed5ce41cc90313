#include "adasiam/optim.hpp"

#include "adasiam/errors.hpp"

namespace adasiam {

void sgd_step(std::span<LayerParams* const> params, std::span<const ParamGrads> grads,
              SgdState& state) {
  if (params.size() != grads.size()) throw ConfigError("sgd_step: params/grads count mismatch");
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (const LayerParams* p : params) state.velocity.push_back(zero_grads_like(*p));
  }
  auto update = [&](Tensor& w, const Tensor& g, Tensor& v, double rate) {
    if (g.shape() != w.shape()) {
      throw ConfigError("sgd_step: gradient shape " + shape_string(g.shape()) +
                        " != parameter shape " + shape_string(w.shape()));
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = state.momentum * v[i] - rate * (g[i] + state.weight_decay * w[i]);
      w[i] += v[i];
    }
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    LayerParams& p = *params[k];
    if (p.frozen) continue;
    const double rate = state.global_lr * p.lr_multiplier;
    update(p.weights, grads[k].weights, state.velocity[k].weights, rate);
    update(p.bias, grads[k].bias, state.velocity[k].bias, rate);
  }
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace adasiam
