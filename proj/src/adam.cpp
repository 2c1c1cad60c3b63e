#include "ltr/adam.hpp"

#include <cmath>

#include "ltr/error.hpp"

namespace ltr {

void AdamState::init(const std::vector<ParamTensor*>& params) {
  step = 0;
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const ParamTensor* p : params) {
    m.push_back(Tensor::zeros(p->value.shape));
    v.push_back(Tensor::zeros(p->value.shape));
  }
}

void adam_step(const AdamConfig& cfg, AdamState& state, const std::vector<ParamTensor*>& params,
               const std::vector<const Tensor*>& grads) {
  if (params.size() != state.m.size() || params.size() != grads.size())
    throw Error("adam_step: parameter/state/gradient count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i]->value;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    if (!p.same_shape(m))
      throw ShapeError("adam_step: moment shape " + shape_str(m.shape) +
                       " does not match parameter shape " + shape_str(p.shape));
    const Tensor* g = grads[i];
    if (g != nullptr) require_same_shape(p, *g, "adam_step");
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      const double gj = g ? (*g)[j] : 0.0;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace ltr
