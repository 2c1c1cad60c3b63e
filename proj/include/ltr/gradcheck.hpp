#pragma once

#include <functional>
#include <vector>

#include "ltr/graph.hpp"

namespace ltr {

// Builds a scalar loss from a rank-1 input living in the given graph.
using ScalarFn = std::function<Var(Graph&, Var)>;

// Compares reverse-mode gradients of f at `point` against central finite
// differences. Returns max over coordinates of
// |analytic - numeric| / max(1, |numeric|).
double grad_check(const ScalarFn& f, const std::vector<double>& point, double step = 1e-5);

// Same check over a set of model parameters: `build` constructs the loss
// from parameter leaves it creates via g.param(...) on the given tensors.
using ParamLossFn = std::function<Var(Graph&)>;
double grad_check_params(const ParamLossFn& build, const std::vector<ParamTensor*>& params,
                         double step = 1e-5);

}  // namespace ltr
