#include "ltr/gradcheck.hpp"

#include <cmath>

#include "ltr/error.hpp"

namespace ltr {

double grad_check(const ScalarFn& f, const std::vector<double>& point, double step) {
  Graph g;
  Var x = g.leaf(Tensor::vec(point));
  Var loss = f(g, x);
  g.backward(loss);
  Tensor analytic = g.grad(x);
  if (analytic.empty()) analytic = Tensor::zeros({static_cast<int>(point.size())});

  auto eval = [&](const std::vector<double>& p) {
    Graph ge(false);
    Var xe = ge.leaf(Tensor::vec(p));
    return ge.value(f(ge, xe))[0];
  };

  double max_err = 0.0;
  std::vector<double> p = point;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + step;
    const double up = eval(p);
    p[i] = saved - step;
    const double down = eval(p);
    p[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[static_cast<std::int64_t>(i)] - numeric) /
                       std::max(1.0, std::abs(numeric));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

double grad_check_params(const ParamLossFn& build, const std::vector<ParamTensor*>& params,
                         double step) {
  Graph g;
  Var loss = build(g);
  g.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const ParamTensor* p : params) analytic.push_back(g.param_grad(*p));

  auto eval = [&]() {
    Graph ge(false);
    return ge.value(build(ge))[0];
  };

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = params[pi]->value;
    for (std::int64_t j = 0; j < value.numel(); ++j) {
      const double saved = value[j];
      value[j] = saved + step;
      const double up = eval();
      value[j] = saved - step;
      const double down = eval();
      value[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err =
          std::abs(analytic[pi][j] - numeric) / std::max(1.0, std::abs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace ltr
