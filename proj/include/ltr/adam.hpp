#pragma once

#include <cstdint>
#include <vector>

#include "ltr/graph.hpp"
#include "ltr/tensor.hpp"

namespace ltr {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Step count plus first/second-moment accumulators, one pair per parameter
// tensor, in the same order as the parameter list they were initialized
// from. Moment shapes always match their parameter shapes.
struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init(const std::vector<ParamTensor*>& params);
  bool initialized() const { return !m.empty() || step > 0; }
};

// One bias-corrected Adam update. grads[i] may be empty (treated as zero;
// such parameters stay put while their moments decay).
void adam_step(const AdamConfig& cfg, AdamState& state, const std::vector<ParamTensor*>& params,
               const std::vector<const Tensor*>& grads);

}  // namespace ltr
