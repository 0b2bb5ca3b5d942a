#pragma once
#include <functional>
#include <vector>

#include "midgap/tensor.hpp"

namespace midgap {

// Builds a scalar loss from the given inputs; called repeatedly with perturbed
// copies, so it must be a pure function of the input values.
using LossBuilder = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares reverse-mode gradients against central finite differences
// (f(x+eps) - f(x-eps)) / (2 eps), coordinate by coordinate. Returns the worst
// relative error with denominator max(|analytic|, |numeric|, 1e-8).
double grad_check(const LossBuilder& build, const std::vector<Tensor>& inputs, double eps);

}  // namespace midgap
