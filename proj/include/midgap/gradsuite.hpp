#pragma once
#include <string>
#include <vector>

namespace midgap {

struct GradSuiteCase {
    std::string name;
    double max_error = 0;
    double tolerance = 1e-4;
    bool passed() const { return max_error < tolerance; }
};

// Central finite-difference verification of every differentiable operation:
// elementwise kinds, reductions, structural ops, conv2d, pooling, upsampling,
// the ConvLSTM step, spectral normalization, kernel generation, kernel
// application and all training losses. Each case runs `seeds` random
// instances; the worst relative error is reported.
std::vector<GradSuiteCase> run_gradient_suite(int seeds);

}  // namespace midgap
