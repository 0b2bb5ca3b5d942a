#include "midgap/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace midgap {

double grad_check(const LossBuilder& build, const std::vector<Tensor>& inputs, double eps) {
    if (eps <= 0.0 || eps > 1e-3) throw RangeError("grad_check: eps must be in (0, 1e-3]");

    // analytic pass
    std::vector<Tensor> live;
    live.reserve(inputs.size());
    for (const auto& t : inputs) {
        Tensor c = Tensor::param(t.shape(), t.values());
        live.push_back(c);
    }
    {
        Graph tape;
        Tensor loss = build(live);
        tape.backward(loss);
    }

    auto eval = [&](std::size_t which, long coord, double delta) {
        std::vector<Tensor> probe;
        probe.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            std::vector<double> v = inputs[i].values();
            if (i == which) v[coord] += delta;
            probe.push_back(Tensor::from(inputs[i].shape(), std::move(v)));
        }
        NoGradScope off;
        return build(probe).item();
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& analytic = live[i].grad();
        for (long c = 0; c < inputs[i].size(); ++c) {
            double numeric = (eval(i, c, eps) - eval(i, c, -eps)) / (2.0 * eps);
            double a = analytic[c];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace midgap
