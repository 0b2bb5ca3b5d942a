#include "midgap/layers.hpp"

#include <cmath>

namespace midgap {

// ---------------------------------------------------------------- init

Tensor xavier_init(Shape shape, int fan_in, int fan_out, std::uint64_t seed) {
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    long n = numel(shape);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = dist(rng);
    return Tensor::param(std::move(shape), std::move(v));
}

Tensor uniform_linear_init(Shape shape, std::uint64_t seed) {
    // uniform on [-b, b] has variance b^2/3; variance 1e-4 -> b = sqrt(3e-4)
    double bound = std::sqrt(3.0e-4);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    long n = numel(shape);
    std::vector<double> v(n);
    for (long i = 0; i < n; ++i) v[i] = dist(rng);
    return Tensor::param(std::move(shape), std::move(v));
}

Tensor zero_bias(int n) { return Tensor::param({n}, std::vector<double>(n, 0.0)); }

void ParamMap::merge(const ParamMap& other, const std::string& prefix) {
    for (const auto& [name, t] : other.items) items.emplace_back(prefix + name, t);
}

Tensor ParamMap::find(const std::string& name) const {
    for (const auto& [n, t] : items)
        if (n == name) return t;
    throw ConfigError("unknown parameter: " + name);
}

// ---------------------------------------------------------------- conv / block

Conv2dLayer::Conv2dLayer(int in_ch, int out_ch, int k, std::uint64_t seed)
    : weight(xavier_init({out_ch, in_ch, k, k}, in_ch * k * k, out_ch * k * k, seed)),
      bias(zero_bias(out_ch)),
      padding((k - 1) / 2) {}

void Conv2dLayer::collect(ParamMap& pm, const std::string& prefix) const {
    pm.add(prefix + ".w", weight);
    pm.add(prefix + ".b", bias);
}

ConvBlock::ConvBlock(int in_ch, const std::vector<int>& out_chs, Resample tail_,
                     std::uint64_t seed) {
    int c = in_ch;
    for (std::size_t i = 0; i < out_chs.size(); ++i) {
        convs.emplace_back(c, out_chs[i], 3, mix_seed(seed, i));
        c = out_chs[i];
    }
    tail = tail_;
}

Tensor ConvBlock::forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& conv : convs) h = relu(conv.forward(h));
    switch (tail) {
        case Resample::MaxPool: return max_pool2(h);
        case Resample::Upsample: return bilinear_upsample2(h);
        case Resample::None: return h;
    }
    return h;
}

std::vector<std::pair<int, int>> ConvBlock::channel_chain() const {
    std::vector<std::pair<int, int>> chain;
    for (const auto& c : convs) chain.emplace_back(c.weight.shape()[1], c.weight.shape()[0]);
    return chain;
}

void ConvBlock::collect(ParamMap& pm, const std::string& prefix) const {
    for (std::size_t i = 0; i < convs.size(); ++i)
        convs[i].collect(pm, prefix + ".conv" + std::to_string(i));
}

// ---------------------------------------------------------------- ConvLSTM

ConvLSTMCell::ConvLSTMCell(int in_ch, int hidden_ch, std::uint64_t seed)
    : weight(xavier_init({4 * hidden_ch, in_ch + hidden_ch, 3, 3}, (in_ch + hidden_ch) * 9,
                         4 * hidden_ch * 9, seed)),
      bias(zero_bias(4 * hidden_ch)),
      in_channels(in_ch),
      hidden_channels(hidden_ch) {}

ConvLSTMState ConvLSTMCell::zero_state(int h, int w) const {
    return {Tensor::zeros({hidden_channels, h, w}), Tensor::zeros({hidden_channels, h, w})};
}

std::pair<Tensor, ConvLSTMState> ConvLSTMCell::step(const Tensor& input,
                                                    const ConvLSTMState& state) const {
    if (input.shape()[1] != state.hidden.shape()[1] || input.shape()[2] != state.hidden.shape()[2])
        throw ShapeError("convlstm: input and state spatial sizes differ");
    if (input.shape()[0] != in_channels)
        throw ShapeError("convlstm: expected " + std::to_string(in_channels) +
                         " input channels, got " + std::to_string(input.shape()[0]));
    Tensor gates = conv2d(concat_channels({input, state.hidden}), weight, bias, 1);
    int hc = hidden_channels;
    Tensor gi = sigmoid(slice_channels(gates, 0, hc));
    Tensor gf = sigmoid(slice_channels(gates, hc, 2 * hc));
    Tensor go = sigmoid(slice_channels(gates, 2 * hc, 3 * hc));
    Tensor gg = tanh(slice_channels(gates, 3 * hc, 4 * hc));
    Tensor cell = add(mul(gf, state.cell), mul(gi, gg));
    Tensor hidden = mul(go, tanh(cell));
    return {hidden, ConvLSTMState{hidden, cell}};
}

void ConvLSTMCell::collect(ParamMap& pm, const std::string& prefix) const {
    pm.add(prefix + ".w", weight);
    pm.add(prefix + ".b", bias);
}

// ---------------------------------------------------------------- spectral norm

SpectralNorm::SpectralNorm(Tensor raw_weight, double lipschitz_)
    : raw(std::move(raw_weight)), lipschitz(lipschitz_) {
    u.assign(rows(), 0.0);
    // deterministic start vector; normalized below
    for (int i = 0; i < rows(); ++i) u[i] = 1.0 + 0.01 * i;
    double norm = 0.0;
    for (double x : u) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : u) x /= norm;
}

namespace {

double vec_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

double SpectralNorm::sigma_estimate(int power_iters) {
    const int r = rows(), c = cols();
    const double* w = raw.values().data();
    std::vector<double> v(c, 0.0);
    for (int it = 0; it < power_iters; ++it) {
        // v = W^T u, normalized
        std::fill(v.begin(), v.end(), 0.0);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) v[j] += w[static_cast<long>(i) * c + j] * u[i];
        double nv = vec_norm(v);
        if (nv < 1e-300) return 0.0;
        for (double& x : v) x /= nv;
        // u = W v, normalized
        std::vector<double> nu(r, 0.0);
        for (int i = 0; i < r; ++i) {
            double s = 0.0;
            for (int j = 0; j < c; ++j) s += w[static_cast<long>(i) * c + j] * v[j];
            nu[i] = s;
        }
        double nn = vec_norm(nu);
        if (nn < 1e-300) return 0.0;
        for (int i = 0; i < r; ++i) u[i] = nu[i] / nn;
    }
    // sigma = u^T W v with v = normalize(W^T u)
    std::fill(v.begin(), v.end(), 0.0);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) v[j] += w[static_cast<long>(i) * c + j] * u[i];
    double nv = vec_norm(v);
    if (nv < 1e-300) return 0.0;
    double sigma = 0.0;
    for (int i = 0; i < r; ++i) {
        double s = 0.0;
        for (int j = 0; j < c; ++j) s += w[static_cast<long>(i) * c + j] * (v[j] / nv);
        sigma += u[i] * s;
    }
    return sigma;
}

Tensor SpectralNorm::effective(int power_iters) {
    const int r = rows(), c = cols();
    double sigma_now = sigma_estimate(power_iters);
    if (sigma_now < 1e-12) {
        // zero (or vanishing) weight: return it scaled by lipschitz/floor,
        // which is exactly zero for a zero matrix, without a gradient path
        // through the degenerate sigma
        return scale(raw, lipschitz / 1e-12);
    }
    // rebuild v from the updated u so sigma = u^T W v is the same estimate;
    // gradient flows through raw both via the numerator and via sigma
    std::vector<double> v(c, 0.0);
    const double* w = raw.values().data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) v[j] += w[static_cast<long>(i) * c + j] * u[i];
    double nv = vec_norm(v);
    for (double& x : v) x /= nv;
    std::vector<double> outer(static_cast<long>(r) * c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) outer[static_cast<long>(i) * c + j] = u[i] * v[j];
    Tensor outer_t = Tensor::from(raw.shape(), std::move(outer));
    Tensor sigma = sum(mul(raw, outer_t));
    return div(scale(raw, lipschitz), sigma);
}

// ---------------------------------------------------------------- Adam

Adam::Adam(std::vector<Tensor> params, AdamSettings settings)
    : params_(std::move(params)), settings_(settings) {
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_)
        for (double g : p.grad())
            if (!std::isfinite(g)) throw OptimizerError("non-finite gradient; step aborted");
    ++t_;
    double bc1 = 1.0 - std::pow(settings_.beta1, t_);
    double bc2 = 1.0 - std::pow(settings_.beta2, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& vals = params_[i].values_mut();
        const auto& g = params_[i].grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < vals.size(); ++j) {
            m[j] = settings_.beta1 * m[j] + (1.0 - settings_.beta1) * g[j];
            v[j] = settings_.beta2 * v[j] + (1.0 - settings_.beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            vals[j] -= settings_.lr * mhat / (std::sqrt(vhat) + settings_.eps);
        }
    }
}

void Adam::zero_grads() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace midgap
