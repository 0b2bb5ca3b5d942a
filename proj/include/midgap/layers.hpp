#pragma once
#include <random>
#include <string>
#include <vector>

#include "midgap/tensor.hpp"

namespace midgap {

// ---- deterministic initializers ----
Tensor xavier_init(Shape shape, int fan_in, int fan_out, std::uint64_t seed);
Tensor uniform_linear_init(Shape shape, std::uint64_t seed);  // mean 0, variance 1e-4
Tensor zero_bias(int n);

// Named parameter registry; iteration order is construction order and is the
// canonical order for optimizers, checkpoints and hashing.
struct ParamMap {
    std::vector<std::pair<std::string, Tensor>> items;
    void add(std::string name, Tensor t) { items.emplace_back(std::move(name), std::move(t)); }
    void merge(const ParamMap& other, const std::string& prefix);
    Tensor find(const std::string& name) const;
};

struct Conv2dLayer {
    Tensor weight;  // Co x Ci x k x k
    Tensor bias;
    int padding = 1;

    Conv2dLayer() = default;
    Conv2dLayer(int in_ch, int out_ch, int k, std::uint64_t seed);
    Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, padding); }
    void collect(ParamMap& pm, const std::string& prefix) const;
};

enum class Resample { None, MaxPool, Upsample };

// A chain of 3x3 conv+ReLU layers followed by an optional resampler; the
// channel chain is first->ch[0]->ch[1]->... with each conv ReLU-activated.
struct ConvBlock {
    std::vector<Conv2dLayer> convs;
    Resample tail = Resample::None;

    ConvBlock() = default;
    ConvBlock(int in_ch, const std::vector<int>& out_chs, Resample tail, std::uint64_t seed);
    Tensor forward(const Tensor& x) const;
    // channel pairs (in, out) per conv, for architecture audits
    std::vector<std::pair<int, int>> channel_chain() const;
    void collect(ParamMap& pm, const std::string& prefix) const;
};

struct ConvLSTMState {
    Tensor hidden;
    Tensor cell;
};

// Convolutional LSTM cell: gates computed by one 3x3 conv over the
// channel-concatenated (input, hidden) pair.
struct ConvLSTMCell {
    Tensor weight;  // 4*Ch x (Ci+Ch) x 3 x 3, gate order i,f,o,g
    Tensor bias;    // 4*Ch
    int in_channels = 0;
    int hidden_channels = 0;

    ConvLSTMCell() = default;
    ConvLSTMCell(int in_ch, int hidden_ch, std::uint64_t seed);
    ConvLSTMState zero_state(int h, int w) const;
    std::pair<Tensor, ConvLSTMState> step(const Tensor& input, const ConvLSTMState& state) const;
    void collect(ParamMap& pm, const std::string& prefix) const;
};

// Weight wrapper that rescales by the power-iteration estimate of the largest
// singular value, so the effective weight has spectral norm ~= lipschitz.
struct SpectralNorm {
    Tensor raw;
    std::vector<double> u;  // persistent left singular vector estimate, unit norm
    double lipschitz = 3.0;

    SpectralNorm() = default;
    SpectralNorm(Tensor raw_weight, double lipschitz);
    // Runs power_iters update steps on u (outside the tape), then returns
    // lipschitz * raw / sigma_hat with gradient flowing through raw.
    Tensor effective(int power_iters);
    double sigma_estimate(int power_iters);  // no tape involvement

private:
    int rows() const { return raw.shape()[0]; }
    int cols() const { return static_cast<int>(raw.size()) / raw.shape()[0]; }
};

struct AdamSettings {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Parameters are registered once; step() reads
// their gradient stores and updates values in place.
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Tensor> params, AdamSettings settings);
    void step();
    void zero_grads();
    long step_count() const { return t_; }

    // checkpoint access
    std::vector<Tensor>& params() { return params_; }
    std::vector<std::vector<double>>& moment1() { return m_; }
    std::vector<std::vector<double>>& moment2() { return v_; }
    void set_step_count(long t) { t_ = t; }
    const AdamSettings& settings() const { return settings_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
    AdamSettings settings_;
};

}  // namespace midgap
