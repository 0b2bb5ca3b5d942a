#pragma once
#include <optional>
#include <vector>

#include "midgap/data.hpp"
#include "midgap/layers.hpp"
#include "midgap/tensor.hpp"

namespace midgap {

// Sum over timesteps of the squared Euclidean frame distance.
Tensor l2_loss(const FrameSequence& pred, const FrameSequence& truth);

// Absolute-gradient difference of one frame pair; indices missing a neighbor
// contribute zero.
Tensor gradient_difference(const Tensor& pred, const Tensor& truth);

// Sum of gradient_difference over timesteps.
Tensor gdl_loss(const FrameSequence& pred, const FrameSequence& truth);

// l2 + gdl
Tensor image_loss(const FrameSequence& pred, const FrameSequence& truth);

struct LossReport {
    double l2 = 0;            // final prediction
    double gdl = 0;           // final prediction
    double img_forward = 0;
    double img_backward = 0;
    double img_final = 0;
    double gan = 0;
    double total_g = 0;
    double total_d = 0;
};

struct GeneratorLoss {
    Tensor total;  // alpha * (sum of image terms) + beta * gan
    Tensor gan;    // -log d_fake (clamped below at 1e-8)
    LossReport report;
};

// Structured generator loss supervising the forward, backward and final
// predictions simultaneously. Absent intermediate predictions (single-
// direction variants) contribute nothing.
GeneratorLoss generator_loss(const std::optional<FrameSequence>& pred_forward,
                             const std::optional<FrameSequence>& pred_backward,
                             const FrameSequence& pred_final, const FrameSequence& truth,
                             const Tensor& d_out_fake, double alpha, double beta);

// -log d_real - log(1 - d_fake), arguments clamped below at 1e-8
Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake);

struct DiscriminatorSettings {
    int frame_channels = 1;
    int total_frames = 9;  // p + m + f, stacked along channels
    int height = 32;
    int width = 32;
    std::vector<int> channels = {12, 24, 48, 48};
    double lipschitz = 3.0;
};

// Binary classifier over a channel-stacked [P, M, F] clip: strided conv
// stages (3x3 conv + 2x subsample + ReLU) and a final linear layer, every
// weight behind spectral normalization.
class Discriminator {
public:
    Discriminator() = default;
    Discriminator(const DiscriminatorSettings& s, std::uint64_t seed);

    Tensor forward(const FrameSequence& preceding, const FrameSequence& middle,
                   const FrameSequence& following, int power_iters);

    void collect(ParamMap& pm, const std::string& prefix) const;
    std::vector<SpectralNorm>& spectral_layers() { return sn_; }
    std::vector<std::vector<double>*> power_iteration_state();
    const DiscriminatorSettings& settings() const { return settings_; }

private:
    DiscriminatorSettings settings_;
    std::vector<SpectralNorm> sn_;  // conv weights then the linear weight
    std::vector<Tensor> biases_;    // matching biases
    int flat_features_ = 0;
};

}  // namespace midgap
